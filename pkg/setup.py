from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Core dependencies required for the main functionality
core_requirements = [
    "numpy>=1.24.0",
    "langchain>=0.3.20,<0.4.0",
    "langchain-core>=0.3.0,<1.0.0",
    "mcp>=0.1.0,<2.0.0",
    "pydantic>=2.0.0",
    "tenacity>=8.2.2",
    "langchain-tool-to-mcp-adapter>=0.1.4",
]

setup(
    name="astra-aoi-tools",
    version="0.3.0",
    author="Dov Stern",
    author_email="dstern215@gmail.com",
    description="AoI-aware random access for asynchronous multi-pool uplinks: calibration, "
                "mean-field equilibria, baselines and closed-loop validation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=core_requirements,
    extras_require={
        "examples": ["langgraph"],
        "dev": [
            "pytest>=7.0.0",
            "pytest-mock>=3.10.0",
            "scipy>=1.10.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "astra-aoi=astra_aoi_tools.cli:main",
            "astra-aoi-mcp=astra_aoi_tools.mcp_server:main",
        ],
    },
)
