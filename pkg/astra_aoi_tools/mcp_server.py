"""
ASTRA AoI Tools - MCP Server

Exposes the LangChain tools as an MCP (Model Context Protocol) server so agents
and other MCP clients can calibrate tables, solve equilibria and evaluate
baselines. The experiment configuration comes from --config.
"""

import argparse
import logging

from mcp.server import FastMCP

# Import the LangChain tool adapter
from langchain_tool_to_mcp_adapter import add_langchain_tool_to_server

from astra_aoi_tools import get_langchain_tools
from astra_aoi_tools.tools import config_manager

logger = logging.getLogger(__name__)

# Initialize the MCP server
server = FastMCP('astra-aoi-mcp')


def register_all_langchain_tools():
    """Register all LangChain tools with the MCP server."""
    for tool in get_langchain_tools():
        add_langchain_tool_to_server(server, tool)


# Register all LangChain tools when this module is imported
register_all_langchain_tools()


def run_server(port=8000, transport='stdio'):
    """
    Run the MCP server.

    Args:
        port (int): Port for the network transports
        transport (str): 'stdio', 'sse' or 'streamable-http'
    """
    server.settings.port = port
    logger.info("Starting astra-aoi-mcp (%s transport)", transport)
    server.run(transport=transport)


def main():
    """Command-line entrypoint for running the server."""
    parser = argparse.ArgumentParser(description='Run the ASTRA AoI MCP server')
    parser.add_argument('--port', type=int, default=8000, help='Port to run the server on')
    parser.add_argument('--transport', default='stdio', choices=['stdio', 'sse', 'streamable-http'],
                        help='MCP transport')
    parser.add_argument('--config', type=str, help='JSON experiment config used by every tool call')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    args = parser.parse_args()
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.config:
        config_manager.set_config_path(args.config)
        config_manager.get_config()

    run_server(port=args.port, transport=args.transport)


if __name__ == "__main__":
    main()
