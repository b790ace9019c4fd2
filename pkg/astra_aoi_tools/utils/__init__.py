"""
Utilities package for ASTRA AoI Tools.
Contains data models, configuration loading, helper functions and errors.
"""

# Import data models
from .models import (
    SystemConfig,
    Action,
    IDLE,
    PopulationConfig,
    FixedPointConfig,
    CalibrationSettings,
    SweepSettings,
    ValidationSettings,
    ExperimentConfig
)

# Import configuration loading
from .config import (
    load_config,
    apply_overrides
)

# Import helper functions
from .helpers import (
    action_set,
    parse_action,
    config_digest,
    spawn_rng,
    file_header,
    write_commented_csv,
    read_commented_csv,
    TOOL_VERSION
)

# Import errors
from .errors import (
    AstraError,
    InvalidActionError,
    UnknownActionError,
    TableSchemaError,
    CalibrationDigestWarning,
    ConvergenceError,
    UndefinedThresholdError,
    LinearProgramError,
    InfeasibleBudgetError,
    ConfigError
)

__all__ = [
    # Data models
    'SystemConfig',
    'Action',
    'IDLE',
    'PopulationConfig',
    'FixedPointConfig',
    'CalibrationSettings',
    'SweepSettings',
    'ValidationSettings',
    'ExperimentConfig',

    # Configuration
    'load_config',
    'apply_overrides',

    # Helper functions
    'action_set',
    'parse_action',
    'config_digest',
    'spawn_rng',
    'file_header',
    'write_commented_csv',
    'read_commented_csv',
    'TOOL_VERSION',

    # Errors
    'AstraError',
    'InvalidActionError',
    'UnknownActionError',
    'TableSchemaError',
    'CalibrationDigestWarning',
    'ConvergenceError',
    'UndefinedThresholdError',
    'LinearProgramError',
    'InfeasibleBudgetError',
    'ConfigError'
]
