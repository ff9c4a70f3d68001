"""Environment settings and run configuration."""
from .run_config import (
    DataConfig,
    RunConfig,
    available_presets,
    dump_run_config,
    get_preset,
    load_run_config,
    parse_flat,
    read_config_file,
    validate_run_config,
)
from .settings import configure_logging, get_int_setting, get_setting, load_env

__all__ = [
    "DataConfig",
    "RunConfig",
    "available_presets",
    "configure_logging",
    "dump_run_config",
    "get_int_setting",
    "get_preset",
    "get_setting",
    "load_env",
    "load_run_config",
    "parse_flat",
    "read_config_file",
    "validate_run_config",
]
