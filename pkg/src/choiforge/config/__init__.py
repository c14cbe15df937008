from .config_manager import ConfigManager, ConfigSchema, Environment
from .logging_setup import setup_logging

__all__ = [
    'ConfigManager',
    'ConfigSchema',
    'Environment',
    'setup_logging',
]
