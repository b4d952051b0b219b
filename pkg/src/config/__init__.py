from .defaults import (
    APP_NAME,
    APP_VERSION,
    CONFIG_FILENAME,
    DEFAULT_ELL,
    DEFAULT_GRID_H,
    get_default_config,
)

from .keys import SettingsKeys, resolve_key

from .settings import (
    PipelineSettings,
    SettingsFactory,
)

__all__ = [
    "APP_NAME",
    "APP_VERSION",
    "CONFIG_FILENAME",
    "DEFAULT_ELL",
    "DEFAULT_GRID_H",
    "get_default_config",
    "SettingsKeys",
    "resolve_key",
    "PipelineSettings",
    "SettingsFactory",
]
