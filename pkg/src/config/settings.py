import copy
import logging
import os
from typing import Any, Optional, Dict
from pathlib import Path

from .defaults import get_default_config, CONFIG_FILENAME, THREADS_ENV_VAR
from .keys import SettingsKeys, resolve_key
from .settings_validator import SettingsValidator, ValidationResult
from .repository import SettingsRepository, InMemorySettingsRepository, repository_for
from ..core.exceptions import InvalidConfigError

logger = logging.getLogger(__name__)


class PipelineSettings:
    def __init__(
        self,
        config_path: Optional[str] = None,
        repository: Optional[SettingsRepository] = None
    ):
        if repository is not None:
            self._repository = repository
        else:
            path = Path(config_path) if config_path else Path.cwd() / CONFIG_FILENAME
            self._repository = repository_for(path)

        self._config: Dict[str, Any] = get_default_config()

    @property
    def config_path(self) -> Path:
        path = getattr(self._repository, "path", None)
        if path is not None:
            return Path(path)
        return Path(f"<{type(self._repository).__name__}>")

    @property
    def repository(self) -> SettingsRepository:
        return self._repository

    def load(self) -> bool:
        if not self._repository.exists():
            return False

        loaded = self._repository.load() or {}

        unknown = SettingsValidator.unknown_keys(loaded)
        if unknown:
            raise InvalidConfigError(f"Unknown config key: {unknown[0]}", key=unknown[0])

        merged = self._deep_merge(get_default_config(), loaded)
        self._normalize(merged)

        result = SettingsValidator.validate_config(merged)
        if not result:
            raise InvalidConfigError(
                f"Invalid config value: {result.errors[0]}", key=result.keys[0]
            )
        self._config = merged

        self._apply_environment()
        return True

    def save_resolved(self, path: Path) -> Path:
        """Write the effective settings, defaults and environment applied, in the format of path."""
        path = Path(path)
        repository_for(path).save(copy.deepcopy(self._config))
        return path

    def get(self, key: str, default: Any = None) -> Any:
        keys = resolve_key(key).split('.')
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any, validate: bool = True) -> None:
        key = resolve_key(key)
        if validate:
            if not SettingsValidator.is_known_key(key):
                raise InvalidConfigError(f"Unknown config key: {key}", key=key)
            is_valid, error = SettingsValidator.validate_setting(key, value)
            if not is_valid:
                raise InvalidConfigError(f"Invalid value for {key}: {error}", key=key)

        keys = key.split('.')
        config = self._config

        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value

    def validate(self) -> ValidationResult:
        return SettingsValidator.validate_config(copy.deepcopy(self._config))

    def get_section(self, section: str) -> Dict[str, Any]:
        return copy.deepcopy(self._config.get(section, {}))

    def as_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._config)

    @staticmethod
    def _normalize(config: Dict[str, Any]) -> None:
        # single integers in list-valued keys come from one-element key=value lines
        handles = config.get("handles", {})
        p_list = handles.get("p_list")
        if isinstance(p_list, int) and not isinstance(p_list, bool):
            handles["p_list"] = [p_list]
        elif p_list is None:
            handles["p_list"] = []
        for section, key in (("strip", "x_window"), ("handles", "window")):
            value = config.get(section, {}).get(key)
            if isinstance(value, tuple):
                config[section][key] = list(value)

    def _apply_environment(self) -> None:
        raw = os.environ.get(THREADS_ENV_VAR)
        if not raw:
            return
        try:
            cap = int(raw)
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
            return
        if cap >= 1:
            current = self.get(SettingsKeys.Output.THREADS)
            self._config["output"]["threads"] = min(current, cap) if current else cap

    @staticmethod
    def _deep_merge(base: Dict, override: Dict) -> Dict:
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = PipelineSettings._deep_merge(result[key], value)
            else:
                result[key] = value

        return result

    def __getitem__(self, key: str) -> Any:
        return self.get(key)

    def __setitem__(self, key: str, value: Any) -> None:
        self.set(key, value)


class SettingsFactory:
    @staticmethod
    def create(config_path: Optional[str] = None) -> PipelineSettings:
        settings = PipelineSettings(config_path=config_path)
        settings.load()
        return settings

    @staticmethod
    def create_for_testing(initial_data: Optional[Dict[str, Any]] = None) -> PipelineSettings:
        settings = PipelineSettings(repository=InMemorySettingsRepository(initial_data))
        settings.load()
        return settings
