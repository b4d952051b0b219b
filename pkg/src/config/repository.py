import logging
from pathlib import Path
from typing import Any, Dict, List, Protocol

import yaml

from .keys import resolve_key
from ..core.exceptions import ConfigFileError

logger = logging.getLogger(__name__)


class SettingsRepository(Protocol):
    def load(self) -> Dict[str, Any]:
        ...

    def exists(self) -> bool:
        ...


class FileSettingsRepository(SettingsRepository, Protocol):
    path: Path

    def save(self, data: Dict[str, Any]) -> None:
        ...


class YamlSettingsRepository:
    def __init__(self, config_path: Path):
        self._config_path = Path(config_path)

    @property
    def path(self) -> Path:
        return self._config_path

    def load(self) -> Dict[str, Any]:
        if not self._config_path.exists():
            return {}

        try:
            with open(self._config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f)

            if loaded is None:
                return {}

            if not isinstance(loaded, dict):
                raise ConfigFileError(
                    f"Invalid YAML structure: expected dict, got {type(loaded).__name__}"
                )

            return loaded

        except yaml.YAMLError as e:
            raise ConfigFileError(f"Invalid YAML in config file: {e}")
        except IOError as e:
            raise ConfigFileError(f"Cannot read config file: {e}")

    def save(self, data: Dict[str, Any]) -> None:
        try:
            self._config_path.parent.mkdir(parents=True, exist_ok=True)

            with open(self._config_path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(
                    data,
                    f,
                    default_flow_style=False,
                    sort_keys=False,
                    allow_unicode=True
                )

            logger.debug("Settings saved to %s", self._config_path)

        except IOError as e:
            logger.error("Failed to save settings: %s", e)
            raise ConfigFileError(f"Cannot write config file: {e}")

    def exists(self) -> bool:
        return self._config_path.exists() and self._config_path.is_file()


class KeyValueSettingsRepository:
    """Plain-text ``key=value`` files, one key per line, ``#`` comments.

    Values are parsed with the YAML scalar rules (so ``0.6``, ``true`` and
    ``null`` come back typed); a value containing a comma becomes a list.
    Keys may be dotted names or the bare aliases from ``keys.KEY_ALIASES``.
    """

    def __init__(self, config_path: Path):
        self._config_path = Path(config_path)

    @property
    def path(self) -> Path:
        return self._config_path

    def load(self) -> Dict[str, Any]:
        if not self._config_path.exists():
            return {}

        try:
            text = self._config_path.read_text(encoding='utf-8')
        except IOError as e:
            raise ConfigFileError(f"Cannot read config file: {e}")

        return self.parse(text)

    @classmethod
    def parse(cls, text: str) -> Dict[str, Any]:
        result: Dict[str, Any] = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigFileError(f"Line {line_no}: expected key=value, got {raw!r}")

            key, value = line.split('=', 1)
            key = resolve_key(key)
            if not key:
                raise ConfigFileError(f"Line {line_no}: empty key")

            parts = key.split('.')
            section = result
            for part in parts[:-1]:
                section = section.setdefault(part, {})
                if not isinstance(section, dict):
                    raise ConfigFileError(f"Line {line_no}: key {key} clashes with a scalar")
            section[parts[-1]] = cls._parse_value(value.strip(), line_no)

        return result

    @staticmethod
    def _parse_value(value: str, line_no: int) -> Any:
        value = value.strip()
        if value.startswith('[') and value.endswith(']'):
            value = value[1:-1]
            if not value.strip():
                return []
        try:
            if ',' in value:
                return [yaml.safe_load(item.strip()) for item in value.split(',') if item.strip()]
            return yaml.safe_load(value) if value else None
        except yaml.YAMLError as e:
            raise ConfigFileError(f"Line {line_no}: cannot parse value {value!r}: {e}")

    @staticmethod
    def _scalar(value: Any) -> str:
        # YAML spelling, so 1e-08 reads back as a float
        return yaml.safe_dump(value).split("\n", 1)[0]

    @staticmethod
    def format(data: Dict[str, Any], prefix: str = "") -> List[str]:
        lines: List[str] = []
        for key, value in data.items():
            full_key = f"{prefix}{key}"
            if isinstance(value, dict):
                lines.extend(KeyValueSettingsRepository.format(value, f"{full_key}."))
            elif isinstance(value, (list, tuple)):
                items = ", ".join(KeyValueSettingsRepository._scalar(v) for v in value)
                lines.append(f"{full_key}=[{items}]")
            else:
                lines.append(f"{full_key}={KeyValueSettingsRepository._scalar(value)}")
        return lines

    def save(self, data: Dict[str, Any]) -> None:
        try:
            self._config_path.parent.mkdir(parents=True, exist_ok=True)
            self._config_path.write_text("\n".join(self.format(data)) + "\n", encoding='utf-8')
            logger.debug("Settings saved to %s", self._config_path)
        except IOError as e:
            logger.error("Failed to save settings: %s", e)
            raise ConfigFileError(f"Cannot write config file: {e}")

    def exists(self) -> bool:
        return self._config_path.exists() and self._config_path.is_file()


class InMemorySettingsRepository:
    def __init__(self, initial_data: Dict[str, Any] | None = None):
        self._data: Dict[str, Any] = initial_data.copy() if initial_data else {}
        self._exists = bool(initial_data)

    def load(self) -> Dict[str, Any]:
        return self._data.copy()

    def exists(self) -> bool:
        return self._exists


def repository_for(path: Path) -> FileSettingsRepository:
    path = Path(path)
    if path.suffix.lower() in ('.yaml', '.yml'):
        return YamlSettingsRepository(path)
    return KeyValueSettingsRepository(path)
