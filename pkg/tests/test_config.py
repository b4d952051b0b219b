from pathlib import Path

import pytest

from src.config.keys import SettingsKeys, resolve_key
from src.config.repository import KeyValueSettingsRepository, YamlSettingsRepository, repository_for
from src.config.settings import SettingsFactory
from src.core.exceptions import ConfigFileError, InvalidConfigError
from src.core.pipeline import configured_handles
from src.utils.validators import validate_copies_x, validate_grid_h, validate_window

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_defaults():
    settings = SettingsFactory.create_for_testing()
    assert settings.get(SettingsKeys.Strip.ELL) == 0.6
    assert settings.get("h") == 1.0 / 32.0
    assert settings.get(SettingsKeys.Handles.P_LIST) == [0]
    assert settings.get(SettingsKeys.Mesh.FORMAT) == "obj"


def test_alias_resolution():
    assert resolve_key("h") == SettingsKeys.Strip.GRID_H
    assert resolve_key(" mesh_format ") == SettingsKeys.Mesh.FORMAT
    assert resolve_key("strip.ell") == "strip.ell"


def test_key_value_parse():
    parsed = KeyValueSettingsRepository.parse(
        "# comment\n"
        "ell=0.5\n"
        "window=-3,4\n"
        "p_list=0, 5\n"
        "mesh_format=ply  # trailing\n"
        "periods.eta0=calibrate\n"
    )
    assert parsed == {
        "strip": {"ell": 0.5},
        "handles": {"window": [-3, 4], "p_list": [0, 5]},
        "mesh": {"format": "ply"},
        "periods": {"eta0": "calibrate"},
    }


def test_key_value_line_without_equals():
    with pytest.raises(ConfigFileError):
        KeyValueSettingsRepository.parse("ell 0.5\n")


def test_repository_by_suffix(tmp_path):
    assert isinstance(repository_for(tmp_path / "a.yaml"), YamlSettingsRepository)
    assert isinstance(repository_for(tmp_path / "a.yml"), YamlSettingsRepository)
    assert isinstance(repository_for(tmp_path / "a.conf"), KeyValueSettingsRepository)


def test_invalid_value_names_key():
    with pytest.raises(InvalidConfigError) as info:
        SettingsFactory.create_for_testing({"strip": {"ell": 1.5}})
    assert info.value.key == "strip.ell"


def test_unknown_key_names_key():
    with pytest.raises(InvalidConfigError) as info:
        SettingsFactory.create_for_testing({"strip": {"bogus": 1}})
    assert info.value.key == "strip.bogus"
    assert "strip.bogus" in str(info.value)


def test_empty_p_list_from_file(write_conf):
    path = write_conf("ell=0.6\nh=0.0625\np_list=\n")
    settings = SettingsFactory.create(str(path))
    assert settings.get(SettingsKeys.Handles.P_LIST) == []
    assert configured_handles(settings) == ()


def test_yaml_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("strip:\n  ell: 0.5\nhandles:\n  p_list: [-3, 0, 3]\n", encoding="utf-8")
    settings = SettingsFactory.create(str(path))
    assert settings.get(SettingsKeys.Strip.ELL) == 0.5
    assert configured_handles(settings) == (-3, 0, 3)


def test_yaml_must_be_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigFileError):
        SettingsFactory.create(str(path))


def test_set_validates():
    settings = SettingsFactory.create_for_testing()
    settings.set("copies_x", 0)
    assert settings.get(SettingsKeys.Mesh.COPIES_X) == 0
    with pytest.raises(InvalidConfigError):
        settings.set("copies_x", 2)
    with pytest.raises(InvalidConfigError):
        settings.set("no.such.key", 1)


def test_threads_env_caps(monkeypatch):
    monkeypatch.setenv("THREADS", "1")
    settings = SettingsFactory.create_for_testing({"output": {"threads": 4}})
    assert settings.get(SettingsKeys.Output.THREADS) == 1


def test_shipped_configs_load():
    beatty = SettingsFactory.create(str(CONFIGS / "beatty_sqrt2.conf"))
    assert beatty.get(SettingsKeys.Periods.ETA0) == "calibrate"
    assert configured_handles(beatty) == (-3, -2, 0, 1, 2)

    layer = SettingsFactory.create(str(CONFIGS / "karcher_layer.conf"))
    assert configured_handles(layer) == ()


@pytest.mark.parametrize("value, ok", [(0, True), (1, True), (2, False), (True, False), (-1, False)])
def test_validate_copies_x(value, ok):
    assert validate_copies_x(value)[0] is ok


@pytest.mark.parametrize("value, ok", [(1 / 32, True), (0.25, True), (0.03, False), (0.0, False), (1.0, False)])
def test_validate_grid_h(value, ok):
    assert validate_grid_h(value)[0] is ok


@pytest.mark.parametrize("value, ok", [(None, True), ([-4, 4], True), ([-3, 4], False), ([4, -4], False)])
def test_validate_window(value, ok):
    assert validate_window(value)[0] is ok


@pytest.mark.parametrize("name", ["resolved.conf", "resolved.yaml"])
def test_resolved_settings_read_back(tmp_path, name):
    settings = SettingsFactory.create_for_testing({
        "strip": {"ell": 0.5, "grid_h": 0.0625},
        "handles": {"p_list": [-3, 0, 3]},
        "solver": {"tol_pde": 1e-8},
    })
    path = settings.save_resolved(tmp_path / name)
    loaded = SettingsFactory.create(str(path))
    assert loaded.as_dict() == settings.as_dict()
    assert loaded.get(SettingsKeys.Solver.TOL_PDE) == 1e-8
    assert loaded.get(SettingsKeys.Strip.X_WINDOW) is None


def test_resolved_single_handle_list(tmp_path):
    settings = SettingsFactory.create_for_testing({"handles": {"p_list": [0]}})
    loaded = SettingsFactory.create(str(settings.save_resolved(tmp_path / "one.conf")))
    assert loaded.get(SettingsKeys.Handles.P_LIST) == [0]
