import pytest
from pydantic import ValidationError

from app import crud
from app.config import Settings
from app.registry import Registry
from app.seed import DEFAULT_ADAPTERS, PREFIX, seed_entities


def make_settings(tmp_path, **overrides):
    overrides.setdefault("SNAPSHOT_PATH", str(tmp_path / "snapshot.json"))
    return Settings(_env_file=None, **overrides)


# ============== Settings ==============

def test_defaults(tmp_path):
    settings = make_settings(tmp_path)
    assert settings.PID_PREFIX == PREFIX
    assert settings.TEMPLATE_MARKER == "{{input}}"
    assert settings.ADAPTERS == DEFAULT_ADAPTERS
    assert settings.DISABLED_RULES == []
    assert settings.DATABASE_URL is None


def test_environment_and_overrides(tmp_path, monkeypatch):
    """Test that keyword arguments take precedence over the environment"""
    monkeypatch.setenv("PORT", "9000")
    monkeypatch.setenv("PID_PREFIX", "20.500")
    settings = make_settings(tmp_path, PID_PREFIX="21.T99")
    assert settings.PORT == 9000
    assert settings.PID_PREFIX == "21.T99"


def test_env_file(tmp_path):
    env_file = tmp_path / "registry.env"
    env_file.write_text('TEMPLATE_MARKER=<v>\nDISABLED_RULES=["InheritanceConflict"]\n', encoding="utf-8")
    settings = Settings(_env_file=str(env_file), SNAPSHOT_PATH=str(tmp_path / "snapshot.json"))
    assert settings.TEMPLATE_MARKER == "<v>"
    assert settings.DISABLED_RULES == ["InheritanceConflict"]


@pytest.mark.parametrize("overrides", [
    {"TEMPLATE_MARKER": ""},
    {"PID_PREFIX": ""},
    {"PID_PREFIX": "21.T11148/x"},
    {"PID_PREFIX": "21 T"},
    {"DISABLED_RULES": ["NoSuchRule"]},
    {"MAX_WORKERS": 0},
    {"MAX_RECURSION_DEPTH": 0},
])
def test_invalid_settings(tmp_path, overrides):
    with pytest.raises(ValidationError):
        make_settings(tmp_path, **overrides)


def test_snapshot_directory_must_exist(tmp_path):
    with pytest.raises(ValidationError) as exc_info:
        make_settings(tmp_path, SNAPSHOT_PATH=str(tmp_path / "missing" / "snapshot.json"))
    assert "does not exist or is not writable" in str(exc_info.value)


def test_adapter_declarations(tmp_path):
    settings = make_settings(tmp_path, ADAPTERS=[
        {"adapterPid": "21.T1/tpl", "implementsInterfacePid": "21.T1/ti", "builtin": "Template"},
    ])
    assert settings.ADAPTERS[0].builtin == "Template"


# ============== Registry wiring ==============

def test_registry_from_settings(tmp_path):
    registry = Registry.from_settings(make_settings(
        tmp_path, DISABLED_RULES=["Acyclicity"], MAX_RECURSION_DEPTH=3, MAX_WORKERS=2))
    assert "Acyclicity" not in registry.rules.ids
    assert len(registry.adapters) == len(DEFAULT_ADAPTERS)
    assert registry.session_factory is None
    executor = registry.executor()
    assert (executor.max_depth, executor.max_workers) == (3, 2)


def test_registry_loads_snapshot(tmp_path):
    settings = make_settings(tmp_path)
    registry = Registry.from_settings(settings)
    assert registry.load() == "empty"
    crud.load_seed(registry.store, registry.rules)
    registry.save()

    restored = Registry.from_settings(settings)
    assert restored.load() == "snapshot"
    assert len(restored.store) == len(seed_entities())


def test_registry_prefers_database(tmp_path):
    settings = make_settings(tmp_path, DATABASE_URL=f"sqlite:///{tmp_path / 'registry.db'}")
    registry = Registry.from_settings(settings)
    assert registry.load() == "empty"
    db = registry.open_session()
    try:
        crud.load_seed(registry.store, registry.rules, db)
    finally:
        db.close()

    restored = Registry.from_settings(settings)
    assert restored.load() == "database"
    assert len(restored.store) == len(seed_entities())
