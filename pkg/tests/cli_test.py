import json

import pytest
from click.testing import CliRunner

from app.cli import EXIT_INVALID, EXIT_USAGE, main
from app.seed import (
    CONTACT,
    DOWNLOAD_OPERATION,
    EMAIL_ADDRESS,
    HELMHOLTZ_KIP,
    ORCID_EMAIL_OPERATION,
    ORCID_URL,
    STRING,
    URL,
    seed_entities,
)
from app.serialization import serialize_entity
from tests.builders import atomic, attribute, profile

ORCID_VALUE = "https://orcid.org/0000-0002-1825-0097"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def snapshot(tmp_path):
    return str(tmp_path / "registry.json")


@pytest.fixture
def invoke(runner, snapshot):
    def run(*args, **kwargs):
        return runner.invoke(main, ["--store", snapshot, *args], **kwargs)
    return run


@pytest.fixture
def seeded_store(invoke):
    result = invoke("seed")
    assert result.exit_code == 0, result.output
    return invoke


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ============== Seed and queries ==============

def test_seed_is_idempotent(invoke):
    first = invoke("seed")
    assert first.exit_code == 0
    assert f"Seeded {len(seed_entities())} entities" in first.output
    second = invoke("seed")
    assert second.exit_code == 0
    assert f"Seeded 0 entities ({len(seed_entities())} in store)" in second.output


def test_ops_for_attribute(seeded_store):
    result = seeded_store("ops", CONTACT)
    assert result.exit_code == 0
    assert json.loads(result.output) == [ORCID_EMAIL_OPERATION]


def test_ops_for_datatype(seeded_store):
    result = seeded_store("ops", ORCID_URL)
    assert json.loads(result.output) == [ORCID_EMAIL_OPERATION]


def test_ops_for_record(seeded_store, tmp_path):
    record = write(tmp_path, "record.json", json.dumps({CONTACT: ORCID_VALUE}))
    result = seeded_store("ops", "--record", record)
    assert result.exit_code == 0
    assert json.loads(result.output)["AttributeTyping"] == [ORCID_EMAIL_OPERATION]


def test_ops_needs_exactly_one_target(seeded_store, tmp_path):
    assert seeded_store("ops").exit_code == EXIT_USAGE
    record = write(tmp_path, "record.json", "{}")
    assert seeded_store("ops", CONTACT, "--record", record).exit_code == EXIT_USAGE


def test_inheritance(seeded_store):
    result = seeded_store("inheritance", ORCID_URL)
    assert json.loads(result.output) == [ORCID_URL, URL, STRING]


def test_missing_pid(seeded_store):
    result = seeded_store("inheritance", "21.T11148/missing")
    assert result.exit_code == EXIT_USAGE
    assert "Error: Entity '21.T11148/missing' not found" in result.output


# ============== Validation ==============

def test_validate_cyclic_profile_file(seeded_store, tmp_path):
    path = write(tmp_path, "cyclic-profile.json", serialize_entity(profile("p", parents=["p"])))
    result = seeded_store("validate", path)
    assert result.exit_code == EXIT_INVALID
    assert "Circular inheritance detected" in result.output


def test_validate_file_without_storing(seeded_store, tmp_path):
    path = write(tmp_path, "types.jsonl", "\n".join([serialize_entity(atomic("s")),
                                                    serialize_entity(attribute("a", "s"))]))
    result = seeded_store("validate", path)
    assert result.exit_code == 0
    assert result.output.strip().endswith("valid")
    assert seeded_store("export", "test/s").exit_code == EXIT_USAGE


def test_validate_stored_entity(seeded_store):
    result = seeded_store("validate", HELMHOLTZ_KIP)
    assert result.exit_code == 0


def test_check_record(seeded_store, tmp_path):
    valid = write(tmp_path, "valid.json", json.dumps({
        "21.T11148/digitalObjectLocation": "https://example.org/data/42",
        "21.T11148/dateCreated": "2024-05-01",
        CONTACT: ORCID_VALUE,
        "21.T11148/checksum": {"21.T11148/hash": "d41d8cd98f00b204e9800998ecf8427e", "21.T11148/algorithm": "md5"},
    }))
    assert seeded_store("check-record", valid, "--profile", HELMHOLTZ_KIP).exit_code == 0
    invalid = write(tmp_path, "invalid.json", json.dumps({CONTACT: "nobody"}))
    result = seeded_store("check-record", invalid, "--profile", HELMHOLTZ_KIP)
    assert result.exit_code == EXIT_INVALID
    assert "Missing mandatory attribute" in result.output


def test_check_record_rejects_malformed_record(seeded_store, tmp_path):
    path = write(tmp_path, "record.json", json.dumps({"no pid": 1}))
    assert seeded_store("check-record", path, "--profile", HELMHOLTZ_KIP).exit_code == EXIT_USAGE


# ============== Import and export ==============

def test_export_import_round_trip(seeded_store, runner, tmp_path):
    exported = seeded_store("export", "--all")
    assert exported.exit_code == 0
    other = str(tmp_path / "other.json")
    imported = runner.invoke(main, ["--store", other, "import", "-"], input=exported.output)
    assert imported.exit_code == 0, imported.output
    assert f"Imported {len(seed_entities())} entities" in imported.output
    again = runner.invoke(main, ["--store", other, "export", "--all"])
    assert again.output == exported.output


def test_export_one(seeded_store):
    result = seeded_store("export", CONTACT)
    assert json.loads(result.output)["pid"] == CONTACT


def test_export_needs_exactly_one_target(seeded_store):
    assert seeded_store("export").exit_code == EXIT_USAGE
    assert seeded_store("export", CONTACT, "--all").exit_code == EXIT_USAGE


def test_import_json_array(invoke, tmp_path):
    path = write(tmp_path, "types.json", "[" + ",".join([serialize_entity(atomic("s")),
                                                        serialize_entity(attribute("a", "s"))]) + "]")
    result = invoke("import", path)
    assert result.exit_code == 0
    assert "Imported 2 entities" in result.output


def test_invalid_import_stores_nothing(invoke, tmp_path):
    path = write(tmp_path, "types.jsonl", "\n".join([serialize_entity(atomic("s")),
                                                    serialize_entity(attribute("a", "missing"))]))
    result = invoke("import", path)
    assert result.exit_code == EXIT_INVALID
    assert "does not exist" in result.output
    assert invoke("export", "test/s").exit_code == EXIT_USAGE


def test_import_reports_bad_line(invoke, tmp_path):
    path = write(tmp_path, "types.jsonl", serialize_entity(atomic("s")) + "\n{broken\n")
    result = invoke("import", path)
    assert result.exit_code == EXIT_USAGE
    assert result.output.startswith("Error:")


# ============== Operations ==============

def test_plan(seeded_store):
    result = seeded_store("plan", ORCID_EMAIL_OPERATION)
    assert result.exit_code == 0
    assert json.loads(result.output)["stages"] == [[0], [1]]


def test_exec(seeded_store):
    result = seeded_store("exec", ORCID_EMAIL_OPERATION, "--input", ORCID_VALUE)
    assert result.exit_code == 0
    assert json.loads(result.output) == {EMAIL_ADDRESS: "josiah.carberry@example.org"}


def test_exec_without_adapter(seeded_store):
    result = seeded_store("exec", DOWNLOAD_OPERATION, "--input", "{}")
    assert result.exit_code == EXIT_INVALID
    assert "No usable adapter" in result.output


# ============== Configuration ==============

def test_invalid_prefix(runner, snapshot):
    result = runner.invoke(main, ["--store", snapshot, "--prefix", "a/b", "seed"])
    assert result.exit_code == EXIT_USAGE


def test_config_file(runner, snapshot, tmp_path):
    config = write(tmp_path, "registry.env", "DISABLED_RULES=[\"NoSuchRule\"]\n")
    result = runner.invoke(main, ["--store", snapshot, "--config", config, "seed"])
    assert result.exit_code == EXIT_USAGE
    assert "NoSuchRule" in result.output
