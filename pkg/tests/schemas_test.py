import json

import pytest
from pydantic import ValidationError

from app.exceptions import DocumentParseError, EntityInvariantError, SerializationError
from app.schemas import (
    AdministrativeMetadata,
    Attribute,
    AttributeMapping,
    CardinalityKind,
    CardinalityRange,
    InformationRecord,
    OperationStep,
    PrimitiveKind,
    Restrictions,
    TechnologyInterface,
    TypeProfile,
)
from app.seed import seed_entities
from app.serialization import deserialize_entity, load_entity, serialize_entity
from tests.builders import FIXED, atomic, attribute, meta, pid
from tests.generators import EntityGenerator


# ============== Cardinality ==============

@pytest.mark.parametrize("lower, upper, kind", [
    (0, 1, CardinalityKind.OPTIONAL_SINGLE),
    (1, 1, CardinalityKind.MANDATORY_SINGLE),
    (0, 5, CardinalityKind.LIMITED_LIST),
    (2, 2, CardinalityKind.LIMITED_LIST),
    (0, None, CardinalityKind.UNLIMITED_LIST),
    (3, None, CardinalityKind.UNLIMITED_LIST),
])
def test_cardinality_kind(lower, upper, kind):
    """Test the four-way cardinality classification"""
    assert CardinalityRange(lower=lower, upper=upper).kind is kind


@pytest.mark.parametrize("lower, upper", [(2, 1), (0, 0), (-1, 1)])
def test_cardinality_rejects_bad_bounds(lower, upper):
    with pytest.raises(ValidationError):
        CardinalityRange(lower=lower, upper=upper)


def test_cardinality_contains_and_intersect():
    wide = CardinalityRange(lower=0, upper=None)
    narrow = CardinalityRange(lower=1, upper=3)
    assert wide.contains(narrow)
    assert not narrow.contains(wide)
    assert narrow.intersect(wide) == narrow
    assert CardinalityRange(lower=0, upper=1).intersect(CardinalityRange(lower=2, upper=4)) is None
    assert str(wide) == "0..n"


def test_attribute_defaults_to_mandatory_single():
    attr = Attribute(pid=pid("a"), meta=meta(), data_type=pid("string"))
    assert attr.cardinality.kind is CardinalityKind.MANDATORY_SINGLE


# ============== Entity invariants ==============

def test_metadata_modified_before_created_rejected():
    with pytest.raises(ValidationError):
        AdministrativeMetadata(name="x", created=FIXED, modified=FIXED.replace(year=2020))


def test_metadata_bumped_keeps_created():
    previous = AdministrativeMetadata(name="x", created=FIXED, modified=FIXED, version=3)
    bumped = AdministrativeMetadata.new("y").bumped(previous)
    assert bumped.created == FIXED
    assert bumped.version == 4
    assert bumped.modified >= bumped.created


def test_restrictions_reject_overlapping_enumerations():
    with pytest.raises(ValidationError):
        Restrictions(permitted_values=("a", "b"), forbidden_values=("b",))


def test_restrictions_compare_numbers_exactly():
    with pytest.raises(ValidationError):
        Restrictions(permitted_values=(1,), forbidden_values=(1.0,))


def test_regex_only_for_strings():
    with pytest.raises(ValidationError):
        atomic("n", kind=PrimitiveKind.INTEGER, regex="[0-9]+")


def test_value_bounds_only_for_numbers():
    with pytest.raises(ValidationError):
        atomic("s", min_value=1)


def test_profile_rejects_duplicate_attributes():
    with pytest.raises(ValidationError):
        TypeProfile(pid=pid("p"), meta=meta(), attributes=(pid("a"), pid("a")))


def test_interface_inputs_and_outputs_disjoint():
    with pytest.raises(ValidationError):
        TechnologyInterface(pid=pid("ti"), meta=meta(), inputs=(pid("a"),), outputs=(pid("a"),))


def test_mapping_needs_exactly_one_source():
    with pytest.raises(ValidationError):
        AttributeMapping(output_attribute=pid("out"))
    with pytest.raises(ValidationError):
        AttributeMapping(input_attribute=pid("in"), constant_value="x", output_attribute=pid("out"))


def test_mapping_explicit_marker_must_occur_in_template():
    with pytest.raises(ValidationError):
        AttributeMapping(input_attribute=pid("in"), output_attribute=pid("out"),
                         template="run {{value}}", marker="<<x>>")


def test_step_needs_exactly_one_target():
    with pytest.raises(ValidationError):
        OperationStep(index=0)
    with pytest.raises(ValidationError):
        OperationStep(index=0, technology_interface=pid("ti"), operation=pid("op"))


def test_nested_steps_strictly_increasing():
    inner = OperationStep(index=1, technology_interface=pid("ti"))
    with pytest.raises(ValidationError):
        OperationStep(index=0, steps=(inner, inner))


def test_record_rejects_non_pid_keys_and_nulls():
    with pytest.raises(ValidationError):
        InformationRecord.model_validate({"not a pid": "x"})
    with pytest.raises(ValidationError):
        InformationRecord.model_validate({pid("a"): None})


def test_record_rejects_nested_lists():
    with pytest.raises(ValidationError):
        InformationRecord.model_validate({pid("a"): [["x"]]})


# ============== Serialization ==============

def test_canonical_form_is_sorted_and_compact():
    text = serialize_entity(atomic("string"))
    document = json.loads(text)
    assert text == json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    assert document["entityType"] == "AtomicDataType"
    assert "parent" not in document


def test_seed_entities_survive_serialization():
    for entity in seed_entities():
        text = serialize_entity(entity)
        restored = deserialize_entity(text)
        assert restored == entity
        assert serialize_entity(restored) == text


@pytest.mark.parametrize("seed", range(10))
def test_generated_entities_survive_serialization(seed):
    """Test the round trip over 100 generated entities per seed"""
    generator = EntityGenerator(seed)
    for _ in range(100):
        entity = generator.entity()
        text = serialize_entity(entity)
        restored = deserialize_entity(text)
        assert restored == entity
        assert type(restored) is type(entity)
        assert serialize_entity(restored) == text


def test_deserialize_with_expected_class():
    entity = attribute("a", "string")
    assert deserialize_entity(serialize_entity(entity), Attribute) == entity
    with pytest.raises(EntityInvariantError):
        deserialize_entity(serialize_entity(entity), TypeProfile)


def test_unknown_field_rejected():
    document = json.loads(serialize_entity(atomic("string")))
    document["colour"] = "blue"
    with pytest.raises(EntityInvariantError) as exc_info:
        load_entity(document)
    assert any("unknown field 'colour'" in p["message"] for p in exc_info.value.problems)


def test_malformed_document_reports_position():
    with pytest.raises(DocumentParseError) as exc_info:
        deserialize_entity('{\n  "pid": "test/x",\n  oops\n}')
    assert exc_info.value.line == 3
    assert exc_info.value.column == 3


def test_missing_discriminator_rejected():
    document = json.loads(serialize_entity(atomic("string")))
    del document["entityType"]
    with pytest.raises(EntityInvariantError):
        load_entity(document)


def test_values_without_canonical_form_rejected():
    with pytest.raises(ValidationError):
        attribute("a", "number", default=float("nan"))
    broken = Attribute.model_construct(
        entity_type="Attribute", pid=pid("a"), meta=meta(), data_type=pid("number"),
        cardinality=CardinalityRange(lower=1, upper=1), default_value=object(),
    )
    with pytest.raises(SerializationError) as exc_info:
        serialize_entity(broken)
    assert exc_info.value.field == "defaultValue"
