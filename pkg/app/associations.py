"""Which operations apply to an attribute, a data type or a record."""
from typing import Any, Dict, Iterator, List, Set

from app.exceptions import RegistryError
from app.graph import GraphStore
from app.inheritance import attribute_assignable, effective_attributes, is_subtype
from app.schemas import (
    AssociationMechanism,
    AtomicDataType,
    Attribute,
    InformationRecord,
    Operation,
    RecordAssociations,
    TypeProfile,
    ValidationResult,
)

RULE_ID = "Association"


def _assignable(value_attribute: str, slot_attribute: str, graph: GraphStore) -> bool:
    try:
        return attribute_assignable(value_attribute, slot_attribute, graph)
    except RegistryError:
        return False


def _subtype(candidate: str, parent: str, graph: GraphStore) -> bool:
    try:
        return is_subtype(candidate, parent, graph)
    except RegistryError:
        return False


def operations_for_attribute(attribute_pid: str, graph: GraphStore) -> List[str]:
    """Operations executable on the attribute, directly or through covariance."""
    graph.get_typed(attribute_pid, Attribute)
    found = [operation.pid for operation in graph.entities(Operation)
             if operation.executable_on == attribute_pid
             or _assignable(attribute_pid, operation.executable_on, graph)]
    return sorted(found)


def operations_for_datatype(data_type_pid: str, graph: GraphStore) -> List[str]:
    data_type = graph.get_typed(data_type_pid, (AtomicDataType, TypeProfile))
    found: Set[str] = set()
    for attribute in graph.entities(Attribute):
        if _subtype(data_type_pid, attribute.data_type, graph):
            found.update(operations_for_attribute(attribute.pid, graph))
    if isinstance(data_type, TypeProfile):
        for attribute_pid in effective_attributes(data_type_pid, graph).attributes:
            found.update(operations_for_attribute(attribute_pid, graph))
    return sorted(found)


def _scalars(value: Any) -> Iterator[Any]:
    if isinstance(value, list):
        for item in value:
            yield from _scalars(item)
    elif isinstance(value, dict):
        for item in value.values():
            yield from _scalars(item)
    else:
        yield value


def _mechanism(operation_pid: str, graph: GraphStore) -> AssociationMechanism:
    operation = graph.get_typed(operation_pid, Operation)
    target = graph.find(operation.executable_on)
    data_type = graph.find(target.data_type) if isinstance(target, Attribute) else None
    if isinstance(data_type, TypeProfile):
        return AssociationMechanism.PROFILE_TYPING
    return AssociationMechanism.ATTRIBUTE_TYPING


def operations_for_record(record: Any, graph: GraphStore) -> RecordAssociations:
    """Operations per association mechanism; unresolvable keys are skipped with a warning."""
    entries = record.root if isinstance(record, InformationRecord) else dict(record)
    buckets: Dict[AssociationMechanism, Set[str]] = {mechanism: set() for mechanism in AssociationMechanism}
    diagnostics: List[ValidationResult] = []

    for key, value in entries.items():
        entity = graph.find(key)
        if isinstance(entity, Attribute):
            applicable = operations_for_attribute(key, graph)
        elif isinstance(entity, (AtomicDataType, TypeProfile)):
            applicable = operations_for_datatype(key, graph)
        else:
            diagnostics.append(ValidationResult.warning(
                RULE_ID, key, f"Record key '{key}' is neither an attribute nor a data type; skipped"))
            continue
        for item in _scalars(value):
            if isinstance(item, str) and isinstance(graph.find(item), Operation):
                buckets[AssociationMechanism.RECORD_TYPING].add(item)
        for operation_pid in applicable:
            buckets[_mechanism(operation_pid, graph)].add(operation_pid)

    return RecordAssociations(
        buckets={mechanism: tuple(sorted(pids)) for mechanism, pids in buckets.items()},
        diagnostics=tuple(diagnostics),
    )
