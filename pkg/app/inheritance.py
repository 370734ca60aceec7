"""Inheritance resolution and the nominal subtype relation."""
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from app.exceptions import EntityKindError, InheritanceCycleError
from app.graph import GraphStore
from app.schemas import (
    Attribute,
    AtomicDataType,
    CardinalityRange,
    EffectiveAttribute,
    EffectiveProfile,
    Linearization,
    TypeProfile,
    ValidationResult,
)

RULE_ID = "InheritanceConflict"

# (owner profile, attribute pid, data type pid, cardinality)
Contribution = Tuple[str, str, str, CardinalityRange]


def parent_chain(pid: str, graph: GraphStore) -> List[str]:
    """[self, parent, grandparent, ...] for an atomic data type."""
    entity = graph.get_typed(pid, AtomicDataType)
    chain = [pid]
    while entity.parent:
        if entity.parent in chain:
            raise InheritanceCycleError(chain[chain.index(entity.parent):] + [entity.parent])
        entity = graph.get_typed(entity.parent, AtomicDataType)
        chain.append(entity.pid)
    return chain


def _c3_merge(sequences: List[List[str]]) -> Optional[List[str]]:
    result = []
    sequences = [seq for seq in sequences if seq]
    while sequences:
        for seq in sequences:
            head = seq[0]
            if not any(head in other[1:] for other in sequences):
                break
        else:
            return None
        result.append(head)
        sequences = [seq[1:] if seq[0] == head else seq for seq in sequences]
        sequences = [seq for seq in sequences if seq]
    return result


def _depth_first(pid: str, graph: GraphStore) -> List[str]:
    order: List[str] = []

    def visit(node: str) -> None:
        if node in order:
            return
        order.append(node)
        for parent in graph.get_typed(node, TypeProfile).parents:
            visit(parent)

    visit(pid)
    return order


def _linearize(pid: str, graph: GraphStore, stack: List[str],
               memo: Dict[str, List[str]], diagnostics: List[ValidationResult]) -> List[str]:
    if pid in memo:
        return memo[pid]
    if pid in stack:
        raise InheritanceCycleError(stack[stack.index(pid):] + [pid])
    profile = graph.get_typed(pid, TypeProfile)
    stack.append(pid)
    parent_orders = [_linearize(parent, graph, stack, memo, diagnostics) for parent in profile.parents]
    stack.pop()

    merged = _c3_merge([list(order) for order in parent_orders] + [list(profile.parents)])
    if merged is None:
        order = _depth_first(pid, graph)
        diagnostics.append(ValidationResult.warning(
            RULE_ID, pid,
            f"No consistent C3 linearization for parents {list(profile.parents)}; "
            f"using depth-first order {order}",
        ))
    else:
        order = [pid] + merged
    memo[pid] = order
    return order


def linearize(pid: str, graph: GraphStore) -> Linearization:
    diagnostics: List[ValidationResult] = []
    order = _linearize(pid, graph, [], {}, diagnostics)
    return Linearization(profile=pid, order=tuple(order), diagnostics=tuple(diagnostics))


def merge_contributions(profile: str, contributions: Iterable[Contribution]
                        ) -> Tuple[Dict[str, EffectiveAttribute], List[ValidationResult]]:
    """Merge attribute contributions in precedence order.

    The first contribution of an attribute fixes its origin and data type; later
    ones must agree on the data type and narrow the cardinality by intersection.
    """
    merged: Dict[str, EffectiveAttribute] = {}
    diagnostics: List[ValidationResult] = []
    for owner, attribute, data_type, cardinality in contributions:
        existing = merged.get(attribute)
        if existing is None:
            merged[attribute] = EffectiveAttribute(data_type=data_type, cardinality=cardinality, origin=owner)
            continue
        if existing.data_type != data_type:
            diagnostics.append(ValidationResult.error(
                RULE_ID, profile,
                f"Attribute '{attribute}' is bound to data type '{existing.data_type}' by "
                f"'{existing.origin}' but to '{data_type}' by '{owner}'",
            ))
            continue
        narrowed = existing.cardinality.intersect(cardinality)
        if narrowed is None:
            diagnostics.append(ValidationResult.error(
                RULE_ID, profile,
                f"Attribute '{attribute}' has disjoint cardinalities {existing.cardinality} "
                f"and {cardinality} across '{existing.origin}' and '{owner}'",
            ))
            continue
        merged[attribute] = existing.model_copy(update={"cardinality": narrowed})
    return merged, diagnostics


def effective_attributes(pid: str, graph: GraphStore) -> EffectiveProfile:
    linearization = linearize(pid, graph)
    contributions: List[Contribution] = []
    for owner in linearization.order:
        for attribute_pid in graph.get_typed(owner, TypeProfile).attributes:
            attribute = graph.get_typed(attribute_pid, Attribute)
            contributions.append((owner, attribute.pid, attribute.data_type, attribute.cardinality))
    attributes, conflicts = merge_contributions(pid, contributions)
    return EffectiveProfile(
        profile=pid,
        attributes=attributes,
        policy=graph.get_typed(pid, TypeProfile).policy,
        diagnostics=linearization.diagnostics + tuple(conflicts),
    )


def is_subtype(candidate: str, parent: str, graph: GraphStore) -> bool:
    """Nominal and reflexive; both Pids must be data types of the same kind."""
    first = graph.get_typed(candidate, (AtomicDataType, TypeProfile))
    second = graph.get_typed(parent, (AtomicDataType, TypeProfile))
    if first.entity_type != second.entity_type:
        raise EntityKindError(parent, first.entity_type, second.entity_type)
    if candidate == parent:
        return True
    if isinstance(first, AtomicDataType):
        return parent in parent_chain(candidate, graph)
    return parent in linearize(candidate, graph).order


def attribute_assignable(value_attribute: str, slot_attribute: str, graph: GraphStore) -> bool:
    """Covariance: the value's data type is a subtype and its range fits inside the slot's."""
    value = graph.get_typed(value_attribute, Attribute)
    slot = graph.get_typed(slot_attribute, Attribute)
    if value.pid == slot.pid:
        return True
    try:
        subtype = is_subtype(value.data_type, slot.data_type, graph)
    except EntityKindError:
        return False
    return subtype and slot.cardinality.contains(value.cardinality)


def chain_for(pid: str, graph: GraphStore) -> Sequence[str]:
    """Inheritance listing for any data type: parent chain or linearization."""
    entity = graph.get_typed(pid, (AtomicDataType, TypeProfile))
    if isinstance(entity, AtomicDataType):
        return parent_chain(pid, graph)
    return list(linearize(pid, graph).order)
