"""Rule based semantic validation.

Every rule is a visitor with one ``visit_*`` method per entity kind; a rule
only overrides the kinds it cares about. Rules never raise for invalid input,
they return ``ValidationResult`` lists which the ``RuleSet`` concatenates in
rule order.
"""
import logging
import re
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from app.exceptions import ConfigurationError, RegistryError
from app.graph import GraphStore
from app.inheritance import effective_attributes, is_subtype, parent_chain
from app.schemas import (
    DEFAULT_MARKER,
    AtomicDataType,
    Attribute,
    AttributeMapping,
    Combinator,
    EdgeLabel,
    InformationRecord,
    Operation,
    OperationStep,
    PrimitiveKind,
    Severity,
    TechnologyInterface,
    TypeProfile,
    ValidationResult,
    as_decimal,
    iter_steps,
    matches_kind,
    text_form,
    value_key,
)

logger = logging.getLogger(__name__)

VALUE_RULE = "ValueConformance"


def _show(value: Any) -> str:
    return text_form(value) if not isinstance(value, str) else repr(value)


# ============== Values and records ==============

def check_level(value: Any, atomic: AtomicDataType) -> List[ValidationResult]:
    """Check *value* against one atomic type, ignoring its ancestors."""
    restrictions = atomic.restrictions

    def error(message: str) -> List[ValidationResult]:
        return [ValidationResult.error(VALUE_RULE, atomic.pid, message)]

    if not matches_kind(value, atomic.kind):
        return error(f"Value {_show(value)} is not of kind {atomic.kind.value}")

    key = value_key(value)
    if restrictions.forbidden_values and key in {value_key(v) for v in restrictions.forbidden_values}:
        return error(f"Value {_show(value)} is forbidden")
    if restrictions.permitted_values is not None:
        if key in {value_key(v) for v in restrictions.permitted_values}:
            return []
        if not restrictions.has_syntax_checks:
            return error(f"Value {_show(value)} is not among the permitted values")

    problems: List[ValidationResult] = []
    if restrictions.regex is not None and re.fullmatch(restrictions.regex, value) is None:
        problems += error(f"Value {_show(value)} does not match pattern '{restrictions.regex}'")
    if restrictions.min_length is not None and len(value) < restrictions.min_length:
        problems += error(f"Value {_show(value)} is shorter than {restrictions.min_length} characters")
    if restrictions.max_length is not None and len(value) > restrictions.max_length:
        problems += error(f"Value {_show(value)} is longer than {restrictions.max_length} characters")
    if restrictions.min_value is not None and as_decimal(value) < as_decimal(restrictions.min_value):
        problems += error(f"Value {_show(value)} is below the minimum {restrictions.min_value}")
    if restrictions.max_value is not None and as_decimal(value) > as_decimal(restrictions.max_value):
        problems += error(f"Value {_show(value)} is above the maximum {restrictions.max_value}")
    return problems


def validate_value(value: Any, atomic_pid: str, graph: GraphStore) -> List[ValidationResult]:
    """Validate against every atomic type in the inheritance chain."""
    results: List[ValidationResult] = []
    for level in parent_chain(atomic_pid, graph):
        results += check_level(value, graph.get_typed(level, AtomicDataType))
    return results


def validate_instance(value: Any, data_type_pid: str, graph: GraphStore) -> List[ValidationResult]:
    data_type = graph.get_typed(data_type_pid, (AtomicDataType, TypeProfile))
    if isinstance(data_type, AtomicDataType):
        return validate_value(value, data_type_pid, graph)
    if not isinstance(value, dict):
        return [ValidationResult.error(
            VALUE_RULE, data_type_pid, f"Value {_show(value)} is not a record for profile '{data_type_pid}'")]
    return validate_record(value, data_type_pid, graph)


def _resolve_key(key: str, attributes: Dict, graph: GraphStore) -> Tuple[Optional[str], Optional[str]]:
    """Map a record key to an effective attribute Pid; returns (pid, problem)."""
    if key in attributes:
        return key, None
    entity = graph.find(key)
    if isinstance(entity, (AtomicDataType, TypeProfile)):
        matches = [pid for pid, effective in attributes.items() if effective.data_type == key]
        if len(matches) == 1:
            return matches[0], None
        if len(matches) > 1:
            return None, f"Data type key '{key}' is ambiguous between attributes {sorted(matches)}"
    return None, None


def validate_record(record: Any, profile_pid: str, graph: GraphStore) -> List[ValidationResult]:
    """Validate an information record against a profile's effective attributes and policy."""
    entries = record.root if isinstance(record, InformationRecord) else dict(record)
    effective = effective_attributes(profile_pid, graph)
    policy = effective.policy
    results = [d for d in effective.diagnostics if d.severity is Severity.ERROR]

    def error(message: str, entity: str = profile_pid) -> None:
        results.append(ValidationResult.error(VALUE_RULE, entity, message))

    present: Dict[str, Any] = {}
    for key, value in entries.items():
        attribute, problem = _resolve_key(key, effective.attributes, graph)
        if problem:
            error(problem)
            continue
        if attribute is None:
            if not policy.allow_additional:
                error(f"Key '{key}' is not an attribute of profile '{profile_pid}'")
            continue
        if attribute in present:
            error(f"Attribute '{attribute}' is given more than once")
            continue
        present[attribute] = value

    combinator = policy.combinator
    if combinator is Combinator.NONE and present:
        error(f"Policy None admits no attributes, found {sorted(present)}")
    elif combinator is Combinator.EXACTLY_ONE and len(present) != 1:
        error(f"Policy ExactlyOne requires exactly one attribute, found {len(present)}")
    elif combinator is Combinator.ANY_AT_LEAST_ONE and not present:
        error("Policy AnyAtLeastOne requires at least one attribute, found none")
    elif combinator is Combinator.ALL:
        for attribute, spec in effective.attributes.items():
            if spec.cardinality.lower >= 1 and attribute not in present:
                error(f"Missing mandatory attribute '{attribute}'")

    for attribute, value in present.items():
        spec = effective.attributes[attribute]
        values = value if isinstance(value, list) else [value]
        if isinstance(value, list) and not spec.cardinality.allows_many:
            error(f"Attribute '{attribute}' admits a single value but holds a list", attribute)
        elif not spec.cardinality.admits(len(values)):
            error(f"Attribute '{attribute}' holds {len(values)} value(s), "
                  f"expected {spec.cardinality}", attribute)
        for item in values:
            results += validate_instance(item, spec.data_type, graph)
    return results


# ============== Rules ==============

class ValidationRule:
    """Base visitor; visits return no results unless overridden."""

    rule_id = ""

    def check(self, entity, graph: GraphStore) -> List[ValidationResult]:
        return entity.accept(self, graph)

    def visit_atomic_data_type(self, entity: AtomicDataType, graph: GraphStore) -> List[ValidationResult]:
        return []

    def visit_type_profile(self, entity: TypeProfile, graph: GraphStore) -> List[ValidationResult]:
        return []

    def visit_attribute(self, entity: Attribute, graph: GraphStore) -> List[ValidationResult]:
        return []

    def visit_technology_interface(self, entity: TechnologyInterface, graph: GraphStore) -> List[ValidationResult]:
        return []

    def visit_operation(self, entity: Operation, graph: GraphStore) -> List[ValidationResult]:
        return []

    def error(self, pid: str, message: str) -> ValidationResult:
        return ValidationResult.error(self.rule_id, pid, message)

    def warning(self, pid: str, message: str) -> ValidationResult:
        return ValidationResult.warning(self.rule_id, pid, message)

    def info(self, pid: str, message: str) -> ValidationResult:
        return ValidationResult.info(self.rule_id, pid, message)

    def retag(self, results: Iterable[ValidationResult], pid: str, prefix: str = "") -> List[ValidationResult]:
        return [r.model_copy(update={"rule": self.rule_id, "entity": pid, "message": prefix + r.message})
                for r in results]


def _path(cycle: Sequence[str]) -> str:
    return " -> ".join(list(cycle) + [cycle[0]])


class AcyclicityRule(ValidationRule):
    rule_id = "Acyclicity"

    def _inheritance(self, entity, graph: GraphStore) -> List[ValidationResult]:
        return [self.error(entity.pid, f"Circular inheritance detected: {_path(cycle)}")
                for cycle in graph.cycles_through(entity.pid, [EdgeLabel.INHERITS_FROM])]

    def _self_use(self, entity, graph: GraphStore) -> List[ValidationResult]:
        results = []
        for cycle in graph.cycles_through(entity.pid, [EdgeLabel.HAS_ATTRIBUTE, EdgeLabel.CONFORMS_TO]):
            attributes = [graph.find(pid) for pid in cycle if isinstance(graph.find(pid), Attribute)]
            message = f"Type profile uses itself as an attribute data type: {_path(cycle)}"
            if all(attribute.cardinality.lower >= 1 for attribute in attributes):
                results.append(self.error(entity.pid, message))
            else:
                results.append(self.warning(entity.pid, message + " (through an optional attribute)"))
        return results

    def visit_atomic_data_type(self, entity, graph):
        return self._inheritance(entity, graph)

    def visit_type_profile(self, entity, graph):
        return self._inheritance(entity, graph) + self._self_use(entity, graph)

    def visit_attribute(self, entity, graph):
        return self._self_use(entity, graph)

    def visit_operation(self, entity, graph):
        return [self.error(entity.pid, f"Operation executes itself: {_path(cycle)}")
                for cycle in graph.cycles_through(entity.pid, [EdgeLabel.HAS_STEP_TARGET])]


EDGE_TARGETS = {
    EdgeLabel.HAS_ATTRIBUTE: (Attribute,),
    EdgeLabel.CONFORMS_TO: (AtomicDataType, TypeProfile),
    EdgeLabel.EXECUTABLE_ON: (Attribute,),
    EdgeLabel.RETURNS_ATTRIBUTE: (Attribute,),
    EdgeLabel.HAS_STEP_TARGET: (TechnologyInterface, Operation),
    EdgeLabel.MAPS_INPUT: (Attribute,),
    EdgeLabel.MAPS_OUTPUT: (Attribute,),
}


class ReferentialIntegrityRule(ValidationRule):
    rule_id = "ReferentialIntegrity"

    def _check(self, entity, graph: GraphStore) -> List[ValidationResult]:
        results = []
        for label, target in entity.outbound():
            if label is EdgeLabel.REFERENCES_ADAPTER:
                continue
            referenced = graph.find(target)
            if referenced is None:
                results.append(self.error(
                    entity.pid, f"Referenced entity '{target}' ({label.value}) does not exist"))
                continue
            expected = (type(entity),) if label is EdgeLabel.INHERITS_FROM else EDGE_TARGETS[label]
            if not isinstance(referenced, expected):
                names = " or ".join(cls.__name__ for cls in expected)
                results.append(self.error(
                    entity.pid,
                    f"Referenced entity '{target}' ({label.value}) is a {referenced.entity_type}, expected {names}",
                ))
        return results

    def _steps(self, operation: Operation, graph: GraphStore) -> List[ValidationResult]:
        results = []
        for step in iter_steps(operation.steps):
            for pid, expected in ((step.technology_interface, TechnologyInterface), (step.operation, Operation)):
                referenced = graph.find(pid) if pid else None
                if referenced is not None and not isinstance(referenced, expected):
                    results.append(self.error(
                        operation.pid,
                        f"Step {step.index} targets '{pid}' which is a {referenced.entity_type}, "
                        f"expected {expected.__name__}",
                    ))
        return results

    visit_atomic_data_type = _check
    visit_type_profile = _check
    visit_attribute = _check
    visit_technology_interface = _check

    def visit_operation(self, entity, graph):
        return self._check(entity, graph) + self._steps(entity, graph)


def backreferences(pattern: str) -> List[str]:
    """Backreference tokens in a regular expression."""
    found = []
    position = 0
    while position < len(pattern):
        char = pattern[position]
        if char == "\\" and position + 1 < len(pattern):
            following = pattern[position + 1]
            if following in "123456789":
                found.append(pattern[position:position + 2])
            elif following == "g" and pattern[position + 2:position + 3] == "<":
                found.append(pattern[position:pattern.find(">", position) + 1])
            position += 2
            continue
        if pattern.startswith("(?P=", position):
            found.append(pattern[position:pattern.find(")", position) + 1])
        position += 1
    return found


class RestrictionConsistencyRule(ValidationRule):
    rule_id = "RestrictionConsistency"

    def visit_atomic_data_type(self, entity, graph):
        results = []
        restrictions = entity.restrictions
        for field, constants in (("permittedValues", restrictions.permitted_values),
                                 ("forbiddenValues", restrictions.forbidden_values)):
            for constant in constants or ():
                if not matches_kind(constant, entity.kind):
                    results.append(self.error(
                        entity.pid, f"{field} entry {_show(constant)} is not of kind {entity.kind.value}"))
        if restrictions.regex is not None:
            try:
                re.compile(restrictions.regex)
            except re.error as exc:
                results.append(self.error(entity.pid, f"Pattern '{restrictions.regex}' does not compile: {exc}"))
            else:
                for token in backreferences(restrictions.regex):
                    results.append(self.error(
                        entity.pid, f"Pattern '{restrictions.regex}' uses backreference '{token}'"))
        if results or not entity.parent or not isinstance(graph.find(entity.parent), AtomicDataType):
            return results
        for constant in restrictions.permitted_values or ():
            try:
                rejected = validate_value(constant, entity.parent, graph)
            except RegistryError:
                break
            if rejected:
                results.append(self.warning(
                    entity.pid,
                    f"Permitted value {_show(constant)} is rejected by ancestor '{rejected[0].entity}'",
                ))
        return results


class CardinalityWellformednessRule(ValidationRule):
    rule_id = "CardinalityWellformedness"

    def visit_attribute(self, entity, graph):
        if entity.default_value is None:
            return []
        cardinality = entity.cardinality
        if isinstance(entity.default_value, list):
            if not cardinality.allows_many:
                return [self.error(entity.pid, f"Default value is a list but cardinality {cardinality} "
                                               "admits a single value")]
            if not cardinality.admits(len(entity.default_value)):
                return [self.error(entity.pid, f"Default value holds {len(entity.default_value)} value(s), "
                                               f"cardinality is {cardinality}")]
        return []

    def visit_type_profile(self, entity, graph):
        mandatory = [pid for pid in entity.attributes
                     if isinstance(graph.find(pid), Attribute) and graph.find(pid).cardinality.lower >= 1]
        combinator = entity.policy.combinator
        if combinator is Combinator.NONE and mandatory:
            return [self.warning(entity.pid, f"Policy None can never be met with mandatory attributes {mandatory}")]
        if combinator is Combinator.EXACTLY_ONE and len(mandatory) > 1:
            return [self.warning(entity.pid, f"Policy ExactlyOne can never be met with "
                                             f"{len(mandatory)} mandatory attributes")]
        return []


class DefaultValueConformanceRule(ValidationRule):
    rule_id = "DefaultValueConformance"

    def visit_attribute(self, entity, graph):
        if entity.default_value is None or not isinstance(
                graph.find(entity.data_type), (AtomicDataType, TypeProfile)):
            return []
        values = entity.default_value if isinstance(entity.default_value, list) else [entity.default_value]
        results = []
        for value in values:
            try:
                results += validate_instance(value, entity.data_type, graph)
            except RegistryError as exc:
                return [self.error(entity.pid, f"Default value cannot be checked: {exc}")]
        return self.retag(results, entity.pid, prefix="Default value: ")


class MappingCompatibilityRule(ValidationRule):
    rule_id = "MappingCompatibility"

    def __init__(self, marker: str = DEFAULT_MARKER):
        self.marker = marker

    def visit_operation(self, entity, graph):
        return rule_mapping_compatibility(entity, graph, marker=self.marker)


class InheritanceConflictRule(ValidationRule):
    rule_id = "InheritanceConflict"

    def visit_atomic_data_type(self, entity, graph):
        parent = graph.find(entity.parent) if entity.parent else None
        if isinstance(parent, AtomicDataType) and parent.kind is not entity.kind:
            return [self.error(entity.pid, f"Parent '{parent.pid}' has primitive kind {parent.kind.value}, "
                                           f"expected {entity.kind.value}")]
        return []

    def visit_type_profile(self, entity, graph):
        try:
            return list(effective_attributes(entity.pid, graph).diagnostics)
        except RegistryError:
            # cycles and dangling references are reported by their own rules
            return []


# ============== Mapping compatibility ==============

def _step_slots(step: OperationStep, graph: GraphStore) -> Tuple[Optional[Set[str]], Optional[Set[str]]]:
    target = graph.find(step.target_pid) if step.target_pid else None
    if isinstance(target, TechnologyInterface):
        return set(target.inputs), set(target.outputs)
    if isinstance(target, Operation):
        return {target.executable_on}, set(target.returns)
    return None, None


def _cast_results(rule: ValidationRule, operation: Operation, step: OperationStep,
                  source: Attribute, output: Attribute, graph: GraphStore) -> List[ValidationResult]:
    if source.data_type == output.data_type:
        return []
    try:
        widening = is_subtype(source.data_type, output.data_type, graph)
        narrowing = is_subtype(output.data_type, source.data_type, graph)
    except RegistryError:
        widening = narrowing = False
    if widening or narrowing:
        return [rule.info(operation.pid, f"Step {step.index} casts '{source.pid}' ({source.data_type}) "
                                         f"to '{output.pid}' ({output.data_type})")]
    return [rule.warning(operation.pid, f"Step {step.index} maps '{source.pid}' ({source.data_type}) to "
                                        f"'{output.pid}' ({output.data_type}) without a subtype relation; "
                                        "the value is checked at run time")]


def _check_mapping(rule: ValidationRule, operation: Operation, step: OperationStep,
                   mapping: AttributeMapping, slots: Optional[Set[str]], slot_role: str,
                   graph: GraphStore, marker: str) -> List[ValidationResult]:
    results: List[ValidationResult] = []
    op = operation.pid
    source = graph.find(mapping.input_attribute) if mapping.input_attribute else None
    output = graph.find(mapping.output_attribute)
    slot = mapping.output_attribute if slot_role == "input" else mapping.input_attribute

    if slots is not None and slot is not None and slot not in slots:
        results.append(rule.error(op, f"Step {step.index} maps '{slot}' which is not an {slot_role} "
                                      f"of '{step.target_pid}'"))

    if mapping.index is not None:
        if isinstance(source, Attribute):
            cardinality = source.cardinality
            if not cardinality.allows_many:
                results.append(rule.error(op, f"Step {step.index} selects index {mapping.index} of "
                                              f"'{source.pid}' which admits a single value"))
            elif cardinality.upper is not None and mapping.index >= cardinality.upper:
                results.append(rule.error(op, f"Step {step.index} selects index {mapping.index} of "
                                              f"'{source.pid}' which holds at most {cardinality.upper} values"))
        elif mapping.constant_value is not None:
            items = mapping.constant_value if isinstance(mapping.constant_value, list) else [mapping.constant_value]
            if mapping.index >= len(items):
                results.append(rule.error(op, f"Step {step.index} selects index {mapping.index} of a "
                                              f"constant holding {len(items)} value(s)"))
    elif isinstance(source, Attribute) and isinstance(output, Attribute) \
            and source.cardinality.allows_many and not output.cardinality.allows_many:
        results.append(rule.warning(op, f"Step {step.index} maps list-valued '{source.pid}' to single-valued "
                                        f"'{output.pid}' without an index"))

    if mapping.template is not None:
        effective_marker = mapping.effective_marker(marker)
        if effective_marker not in mapping.template:
            results.append(rule.error(op, f"Step {step.index} template does not contain the marker "
                                          f"'{effective_marker}'"))
        output_type = graph.find(output.data_type) if isinstance(output, Attribute) else None
        if output_type is not None and not (isinstance(output_type, AtomicDataType)
                                            and output_type.kind is PrimitiveKind.STRING):
            results.append(rule.error(op, f"Step {step.index} template produces a String but "
                                          f"'{output.pid}' conforms to '{output.data_type}'"))
    elif isinstance(source, Attribute) and isinstance(output, Attribute):
        results += _cast_results(rule, operation, step, source, output, graph)

    if mapping.constant_value is not None and isinstance(output, Attribute) \
            and isinstance(graph.find(output.data_type), (AtomicDataType, TypeProfile)) \
            and not any(r.severity is Severity.ERROR for r in results):
        value = mapping.constant_value
        if mapping.index is not None:
            value = (value if isinstance(value, list) else [value])[mapping.index]
        if mapping.template is not None:
            value = mapping.template.replace(mapping.effective_marker(marker), text_form(value))
        values = value if isinstance(value, list) else [value]
        prefix = f"Step {step.index} constant for '{output.pid}': "
        for item in values:
            try:
                results += rule.retag(validate_instance(item, output.data_type, graph), op, prefix=prefix)
            except RegistryError as exc:
                results.append(rule.error(op, prefix + str(exc)))
    return results


def rule_mapping_compatibility(operation: Operation, graph: GraphStore,
                               marker: str = DEFAULT_MARKER) -> List[ValidationResult]:
    """Statically checkable conditions of every mapping in *operation*."""
    rule = MappingCompatibilityRule(marker)
    results: List[ValidationResult] = []
    for step in iter_steps(operation.steps):
        inputs, outputs = _step_slots(step, graph)
        for mapping in step.input_mappings:
            results += _check_mapping(rule, operation, step, mapping, inputs, "input", graph, marker)
        for mapping in step.output_mappings:
            results += _check_mapping(rule, operation, step, mapping, outputs, "output", graph, marker)
        if isinstance(graph.find(step.target_pid or ""), TechnologyInterface):
            fed = {mapping.output_attribute for mapping in step.input_mappings}
            for attribute in graph.find(step.target_pid).inputs:
                if attribute not in fed:
                    results.append(rule.warning(
                        operation.pid, f"Step {step.index}: input '{attribute}' of '{step.target_pid}' "
                                       "is fed by no mapping"))
    return results


# ============== Rule sets ==============

class RuleSet:
    """Ordered collection of rules with unique identifiers."""

    def __init__(self, rules: Sequence[ValidationRule]):
        ids = [rule.rule_id for rule in rules]
        duplicates = sorted({rule_id for rule_id in ids if ids.count(rule_id) > 1})
        if duplicates:
            raise ConfigurationError(f"Duplicate rule identifiers: {duplicates}")
        self.rules: Tuple[ValidationRule, ...] = tuple(rules)

    @classmethod
    def default(cls, marker: str = DEFAULT_MARKER) -> "RuleSet":
        return cls([
            AcyclicityRule(),
            ReferentialIntegrityRule(),
            RestrictionConsistencyRule(),
            CardinalityWellformednessRule(),
            DefaultValueConformanceRule(),
            MappingCompatibilityRule(marker),
            InheritanceConflictRule(),
        ])

    @property
    def ids(self) -> List[str]:
        return [rule.rule_id for rule in self.rules]

    def without(self, rule_ids: Iterable[str]) -> "RuleSet":
        removed = set(rule_ids)
        unknown = sorted(removed - set(self.ids))
        if unknown:
            raise ConfigurationError(f"Unknown rule identifiers: {unknown}", key="DISABLED_RULES")
        return RuleSet([rule for rule in self.rules if rule.rule_id not in removed])

    def validate(self, entity, graph: GraphStore) -> List[ValidationResult]:
        results: List[ValidationResult] = []
        for rule in self.rules:
            results += rule.check(entity, graph)
        return results


DEFAULT_RULE_IDS = RuleSet.default().ids


def _in_graph(entity, graph: GraphStore) -> Tuple[Any, GraphStore]:
    if graph.find(entity.pid) == entity:
        return entity, graph
    candidate = graph.clone()
    return candidate.upsert(entity), candidate


def validate_entity(entity, graph: GraphStore, rules: Optional[RuleSet] = None) -> List[ValidationResult]:
    """All applicable rule results for *entity* as if it were stored in *graph*."""
    entity, graph = _in_graph(entity, graph)
    results = (rules or RuleSet.default()).validate(entity, graph)
    logger.debug(f"Validated {entity.pid}: {len(results)} result(s)")
    return results


def rule_acyclicity(entity, graph: GraphStore) -> List[ValidationResult]:
    entity, graph = _in_graph(entity, graph)
    return AcyclicityRule().check(entity, graph)
