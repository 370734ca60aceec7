import json
import math
import re
from datetime import datetime, timezone
from decimal import Decimal
from enum import Enum
from typing import Annotated, Any, Dict, Iterator, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    RootModel,
    StrictFloat,
    StrictInt,
    field_validator,
    model_validator,
)
from pydantic.alias_generators import to_camel


DEFAULT_MARKER = "{{input}}"
PID_PATTERN = r"^[A-Za-z0-9][A-Za-z0-9._-]*/[^\s]+$"

Pid = Annotated[str, Field(pattern=PID_PATTERN)]


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


# ============== Enumerations ==============

class PrimitiveKind(str, Enum):
    BOOLEAN = "Boolean"
    INTEGER = "Integer"
    NUMBER = "Number"
    STRING = "String"


class Combinator(str, Enum):
    NONE = "None"
    EXACTLY_ONE = "ExactlyOne"
    ANY_AT_LEAST_ONE = "AnyAtLeastOne"
    ALL = "All"


class CardinalityKind(str, Enum):
    OPTIONAL_SINGLE = "OptionalSingle"
    MANDATORY_SINGLE = "MandatorySingle"
    LIMITED_LIST = "LimitedList"
    UNLIMITED_LIST = "UnlimitedList"


class EdgeLabel(str, Enum):
    INHERITS_FROM = "inheritsFrom"
    HAS_ATTRIBUTE = "hasAttribute"
    CONFORMS_TO = "conformsTo"
    EXECUTABLE_ON = "executableOn"
    RETURNS_ATTRIBUTE = "returnsAttribute"
    HAS_STEP_TARGET = "hasStepTarget"
    MAPS_INPUT = "mapsInput"
    MAPS_OUTPUT = "mapsOutput"
    REFERENCES_ADAPTER = "referencesAdapter"


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"
    INFO = "Info"


class AssociationMechanism(str, Enum):
    RECORD_TYPING = "RecordTyping"
    PROFILE_TYPING = "ProfileTyping"
    ATTRIBUTE_TYPING = "AttributeTyping"


# ============== Value Helpers ==============

def value_kind(value: Any) -> str:
    """Name the kind of a record/mapping value."""
    if isinstance(value, bool):
        return "Boolean"
    if isinstance(value, int):
        return "Integer"
    if isinstance(value, float):
        return "Number"
    if isinstance(value, str):
        return "String"
    if isinstance(value, (list, tuple)):
        return "List"
    if isinstance(value, dict):
        return "Record"
    return type(value).__name__


def matches_kind(value: Any, kind: PrimitiveKind) -> bool:
    actual = value_kind(value)
    if kind is PrimitiveKind.NUMBER:
        return actual in ("Integer", "Number")
    return actual == kind.value


def value_key(value: Any) -> Tuple[str, Any]:
    """Comparison key with exact decimal semantics for numbers."""
    kind = value_kind(value)
    if kind in ("Integer", "Number"):
        return ("Number", Decimal(str(value)))
    return (kind, value)


def as_decimal(value: Any) -> Decimal:
    return Decimal(str(value))


def text_form(value: Any) -> str:
    """Text inserted into string templates."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return str(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def check_value(value: Any, nested: bool = True) -> Any:
    """Return *value* in canonical container form or raise ValueError."""
    kind = value_kind(value)
    if kind == "Number" and not math.isfinite(value):
        raise ValueError("non-finite numbers have no canonical form")
    if kind in ("Boolean", "Integer", "Number", "String"):
        return value
    if kind == "List":
        if not nested:
            raise ValueError("lists of lists are not supported")
        items = [check_value(item, nested=False) for item in value]
        families = {("Number" if value_kind(i) == "Integer" else value_kind(i)) for i in items}
        if len(families) > 1:
            raise ValueError(f"list mixes value kinds {sorted(families)}")
        return items
    if kind == "Record":
        return {str(k): check_value(v) for k, v in value.items()}
    raise ValueError(f"unsupported value kind '{kind}'")


def check_scalar(value: Any) -> Any:
    if value_kind(value) not in ("Boolean", "Integer", "Number", "String"):
        raise ValueError(f"expected a primitive constant, got '{value_kind(value)}'")
    return check_value(value)


# ============== Base ==============

class RegistryModel(BaseModel):
    """Immutable model with camelCase interchange names and no unknown fields."""

    model_config = ConfigDict(
        alias_generator=to_camel,
        populate_by_name=True,
        extra="forbid",
        frozen=True,
    )


# ============== Administrative Metadata ==============

class AdministrativeMetadata(RegistryModel):
    name: str = Field(..., min_length=1, description="Human label")
    description: str = ""
    created: datetime = Field(default_factory=utcnow)
    modified: datetime = Field(default_factory=utcnow)
    version: int = Field(default=1, ge=1)

    @field_validator("created", "modified")
    @classmethod
    def _as_utc(cls, value: datetime) -> datetime:
        if value.tzinfo is None:
            value = value.replace(tzinfo=timezone.utc)
        return value.astimezone(timezone.utc)

    @model_validator(mode="after")
    def _modified_not_before_created(self) -> "AdministrativeMetadata":
        if self.modified < self.created:
            raise ValueError("modified must not be earlier than created")
        return self

    @classmethod
    def new(cls, name: str, description: str = "") -> "AdministrativeMetadata":
        now = utcnow()
        return cls(name=name, description=description, created=now, modified=now)

    def bumped(self, previous: "AdministrativeMetadata") -> "AdministrativeMetadata":
        """Metadata for an update replacing an entity that carried *previous*."""
        return self.model_copy(update={
            "created": previous.created,
            "modified": max(utcnow(), previous.created),
            "version": previous.version + 1,
        })


# ============== Atomic Data Type Schemas ==============

class Restrictions(RegistryModel):
    permitted_values: Optional[Tuple[Any, ...]] = None
    forbidden_values: Optional[Tuple[Any, ...]] = None
    regex: Optional[str] = None
    min_length: Optional[int] = Field(None, ge=0)
    max_length: Optional[int] = Field(None, ge=0)
    min_value: Optional[Union[StrictInt, StrictFloat]] = None
    max_value: Optional[Union[StrictInt, StrictFloat]] = None

    @field_validator("permitted_values", "forbidden_values")
    @classmethod
    def _constants(cls, values: Optional[Tuple[Any, ...]]) -> Optional[Tuple[Any, ...]]:
        if values is None:
            return None
        return tuple(check_scalar(v) for v in values)

    @model_validator(mode="after")
    def _bounds(self) -> "Restrictions":
        if self.min_length is not None and self.max_length is not None \
                and self.min_length > self.max_length:
            raise ValueError("minLength must not exceed maxLength")
        if self.min_value is not None and self.max_value is not None \
                and as_decimal(self.min_value) > as_decimal(self.max_value):
            raise ValueError("minValue must not exceed maxValue")
        if self.permitted_values and self.forbidden_values:
            overlap = {value_key(v) for v in self.permitted_values} & \
                {value_key(v) for v in self.forbidden_values}
            if overlap:
                shown = sorted(str(key[1]) for key in overlap)
                raise ValueError(f"values both permitted and forbidden: {shown}")
        return self

    @property
    def has_syntax_checks(self) -> bool:
        """Whether anything beyond the enumerations restricts the value space."""
        return any(v is not None for v in (
            self.regex, self.min_length, self.max_length, self.min_value, self.max_value))


class AtomicDataType(RegistryModel):
    entity_type: Literal["AtomicDataType"] = "AtomicDataType"
    pid: Pid
    meta: AdministrativeMetadata
    kind: PrimitiveKind
    restrictions: Restrictions = Field(default_factory=Restrictions)
    parent: Optional[Pid] = None

    @model_validator(mode="after")
    def _restrictions_fit_kind(self) -> "AtomicDataType":
        r = self.restrictions
        if self.kind is not PrimitiveKind.STRING:
            for name in ("regex", "min_length", "max_length"):
                if getattr(r, name) is not None:
                    raise ValueError(f"{to_camel(name)} is only allowed for String types")
        if self.kind not in (PrimitiveKind.INTEGER, PrimitiveKind.NUMBER):
            for name in ("min_value", "max_value"):
                if getattr(r, name) is not None:
                    raise ValueError(f"{to_camel(name)} is only allowed for Integer and Number types")
        return self

    def outbound(self) -> List[Tuple[EdgeLabel, str]]:
        return [(EdgeLabel.INHERITS_FROM, self.parent)] if self.parent else []

    def accept(self, visitor: Any, graph: Any) -> Any:
        return visitor.visit_atomic_data_type(self, graph)


# ============== Attribute Schemas ==============

class CardinalityRange(RegistryModel):
    lower: int = Field(..., ge=0)
    upper: Optional[int] = None

    @model_validator(mode="after")
    def _bounds(self) -> "CardinalityRange":
        if self.upper is not None:
            if self.upper < self.lower:
                raise ValueError(f"upper ({self.upper}) must not be below lower ({self.lower})")
            if self.upper < 1:
                raise ValueError("upper must be at least 1")
        return self

    @property
    def kind(self) -> CardinalityKind:
        if self.upper is None:
            return CardinalityKind.UNLIMITED_LIST
        if self.upper >= 2:
            return CardinalityKind.LIMITED_LIST
        if self.lower == 0:
            return CardinalityKind.OPTIONAL_SINGLE
        return CardinalityKind.MANDATORY_SINGLE

    @property
    def allows_many(self) -> bool:
        return self.upper is None or self.upper >= 2

    def admits(self, count: int) -> bool:
        return count >= self.lower and (self.upper is None or count <= self.upper)

    def contains(self, other: "CardinalityRange") -> bool:
        """Whether every count *other* admits is admitted here."""
        if other.lower < self.lower:
            return False
        if self.upper is None:
            return True
        return other.upper is not None and other.upper <= self.upper

    def intersect(self, other: "CardinalityRange") -> Optional["CardinalityRange"]:
        lower = max(self.lower, other.lower)
        uppers = [u for u in (self.upper, other.upper) if u is not None]
        upper = min(uppers) if uppers else None
        if upper is not None and upper < lower:
            return None
        return CardinalityRange(lower=lower, upper=upper)

    def __str__(self) -> str:
        return f"{self.lower}..{'n' if self.upper is None else self.upper}"


def _mandatory_single() -> CardinalityRange:
    return CardinalityRange(lower=1, upper=1)


class Attribute(RegistryModel):
    entity_type: Literal["Attribute"] = "Attribute"
    pid: Pid
    meta: AdministrativeMetadata
    data_type: Pid
    cardinality: CardinalityRange = Field(default_factory=_mandatory_single)
    default_value: Any = None

    @field_validator("default_value")
    @classmethod
    def _default_kind(cls, value: Any) -> Any:
        return None if value is None else check_value(value)

    def outbound(self) -> List[Tuple[EdgeLabel, str]]:
        return [(EdgeLabel.CONFORMS_TO, self.data_type)]

    def accept(self, visitor: Any, graph: Any) -> Any:
        return visitor.visit_attribute(self, graph)


# ============== Type Profile Schemas ==============

class ValidationPolicy(RegistryModel):
    combinator: Combinator = Combinator.ALL
    allow_additional: bool = False


def _no_duplicates(values: Tuple[str, ...], what: str) -> Tuple[str, ...]:
    seen = set()
    for value in values:
        if value in seen:
            raise ValueError(f"duplicate {what} '{value}'")
        seen.add(value)
    return values


class TypeProfile(RegistryModel):
    entity_type: Literal["TypeProfile"] = "TypeProfile"
    pid: Pid
    meta: AdministrativeMetadata
    attributes: Tuple[Pid, ...] = ()
    policy: ValidationPolicy = Field(default_factory=ValidationPolicy)
    parents: Tuple[Pid, ...] = ()

    @field_validator("attributes")
    @classmethod
    def _unique_attributes(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        return _no_duplicates(value, "attribute")

    @field_validator("parents")
    @classmethod
    def _unique_parents(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        return _no_duplicates(value, "parent")

    def outbound(self) -> List[Tuple[EdgeLabel, str]]:
        return [(EdgeLabel.INHERITS_FROM, p) for p in self.parents] + \
            [(EdgeLabel.HAS_ATTRIBUTE, a) for a in self.attributes]

    def accept(self, visitor: Any, graph: Any) -> Any:
        return visitor.visit_type_profile(self, graph)


# ============== Technology Interface Schemas ==============

class TechnologyInterface(RegistryModel):
    entity_type: Literal["TechnologyInterface"] = "TechnologyInterface"
    pid: Pid
    meta: AdministrativeMetadata
    inputs: Tuple[Pid, ...] = ()
    outputs: Tuple[Pid, ...] = ()
    adapters: Tuple[Pid, ...] = ()

    @model_validator(mode="after")
    def _disjoint(self) -> "TechnologyInterface":
        _no_duplicates(self.inputs, "input")
        _no_duplicates(self.outputs, "output")
        _no_duplicates(self.adapters, "adapter")
        overlap = set(self.inputs) & set(self.outputs)
        if overlap:
            raise ValueError(f"attributes used as input and output: {sorted(overlap)}")
        return self

    def outbound(self) -> List[Tuple[EdgeLabel, str]]:
        return [(EdgeLabel.HAS_ATTRIBUTE, a) for a in self.inputs] + \
            [(EdgeLabel.RETURNS_ATTRIBUTE, a) for a in self.outputs] + \
            [(EdgeLabel.REFERENCES_ADAPTER, a) for a in self.adapters]

    def accept(self, visitor: Any, graph: Any) -> Any:
        return visitor.visit_technology_interface(self, graph)


# ============== Operation Schemas ==============

class AttributeMapping(RegistryModel):
    input_attribute: Optional[Pid] = None
    output_attribute: Pid
    constant_value: Any = None
    index: Optional[int] = Field(None, ge=0)
    template: Optional[str] = None
    marker: Optional[str] = Field(None, min_length=1)

    @field_validator("constant_value")
    @classmethod
    def _constant_kind(cls, value: Any) -> Any:
        return None if value is None else check_value(value)

    @model_validator(mode="after")
    def _roles(self) -> "AttributeMapping":
        if (self.input_attribute is None) == (self.constant_value is None):
            raise ValueError("exactly one of inputAttribute and constantValue is required")
        # the configured default marker is checked by MappingCompatibility
        if self.template is not None and self.marker is not None and self.marker not in self.template:
            raise ValueError(f"template does not contain the marker '{self.marker}'")
        return self

    def effective_marker(self, default: str = DEFAULT_MARKER) -> str:
        return self.marker or default


class OperationStep(RegistryModel):
    index: int = Field(..., ge=0)
    technology_interface: Optional[Pid] = None
    operation: Optional[Pid] = None
    steps: Optional[Tuple["OperationStep", ...]] = None
    input_mappings: Tuple[AttributeMapping, ...] = ()
    output_mappings: Tuple[AttributeMapping, ...] = ()

    @model_validator(mode="after")
    def _single_target(self) -> "OperationStep":
        targets = [t for t in (self.technology_interface, self.operation, self.steps) if t is not None]
        if len(targets) != 1:
            raise ValueError("a step targets exactly one of technologyInterface, operation or steps")
        if self.steps is not None:
            _strictly_increasing(self.steps)
        return self

    @property
    def target_pid(self) -> Optional[str]:
        return self.technology_interface or self.operation

    @property
    def mappings(self) -> Tuple[AttributeMapping, ...]:
        return self.input_mappings + self.output_mappings


def _strictly_increasing(steps: Tuple[OperationStep, ...]) -> None:
    if not steps:
        raise ValueError("step list must not be empty")
    indices = [s.index for s in steps]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError(f"step indices must be strictly increasing, got {indices}")


def iter_steps(steps: Optional[Tuple[OperationStep, ...]]) -> Iterator[OperationStep]:
    """Depth-first walk over steps including nested step lists."""
    for step in steps or ():
        yield step
        yield from iter_steps(step.steps)


class Operation(RegistryModel):
    entity_type: Literal["Operation"] = "Operation"
    pid: Pid
    meta: AdministrativeMetadata
    executable_on: Pid
    returns: Tuple[Pid, ...] = ()
    steps: Tuple[OperationStep, ...]

    @model_validator(mode="after")
    def _steps(self) -> "Operation":
        _strictly_increasing(self.steps)
        _no_duplicates(self.returns, "return attribute")
        return self

    def outbound(self) -> List[Tuple[EdgeLabel, str]]:
        edges = [(EdgeLabel.EXECUTABLE_ON, self.executable_on)]
        edges += [(EdgeLabel.RETURNS_ATTRIBUTE, a) for a in self.returns]
        for step in iter_steps(self.steps):
            if step.target_pid:
                edges.append((EdgeLabel.HAS_STEP_TARGET, step.target_pid))
            for mapping in step.mappings:
                if mapping.input_attribute:
                    edges.append((EdgeLabel.MAPS_INPUT, mapping.input_attribute))
                edges.append((EdgeLabel.MAPS_OUTPUT, mapping.output_attribute))
        return list(dict.fromkeys(edges))

    def accept(self, visitor: Any, graph: Any) -> Any:
        return visitor.visit_operation(self, graph)


OperationStep.model_rebuild()

Entity = Annotated[
    Union[AtomicDataType, TypeProfile, Attribute, TechnologyInterface, Operation],
    Field(discriminator="entity_type"),
]


# ============== Record Schemas ==============

class InformationRecord(RootModel[Dict[str, Any]]):
    """Key-value pairs keyed by Attribute or DataType Pid."""

    @field_validator("root")
    @classmethod
    def _entries(cls, entries: Dict[str, Any]) -> Dict[str, Any]:
        checked = {}
        for key, value in entries.items():
            if not re.match(PID_PATTERN, key):
                raise ValueError(f"record key '{key}' is not a Pid")
            if value is None:
                raise ValueError(f"record key '{key}' has no value")
            checked[key] = check_value(value)
        return checked


# ============== Diagnostic Schemas ==============

class ValidationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    severity: Severity
    rule: str
    entity: str
    message: str = Field(..., min_length=1)

    @classmethod
    def error(cls, rule: str, entity: str, message: str) -> "ValidationResult":
        return cls(severity=Severity.ERROR, rule=rule, entity=entity, message=message)

    @classmethod
    def warning(cls, rule: str, entity: str, message: str) -> "ValidationResult":
        return cls(severity=Severity.WARNING, rule=rule, entity=entity, message=message)

    @classmethod
    def info(cls, rule: str, entity: str, message: str) -> "ValidationResult":
        return cls(severity=Severity.INFO, rule=rule, entity=entity, message=message)

    @staticmethod
    def combine(*groups: List["ValidationResult"]) -> List["ValidationResult"]:
        return [result for group in groups for result in group]


def has_errors(results: List[ValidationResult]) -> bool:
    return any(r.severity is Severity.ERROR for r in results)


def diagnostic_document(results: List[ValidationResult]) -> List[dict]:
    return [r.model_dump(mode="json") for r in results]


# ============== Inheritance Schemas ==============

class Linearization(RegistryModel):
    profile: Pid
    order: Tuple[Pid, ...]
    diagnostics: Tuple[ValidationResult, ...] = ()


class EffectiveAttribute(RegistryModel):
    data_type: Pid
    cardinality: CardinalityRange
    origin: Pid


class EffectiveProfile(RegistryModel):
    profile: Pid
    attributes: Dict[str, EffectiveAttribute]
    policy: ValidationPolicy
    diagnostics: Tuple[ValidationResult, ...] = ()


# ============== Operation Planning Schemas ==============

class DataflowEdge(RegistryModel):
    producer: Union[int, Literal["input"]]
    attribute: Pid
    consumer: Union[int, Literal["output"]]


class ExecutionPlan(RegistryModel):
    operation: Pid
    stages: Tuple[Tuple[int, ...], ...]
    dataflow_edges: Tuple[DataflowEdge, ...] = ()
    step_targets: Dict[int, str] = Field(default_factory=dict)
    subplans: Dict[int, "ExecutionPlan"] = Field(default_factory=dict)

    def stage_of(self, index: int) -> int:
        for position, stage in enumerate(self.stages):
            if index in stage:
                return position
        raise KeyError(index)


ExecutionPlan.model_rebuild()


class RecordAssociations(RegistryModel):
    buckets: Dict[AssociationMechanism, Tuple[Pid, ...]]
    diagnostics: Tuple[ValidationResult, ...] = ()


# ============== Adapter Declaration Schemas ==============

class AdapterDeclaration(RegistryModel):
    adapter_pid: Pid
    implements_interface_pid: Pid
    builtin: str = Field(..., description="Regex, Template, FixtureLookup or unsupported")
    serial: Optional[bool] = None
    options: Dict[str, str] = Field(default_factory=dict)


# ============== Request Schemas ==============

class RecordValidationRequest(BaseModel):
    record: InformationRecord
    profile: Pid


class RecordOperationsRequest(BaseModel):
    record: InformationRecord


class ExecuteRequest(BaseModel):
    input: Any = Field(..., description="Value for the operation's executable-on attribute")
