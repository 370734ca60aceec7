"""Exceptions raised by the registry.

Every error carries the structured context the HTTP layer and the CLI need to
render it (Pids, referrers, diagnostics, document positions, step indices).
"""
from typing import Any, Iterable, List, Optional, Sequence


class RegistryError(Exception):
    """Base class for all registry related errors."""


# ============== Documents ==============

class DocumentParseError(RegistryError):
    """Raised if a document is not well-formed JSON."""

    def __init__(self, reason: str, line: int, column: int, position: int):
        self.reason = reason
        self.line = line
        self.column = column
        self.position = position
        super().__init__(
            f"Malformed document: {reason} at line {line} column {column} (char {position})"
        )


class EntityInvariantError(RegistryError):
    """Raised if a document or constructor violates a structural invariant."""

    def __init__(self, problems: Sequence[dict]):
        self.problems = list(problems)
        summary = "; ".join(f"{p['field']}: {p['message']}" for p in self.problems)
        super().__init__(f"Invalid entity: {summary}")

    @classmethod
    def from_pydantic(cls, exc: Any) -> "EntityInvariantError":
        problems = []
        for error in exc.errors():
            loc = ".".join(str(part) for part in error.get("loc", ())) or "<root>"
            if error.get("type") == "extra_forbidden":
                message = f"unknown field '{error['loc'][-1]}'"
            else:
                message = error.get("msg", "invalid value")
            problems.append({"field": loc, "message": message})
        return cls(problems)


class SerializationError(RegistryError):
    """Raised if an entity holds a value that has no canonical text form."""

    def __init__(self, field: str, value: Any):
        self.field = field
        super().__init__(
            f"Field '{field}' holds an unserializable value of type '{type(value).__name__}'"
        )


# ============== Store ==============

class EntityNotFoundError(RegistryError):
    """Raised if a Pid does not resolve to a stored entity."""

    def __init__(self, pid: str):
        self.pid = pid
        super().__init__(f"Entity '{pid}' not found")


class EntityKindError(RegistryError):
    """Raised if an entity has a different kind than the operation requires."""

    def __init__(self, pid: str, expected: str, actual: str):
        self.pid = pid
        self.expected = expected
        self.actual = actual
        super().__init__(f"Entity '{pid}' is a {actual}, expected {expected}")


class InheritanceCycleError(RegistryError):
    """Raised if an inheritance walk runs into a cycle."""

    def __init__(self, path: Sequence[str]):
        self.path = list(path)
        super().__init__("Circular inheritance detected: " + " -> ".join(self.path))


class ReferencedEntityError(RegistryError):
    """Raised if an entity cannot be deleted because others reference it."""

    def __init__(self, pid: str, referrers: Iterable[str]):
        self.pid = pid
        self.referrers = list(referrers)
        super().__init__(
            f"Entity '{pid}' is referenced by: {', '.join(self.referrers)}"
        )


class ValidationFailedError(RegistryError):
    """Raised if validation produced Error-severity results."""

    def __init__(self, results: Sequence[Any]):
        self.results = list(results)
        errors = [r for r in self.results if r.severity.value == "Error"]
        super().__init__(f"Validation failed with {len(errors)} error(s)")


class SnapshotError(RegistryError):
    """Raised if a snapshot cannot be read, written or trusted."""


# ============== Planning ==============

class PlanningError(RegistryError):
    """Base class for planning errors."""


class UnsatisfiableDependencyError(PlanningError):
    """Raised if a step consumes an attribute nothing makes available."""

    def __init__(self, operation: str, step: int, attribute: str):
        self.operation = operation
        self.step = step
        self.attribute = attribute
        super().__init__(
            f"Step {step} of operation '{operation}' consumes attribute '{attribute}' "
            "which is neither produced by an earlier step nor supplied as input"
        )


class OperationInvalidError(PlanningError):
    """Raised if an operation does not validate cleanly."""

    def __init__(self, operation: str, results: Sequence[Any]):
        self.operation = operation
        self.results = list(results)
        super().__init__(f"Operation '{operation}' has validation errors")


# ============== Execution ==============

class ExecutionError(RegistryError):
    """Base class for errors raised while executing an operation."""


class MappingError(ExecutionError):
    """Raised if an attribute mapping cannot be applied."""


class BindingValidationError(ExecutionError):
    """Raised if a value does not validate against its attribute's data type."""

    def __init__(self, attribute: str, data_type: str, results: Sequence[Any]):
        self.attribute = attribute
        self.data_type = data_type
        self.results = list(results)
        reasons = "; ".join(r.message for r in self.results)
        super().__init__(
            f"Value for attribute '{attribute}' does not conform to data type '{data_type}': {reasons}"
        )


class AdapterNotFoundError(ExecutionError):
    """Raised if no registered adapter implements a technology interface."""

    def __init__(self, interface: str, candidates: Sequence[str]):
        self.interface = interface
        self.candidates = list(candidates)
        tried = ", ".join(self.candidates) if self.candidates else "none declared"
        super().__init__(
            f"No usable adapter for technology interface '{interface}' (tried: {tried})"
        )


class AdapterFailureError(ExecutionError):
    """Raised if an adapter fails while executing a step."""

    def __init__(self, step: int, adapter: str, cause: BaseException):
        self.step = step
        self.adapter = adapter
        self.cause = cause
        super().__init__(f"Step {step}: adapter '{adapter}' failed: {cause}")


class RecursionLimitError(ExecutionError):
    """Raised if nested steps or sub-operations exceed the depth limit."""

    def __init__(self, operation: str, limit: int):
        self.operation = operation
        self.limit = limit
        super().__init__(
            f"Recursion limit of {limit} exceeded while executing '{operation}'"
        )


class UnboundReturnError(ExecutionError):
    """Raised if a return attribute is still unbound after the last stage."""

    def __init__(self, operation: str, attributes: List[str]):
        self.operation = operation
        self.attributes = attributes
        super().__init__(
            f"Operation '{operation}' left return attribute(s) unbound: {', '.join(attributes)}"
        )


# ============== Configuration ==============

class ConfigurationError(RegistryError):
    """Raised if an adapter declaration or setting is unusable."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)
