"""Desk-scale execution of operations.

Execution reads the graph and never writes it; callers hold the store's read
lock for the duration of ``OperationExecutor.execute``.
"""
import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence

from app.adapters import AdapterRegistry
from app.exceptions import (
    AdapterFailureError,
    BindingValidationError,
    MappingError,
    RecursionLimitError,
    UnboundReturnError,
)
from app.graph import GraphStore
from app.planning import plan, step_interface
from app.schemas import (
    DEFAULT_MARKER,
    Attribute,
    AttributeMapping,
    ExecutionPlan,
    Operation,
    OperationStep,
    TechnologyInterface,
    ValidationResult,
    iter_steps,
    text_form,
)
from app.validation import RuleSet, validate_instance

logger = logging.getLogger(__name__)

BINDING_RULE = "Binding"


def normalise(value: Any, attribute: Attribute) -> Any:
    """Wrap scalars bound to list-valued attributes."""
    if attribute.cardinality.allows_many and not isinstance(value, list):
        return [value]
    return value


class ValueBinding:
    """Attribute values accumulated during execution, validated on bind."""

    def __init__(self, graph: GraphStore, values: Optional[Dict[str, Any]] = None):
        self._graph = graph
        self._values: Dict[str, Any] = dict(values or {})

    def bind(self, attribute_pid: str, value: Any) -> None:
        attribute = self._graph.get_typed(attribute_pid, Attribute)
        value = normalise(value, attribute)
        values = value if isinstance(value, list) else [value]
        problems: List[ValidationResult] = []
        if isinstance(value, list) and not attribute.cardinality.allows_many:
            problems.append(ValidationResult.error(
                BINDING_RULE, attribute_pid, "a list was given but the attribute admits a single value"))
        elif not attribute.cardinality.admits(len(values)):
            problems.append(ValidationResult.error(
                BINDING_RULE, attribute_pid, f"{len(values)} value(s) given, cardinality is {attribute.cardinality}"))
        for item in values:
            problems += validate_instance(item, attribute.data_type, self._graph)
        if problems:
            raise BindingValidationError(attribute_pid, attribute.data_type, problems)
        self._values[attribute_pid] = copy.deepcopy(value)

    def get(self, attribute_pid: str) -> Any:
        try:
            return self._values[attribute_pid]
        except KeyError:
            raise MappingError(f"Attribute '{attribute_pid}' is unbound") from None

    def __contains__(self, attribute_pid: str) -> bool:
        return attribute_pid in self._values

    def merge(self, values: Dict[str, Any]) -> None:
        """Take over already validated values."""
        self._values.update(values)

    def copy(self) -> "ValueBinding":
        return ValueBinding(self._graph, copy.deepcopy(self._values))

    def restricted(self, attributes: Iterable[str]) -> Dict[str, Any]:
        return {pid: copy.deepcopy(self._values[pid]) for pid in attributes if pid in self._values}

    def as_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._values)


def apply_mapping(mapping: AttributeMapping, bindings: ValueBinding, graph: GraphStore,
                  target: Optional[ValueBinding] = None, marker: str = DEFAULT_MARKER) -> ValueBinding:
    """Apply one mapping: source, then index, then template, then bind with validation.

    Values are read from *bindings* and bound into *target* (default: *bindings*).
    """
    target = bindings if target is None else target
    if mapping.constant_value is not None:
        value = copy.deepcopy(mapping.constant_value)
        source = "constant"
    else:
        value = bindings.get(mapping.input_attribute)
        source = f"'{mapping.input_attribute}'"
    if mapping.index is not None:
        items = value if isinstance(value, list) else [value]
        if mapping.index >= len(items):
            raise MappingError(
                f"Index {mapping.index} is out of range for {source} holding {len(items)} value(s)")
        value = items[mapping.index]
    if mapping.template is not None:
        value = mapping.template.replace(mapping.effective_marker(marker), text_form(value))
    target.bind(mapping.output_attribute, value)
    return target


class OperationExecutor:
    def __init__(self, graph: GraphStore, adapters: AdapterRegistry, marker: str = DEFAULT_MARKER,
                 max_depth: int = 32, max_workers: int = 4, rules: Optional[RuleSet] = None):
        self.graph = graph
        self.adapters = adapters
        self.marker = marker
        self.max_depth = max_depth
        self.max_workers = max_workers
        self.rules = rules

    def execute(self, operation_pid: str, input_value: Any) -> Dict[str, Any]:
        """Run an operation on *input_value*; returns its return attribute bindings."""
        operation = self.graph.get_typed(operation_pid, Operation)
        plans: Dict[str, ExecutionPlan] = {operation_pid: plan(operation_pid, self.graph, self.rules)}
        self.preflight(operation, plans)
        bindings = ValueBinding(self.graph)
        bindings.bind(operation.executable_on, input_value)
        logger.info(f"Executing {operation_pid} in {len(plans[operation_pid].stages)} stage(s)")
        return self._run_operation(operation, plans, bindings, depth=1)

    def preflight(self, operation: Operation, plans: Optional[Dict[str, ExecutionPlan]] = None,
                  depth: int = 1) -> Dict[str, ExecutionPlan]:
        """Plan every sub-operation and check every interface reachable from *operation*.

        Nothing runs before this succeeds; the plans are keyed by operation Pid.
        """
        plans = {} if plans is None else plans
        if depth > self.max_depth:
            raise RecursionLimitError(operation.pid, self.max_depth)
        for step in iter_steps(operation.steps):
            if step.technology_interface:
                self.adapters.select(self.graph.get_typed(step.technology_interface, TechnologyInterface))
            elif step.operation:
                if step.operation not in plans:
                    plans[step.operation] = plan(step.operation, self.graph, self.rules)
                self.preflight(self.graph.get_typed(step.operation, Operation), plans, depth + 1)
        return plans

    def _run_operation(self, operation: Operation, plans: Dict[str, ExecutionPlan],
                       bindings: ValueBinding, depth: int) -> Dict[str, Any]:
        self._run_steps(operation, operation.steps, plans[operation.pid], plans, bindings, depth)
        missing = [pid for pid in operation.returns if pid not in bindings]
        if missing:
            raise UnboundReturnError(operation.pid, missing)
        return bindings.restricted(operation.returns)

    def _run_steps(self, operation: Operation, steps: Sequence[OperationStep],
                   execution_plan: ExecutionPlan, plans: Dict[str, ExecutionPlan],
                   bindings: ValueBinding, depth: int) -> None:
        if depth > self.max_depth:
            raise RecursionLimitError(operation.pid, self.max_depth)
        by_index = {step.index: step for step in steps}
        for stage in execution_plan.stages:
            scope = bindings.copy()
            concurrent = [i for i in stage if not self._serial(by_index[i])]
            outputs: Dict[int, Dict[str, Any]] = {}
            if len(concurrent) > 1 and self.max_workers > 1:
                with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                    futures = {i: pool.submit(self._run_step, operation, by_index[i], execution_plan, plans,
                                              scope, depth) for i in concurrent}
                    for index, future in futures.items():
                        outputs[index] = future.result()
            else:
                for index in concurrent:
                    outputs[index] = self._run_step(operation, by_index[index], execution_plan, plans,
                                                   scope, depth)
            for index in stage:
                if index not in outputs:
                    outputs[index] = self._run_step(operation, by_index[index], execution_plan, plans,
                                                   scope, depth)
            for index in sorted(outputs):
                bindings.merge(outputs[index])

    def _serial(self, step: OperationStep) -> bool:
        if not step.technology_interface:
            return False
        interface = self.graph.get_typed(step.technology_interface, TechnologyInterface)
        return self.adapters.select(interface)[1].serial

    def _run_step(self, operation: Operation, step: OperationStep, execution_plan: ExecutionPlan,
                  plans: Dict[str, ExecutionPlan], scope: ValueBinding, depth: int) -> Dict[str, Any]:
        logger.debug(f"Running step {step.index} of {operation.pid}")
        if step.steps is not None:
            local = scope.copy()
            for mapping in step.input_mappings:
                apply_mapping(mapping, scope, self.graph, target=local, marker=self.marker)
            self._run_steps(operation, step.steps, execution_plan.subplans[step.index], plans, local,
                            depth + 1)
            produced = local.restricted(step_interface(step)[1])
        else:
            local = ValueBinding(self.graph)
            for mapping in step.input_mappings:
                apply_mapping(mapping, scope, self.graph, target=local, marker=self.marker)
            if step.technology_interface:
                self._invoke_adapter(step, local)
            else:
                self._invoke_operation(step, plans, local, depth)
            produced = {}
        out = ValueBinding(self.graph, produced)
        for mapping in step.output_mappings:
            apply_mapping(mapping, local, self.graph, target=out, marker=self.marker)
        return out.as_dict()

    def _invoke_adapter(self, step: OperationStep, local: ValueBinding) -> None:
        interface = self.graph.get_typed(step.technology_interface, TechnologyInterface)
        adapter_pid, binding = self.adapters.select(interface)
        missing = [pid for pid in interface.inputs if pid not in local]
        if missing:
            raise MappingError(f"Step {step.index}: interface inputs {missing} are unbound")
        arguments = [local.get(pid) for pid in interface.inputs]
        logger.debug(f"Step {step.index}: invoking adapter {adapter_pid}")
        try:
            results = binding.adapter.execute(arguments)
            if len(results) != len(interface.outputs):
                raise ValueError(f"returned {len(results)} value(s) for {len(interface.outputs)} output(s)")
            for attribute_pid, value in zip(interface.outputs, results):
                local.bind(attribute_pid, value)
        except Exception as exc:
            logger.error(f"Step {step.index}: adapter {adapter_pid} failed: {exc}")
            raise AdapterFailureError(step.index, adapter_pid, exc) from exc

    def _invoke_operation(self, step: OperationStep, plans: Dict[str, ExecutionPlan], local: ValueBinding,
                          depth: int) -> None:
        if depth + 1 > self.max_depth:
            raise RecursionLimitError(step.operation, self.max_depth)
        sub_operation = self.graph.get_typed(step.operation, Operation)
        sub_bindings = ValueBinding(self.graph)
        sub_bindings.bind(sub_operation.executable_on, local.get(sub_operation.executable_on))
        returned = self._run_operation(sub_operation, plans, sub_bindings, depth + 1)
        local.merge(returned)
