"""Dataflow planning of operation steps into concurrent stages."""
import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from app.exceptions import OperationInvalidError, UnsatisfiableDependencyError
from app.graph import GraphStore, Triple, find_cycles
from app.schemas import (
    DataflowEdge,
    EdgeLabel,
    ExecutionPlan,
    Operation,
    OperationStep,
    has_errors,
)
from app.validation import RuleSet, validate_entity

logger = logging.getLogger(__name__)

DATAFLOW_LABELS = (
    EdgeLabel.EXECUTABLE_ON,
    EdgeLabel.MAPS_INPUT,
    EdgeLabel.MAPS_OUTPUT,
    EdgeLabel.RETURNS_ATTRIBUTE,
    EdgeLabel.HAS_STEP_TARGET,
)
GROUP_TARGET = "steps"


def step_interface(step: OperationStep) -> Tuple[Set[str], Set[str]]:
    """Attributes a step reads from and writes to the enclosing scope."""
    consumes = {m.input_attribute for m in step.input_mappings if m.input_attribute}
    produces = {m.output_attribute for m in step.output_mappings}
    if step.steps is not None:
        available = {m.output_attribute for m in step.input_mappings}
        produces |= available
        for nested in step.steps:
            nested_consumes, nested_produces = step_interface(nested)
            consumes |= nested_consumes - available
            available |= nested_produces
            produces |= nested_produces
        # output mappings of a group read from the group scope
        consumes |= {m.input_attribute for m in step.output_mappings
                     if m.input_attribute and m.input_attribute not in available}
    return consumes, produces


def _stages(indices: Sequence[int], dependencies: nx.DiGraph) -> Tuple[Tuple[int, ...], ...]:
    stage_of: Dict[int, int] = {}
    previous = 0
    for index in indices:
        stage = max([stage_of[p] + 1 for p in dependencies.predecessors(index)] + [previous])
        stage_of[index] = previous = stage
    grouped: Dict[int, List[int]] = {}
    for index, stage in stage_of.items():
        grouped.setdefault(stage, []).append(index)
    return tuple(tuple(sorted(grouped[stage])) for stage in sorted(grouped))


def plan_steps(operation: Operation, steps: Sequence[OperationStep], available: Set[str],
               returns: Sequence[str] = ()) -> ExecutionPlan:
    """Plan one step list; *available* holds attributes bound before the list runs."""
    dependencies = nx.DiGraph()
    edges: List[DataflowEdge] = []
    produced_by: Dict[str, List[int]] = {}
    interfaces: Dict[int, Tuple[Set[str], Set[str]]] = {}
    targets: Dict[int, str] = {}
    subplans: Dict[int, ExecutionPlan] = {}

    for step in steps:
        dependencies.add_node(step.index)
        consumes, produces = interfaces[step.index] = step_interface(step)
        targets[step.index] = step.target_pid or GROUP_TARGET
        for attribute in sorted(consumes):
            earlier = produced_by.get(attribute)
            if earlier:
                producer = earlier[-1]
                dependencies.add_edge(producer, step.index)
                edges.append(DataflowEdge(producer=producer, attribute=attribute, consumer=step.index))
            elif attribute in available:
                edges.append(DataflowEdge(producer="input", attribute=attribute, consumer=step.index))
            else:
                raise UnsatisfiableDependencyError(operation.pid, step.index, attribute)
        if step.steps is not None:
            in_scope = available | set(produced_by) | {m.output_attribute for m in step.input_mappings}
            subplans[step.index] = plan_steps(operation, step.steps, in_scope)
        for attribute in produces:
            produced_by.setdefault(attribute, []).append(step.index)

    # hazards: a later writer must not overtake an earlier reader or writer
    for step in steps:
        _, produces = interfaces[step.index]
        for earlier in steps:
            if earlier.index >= step.index:
                break
            earlier_consumes, earlier_produces = interfaces[earlier.index]
            if produces & (earlier_consumes | earlier_produces):
                dependencies.add_edge(earlier.index, step.index)

    for attribute in returns:
        if produced_by.get(attribute):
            edges.append(DataflowEdge(producer=produced_by[attribute][-1], attribute=attribute, consumer="output"))
        elif attribute in available:
            edges.append(DataflowEdge(producer="input", attribute=attribute, consumer="output"))

    return ExecutionPlan(
        operation=operation.pid,
        stages=_stages([step.index for step in steps], dependencies),
        dataflow_edges=tuple(edges),
        step_targets=targets,
        subplans=subplans,
    )


def build_plan(operation: Operation) -> ExecutionPlan:
    plan = plan_steps(operation, operation.steps, {operation.executable_on}, operation.returns)
    logger.debug(f"Planned {operation.pid}: {len(plan.stages)} stage(s) {list(plan.stages)}")
    return plan


def plan(operation_pid: str, graph: GraphStore, rules: Optional[RuleSet] = None) -> ExecutionPlan:
    """Validate the operation, then plan it."""
    operation = graph.get_typed(operation_pid, Operation)
    results = validate_entity(operation, graph, rules)
    if has_errors(results):
        raise OperationInvalidError(operation_pid, [r for r in results if r.severity.value == "Error"])
    return build_plan(operation)


def dataflow_triples(plan: ExecutionPlan) -> List[Triple]:
    """Dataflow graph of a plan as labeled edges.

    Steps are ``<operation>#<index>`` nodes; each step also gets its own target
    node so that every step closes a circle with its target.
    """
    operation = plan.operation
    triples: List[Triple] = []
    for edge in plan.dataflow_edges:
        if edge.producer == "input":
            triples.append((operation, EdgeLabel.EXECUTABLE_ON.value, edge.attribute))
        else:
            triples.append((f"{operation}#{edge.producer}", EdgeLabel.MAPS_OUTPUT.value, edge.attribute))
        if edge.consumer == "output":
            triples.append((edge.attribute, EdgeLabel.RETURNS_ATTRIBUTE.value, operation))
        else:
            triples.append((edge.attribute, EdgeLabel.MAPS_INPUT.value, f"{operation}#{edge.consumer}"))
    for index, target in sorted(plan.step_targets.items()):
        step = f"{operation}#{index}"
        target_node = f"{step}@{target}"
        triples.append((step, EdgeLabel.HAS_STEP_TARGET.value, target_node))
        triples.append((target_node, EdgeLabel.MAPS_OUTPUT.value, step))
    return list(dict.fromkeys(triples))


def dataflow_circles(plan: ExecutionPlan) -> List[List[str]]:
    return find_cycles(dataflow_triples(plan), DATAFLOW_LABELS)
