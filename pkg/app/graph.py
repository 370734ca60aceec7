"""Embedded labeled property graph holding every registry entity.

Entities are nodes keyed by Pid; the references each entity declares become
labeled edges (edge key = label). Adapter Pids referenced by technology
interfaces are kept as external endpoint nodes.

Locking is the caller's job: wrap reads in ``store.lock.read()`` and mutations
in ``store.lock.write()``.
"""
import json
import logging
import os
import re
import tempfile
import threading
from collections import deque
from contextlib import contextmanager
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Type, Union

import networkx as nx

from app.exceptions import (
    EntityInvariantError,
    EntityKindError,
    EntityNotFoundError,
    SnapshotError,
)
from app.schemas import EdgeLabel
from app.serialization import dumps_canonical, entity_document, load_entity

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
EXTERNAL = "external"
PREFIX_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

Triple = Tuple[str, str, str]
LabelLike = Union[EdgeLabel, str]


def _label(label: LabelLike) -> str:
    return label.value if isinstance(label, EdgeLabel) else EdgeLabel(label).value


def _rotate(cycle: Sequence[str]) -> Tuple[str, ...]:
    start = cycle.index(min(cycle))
    return tuple(cycle[start:]) + tuple(cycle[:start])


def find_cycles(edges: Iterable[Triple], labels: Iterable[LabelLike]) -> List[List[str]]:
    """Elementary cycles over edges whose label is in *labels*.

    Each cycle is reported once, rotated to start at its smallest Pid; the list
    is sorted.
    """
    wanted = {_label(label) for label in labels}
    digraph = nx.DiGraph()
    digraph.add_edges_from((source, target) for source, label, target in edges if label in wanted)
    cycles = {_rotate(cycle) for cycle in nx.simple_cycles(digraph)}
    return [list(cycle) for cycle in sorted(cycles)]


class ReadWriteLock:
    """Many readers or one writer."""

    def __init__(self):
        self._condition = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self) -> Iterator[None]:
        with self._condition:
            while self._writer:
                self._condition.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._condition:
                self._readers -= 1
                if not self._readers:
                    self._condition.notify_all()

    @contextmanager
    def write(self) -> Iterator[None]:
        with self._condition:
            while self._writer or self._readers:
                self._condition.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._condition:
                self._writer = False
                self._condition.notify_all()


class PidMinter:
    """Counter based Pid minting; a Pid is never issued twice."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counters: Dict[str, int] = {}
        self._issued: Set[str] = set()

    def reserve(self, pid: str) -> None:
        with self._lock:
            self._issued.add(pid)

    def mint(self, prefix: str, taken=lambda pid: False) -> str:
        if not prefix:
            raise ValueError("Pid prefix must not be empty")
        if not PREFIX_PATTERN.match(prefix):
            raise ValueError(f"Invalid Pid prefix '{prefix}'")
        with self._lock:
            while True:
                counter = self._counters.get(prefix, 0) + 1
                self._counters[prefix] = counter
                pid = f"{prefix}/{counter:04d}"
                if pid not in self._issued and not taken(pid):
                    self._issued.add(pid)
                    return pid


class GraphStore:
    def __init__(self, minter: Optional[PidMinter] = None):
        self._entities: Dict[str, object] = {}
        self._graph = nx.MultiDiGraph()
        self._minter = minter or PidMinter()
        self.lock = ReadWriteLock()
        self.revision = 0

    # ------------------------------------------------------------ identity

    def mint_pid(self, prefix: str) -> str:
        return self._minter.mint(prefix, taken=lambda pid: pid in self._entities)

    def __contains__(self, pid: str) -> bool:
        return pid in self._entities

    def __len__(self) -> int:
        return len(self._entities)

    def find(self, pid: str):
        return self._entities.get(pid)

    def get(self, pid: str):
        try:
            return self._entities[pid]
        except KeyError:
            raise EntityNotFoundError(pid) from None

    def get_typed(self, pid: str, entity_cls: Union[Type, Tuple[Type, ...]]):
        entity = self.get(pid)
        if not isinstance(entity, entity_cls):
            classes = entity_cls if isinstance(entity_cls, tuple) else (entity_cls,)
            expected = " or ".join(cls.__name__ for cls in classes)
            raise EntityKindError(pid, expected, entity.entity_type)
        return entity

    def entities(self, kind: Optional[Union[str, Type]] = None) -> List:
        """All entities sorted by Pid, optionally restricted to one kind."""
        selected = []
        for pid in sorted(self._entities):
            entity = self._entities[pid]
            if kind is None or (isinstance(kind, str) and entity.entity_type == kind) \
                    or (isinstance(kind, type) and isinstance(entity, kind)):
                selected.append(entity)
        return selected

    # ----------------------------------------------------------- mutation

    def upsert(self, entity):
        """Insert or replace *entity*; updates bump the version. Returns the stored entity."""
        previous = self._entities.get(entity.pid)
        if previous is not None:
            entity = entity.model_copy(update={"meta": entity.meta.bumped(previous.meta)})
        self._insert(entity)
        return entity

    def _insert(self, entity) -> None:
        self._entities[entity.pid] = entity
        self._minter.reserve(entity.pid)
        if entity.pid in self._graph:
            self._graph.remove_edges_from(list(self._graph.out_edges(entity.pid, keys=True)))
        self._graph.add_node(entity.pid, kind=entity.entity_type)
        for label, target in entity.outbound():
            if label is EdgeLabel.REFERENCES_ADAPTER and target not in self._graph:
                self._graph.add_node(target, kind=EXTERNAL)
            self._graph.add_edge(entity.pid, target, key=label.value)
        self._prune_external()

    def remove(self, pid: str) -> None:
        self.get(pid)
        del self._entities[pid]
        self._graph.remove_node(pid)
        self._prune_external()

    def _prune_external(self) -> None:
        orphans = [node for node, kind in self._graph.nodes(data="kind")
                   if kind == EXTERNAL and self._graph.in_degree(node) == 0]
        self._graph.remove_nodes_from(orphans)

    def clone(self) -> "GraphStore":
        """Independent copy sharing the Pid minter; used to validate before publishing."""
        candidate = GraphStore(minter=self._minter)
        candidate._entities = dict(self._entities)
        candidate._graph = self._graph.copy()
        candidate.revision = self.revision
        return candidate

    def commit(self, candidate: "GraphStore") -> None:
        self._entities = candidate._entities
        self._graph = candidate._graph
        self.revision += 1

    def clear(self) -> None:
        self._entities = {}
        self._graph = nx.MultiDiGraph()
        self.revision += 1

    # ------------------------------------------------------------ queries

    def _require_node(self, pid: str) -> None:
        if pid not in self._entities and self._graph.nodes.get(pid, {}).get("kind") != EXTERNAL:
            raise EntityNotFoundError(pid)

    def _adjacent(self, pid: str, label: str, direction: str) -> List[str]:
        if direction == "out":
            entity = self._entities.get(pid)
            targets = [t for l, t in entity.outbound() if l.value == label] if entity else []
            return list(dict.fromkeys(targets))
        if direction == "in":
            sources = [s for s, _, key in self._graph.in_edges(pid, keys=True) if key == label]
            return list(dict.fromkeys(sources))
        raise ValueError(f"direction must be 'in' or 'out', got '{direction}'")

    def neighbors(self, pid: str, label: LabelLike, direction: str = "out") -> List[str]:
        """Adjacent Pids under *label* in insertion order."""
        self._require_node(pid)
        return self._adjacent(pid, _label(label), direction)

    def _label_view(self, labels: Iterable[LabelLike]):
        wanted = {_label(label) for label in labels}
        return nx.subgraph_view(self._graph, filter_edge=lambda u, v, key: key in wanted)

    def reachable(self, from_pid: str, to_pid: str, label: LabelLike) -> bool:
        """Whether a directed path of length at least one leads from one Pid to the other."""
        self._require_node(from_pid)
        self._require_node(to_pid)
        view = self._label_view([label])
        return any(nx.has_path(view, step, to_pid) for step in view.successors(from_pid))

    def closure(self, pid: str, label: LabelLike, direction: str = "out") -> List[str]:
        """Transitive closure in breadth-first order, excluding *pid* itself."""
        self._require_node(pid)
        label = _label(label)
        visited = {pid}
        ordered = []
        queue = deque([pid])
        while queue:
            node = queue.popleft()
            for nxt in self._adjacent(node, label, direction):
                if nxt not in visited:
                    visited.add(nxt)
                    ordered.append(nxt)
                    queue.append(nxt)
        return ordered

    def referrers(self, pid: str) -> List[str]:
        """Entities holding a reference to *pid*, sorted."""
        if pid not in self._graph:
            return []
        return sorted({source for source in self._graph.predecessors(pid) if source != pid})

    def edge_triples(self) -> List[Triple]:
        return [(pid, label.value, target)
                for pid in sorted(self._entities)
                for label, target in self._entities[pid].outbound()]

    def find_cycles(self, labels: Iterable[LabelLike]) -> List[List[str]]:
        return find_cycles(self.edge_triples(), labels)

    def cycles_through(self, pid: str, labels: Iterable[LabelLike]) -> List[List[str]]:
        """Elementary cycles under *labels* that contain *pid*."""
        if pid not in self._graph:
            return []
        view = self._label_view(labels)
        component = (nx.descendants(view, pid) & nx.ancestors(view, pid)) | {pid}
        triples = [(u, key, v) for u, v, key in view.edges(keys=True)
                   if u in component and v in component]
        return [cycle for cycle in find_cycles(triples, labels) if pid in cycle]

    def dangling_edges(self) -> List[Triple]:
        """Edges whose target is neither an entity nor an external endpoint."""
        return [(source, label, target) for source, label, target in self.edge_triples()
                if target not in self._entities and label != EdgeLabel.REFERENCES_ADAPTER.value]

    # ----------------------------------------------------------- snapshots

    def snapshot_document(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "nodes": [entity_document(self._entities[pid]) for pid in sorted(self._entities)],
            "edges": [list(triple) for triple in self.edge_triples()],
        }

    def snapshot_text(self) -> str:
        return dumps_canonical(self.snapshot_document())

    def save_snapshot(self, path: str) -> None:
        text = self.snapshot_text()
        directory = os.path.dirname(os.path.abspath(path))
        temp_path = None
        try:
            handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".snapshot-", suffix=".tmp")
            with os.fdopen(handle, "w", encoding="utf-8", newline="\n") as stream:
                stream.write(text)
            os.replace(temp_path, path)
        except OSError as exc:
            if temp_path and os.path.exists(temp_path):
                os.unlink(temp_path)
            raise SnapshotError(f"Cannot write snapshot '{path}': {exc}") from exc
        logger.info(f"Saved snapshot with {len(self._entities)} entities to {path}")

    def load_snapshot(self, path: str) -> None:
        try:
            with open(path, encoding="utf-8") as stream:
                text = stream.read()
        except OSError as exc:
            raise SnapshotError(f"Cannot read snapshot '{path}': {exc}") from exc
        self.load_snapshot_text(text)
        logger.info(f"Loaded snapshot with {len(self._entities)} entities from {path}")

    def load_snapshot_text(self, text: str) -> None:
        """Replace the store contents with a snapshot document."""
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"Snapshot is not well-formed: {exc}") from exc
        if not isinstance(document, dict) or document.get("version") != SNAPSHOT_VERSION:
            found = document.get("version") if isinstance(document, dict) else None
            raise SnapshotError(
                f"Unsupported snapshot format version {found!r}, expected {SNAPSHOT_VERSION}"
            )
        self.load_documents(document.get("nodes", []), document.get("edges", []))

    def load_documents(self, nodes: Sequence[dict], edges: Optional[Sequence[Sequence[str]]] = None) -> None:
        loaded = GraphStore(minter=self._minter)
        for node in nodes:
            try:
                entity = load_entity(node)
            except EntityInvariantError as exc:
                raise SnapshotError(f"Snapshot holds an invalid entity: {exc}") from exc
            if entity.pid in loaded:
                raise SnapshotError(f"Snapshot holds entity '{entity.pid}' twice")
            loaded._insert(entity)
        dangling = loaded.dangling_edges()
        if dangling:
            source, label, target = dangling[0]
            raise SnapshotError(f"Snapshot edge {source} -{label}-> {target} has no target node")
        if edges is not None:
            declared = [tuple(edge) for edge in edges]
            for source, label, target in declared:
                if source not in loaded or (target not in loaded and label != EdgeLabel.REFERENCES_ADAPTER.value):
                    raise SnapshotError(f"Snapshot edge {source} -{label}-> {target} is dangling")
            if declared != loaded.edge_triples():
                raise SnapshotError("Snapshot edges do not match the references of its nodes")
        self._entities = loaded._entities
        self._graph = loaded._graph
        self.revision += 1
