import json
import logging
from typing import Iterable, List, Optional, Tuple

import networkx as nx
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from app import models
from app.exceptions import ReferencedEntityError, ValidationFailedError
from app.graph import GraphStore
from app.schemas import ValidationResult, has_errors
from app.seed import seed_entities
from app.serialization import serialize_entity
from app.validation import RuleSet

logger = logging.getLogger(__name__)


# ============== Relational mirror ==============

def mirror_put(db: Session, entity) -> None:
    """Write an entity and its edges to the mirror tables (not committed)"""
    row = db.get(models.EntityRow, entity.pid)
    if row is None:
        row = models.EntityRow(pid=entity.pid)
        db.add(row)
    row.entity_type = entity.entity_type
    row.document = serialize_entity(entity)
    row.version = entity.meta.version
    row.edges = [
        models.EdgeRow(label=label.value, to_pid=target, position=position)
        for position, (label, target) in enumerate(entity.outbound())
    ]


def mirror_delete(db: Session, pid: str) -> None:
    """Remove an entity row; its edges go with it"""
    row = db.get(models.EntityRow, pid)
    if row is not None:
        db.delete(row)


def _publish(store: GraphStore, candidate: GraphStore, db: Optional[Session],
             puts: Iterable = (), deletes: Iterable[str] = ()) -> None:
    """Commit the mirror first, then publish the candidate store"""
    if db is not None:
        try:
            for entity in puts:
                mirror_put(db, entity)
            for pid in deletes:
                mirror_delete(db, pid)
            db.commit()
        except SQLAlchemyError:
            db.rollback()
            logger.error("Database mirror write failed; store left unchanged")
            raise
    store.commit(candidate)


def load_from_database(db: Session, store: GraphStore) -> int:
    """Rebuild the in-memory store from the mirror tables"""
    rows = db.query(models.EntityRow).order_by(models.EntityRow.pid).all()
    nodes = [json.loads(row.document) for row in rows]
    edges = [[row.pid, edge.label, edge.to_pid] for row in rows for edge in row.edges]
    with store.lock.write():
        store.load_documents(nodes, edges)
    logger.info(f"Loaded {len(rows)} entities from the database")
    return len(rows)


# ============== Entity CRUD ==============

def get_entity(store: GraphStore, pid: str):
    """Get an entity by Pid"""
    with store.lock.read():
        return store.get(pid)


def list_entities(store: GraphStore) -> List:
    """Get all entities sorted by Pid"""
    with store.lock.read():
        return store.entities()


def put_entity(store: GraphStore, entity, rules: RuleSet, db: Optional[Session] = None):
    """
    Validate an entity against the store as it would look afterwards and publish it.
    Nothing changes when any rule reports an Error.
    """
    with store.lock.write():
        candidate = store.clone()
        stored = candidate.upsert(entity)
        results = rules.validate(stored, candidate)
        if has_errors(results):
            logger.warning(f"Rejected {entity.pid}: {sum(r.severity.value == 'Error' for r in results)} error(s)")
            raise ValidationFailedError(results)
        _publish(store, candidate, db, puts=[stored])
    logger.info(f"Stored {stored.pid} (version {stored.meta.version})")
    return stored


def delete_entity(store: GraphStore, pid: str, db: Optional[Session] = None) -> None:
    """Delete an entity nothing else references"""
    with store.lock.write():
        store.get(pid)
        referrers = store.referrers(pid)
        if referrers:
            raise ReferencedEntityError(pid, referrers)
        candidate = store.clone()
        candidate.remove(pid)
        _publish(store, candidate, db, deletes=[pid])
    logger.info(f"Deleted {pid}")


def reference_order(entities: List) -> List:
    """Referenced entities first; ties and cycles fall back to Pid order"""
    by_pid = {entity.pid: entity for entity in entities}
    dependencies = nx.DiGraph()
    dependencies.add_nodes_from(by_pid)
    for entity in entities:
        for _, target in entity.outbound():
            if target in by_pid and target != entity.pid:
                dependencies.add_edge(target, entity.pid)
    try:
        order = list(nx.lexicographical_topological_sort(dependencies))
    except nx.NetworkXUnfeasible:
        order = sorted(by_pid)
    return [by_pid[pid] for pid in order]


def _duplicates(entities: List) -> List[ValidationResult]:
    seen = set()
    duplicates = []
    for entity in entities:
        if entity.pid in seen:
            duplicates.append(ValidationResult.error(
                "Import", entity.pid, f"Entity '{entity.pid}' appears more than once in the import"))
        seen.add(entity.pid)
    return duplicates


def _stage(store: GraphStore, entities: List, rules: RuleSet) -> Tuple[GraphStore, List, List[ValidationResult]]:
    """Upsert into a clone of the store and validate every staged entity there"""
    candidate = store.clone()
    stored = [candidate.upsert(entity) for entity in reference_order(entities)]
    results: List[ValidationResult] = []
    for entity in stored:
        results += rules.validate(entity, candidate)
    return candidate, stored, results


def check_entities(store: GraphStore, entities: Iterable, rules: RuleSet) -> List[ValidationResult]:
    """Diagnostics an import of the entities would produce; the store is not changed"""
    entities = list(entities)
    with store.lock.read():
        duplicates = _duplicates(entities)
        if duplicates:
            return duplicates
        return _stage(store, entities, rules)[2]


def import_entities(store: GraphStore, entities: Iterable, rules: RuleSet,
                    db: Optional[Session] = None, skip_existing: bool = False) -> List:
    """
    Bulk load entities; all of them are stored or none.
    With skip_existing, Pids already in the store are left untouched.
    """
    entities = list(entities)
    with store.lock.write():
        duplicates = _duplicates(entities)
        if duplicates:
            raise ValidationFailedError(duplicates)

        pending = [e for e in entities if not (skip_existing and e.pid in store)]
        candidate, stored, results = _stage(store, pending, rules)
        if has_errors(results):
            logger.warning(f"Rejected import of {len(pending)} entities")
            raise ValidationFailedError(results)
        _publish(store, candidate, db, puts=stored)
    logger.info(f"Imported {len(stored)} entities ({len(entities) - len(pending)} skipped)")
    return stored


def load_seed(store: GraphStore, rules: RuleSet, db: Optional[Session] = None) -> List:
    """Load the seed corpus; entities already present are kept as they are"""
    stored = import_entities(store, seed_entities(), rules, db=db, skip_existing=True)
    logger.info(f"Seeded {len(stored)} entities")
    return stored
