"""Wiring shared by the HTTP application and the command line."""
import logging
import os
from dataclasses import dataclass
from typing import Optional

from sqlalchemy.orm import Session, sessionmaker

from app import crud
from app.adapters import AdapterRegistry
from app.config import Settings
from app.database import init_db, make_engine, make_session_factory
from app.execution import OperationExecutor
from app.graph import GraphStore
from app.validation import RuleSet

logger = logging.getLogger(__name__)


@dataclass
class Registry:
    settings: Settings
    store: GraphStore
    rules: RuleSet
    adapters: AdapterRegistry
    session_factory: Optional[sessionmaker] = None

    @classmethod
    def from_settings(cls, settings: Settings) -> "Registry":
        session_factory = None
        if settings.DATABASE_URL:
            engine = make_engine(settings.DATABASE_URL, echo=settings.DEBUG)
            init_db(engine)
            session_factory = make_session_factory(engine)
        return cls(
            settings=settings,
            store=GraphStore(),
            rules=RuleSet.default(settings.TEMPLATE_MARKER).without(settings.DISABLED_RULES),
            adapters=AdapterRegistry.from_declarations(settings.ADAPTERS, settings.TEMPLATE_MARKER),
            session_factory=session_factory,
        )

    def open_session(self) -> Optional[Session]:
        return self.session_factory() if self.session_factory else None

    def executor(self) -> OperationExecutor:
        return OperationExecutor(
            self.store,
            self.adapters,
            marker=self.settings.TEMPLATE_MARKER,
            max_depth=self.settings.MAX_RECURSION_DEPTH,
            max_workers=self.settings.MAX_WORKERS,
            rules=self.rules,
        )

    def load(self) -> str:
        """Fill the store from the database or the snapshot file; returns where it came from."""
        if self.session_factory:
            db = self.session_factory()
            try:
                if crud.load_from_database(db, self.store):
                    return "database"
            finally:
                db.close()
        if os.path.exists(self.settings.SNAPSHOT_PATH):
            with self.store.lock.write():
                self.store.load_snapshot(self.settings.SNAPSHOT_PATH)
            return "snapshot"
        return "empty"

    def save(self) -> None:
        with self.store.lock.read():
            self.store.save_snapshot(self.settings.SNAPSHOT_PATH)
