from typing import Generator, Optional

from fastapi import Request
from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker, Session
from sqlalchemy.pool import StaticPool

# Base class for models
Base = declarative_base()


def make_engine(url: str, echo: bool = False) -> Engine:
    """
    Create the engine for the relational mirror.
    SQLite URLs get a thread-shareable connection; in-memory ones a single static one.
    """
    if url.startswith("sqlite"):
        options = {"connect_args": {"check_same_thread": False}}
        if ":memory:" in url or url.rstrip("/") == "sqlite:":
            options["poolclass"] = StaticPool
    else:
        options = {
            "pool_pre_ping": True,  # Verify connections before using them
            "pool_size": 10,
            "max_overflow": 20,
        }
    return create_engine(url, echo=echo, **options)


def make_session_factory(engine: Engine) -> sessionmaker:
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


def init_db(engine: Engine) -> None:
    """
    Create the mirror tables if they do not exist.
    """
    from app import models  # noqa: F401  registers the tables on Base

    Base.metadata.create_all(bind=engine)


def get_db(request: Request) -> Generator[Optional[Session], None, None]:
    """
    Dependency for getting database sessions.
    Yields None when the application runs without a relational mirror.
    """
    factory = request.app.state.session_factory
    if factory is None:
        yield None
        return
    db = factory()
    try:
        yield db
    finally:
        db.close()


def get_store(request: Request):
    return request.app.state.store


def get_rules(request: Request):
    return request.app.state.rules


def get_executor(request: Request):
    return request.app.state.executor_factory()


def get_settings(request: Request):
    return request.app.state.registry.settings
