import pytest
from fastapi.testclient import TestClient

from app import crud
from app.adapters import AdapterRegistry
from app.config import Settings
from app.database import init_db, make_engine, make_session_factory
from app.execution import OperationExecutor
from app.graph import GraphStore
from app.main import create_app
from app.seed import DEFAULT_ADAPTERS
from app.validation import RuleSet

# Use in-memory SQLite database for testing
SQLALCHEMY_DATABASE_URL = "sqlite:///:memory:"


@pytest.fixture
def store():
    """An empty store"""
    return GraphStore()


@pytest.fixture
def rules():
    return RuleSet.default()


@pytest.fixture
def seeded(rules):
    """A store holding the seed corpus"""
    store = GraphStore()
    crud.load_seed(store, rules)
    return store


@pytest.fixture
def adapters():
    return AdapterRegistry.from_declarations(DEFAULT_ADAPTERS)


@pytest.fixture
def executor(seeded, adapters, rules):
    return OperationExecutor(seeded, adapters, rules=rules)


@pytest.fixture
def db():
    """A fresh mirror database for each test"""
    engine = make_engine(SQLALCHEMY_DATABASE_URL)
    init_db(engine)
    session = make_session_factory(engine)()
    try:
        yield session
    finally:
        session.close()
        engine.dispose()


@pytest.fixture
def test_settings(tmp_path):
    """Settings that keep the snapshot inside the test's temporary directory"""
    return Settings(_env_file=None, SNAPSHOT_PATH=str(tmp_path / "snapshot.json"), DATABASE_URL=None)


@pytest.fixture
def client(test_settings):
    """A test client around a fresh application"""
    with TestClient(create_app(test_settings)) as test_client:
        yield test_client


@pytest.fixture
def seeded_client(client):
    """A test client whose store holds the seed corpus"""
    state = client.app.state
    crud.load_seed(state.store, state.rules)
    return client
