from typing import Optional

from fastapi import APIRouter, Depends, Request, Response, status
from sqlalchemy.orm import Session

from app import crud
from app.config import Settings
from app.database import get_db, get_rules, get_settings, get_store
from app.exceptions import DocumentParseError, EntityInvariantError
from app.graph import GraphStore
from app.serialization import load_entity, parse_document, serialize_entity
from app.validation import RuleSet

router = APIRouter()

JSON = "application/json"


async def read_document(request: Request) -> str:
    """Raw request body; entity documents are parsed by the registry, not by FastAPI"""
    body = await request.body()
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DocumentParseError("Request body is not valid UTF-8", 1, 1, exc.start)


def canonical_response(entity, status_code: int = status.HTTP_200_OK) -> Response:
    return Response(content=serialize_entity(entity), media_type=JSON, status_code=status_code)


@router.get("", summary="List all entities")
def list_entities(store: GraphStore = Depends(get_store)):
    """
    Retrieve every registered entity in canonical form, sorted by Pid.
    """
    documents = [serialize_entity(entity) for entity in crud.list_entities(store)]
    return Response(content="[" + ",".join(documents) + "]", media_type=JSON)


@router.post("", status_code=status.HTTP_201_CREATED, summary="Register an entity")
def create_entity(
    text: str = Depends(read_document),
    store: GraphStore = Depends(get_store),
    rules: RuleSet = Depends(get_rules),
    app_settings: Settings = Depends(get_settings),
    db: Optional[Session] = Depends(get_db)
):
    """
    Register an entity document.

    - A document without a **pid** gets one minted under the configured prefix
    - A document naming an existing Pid replaces that entity, as with PUT
    - The entity is validated against the registry as it would look afterwards
    - Any Error diagnostic rejects the request with 422
    """
    document = parse_document(text)
    if not isinstance(document, dict):
        raise EntityInvariantError([{"field": "<root>", "message": "entity document must be a JSON object"}])
    if "pid" not in document:
        with store.lock.write():
            document["pid"] = store.mint_pid(app_settings.PID_PREFIX)
    stored = crud.put_entity(store, load_entity(document), rules, db)
    return canonical_response(stored, status.HTTP_201_CREATED)


@router.get("/{pid:path}", summary="Get entity by Pid")
def get_entity(pid: str, store: GraphStore = Depends(get_store)):
    """
    Get a single entity by its Pid.
    """
    return canonical_response(crud.get_entity(store, pid))


@router.put("/{pid:path}", summary="Create or replace an entity")
def put_entity(
    pid: str,
    text: str = Depends(read_document),
    store: GraphStore = Depends(get_store),
    rules: RuleSet = Depends(get_rules),
    db: Optional[Session] = Depends(get_db)
):
    """
    Create or replace the entity stored under **pid**.

    Replacing keeps the creation date and bumps the version.
    """
    entity = load_entity(parse_document(text))
    if entity.pid != pid:
        raise EntityInvariantError([
            {"field": "pid", "message": f"document Pid '{entity.pid}' does not match path Pid '{pid}'"}
        ])
    return canonical_response(crud.put_entity(store, entity, rules, db))


@router.delete("/{pid:path}", status_code=status.HTTP_204_NO_CONTENT, summary="Delete an entity")
def delete_entity(
    pid: str,
    store: GraphStore = Depends(get_store),
    db: Optional[Session] = Depends(get_db)
):
    """
    Delete an entity.

    Entities still referenced by others cannot be deleted (409).
    """
    crud.delete_entity(store, pid, db)
    return Response(status_code=status.HTTP_204_NO_CONTENT)
