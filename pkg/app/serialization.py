"""Canonical interchange documents for registry entities."""
import json
from datetime import datetime
from enum import Enum
from functools import lru_cache
from typing import Any, Optional, Tuple, Type

from pydantic import BaseModel, TypeAdapter, ValidationError
from pydantic_core import PydanticSerializationError

from app.exceptions import DocumentParseError, EntityInvariantError, SerializationError
from app.schemas import Entity

_entity_adapter = TypeAdapter(Entity)


@lru_cache(maxsize=None)
def _adapter_for(entity_cls: Type[BaseModel]) -> TypeAdapter:
    return TypeAdapter(entity_cls)


def dumps_canonical(document: Any) -> str:
    """Key-sorted, compact JSON text. Raises ValueError for non-finite numbers."""
    return json.dumps(
        document,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def entity_document(entity: BaseModel) -> dict:
    return entity.model_dump(mode="json", by_alias=True, exclude_none=True)


def _find_unserializable(value: Any, path: str) -> Optional[Tuple[str, Any]]:
    if isinstance(value, BaseModel):
        for name, field in type(value).model_fields.items():
            child = f"{path}.{field.alias or name}" if path else (field.alias or name)
            found = _find_unserializable(getattr(value, name), child)
            if found:
                return found
        return None
    if isinstance(value, dict):
        for key, item in value.items():
            found = _find_unserializable(item, f"{path}.{key}")
            if found:
                return found
        return None
    if isinstance(value, (list, tuple)):
        for position, item in enumerate(value):
            found = _find_unserializable(item, f"{path}[{position}]")
            if found:
                return found
        return None
    if value is None or isinstance(value, (bool, int, str, datetime, Enum)):
        return None
    if isinstance(value, float):
        return None if value == value and value not in (float("inf"), float("-inf")) else (path, value)
    return path, value


def serialize_entity(entity: BaseModel) -> str:
    """Serialize an entity (or any registry model) into canonical text."""
    try:
        return dumps_canonical(entity_document(entity))
    except (PydanticSerializationError, ValueError, TypeError) as exc:
        field, value = _find_unserializable(entity, "") or ("<unknown>", None)
        raise SerializationError(field, value) from exc


def load_entity(document: Any, entity_cls: Optional[Type[BaseModel]] = None) -> Any:
    """Build an entity from an already parsed document."""
    adapter = _entity_adapter if entity_cls is None else _adapter_for(entity_cls)
    try:
        return adapter.validate_python(document)
    except ValidationError as exc:
        raise EntityInvariantError.from_pydantic(exc) from exc


def parse_document(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentParseError(exc.msg, exc.lineno, exc.colno, exc.pos) from exc


def deserialize_entity(text: str, entity_cls: Optional[Type[BaseModel]] = None) -> Any:
    """Parse canonical text back into an entity.

    Without *entity_cls* the ``entityType`` discriminator selects the class.
    """
    return load_entity(parse_document(text), entity_cls)
