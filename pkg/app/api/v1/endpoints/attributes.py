from typing import List

from fastapi import APIRouter, Depends

from app.associations import operations_for_attribute
from app.database import get_store
from app.graph import GraphStore

router = APIRouter()


@router.get("/{pid:path}/operations", response_model=List[str], summary="Get operations for an attribute")
def get_operations(pid: str, store: GraphStore = Depends(get_store)):
    """
    Operations executable on the attribute, including those declared on a compatible attribute.
    """
    with store.lock.read():
        return operations_for_attribute(pid, store)
