from typing import List

from fastapi import APIRouter, Depends

from app.associations import operations_for_datatype
from app.database import get_store
from app.graph import GraphStore
from app.inheritance import chain_for

router = APIRouter()


@router.get("/{pid:path}/inheritance", response_model=List[str], summary="Get inheritance order")
def get_inheritance(pid: str, store: GraphStore = Depends(get_store)):
    """
    Inheritance order of a data type, starting with the type itself.

    - **AtomicDataType**: the parent chain up to the root
    - **TypeProfile**: the linearization of its parents
    """
    with store.lock.read():
        return list(chain_for(pid, store))


@router.get("/{pid:path}/operations", response_model=List[str], summary="Get operations for a data type")
def get_operations(pid: str, store: GraphStore = Depends(get_store)):
    """
    Operations executable on any attribute whose data type accepts values of this type.
    """
    with store.lock.read():
        return operations_for_datatype(pid, store)
