from fastapi import APIRouter, Depends

from app.associations import operations_for_record
from app.database import get_store
from app.graph import GraphStore
from app.schemas import RecordOperationsRequest, RecordValidationRequest, diagnostic_document, has_errors
from app.validation import validate_record

router = APIRouter()


@router.post("/validate", summary="Validate a record against a profile")
def validate(request: RecordValidationRequest, store: GraphStore = Depends(get_store)):
    """
    Validate an information record against a type profile.

    The response is always 200; **valid** is false when any diagnostic is an Error.
    """
    with store.lock.read():
        results = validate_record(request.record.root, request.profile, store)
    return {"valid": not has_errors(results), "diagnostics": diagnostic_document(results)}


@router.post("/operations", summary="Find operations for a record")
def associated_operations(request: RecordOperationsRequest, store: GraphStore = Depends(get_store)):
    """
    Operations applicable to a record, grouped by association mechanism.
    """
    with store.lock.read():
        associations = operations_for_record(request.record.root, store)
    return associations.model_dump(mode="json", by_alias=True)
