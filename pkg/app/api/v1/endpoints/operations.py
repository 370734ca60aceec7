from fastapi import APIRouter, Depends

from app.database import get_executor, get_rules, get_store
from app.execution import OperationExecutor
from app.graph import GraphStore
from app.planning import plan
from app.schemas import ExecuteRequest
from app.validation import RuleSet

router = APIRouter()


@router.get("/{pid:path}/plan", summary="Get the execution plan of an operation")
def get_plan(pid: str, store: GraphStore = Depends(get_store), rules: RuleSet = Depends(get_rules)):
    """
    Validate an operation and compute its stages and dataflow.

    Steps in the same stage have no dependency on each other.
    """
    with store.lock.read():
        execution_plan = plan(pid, store, rules)
    return execution_plan.model_dump(mode="json", by_alias=True)


@router.post("/{pid:path}/execute", summary="Execute an operation")
def execute(
    pid: str,
    request: ExecuteRequest,
    store: GraphStore = Depends(get_store),
    executor: OperationExecutor = Depends(get_executor)
):
    """
    Execute an operation on a value of its executable-on attribute.

    Returns the values bound to the operation's return attributes.
    """
    with store.lock.read():
        return executor.execute(pid, request.input)
