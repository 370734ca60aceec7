from fastapi import APIRouter

from app.api.v1.endpoints import attributes, datatypes, entities, operations, records

api_router = APIRouter()

api_router.include_router(
    entities.router,
    prefix="/entities",
    tags=["entities"]
)

api_router.include_router(
    datatypes.router,
    prefix="/datatypes",
    tags=["datatypes"]
)

api_router.include_router(
    attributes.router,
    prefix="/attributes",
    tags=["attributes"]
)

api_router.include_router(
    records.router,
    prefix="/records",
    tags=["records"]
)

api_router.include_router(
    operations.router,
    prefix="/operations",
    tags=["operations"]
)
