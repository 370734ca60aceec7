from fastapi import FastAPI, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import logging

from app.config import Settings, settings
from app.api.v1 import api_router
from app.exceptions import (
    ConfigurationError,
    DocumentParseError,
    EntityInvariantError,
    EntityKindError,
    EntityNotFoundError,
    ExecutionError,
    InheritanceCycleError,
    OperationInvalidError,
    PlanningError,
    ReferencedEntityError,
    SerializationError,
    SnapshotError,
    ValidationFailedError,
)
from app.registry import Registry
from app.schemas import diagnostic_document

# Configure logging
logging.basicConfig(
    level=logging.INFO if not settings.DEBUG else logging.DEBUG,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# Exception class -> HTTP status; the most specific class wins
STATUS_CODES = [
    (EntityNotFoundError, status.HTTP_404_NOT_FOUND),
    (ReferencedEntityError, status.HTTP_409_CONFLICT),
    (ValidationFailedError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (OperationInvalidError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (PlanningError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (ExecutionError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (InheritanceCycleError, status.HTTP_422_UNPROCESSABLE_ENTITY),
    (DocumentParseError, status.HTTP_400_BAD_REQUEST),
    (EntityInvariantError, status.HTTP_400_BAD_REQUEST),
    (SerializationError, status.HTTP_400_BAD_REQUEST),
    (EntityKindError, status.HTTP_400_BAD_REQUEST),
    (SnapshotError, status.HTTP_500_INTERNAL_SERVER_ERROR),
    (ConfigurationError, status.HTTP_500_INTERNAL_SERVER_ERROR),
]


def error_detail(exc: Exception):
    """Body of the {"detail": ...} envelope for a registry error"""
    if isinstance(exc, (ValidationFailedError, OperationInvalidError)):
        return diagnostic_document(exc.results)
    if isinstance(exc, ReferencedEntityError):
        return {"message": str(exc), "referrers": exc.referrers}
    if isinstance(exc, EntityInvariantError):
        return {"message": str(exc), "problems": exc.problems}
    if isinstance(exc, DocumentParseError):
        return {"message": str(exc), "line": exc.line, "column": exc.column, "position": exc.position}
    return str(exc)


def create_app(app_settings: Settings = settings) -> FastAPI:
    """Build an application around its own store, rule set and adapter registry"""
    app = FastAPI(
        title=app_settings.APP_NAME,
        description="A registry for FAIR Digital Object data types, attributes and operations",
        version="1.0.0",
        docs_url=f"{app_settings.API_V1_PREFIX}/docs",
        redoc_url=f"{app_settings.API_V1_PREFIX}/redoc",
        openapi_url=f"{app_settings.API_V1_PREFIX}/openapi.json"
    )
    registry = Registry.from_settings(app_settings)
    app.state.registry = registry
    app.state.store = registry.store
    app.state.rules = registry.rules
    app.state.adapters = registry.adapters
    app.state.session_factory = registry.session_factory
    app.state.executor_factory = registry.executor

    # CORS middleware
    app.add_middleware(
        CORSMiddleware,
        allow_origins=app_settings.ALLOWED_ORIGINS,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # Include API router
    app.include_router(api_router, prefix=app_settings.API_V1_PREFIX)

    for exc_class, status_code in STATUS_CODES:
        def handler(request: Request, exc: Exception, status_code: int = status_code):
            return JSONResponse(status_code=status_code, content={"detail": error_detail(exc)})

        app.add_exception_handler(exc_class, handler)

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(request: Request, exc: RequestValidationError):
        """Malformed request bodies are client errors"""
        return JSONResponse(
            status_code=status.HTTP_400_BAD_REQUEST,
            content={"detail": [{"loc": list(e["loc"]), "msg": e["msg"]} for e in exc.errors()]},
        )

    @app.on_event("startup")
    async def startup_event():
        """Fill the store from the database or the snapshot"""
        logger.info("Starting up...")
        origin = registry.load()
        logger.info(f"Store loaded from {origin}: {len(registry.store)} entities")

    @app.on_event("shutdown")
    async def shutdown_event():
        """Persist the store as a snapshot"""
        registry.save()
        logger.info("Shut down")

    @app.get("/health", tags=["health"])
    async def health_check():
        """Health check endpoint"""
        return {"status": "healthy", "app": app_settings.APP_NAME, "entities": len(registry.store)}

    @app.get("/", tags=["root"])
    async def root():
        """Root endpoint"""
        return {
            "message": "Welcome to the FAIR-DO Type Registry",
            "docs": f"{app_settings.API_V1_PREFIX}/docs",
            "version": "1.0.0"
        }

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG
    )
