import os
from typing import List, Optional

from pydantic import field_validator, model_validator
from pydantic_settings import BaseSettings

from app.schemas import DEFAULT_MARKER, AdapterDeclaration
from app.seed import DEFAULT_ADAPTERS, PREFIX
from app.validation import DEFAULT_RULE_IDS


class Settings(BaseSettings):
    """
    Application settings loaded from a .env file and environment variables.
    Keyword arguments (CLI flags) take precedence over both.
    """
    # Application
    APP_NAME: str = "FAIR-DO Type Registry"
    DEBUG: bool = False
    API_V1_PREFIX: str = "/api/v1"

    # Server
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # CORS
    ALLOWED_ORIGINS: list[str] = ["http://localhost:3000", "http://localhost:8000"]

    # Storage
    SNAPSHOT_PATH: str = "registry-snapshot.json"
    DATABASE_URL: Optional[str] = None  # enables the relational mirror

    # Registry
    PID_PREFIX: str = PREFIX
    TEMPLATE_MARKER: str = DEFAULT_MARKER
    ADAPTERS: List[AdapterDeclaration] = DEFAULT_ADAPTERS
    DISABLED_RULES: List[str] = []

    # Execution
    MAX_RECURSION_DEPTH: int = 32
    MAX_WORKERS: int = 4

    class Config:
        env_file = ".env"
        case_sensitive = True

    @field_validator("TEMPLATE_MARKER")
    @classmethod
    def marker_not_empty(cls, value: str) -> str:
        if not value:
            raise ValueError("TEMPLATE_MARKER must not be empty")
        return value

    @field_validator("PID_PREFIX")
    @classmethod
    def prefix_not_empty(cls, value: str) -> str:
        if not value or "/" in value or any(c.isspace() for c in value):
            raise ValueError("PID_PREFIX must be a non-empty namespace without '/' or whitespace")
        return value

    @field_validator("DISABLED_RULES")
    @classmethod
    def rules_exist(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(DEFAULT_RULE_IDS))
        if unknown:
            raise ValueError(f"Unknown rule identifiers {unknown}; known rules are {DEFAULT_RULE_IDS}")
        return value

    @field_validator("MAX_RECURSION_DEPTH", "MAX_WORKERS")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @model_validator(mode="after")
    def snapshot_writable(self) -> "Settings":
        directory = os.path.dirname(os.path.abspath(self.SNAPSHOT_PATH))
        if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
            raise ValueError(f"Snapshot directory '{directory}' does not exist or is not writable")
        return self


settings = Settings()
