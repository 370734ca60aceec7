"""Import, export, validate, query and execute registry entities from the shell."""
import json
import logging
import os
import sys
from contextlib import contextmanager
from typing import Any, Iterator, List

import click
import uvicorn
from pydantic import ValidationError

from app import crud
from app.associations import operations_for_attribute, operations_for_datatype, operations_for_record
from app.config import Settings
from app.exceptions import (
    DocumentParseError,
    ExecutionError,
    InheritanceCycleError,
    PlanningError,
    RegistryError,
    ValidationFailedError,
)
from app.inheritance import chain_for
from app.planning import plan as plan_operation
from app.registry import Registry
from app.schemas import Attribute, InformationRecord, diagnostic_document, has_errors
from app.serialization import load_entity, parse_document, serialize_entity
from app.validation import validate_record

logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_USAGE = 2

# Failures of the input itself; everything else is a usage, I/O or lookup problem
INVALID = (ValidationFailedError, PlanningError, ExecutionError, InheritanceCycleError)


# ============== Output helpers ==============

def emit(document: Any) -> None:
    click.echo(json.dumps(document, indent=2, ensure_ascii=False))


def emit_diagnostics(results) -> None:
    if results:
        click.echo(json.dumps(diagnostic_document(results), indent=2, ensure_ascii=False), err=True)


def exit_code_for(exc: RegistryError) -> int:
    return EXIT_INVALID if isinstance(exc, INVALID) else EXIT_USAGE


@contextmanager
def reporting() -> Iterator[None]:
    """Turn registry errors into a message on stderr and the matching exit code"""
    try:
        yield
    except RegistryError as exc:
        results = getattr(exc, "results", None)
        if results:
            emit_diagnostics(results)
        else:
            click.echo(f"Error: {exc}", err=True)
        sys.exit(exit_code_for(exc))


def read_documents(text: str) -> List[Any]:
    """Documents from a JSON array or from JSON Lines (one document per line)"""
    if text.lstrip().startswith("["):
        documents = parse_document(text)
        return list(documents)
    documents = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            documents.append(parse_document(line))
        except DocumentParseError as exc:
            raise DocumentParseError(exc.reason, number, exc.column, exc.position)
    return documents


def read_record(source) -> InformationRecord:
    try:
        return InformationRecord.model_validate(parse_document(source.read()))
    except ValidationError as exc:
        raise click.UsageError(f"Invalid record: {exc}")


def parse_input(value: str) -> Any:
    """JSON when the value parses as JSON, the plain string otherwise"""
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def open_registry(ctx: click.Context) -> Registry:
    registry = Registry.from_settings(ctx.obj)
    origin = registry.load()
    logger.debug(f"Store loaded from {origin}: {len(registry.store)} entities")
    return registry


def store_changes(registry: Registry, change) -> Any:
    """Run a mutating crud call with the mirror session, then write the snapshot"""
    db = registry.open_session()
    try:
        result = change(db)
    finally:
        if db is not None:
            db.close()
    registry.save()
    return result


# ============== Commands ==============

@click.group()
@click.option("--store", "store_path", type=click.Path(dir_okay=False), default=None,
              help="Snapshot file holding the registry (SNAPSHOT_PATH).")
@click.option("--port", type=int, default=None, help="Port for 'serve' (PORT).")
@click.option("--prefix", default=None, help="Prefix for minted Pids (PID_PREFIX).")
@click.option("--marker", default=None, help="Default template marker (TEMPLATE_MARKER).")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Key-value settings file used instead of .env.")
@click.pass_context
def main(ctx, store_path, port, prefix, marker, config_file):
    """FAIR Digital Object type registry."""
    overrides = {
        "SNAPSHOT_PATH": store_path,
        "PORT": port,
        "PID_PREFIX": prefix,
        "TEMPLATE_MARKER": marker,
    }
    try:
        settings = Settings(_env_file=config_file or ".env",
                            **{key: value for key, value in overrides.items() if value is not None})
    except ValidationError as exc:
        raise click.UsageError(f"Invalid configuration: {exc}")
    logging.basicConfig(
        level=logging.DEBUG if settings.DEBUG else logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    ctx.obj = settings


@main.command(name="import")
@click.argument("source", type=click.File("r", encoding="utf-8"))
@click.pass_context
def import_(ctx, source):
    """Bulk load entities from a file ('-' for stdin); all or nothing."""
    with reporting():
        registry = open_registry(ctx)
        entities = [load_entity(document) for document in read_documents(source.read())]
        stored = store_changes(
            registry, lambda db: crud.import_entities(registry.store, entities, registry.rules, db)
        )
        click.echo(f"Imported {len(stored)} entities")


@main.command()
@click.argument("pid", required=False)
@click.option("--all", "export_all", is_flag=True, help="Export every entity.")
@click.pass_context
def export(ctx, pid, export_all):
    """Print entities in canonical form, one per line."""
    if bool(pid) == export_all:
        raise click.UsageError("Give either a Pid or --all")
    with reporting():
        registry = open_registry(ctx)
        entities = crud.list_entities(registry.store) if export_all else [crud.get_entity(registry.store, pid)]
        for entity in entities:
            click.echo(serialize_entity(entity))


@main.command()
@click.argument("target")
@click.pass_context
def validate(ctx, target):
    """Validate the entities in a file, or a stored entity by Pid."""
    with reporting():
        registry = open_registry(ctx)
        if os.path.isfile(target):
            with open(target, encoding="utf-8") as handle:
                entities = [load_entity(document) for document in read_documents(handle.read())]
            results = crud.check_entities(registry.store, entities, registry.rules)
        else:
            with registry.store.lock.read():
                results = registry.rules.validate(registry.store.get(target), registry.store)
        emit_diagnostics(results)
        if has_errors(results):
            sys.exit(EXIT_INVALID)
        click.echo("valid")


@main.command()
@click.argument("pid", required=False)
@click.option("--record", "record_file", type=click.File("r", encoding="utf-8"), default=None,
              help="Information record to find operations for.")
@click.pass_context
def ops(ctx, pid, record_file):
    """Operations executable on an attribute, a data type or a record."""
    if bool(pid) == bool(record_file):
        raise click.UsageError("Give either a Pid or --record")
    with reporting():
        registry = open_registry(ctx)
        store = registry.store
        with store.lock.read():
            if record_file is not None:
                record = read_record(record_file)
                associations = operations_for_record(record.root, store)
                emit_diagnostics(list(associations.diagnostics))
                emit(associations.model_dump(mode="json", by_alias=True)["buckets"])
            elif isinstance(store.get(pid), Attribute):
                emit(operations_for_attribute(pid, store))
            else:
                emit(operations_for_datatype(pid, store))


@main.command()
@click.argument("pid")
@click.pass_context
def inheritance(ctx, pid):
    """Inheritance order of a data type."""
    with reporting():
        registry = open_registry(ctx)
        with registry.store.lock.read():
            emit(list(chain_for(pid, registry.store)))


@main.command(name="check-record")
@click.argument("source", type=click.File("r", encoding="utf-8"))
@click.option("--profile", required=True, help="Pid of the type profile to validate against.")
@click.pass_context
def check_record(ctx, source, profile):
    """Validate an information record against a type profile."""
    with reporting():
        registry = open_registry(ctx)
        record = read_record(source)
        with registry.store.lock.read():
            results = validate_record(record.root, profile, registry.store)
        emit_diagnostics(results)
        if has_errors(results):
            sys.exit(EXIT_INVALID)
        click.echo("valid")


@main.command()
@click.argument("pid")
@click.pass_context
def plan(ctx, pid):
    """Show the stages and dataflow of an operation."""
    with reporting():
        registry = open_registry(ctx)
        with registry.store.lock.read():
            execution_plan = plan_operation(pid, registry.store, registry.rules)
        emit(execution_plan.model_dump(mode="json", by_alias=True))


@main.command(name="exec")
@click.argument("pid")
@click.option("--input", "input_value", required=True,
              help="Value for the executable-on attribute; parsed as JSON when possible.")
@click.pass_context
def exec_(ctx, pid, input_value):
    """Execute an operation and print its return values."""
    with reporting():
        registry = open_registry(ctx)
        with registry.store.lock.read():
            returns = registry.executor().execute(pid, parse_input(input_value))
        emit(returns)


@main.command()
@click.pass_context
def seed(ctx):
    """Load the seed corpus; running it again changes nothing."""
    with reporting():
        registry = open_registry(ctx)
        stored = store_changes(registry, lambda db: crud.load_seed(registry.store, registry.rules, db))
        click.echo(f"Seeded {len(stored)} entities ({len(registry.store)} in store)")


@main.command()
@click.option("--host", default=None, help="Listen address (HOST).")
@click.pass_context
def serve(ctx, host):
    """Run the HTTP service."""
    from app.main import create_app  # builds the default app on import

    settings = ctx.obj
    uvicorn.run(create_app(settings), host=host or settings.HOST, port=settings.PORT)


if __name__ == "__main__":
    main()
