"""Executable adapters for technology interfaces and the registry selecting them."""
import csv
import logging
import os
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, Iterable, List, Optional, Tuple, Type

from app.exceptions import AdapterNotFoundError, ConfigurationError
from app.schemas import DEFAULT_MARKER, AdapterDeclaration, TechnologyInterface, text_form

logger = logging.getLogger(__name__)

UNSUPPORTED = "unsupported"
FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")
DEFAULT_FIXTURE_TABLE = os.path.join(FIXTURE_DIR, "orcid_emails.csv")


class Adapter(ABC):
    """Executable realization of a technology interface.

    ``execute`` receives one value per interface input (in declaration order)
    and returns one value per interface output.
    """

    name: ClassVar[str]
    input_arity: ClassVar[int]
    output_arity: ClassVar[int]
    serial: ClassVar[bool] = False

    def __init__(self, options: Optional[Dict[str, str]] = None, marker: str = DEFAULT_MARKER):
        self.options = dict(options or {})
        self.marker = marker

    def fits(self, interface: TechnologyInterface) -> bool:
        return len(interface.inputs) == self.input_arity and len(interface.outputs) == self.output_arity

    @abstractmethod
    def execute(self, inputs: List[Any]) -> List[Any]:
        ...


class RegexAdapter(Adapter):
    """Inputs (text, pattern); output the full match followed by every group."""

    name = "Regex"
    input_arity = 2
    output_arity = 1

    def execute(self, inputs: List[Any]) -> List[Any]:
        text, pattern = inputs
        match = re.fullmatch(pattern, text)
        if match is None:
            return [[]]
        return [[match.group(0)] + [group if group is not None else "" for group in match.groups()]]


class TemplateAdapter(Adapter):
    """Inputs (template, value); output the template with every marker replaced."""

    name = "Template"
    input_arity = 2
    output_arity = 1

    def execute(self, inputs: List[Any]) -> List[Any]:
        template, value = inputs
        marker = self.options.get("marker", self.marker)
        if marker not in template:
            raise ValueError(f"template does not contain the marker '{marker}'")
        return [template.replace(marker, text_form(value))]


class FixtureLookupAdapter(Adapter):
    """Exact-match lookup in a two-column (key, value) CSV table."""

    name = "FixtureLookup"
    input_arity = 1
    output_arity = 1

    def __init__(self, options: Optional[Dict[str, str]] = None, marker: str = DEFAULT_MARKER):
        super().__init__(options, marker)
        self.path = self.options.get("table", DEFAULT_FIXTURE_TABLE)
        self.table = self._load(self.path)

    @staticmethod
    def _load(path: str) -> Dict[str, str]:
        try:
            with open(path, encoding="utf-8", newline="") as stream:
                rows = list(csv.reader(stream))
        except OSError as exc:
            raise ConfigurationError(f"Cannot read fixture table '{path}': {exc}", key="table") from exc
        if rows and [cell.strip().lower() for cell in rows[0]] == ["key", "value"]:
            rows = rows[1:]
        table = {}
        for number, row in enumerate(rows, start=1):
            if not row:
                continue
            if len(row) != 2:
                raise ConfigurationError(f"Fixture table '{path}' row {number} has {len(row)} columns", key="table")
            table[row[0]] = row[1]
        return table

    def execute(self, inputs: List[Any]) -> List[Any]:
        key = inputs[0]
        if key not in self.table:
            raise LookupError(f"no fixture entry for {key!r}")
        return [self.table[key]]


BUILTIN_ADAPTERS: Dict[str, Type[Adapter]] = {
    cls.name: cls for cls in (RegexAdapter, TemplateAdapter, FixtureLookupAdapter)
}


@dataclass(frozen=True)
class AdapterBinding:
    adapter_pid: str
    interface_pid: str
    adapter: Optional[Adapter]
    serial: bool

    def usable_for(self, interface: TechnologyInterface) -> bool:
        return (self.adapter is not None
                and self.interface_pid == interface.pid
                and self.adapter_pid in interface.adapters
                and self.adapter.fits(interface))


class AdapterRegistry:
    """Adapter bindings in declaration order; the first usable binding wins."""

    def __init__(self, marker: str = DEFAULT_MARKER):
        self.marker = marker
        self._bindings: Dict[str, AdapterBinding] = {}

    @classmethod
    def from_declarations(cls, declarations: Iterable[AdapterDeclaration],
                          marker: str = DEFAULT_MARKER) -> "AdapterRegistry":
        registry = cls(marker)
        for declaration in declarations:
            registry.declare(declaration)
        return registry

    def declare(self, declaration: AdapterDeclaration) -> AdapterBinding:
        if declaration.builtin == UNSUPPORTED:
            adapter = None
        elif declaration.builtin in BUILTIN_ADAPTERS:
            adapter = BUILTIN_ADAPTERS[declaration.builtin](declaration.options, self.marker)
        else:
            raise ConfigurationError(
                f"Unknown builtin adapter '{declaration.builtin}' for '{declaration.adapter_pid}'",
                key="ADAPTERS",
            )
        serial = declaration.serial if declaration.serial is not None else bool(adapter and adapter.serial)
        return self.register(declaration.adapter_pid, declaration.implements_interface_pid, adapter, serial)

    def register(self, adapter_pid: str, interface_pid: str, adapter: Optional[Adapter],
                 serial: bool = False) -> AdapterBinding:
        if adapter_pid in self._bindings:
            raise ConfigurationError(f"Adapter '{adapter_pid}' is declared twice", key="ADAPTERS")
        binding = AdapterBinding(adapter_pid, interface_pid, adapter, serial)
        self._bindings[adapter_pid] = binding
        logger.debug(f"Registered adapter {adapter_pid} for {interface_pid}")
        return binding

    def __contains__(self, adapter_pid: str) -> bool:
        return adapter_pid in self._bindings

    def __len__(self) -> int:
        return len(self._bindings)

    @property
    def bindings(self) -> List[AdapterBinding]:
        return list(self._bindings.values())

    def select(self, interface: TechnologyInterface) -> Tuple[str, AdapterBinding]:
        for binding in self._bindings.values():
            if binding.usable_for(interface):
                return binding.adapter_pid, binding
        raise AdapterNotFoundError(interface.pid, list(interface.adapters))
