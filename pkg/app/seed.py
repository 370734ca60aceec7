"""Seed corpus: the ORCiD e-mail operation and a Helmholtz KIP excerpt."""
from datetime import datetime, timezone
from typing import List, Optional

from app.schemas import (
    AdapterDeclaration,
    AdministrativeMetadata,
    AtomicDataType,
    Attribute,
    AttributeMapping,
    CardinalityRange,
    Combinator,
    Operation,
    OperationStep,
    PrimitiveKind,
    Restrictions,
    TechnologyInterface,
    TypeProfile,
    ValidationPolicy,
)

PREFIX = "21.T11148"
SEEDED_AT = datetime(2024, 5, 1, tzinfo=timezone.utc)

STRING = f"{PREFIX}/string"
BOOLEAN = f"{PREFIX}/boolean"
URL = f"{PREFIX}/url"
ORCID_URL = f"{PREFIX}/orcid-url"
ORCID = f"{PREFIX}/orcid"
ISO_8601 = f"{PREFIX}/iso8601"
EMAIL = f"{PREFIX}/email"
HASH_VALUE = f"{PREFIX}/hash-value"
HASH_ALGORITHM = f"{PREFIX}/hash-algorithm"

CHECKSUM_PROFILE = f"{PREFIX}/checksum-profile"
HELMHOLTZ_KIP = f"{PREFIX}/helmholtz-kip"

DATE_CREATED = f"{PREFIX}/dateCreated"
DATE_MODIFIED = f"{PREFIX}/dateModified"
CONTACT = f"{PREFIX}/contact"
CHECKSUM = f"{PREFIX}/checksum"
LOCATION = f"{PREFIX}/digitalObjectLocation"
HASH = f"{PREFIX}/hash"
ALGORITHM = f"{PREFIX}/algorithm"
KIP_RECORD = f"{PREFIX}/kipRecord"
REGEX_INPUT = f"{PREFIX}/regexInput"
REGEX_PATTERN = f"{PREFIX}/regexPattern"
REGEX_OUTPUT = f"{PREFIX}/regexOutput"
EXTRACTED_ORCID = f"{PREFIX}/extractedOrcid"
RUN_COMMAND = f"{PREFIX}/runCommand"
RETURN_VALUES = f"{PREFIX}/returnValues"
EMAIL_ADDRESS = f"{PREFIX}/emailAddress"
INTEGRITY_VERIFIED = f"{PREFIX}/integrityVerified"

REGEX_INTERFACE = f"{PREFIX}/ti-regex"
PYTHON_INTERFACE = f"{PREFIX}/ti-python-script"
DOWNLOAD_INTERFACE = f"{PREFIX}/ti-download-verify"
REGEX_ADAPTER = f"{PREFIX}/adapter-regex"
PYTHON_ADAPTER = f"{PREFIX}/adapter-python-script"

ORCID_EMAIL_OPERATION = f"{PREFIX}/op-orcid-email"
DOWNLOAD_OPERATION = f"{PREFIX}/op-download-verify"

ORCID_PATTERN = r"(\d{4}-){3}\d{3}[\dX]"
ORCID_CAPTURE = r"https://orcid\.org/((?:\d{4}-){3}\d{3}[\dX])"
EMAIL_TEMPLATE = "python fetch_email.py {{input}}"

# adapters that stand in for the Python runtime of the ORCiD lookup
DEFAULT_ADAPTERS = [
    AdapterDeclaration(adapter_pid=REGEX_ADAPTER, implements_interface_pid=REGEX_INTERFACE, builtin="Regex"),
    AdapterDeclaration(adapter_pid=PYTHON_ADAPTER, implements_interface_pid=PYTHON_INTERFACE,
                       builtin="FixtureLookup"),
]


def _meta(name: str, description: str = "") -> AdministrativeMetadata:
    return AdministrativeMetadata(name=name, description=description, created=SEEDED_AT, modified=SEEDED_AT)


def _atomic(pid: str, name: str, kind: PrimitiveKind = PrimitiveKind.STRING,
            parent: Optional[str] = STRING, **restrictions) -> AtomicDataType:
    return AtomicDataType(pid=pid, meta=_meta(name), kind=kind, parent=parent,
                          restrictions=Restrictions(**restrictions))


def _attribute(pid: str, name: str, data_type: str, lower: int = 1,
               upper: Optional[int] = 1) -> Attribute:
    return Attribute(pid=pid, meta=_meta(name), data_type=data_type,
                     cardinality=CardinalityRange(lower=lower, upper=upper))


def data_types() -> List:
    return [
        _atomic(STRING, "String", parent=None),
        _atomic(BOOLEAN, "Boolean", kind=PrimitiveKind.BOOLEAN, parent=None),
        _atomic(URL, "URL", regex=r"https?://[^\s/?#]+[^\s]*"),
        _atomic(ORCID_URL, "ORCiD-URL", parent=URL, regex=r"https://orcid\.org/" + ORCID_PATTERN),
        _atomic(ORCID, "ORCiD", regex=ORCID_PATTERN),
        _atomic(ISO_8601, "ISO-8601",
                regex=r"\d{4}-\d{2}-\d{2}(T\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?)?"),
        _atomic(EMAIL, "E-mail address", regex=r"[^@\s]+@[^@\s]+\.[^@\s]+"),
        _atomic(HASH_VALUE, "Hash value", regex="[0-9a-f]+", min_length=32, max_length=128),
        _atomic(HASH_ALGORITHM, "Hash algorithm", permitted_values=("md5", "sha1", "sha256", "sha512")),
    ]


def attributes() -> List:
    return [
        _attribute(DATE_CREATED, "dateCreated", ISO_8601),
        _attribute(DATE_MODIFIED, "dateModified", ISO_8601, lower=0),
        _attribute(CONTACT, "contact", ORCID_URL),
        _attribute(LOCATION, "digitalObjectLocation", URL),
        _attribute(HASH, "hash", HASH_VALUE),
        _attribute(ALGORITHM, "algorithm", HASH_ALGORITHM),
        _attribute(CHECKSUM, "checksum", CHECKSUM_PROFILE),
        _attribute(KIP_RECORD, "kipRecord", HELMHOLTZ_KIP),
        _attribute(REGEX_INPUT, "regexInput", STRING),
        _attribute(REGEX_PATTERN, "regexPattern", STRING),
        _attribute(REGEX_OUTPUT, "regexOutput", STRING, lower=0, upper=None),
        _attribute(EXTRACTED_ORCID, "extracted ORCiD", ORCID),
        _attribute(RUN_COMMAND, "runCommand", STRING),
        _attribute(RETURN_VALUES, "returnValues", STRING, lower=0, upper=None),
        _attribute(EMAIL_ADDRESS, "e-mail address", EMAIL),
        _attribute(INTEGRITY_VERIFIED, "integrityVerified", BOOLEAN),
    ]


def profiles() -> List:
    return [
        TypeProfile(
            pid=CHECKSUM_PROFILE, meta=_meta("Checksum", "Hash value and the algorithm that produced it"),
            attributes=(HASH, ALGORITHM),
            policy=ValidationPolicy(combinator=Combinator.ALL, allow_additional=False),
        ),
        TypeProfile(
            pid=HELMHOLTZ_KIP, meta=_meta("Helmholtz KIP", "Excerpt of the Helmholtz kernel information profile"),
            attributes=(LOCATION, DATE_CREATED, DATE_MODIFIED, CONTACT, CHECKSUM),
            policy=ValidationPolicy(combinator=Combinator.ALL, allow_additional=True),
        ),
    ]


def interfaces() -> List:
    return [
        TechnologyInterface(pid=REGEX_INTERFACE, meta=_meta("Regular expression"),
                            inputs=(REGEX_INPUT, REGEX_PATTERN), outputs=(REGEX_OUTPUT,),
                            adapters=(REGEX_ADAPTER,)),
        TechnologyInterface(pid=PYTHON_INTERFACE, meta=_meta("Python script"),
                            inputs=(RUN_COMMAND,), outputs=(RETURN_VALUES,),
                            adapters=(PYTHON_ADAPTER,)),
        TechnologyInterface(pid=DOWNLOAD_INTERFACE, meta=_meta("Resource download with checksum verification"),
                            inputs=(KIP_RECORD,), outputs=(INTEGRITY_VERIFIED,)),
    ]


def operations() -> List:
    return [
        Operation(
            pid=ORCID_EMAIL_OPERATION,
            meta=_meta("Get primary e-mail from ORCiD via API"),
            executable_on=CONTACT,
            returns=(EMAIL_ADDRESS,),
            steps=(
                OperationStep(
                    index=0,
                    technology_interface=REGEX_INTERFACE,
                    input_mappings=(
                        AttributeMapping(input_attribute=CONTACT, output_attribute=REGEX_INPUT),
                        AttributeMapping(constant_value=ORCID_CAPTURE, output_attribute=REGEX_PATTERN),
                    ),
                    output_mappings=(
                        AttributeMapping(input_attribute=REGEX_OUTPUT, output_attribute=EXTRACTED_ORCID, index=1),
                    ),
                ),
                OperationStep(
                    index=1,
                    technology_interface=PYTHON_INTERFACE,
                    input_mappings=(
                        AttributeMapping(input_attribute=EXTRACTED_ORCID, output_attribute=RUN_COMMAND,
                                         template=EMAIL_TEMPLATE),
                    ),
                    output_mappings=(
                        AttributeMapping(input_attribute=RETURN_VALUES, output_attribute=EMAIL_ADDRESS, index=0),
                    ),
                ),
            ),
        ),
        Operation(
            pid=DOWNLOAD_OPERATION,
            meta=_meta("Download Resource and Check Integrity"),
            executable_on=KIP_RECORD,
            returns=(INTEGRITY_VERIFIED,),
            steps=(
                OperationStep(
                    index=0,
                    technology_interface=DOWNLOAD_INTERFACE,
                    input_mappings=(AttributeMapping(input_attribute=KIP_RECORD, output_attribute=KIP_RECORD),),
                    output_mappings=(
                        AttributeMapping(input_attribute=INTEGRITY_VERIFIED, output_attribute=INTEGRITY_VERIFIED),
                    ),
                ),
            ),
        ),
    ]


def seed_entities() -> List:
    """Every seed entity; import order is resolved by the loader."""
    return data_types() + attributes() + profiles() + interfaces() + operations()
