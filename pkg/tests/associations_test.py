import random

import pytest

from app.associations import operations_for_attribute, operations_for_datatype, operations_for_record
from app.exceptions import EntityKindError, EntityNotFoundError
from app.schemas import AssociationMechanism, Severity
from app.seed import (
    CONTACT,
    DOWNLOAD_OPERATION,
    HELMHOLTZ_KIP,
    KIP_RECORD,
    LOCATION,
    ORCID_EMAIL_OPERATION,
    ORCID_URL,
    REGEX_INPUT,
    STRING,
)
from tests.builders import atomic, attribute, operation, pid, step, store_with

ORCID_VALUE = "https://orcid.org/0000-0002-1825-0097"


# ============== Seed corpus ==============

def test_operations_for_contact(seeded):
    assert operations_for_attribute(CONTACT, seeded) == [ORCID_EMAIL_OPERATION]


def test_no_operations_for_plain_strings(seeded):
    assert operations_for_attribute(REGEX_INPUT, seeded) == []
    assert operations_for_datatype(STRING, seeded) == []


def test_operations_for_datatype(seeded):
    assert operations_for_datatype(ORCID_URL, seeded) == [ORCID_EMAIL_OPERATION]


def test_profile_collects_operations_of_its_attributes(seeded):
    assert operations_for_datatype(HELMHOLTZ_KIP, seeded) == [DOWNLOAD_OPERATION, ORCID_EMAIL_OPERATION]


def test_lookup_errors(seeded):
    with pytest.raises(EntityKindError):
        operations_for_attribute(ORCID_URL, seeded)
    with pytest.raises(EntityKindError):
        operations_for_datatype(CONTACT, seeded)
    with pytest.raises(EntityNotFoundError):
        operations_for_attribute("21.T11148/missing", seeded)


def test_record_buckets(seeded):
    record = {
        CONTACT: ORCID_VALUE,
        KIP_RECORD: {LOCATION: "https://example.org/data/42"},
        REGEX_INPUT: DOWNLOAD_OPERATION,
        "21.T11148/unknown": 1,
    }
    associations = operations_for_record(record, seeded)
    assert associations.buckets == {
        AssociationMechanism.RECORD_TYPING: (DOWNLOAD_OPERATION,),
        AssociationMechanism.PROFILE_TYPING: (DOWNLOAD_OPERATION,),
        AssociationMechanism.ATTRIBUTE_TYPING: (ORCID_EMAIL_OPERATION,),
    }
    assert [(d.severity, d.entity) for d in associations.diagnostics] == [
        (Severity.WARNING, "21.T11148/unknown")
    ]


def test_record_data_type_key(seeded):
    associations = operations_for_record({ORCID_URL: ORCID_VALUE}, seeded)
    assert associations.buckets[AssociationMechanism.ATTRIBUTE_TYPING] == (ORCID_EMAIL_OPERATION,)
    assert associations.diagnostics == ()


def test_empty_record(seeded):
    associations = operations_for_record({}, seeded)
    assert all(pids == () for pids in associations.buckets.values())


# ============== Random corpora ==============

def admitted(lower, upper):
    return {n for n in range(21) if n >= lower and (upper is None or n <= upper)}


def random_corpus(rng):
    parents = {}
    for i in range(6):
        parents[f"t{i}"] = rng.choice([None] + [f"t{j}" for j in range(i)])
    attributes = {}
    for i in range(8):
        lower = rng.randint(0, 2)
        upper = rng.choice([None, max(1, lower + rng.randint(0, 3))])
        attributes[f"a{i}"] = (rng.choice(sorted(parents)), lower, upper)
    executable = {f"op{i}": rng.choice(sorted(attributes)) for i in range(4)}
    store = store_with(
        *[atomic(name, parent=parent) for name, parent in parents.items()],
        *[attribute(name, data_type, lower, upper) for name, (data_type, lower, upper) in attributes.items()],
        *[operation(name, target, [step(0, "ti")]) for name, target in executable.items()],
    )
    return store, parents, attributes, executable


def ancestors(name, parents):
    found = []
    while name is not None:
        found.append(name)
        name = parents[name]
    return found


@pytest.mark.parametrize("seed", range(20))
def test_attribute_lookup_matches_brute_force(seed):
    store, parents, attributes, executable = random_corpus(random.Random(seed))

    def expected_for(name):
        data_type, lower, upper = attributes[name]
        found = []
        for op, target in executable.items():
            slot_type, slot_lower, slot_upper = attributes[target]
            if target == name or (slot_type in ancestors(data_type, parents)
                                  and admitted(lower, upper) <= admitted(slot_lower, slot_upper)):
                found.append(pid(op))
        return sorted(found)

    for name in attributes:
        assert operations_for_attribute(pid(name), store) == expected_for(name)

    for data_type in parents:
        expected = set()
        for name, (slot_type, _, _) in attributes.items():
            if slot_type in ancestors(data_type, parents):
                expected.update(expected_for(name))
        assert operations_for_datatype(pid(data_type), store) == sorted(expected)
