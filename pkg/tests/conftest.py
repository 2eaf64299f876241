"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from nidsbench.dataset import (
    Attribute,
    AttributeSchema,
    Instance,
    dataset_from_instances,
    kdd99_schema,
)

# values for each nominal attribute of the raw schema
_NOMINAL_FILL = {
    "protocol_type": ("tcp", "udp", "icmp"),
    "service": ("http", "smtp", "ftp"),
    "flag": ("SF", "S0", "REJ"),
    "land": ("0", "1"),
    "logged_in": ("0", "1"),
    "is_host_login": ("0",),
    "is_guest_login": ("0", "1"),
}


def build_dataset(attrs, rows, labels, class_labels=()):
    """Assemble a Dataset from (name, kind[, domain]) specs and value rows."""
    schema = AttributeSchema(tuple(Attribute(*a) for a in attrs),
                             tuple(class_labels))
    instances = [Instance(tuple(r), lab) for r, lab in zip(rows, labels)]
    return dataset_from_instances(schema, instances)


def kdd_line(label: str, rng: np.random.Generator, dotted: bool = True) -> str:
    """One syntactically valid 42-field KDD record with random-ish values."""
    fields = []
    for attr in kdd99_schema().attributes:
        if attr.kind == "nominal":
            options = _NOMINAL_FILL[attr.name]
            fields.append(options[rng.integers(0, len(options))])
        else:
            fields.append(str(int(rng.integers(0, 500))))
    fields.append(label + "." if dotted else label)
    return ",".join(fields)


def kdd_file(path, labels, seed=0, dotted=True):
    """Write a miniature KDD-format file with the given label sequence."""
    rng = np.random.default_rng(seed)
    with open(path, "w") as fh:
        for lab in labels:
            fh.write(kdd_line(lab, rng, dotted) + "\n")
    return path


@pytest.fixture
def tiny_mixed_dataset():
    """4 instances, one numeric + one nominal attribute, two classes."""
    return build_dataset(
        [("x", "numeric"), ("color", "nominal")],
        [(1.0, "red"), (2.0, "red"), (3.0, "blue"), (4.0, "blue")],
        ["a", "a", "b", "b"],
    )
