"""KDD99-family schema, record parsing, dataset loading and fetching.

Records are plain comma-separated lines: 41 feature fields followed by a
class label that may carry a trailing period ("smurf."). Datasets are stored
column-major (numeric matrix + nominal code matrix + label codes) so the
learners can work on numpy arrays directly; `Instance` objects are material-
ized on demand.
"""

from __future__ import annotations

import gzip
import hashlib
import math
import os
import urllib.parse
import urllib.request
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

NUMERIC = "numeric"
NOMINAL = "nominal"


class ParseError(ValueError):
    """A record line violates the 42-field KDD record format."""


class DataError(ValueError):
    """A dataset-level problem: empty file, schema mismatch, unknown label."""


class IntegrityError(RuntimeError):
    """A fetched file's SHA-256 digest does not match the expected digest."""


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # NUMERIC or NOMINAL
    domain: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, NOMINAL):
            raise ValueError(f"unknown attribute kind {self.kind!r}")


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute descriptors plus the ordered class-label set."""

    attributes: tuple[Attribute, ...]
    class_labels: tuple[str, ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def numeric_positions(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.attributes) if a.kind == NUMERIC)

    @property
    def nominal_positions(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.attributes) if a.kind == NOMINAL)

    def label_code(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise DataError(f"label {label!r} not in schema class labels") from None

    def same_attributes(self, other: "AttributeSchema") -> bool:
        """True when attribute names and kinds match (domains may differ)."""
        return [(a.name, a.kind) for a in self.attributes] == [
            (a.name, a.kind) for a in other.attributes
        ]


@dataclass(frozen=True)
class Instance:
    """One connection record: mixed feature values plus a class label."""

    values: tuple
    label: str


@dataclass(frozen=True)
class Dataset:
    """Immutable, schema-conformant collection of instances.

    `numeric` is (n, n_numeric) float64, `nominal` is (n, n_nominal) int32
    codes into the matching attribute domains, `labels` is (n,) int32 codes
    into `schema.class_labels`. Column j of `numeric` corresponds to
    `schema.numeric_positions[j]`, and likewise for `nominal`.
    """

    schema: AttributeSchema
    numeric: np.ndarray
    nominal: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.schema.class_labels))
        return {lab: int(c) for lab, c in zip(self.schema.class_labels, counts)}

    def instance(self, i: int) -> Instance:
        values: list = [None] * self.schema.n_attributes
        for j, pos in enumerate(self.schema.numeric_positions):
            values[pos] = float(self.numeric[i, j])
        for j, pos in enumerate(self.schema.nominal_positions):
            values[pos] = self.schema.attributes[pos].domain[self.nominal[i, j]]
        return Instance(tuple(values), self.schema.class_labels[self.labels[i]])

    def iter_instances(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield self.instance(i)

    def subset(self, indices: np.ndarray | Sequence[int], note: str = "") -> "Dataset":
        idx = np.asarray(indices)
        prov = self.provenance + (f"; {note}" if note else "")
        return Dataset(self.schema, self.numeric[idx], self.nominal[idx],
                       self.labels[idx], prov)

    def with_provenance(self, note: str) -> "Dataset":
        return replace(self, provenance=self.provenance + f"; {note}")

    def equals(self, other: "Dataset") -> bool:
        return (self.schema == other.schema
                and np.array_equal(self.numeric, other.numeric)
                and np.array_equal(self.nominal, other.nominal)
                and np.array_equal(self.labels, other.labels))

    def to_lines(self) -> Iterator[str]:
        """Serialize back to the comma-separated record format (no label dot)."""
        num_pos = self.schema.numeric_positions
        nom_pos = self.schema.nominal_positions
        domains = [self.schema.attributes[p].domain for p in nom_pos]
        for i in range(len(self)):
            fields = [""] * self.schema.n_attributes
            for j, pos in enumerate(num_pos):
                fields[pos] = repr(float(self.numeric[i, j]))
            for j, pos in enumerate(nom_pos):
                fields[pos] = domains[j][self.nominal[i, j]]
            fields.append(self.schema.class_labels[self.labels[i]])
            yield ",".join(fields)


# The canonical 41-attribute connection-record layout. The seven symbolic
# attributes follow the official kddcup.names declaration.
_KDD_ATTRIBUTES = (
    ("duration", NUMERIC), ("protocol_type", NOMINAL), ("service", NOMINAL),
    ("flag", NOMINAL), ("src_bytes", NUMERIC), ("dst_bytes", NUMERIC),
    ("land", NOMINAL), ("wrong_fragment", NUMERIC), ("urgent", NUMERIC),
    ("hot", NUMERIC), ("num_failed_logins", NUMERIC), ("logged_in", NOMINAL),
    ("num_compromised", NUMERIC), ("root_shell", NUMERIC),
    ("su_attempted", NUMERIC), ("num_root", NUMERIC),
    ("num_file_creations", NUMERIC), ("num_shells", NUMERIC),
    ("num_access_files", NUMERIC), ("num_outbound_cmds", NUMERIC),
    ("is_host_login", NOMINAL), ("is_guest_login", NOMINAL),
    ("count", NUMERIC), ("srv_count", NUMERIC), ("serror_rate", NUMERIC),
    ("srv_serror_rate", NUMERIC), ("rerror_rate", NUMERIC),
    ("srv_rerror_rate", NUMERIC), ("same_srv_rate", NUMERIC),
    ("diff_srv_rate", NUMERIC), ("srv_diff_host_rate", NUMERIC),
    ("dst_host_count", NUMERIC), ("dst_host_srv_count", NUMERIC),
    ("dst_host_same_srv_rate", NUMERIC), ("dst_host_diff_srv_rate", NUMERIC),
    ("dst_host_same_src_port_rate", NUMERIC),
    ("dst_host_srv_diff_host_rate", NUMERIC), ("dst_host_serror_rate", NUMERIC),
    ("dst_host_srv_serror_rate", NUMERIC), ("dst_host_rerror_rate", NUMERIC),
    ("dst_host_srv_rerror_rate", NUMERIC),
)


def kdd99_schema() -> AttributeSchema:
    """The raw 41-attribute schema with empty (to-be-accumulated) domains."""
    return AttributeSchema(tuple(Attribute(n, k) for n, k in _KDD_ATTRIBUTES))


def _parse_fields(fields: list[str], schema: AttributeSchema,
                  line_no: int | None = None) -> Instance:
    ctx = f"line {line_no}: " if line_no is not None else ""
    expected = schema.n_attributes + 1
    if len(fields) != expected:
        raise ParseError(f"{ctx}expected {expected} fields, got {len(fields)}")
    label = fields[-1]
    if label.endswith("."):
        label = label[:-1]
    if not label:
        raise ParseError(f"{ctx}empty class label")
    values = []
    for pos, attr in enumerate(schema.attributes):
        raw = fields[pos]
        if attr.kind == NUMERIC:
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(
                    f"{ctx}field {pos + 1} ({attr.name}): "
                    f"cannot parse {raw!r} as a number") from None
            if not math.isfinite(v):
                raise ParseError(
                    f"{ctx}field {pos + 1} ({attr.name}): non-finite value {raw!r}")
            values.append(v)
        else:
            if not raw:
                raise ParseError(f"{ctx}field {pos + 1} ({attr.name}): empty value")
            values.append(raw)
    return Instance(tuple(values), label)


def parse_kdd_line(line: str, schema: AttributeSchema,
                   line_no: int | None = None) -> Instance:
    """Parse one comma-separated record into an Instance.

    The label's single trailing "." (as in the official files) is stripped;
    no other normalization is applied.
    """
    return _parse_fields(line.rstrip("\r\n").split(","), schema, line_no)


def dataset_from_instances(schema: AttributeSchema,
                           instances: Iterable[Instance],
                           provenance: str = "") -> Dataset:
    """Assemble a Dataset, accumulating nominal domains and class labels.

    Domains and class labels not already present in `schema` are added in
    first-seen order, then frozen into the returned dataset's schema.
    """
    num_pos = schema.numeric_positions
    nom_pos = schema.nominal_positions
    domain_codes: list[dict[str, int]] = [
        {sym: i for i, sym in enumerate(schema.attributes[p].domain)} for p in nom_pos
    ]
    label_codes: dict[str, int] = {lab: i for i, lab in enumerate(schema.class_labels)}

    numeric_rows, nominal_rows, labels = [], [], []
    for inst in instances:
        numeric_rows.append([inst.values[p] for p in num_pos])
        row = []
        for j, p in enumerate(nom_pos):
            codes = domain_codes[j]
            row.append(codes.setdefault(inst.values[p], len(codes)))
        nominal_rows.append(row)
        labels.append(label_codes.setdefault(inst.label, len(label_codes)))

    attrs = list(schema.attributes)
    for j, p in enumerate(nom_pos):
        attrs[p] = replace(attrs[p], domain=tuple(domain_codes[j]))
    frozen = AttributeSchema(tuple(attrs), tuple(label_codes))
    n = len(labels)
    return Dataset(
        frozen,
        np.asarray(numeric_rows, dtype=np.float64).reshape(n, len(num_pos)),
        np.asarray(nominal_rows, dtype=np.int32).reshape(n, len(nom_pos)),
        np.asarray(labels, dtype=np.int32),
        provenance,
    )


def _read_text(path: Path) -> str:
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data.decode("utf-8")


def load_dataset(path: str | Path, schema: AttributeSchema | None = None) -> Dataset:
    """Load a KDD-format file (optionally gzipped) into a Dataset.

    One instance per non-empty line, file order preserved. NSL-KDD's optional
    trailing "difficulty" column (an extra 43rd integer field) is dropped.
    Any line-level parse error aborts the load with line/field context.
    """
    path = Path(path)
    schema = schema if schema is not None else kdd99_schema()
    text = _read_text(path)

    expected = schema.n_attributes + 1
    num_pos = schema.numeric_positions
    nom_pos = schema.nominal_positions
    domain_codes: list[dict[str, int]] = [
        {sym: i for i, sym in enumerate(schema.attributes[p].domain)} for p in nom_pos
    ]
    label_codes: dict[str, int] = {lab: i for i, lab in enumerate(schema.class_labels)}

    rows = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not rows:
        raise DataError(f"{path}: no instances")

    numeric = np.empty((len(rows), len(num_pos)), dtype=np.float64)
    nominal = np.empty((len(rows), len(nom_pos)), dtype=np.int32)
    labels = np.empty(len(rows), dtype=np.int32)

    for i, (line_no, line) in enumerate(rows):
        fields = line.rstrip("\r\n").split(",")
        if len(fields) == expected + 1 and fields[-1].isdigit():
            fields = fields[:-1]  # NSL-KDD difficulty column
        inst = _parse_fields(fields, schema, line_no)
        numeric[i] = [inst.values[p] for p in num_pos]
        for j, p in enumerate(nom_pos):
            codes = domain_codes[j]
            nominal[i, j] = codes.setdefault(inst.values[p], len(codes))
        labels[i] = label_codes.setdefault(inst.label, len(label_codes))

    attrs = list(schema.attributes)
    for j, p in enumerate(nom_pos):
        attrs[p] = replace(attrs[p], domain=tuple(domain_codes[j]))
    frozen = AttributeSchema(tuple(attrs), tuple(label_codes))
    return Dataset(frozen, numeric, nominal, labels, provenance=f"loaded {path}")


def write_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        for line in ds.to_lines():
            fh.write(line + "\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_dataset(name: str, url: str, expected_digest: str,
                  cache_dir: str | Path) -> Path:
    """Return a digest-verified local copy of a dataset file.

    A cached copy whose SHA-256 matches `expected_digest` is returned without
    touching the network; a mismatching cached copy is removed and fetched
    again. A mismatching download is deleted and raises IntegrityError.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    suffix = Path(urllib.parse.urlsplit(url).path).suffix
    target = cache_dir / (name + suffix)
    expected = expected_digest.lower()

    if target.exists():
        if sha256_file(target) == expected:
            return target
        target.unlink()

    part = target.with_name(target.name + ".part")
    h = hashlib.sha256()
    try:
        with urllib.request.urlopen(url) as resp, open(part, "wb") as out:
            for chunk in iter(lambda: resp.read(1 << 20), b""):
                h.update(chunk)
                out.write(chunk)
    except Exception:
        part.unlink(missing_ok=True)
        raise
    if h.hexdigest() != expected:
        part.unlink()
        raise IntegrityError(
            f"{name}: digest mismatch for {url} "
            f"(expected {expected}, got {h.hexdigest()})")
    os.replace(part, target)
    return target
