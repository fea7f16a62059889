"""Core domain types shared across the toolkit.

A flow record is one network flow: categorical fields (addresses, ports,
protocol, ...), continuous statistics, and a binary label. A feature schema
fixes the ordered column layout, the vocabulary and embedding width of each
categorical feature, and the min/max scaling bounds of each continuous one.

All types are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

#: Features treated as IPv4 addresses by octet truncation.
IP_FEATURES = ("SrcIP", "DstIP")

#: Reserved vocabulary index for values never seen at fit time.
OOV_INDEX = 0

IP_MODES = ("full", "first3", "drop")


class ToolError(Exception):
    """Base class for structured, user-facing errors."""


class ConfigError(ToolError):
    """Invalid configuration or command arguments."""


class IngestError(ToolError):
    """An input file could not be parsed at all."""


class SchemaMismatchError(ToolError):
    """Data does not match the schema it is being used with."""


def escape_field(value: str) -> str:
    """Escape a string so it survives as one tab-separated field on one line."""
    return (
        value.replace("%", "%25")
        .replace("\t", "%09")
        .replace("\n", "%0A")
        .replace("\r", "%0D")
    )


def unescape_field(value: str) -> str:
    """Inverse of :func:`escape_field`."""
    out = value.replace("%0D", "\r").replace("%0A", "\n").replace("%09", "\t")
    return out.replace("%25", "%")


def format_real(x: float) -> str:
    """Render a 64-bit real with 17 significant digits (exact round-trip)."""
    return f"{float(x):.17g}"


class Vocabulary:
    """Bijection between category strings and dense indices 1..n.

    Index 0 is reserved for out-of-vocabulary values, so an embedding table
    with n+1 rows covers every possible lookup. Values are stored in sorted
    order, which makes construction deterministic for a given value set.
    """

    __slots__ = ("_values", "_index")

    def __init__(self, values: Iterable[str]):
        uniq = sorted(set(values))
        if not uniq:
            raise ValueError("vocabulary needs at least one value")
        self._values: tuple[str, ...] = tuple(uniq)
        self._index = {v: i + 1 for i, v in enumerate(uniq)}

    @property
    def cardinality(self) -> int:
        return len(self._values)

    def values(self) -> tuple[str, ...]:
        """All in-vocabulary values, in index order (index 1 first)."""
        return self._values

    def encode(self, value: str) -> int:
        """Index of ``value``, or ``OOV_INDEX`` if it was never seen."""
        return self._index.get(value, OOV_INDEX)

    def decode(self, index: int) -> str:
        if not 1 <= index <= len(self._values):
            raise ValueError(f"index {index} is reserved or out of range")
        return self._values[index - 1]

    def __contains__(self, value: str) -> bool:
        return value in self._index

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._values == other._values

    def __repr__(self) -> str:
        return f"Vocabulary(n={len(self._values)})"


@dataclass(frozen=True, eq=False)
class FlowRecord:
    """One network flow: categorical and continuous feature maps plus label.

    The two maps never share a feature name; ``label`` is 0 (benign) or
    1 (malicious); continuous values must be finite (ingestion resolves
    non-finite cells before records are built). ``source_tag`` identifies the
    origin (dataset name plus row/element ordinal).
    """

    categorical: dict[str, str]
    continuous: dict[str, float]
    label: int
    source_tag: str = ""

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowRecord):
            return NotImplemented
        return (
            self.categorical == other.categorical
            and self.continuous == other.continuous
            and self.label == other.label
            and self.source_tag == other.source_tag
        )


@dataclass(frozen=True)
class FeatureColumn:
    """One ordered schema entry: a named categorical or continuous feature."""

    name: str
    kind: str
    vocab: Vocabulary | None = None
    embedding_dims: int | None = None
    bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == CONTINUOUS and (self.vocab is not None or self.embedding_dims is not None):
            raise ValueError(f"continuous feature {self.name!r} cannot carry a vocabulary")
        if self.kind == CATEGORICAL and self.bounds is not None:
            raise ValueError(f"categorical feature {self.name!r} cannot carry scaler bounds")
        if self.bounds is not None and self.bounds[0] > self.bounds[1]:
            raise ValueError(f"feature {self.name!r}: x_min {self.bounds[0]} > x_max {self.bounds[1]}")
        if self.embedding_dims is not None and self.embedding_dims < 1:
            raise ValueError(f"feature {self.name!r}: embedding_dims must be positive")

    @property
    def fitted(self) -> bool:
        if self.kind == CATEGORICAL:
            return self.vocab is not None and self.embedding_dims is not None
        return self.bounds is not None


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature descriptors with a stable, serializable order.

    ``ip_mode`` records how IP-address features were fitted: ``full`` keeps
    dotted quads as-is, ``first3`` builds vocabularies over the first three
    octets, ``drop`` omits IP features entirely.
    """

    columns: tuple[FeatureColumn, ...]
    ip_mode: str = "full"

    def __post_init__(self) -> None:
        if self.ip_mode not in IP_MODES:
            raise ValueError(f"unknown ip_mode {self.ip_mode!r}")
        names = [c.name for c in self.columns]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate feature names in schema: {dupes}")

    @property
    def categorical_columns(self) -> tuple[FeatureColumn, ...]:
        return tuple(c for c in self.columns if c.kind == CATEGORICAL)

    @property
    def continuous_columns(self) -> tuple[FeatureColumn, ...]:
        return tuple(c for c in self.columns if c.kind == CONTINUOUS)

    @property
    def fitted(self) -> bool:
        return bool(self.columns) and all(c.fitted for c in self.columns)

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> FeatureColumn:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"unknown feature {name!r}")

    def to_lines(self) -> list[str]:
        """Serialize to text lines; ``from_lines`` restores it exactly."""
        out = [f"ip_mode\t{self.ip_mode}", f"columns\t{len(self.columns)}"]
        for col in self.columns:
            name = escape_field(col.name)
            if col.kind == CATEGORICAL:
                dims = "-" if col.embedding_dims is None else str(col.embedding_dims)
                card = "-" if col.vocab is None else str(col.vocab.cardinality)
                out.append(f"col\t{name}\t{CATEGORICAL}\t{dims}\t{card}")
                if col.vocab is not None:
                    out.extend(f"v\t{escape_field(v)}" for v in col.vocab.values())
            else:
                if col.bounds is None:
                    lo = hi = "-"
                else:
                    lo, hi = format_real(col.bounds[0]), format_real(col.bounds[1])
                out.append(f"col\t{name}\t{CONTINUOUS}\t{lo}\t{hi}")
        return out

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> FeatureSchema:
        it: Iterator[str] = iter(lines)

        def split(line: str, expect: str, n: int) -> list[str]:
            parts = line.split("\t")
            if parts[0] != expect or len(parts) != n:
                raise ValueError(f"malformed schema line: {line!r}")
            return parts

        ip_mode = split(next(it), "ip_mode", 2)[1]
        ncols = int(split(next(it), "columns", 2)[1])
        cols: list[FeatureColumn] = []
        for _ in range(ncols):
            parts = split(next(it), "col", 5)
            name, kind = unescape_field(parts[1]), parts[2]
            if kind == CATEGORICAL:
                dims = None if parts[3] == "-" else int(parts[3])
                vocab = None
                if parts[4] != "-":
                    card = int(parts[4])
                    values = [unescape_field(split(next(it), "v", 2)[1]) for _ in range(card)]
                    vocab = Vocabulary(values)
                    if vocab.cardinality != card:
                        raise ValueError(f"vocabulary for {name!r} has duplicate values")
                cols.append(FeatureColumn(name, CATEGORICAL, vocab=vocab, embedding_dims=dims))
            elif kind == CONTINUOUS:
                bounds = None
                if parts[3] != "-":
                    bounds = (float(parts[3]), float(parts[4]))
                cols.append(FeatureColumn(name, CONTINUOUS, bounds=bounds))
            else:
                raise ValueError(f"unknown feature kind {kind!r}")
        return cls(tuple(cols), ip_mode=ip_mode)


@dataclass(frozen=True)
class LabeledDataset:
    """A list of flow records plus the schema they conform to.

    ``provenance`` carries origin metadata: source file names, dropped-column
    notes, generator seed, and similar string-valued facts.
    """

    records: tuple[FlowRecord, ...]
    schema: FeatureSchema
    provenance: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def label_counts(self) -> dict[int, int]:
        counts = {0: 0, 1: 0}
        for r in self.records:
            counts[r.label] = counts.get(r.label, 0) + 1
        return counts

    def subset(self, indexes: Iterable[int], note: str = "") -> LabeledDataset:
        """New dataset holding the records at ``indexes`` (shared, not copied)."""
        recs = tuple(self.records[i] for i in indexes)
        prov = dict(self.provenance)
        if note:
            prov["subset"] = note
        return LabeledDataset(recs, self.schema, prov)


def validate_record(record: FlowRecord, schema: FeatureSchema) -> list[str]:
    """Check one record against a schema; empty list means the record is ok.

    Each returned string describes one violation and names the offending
    feature, so callers can report every problem at once.
    """
    problems: list[str] = []
    overlap = set(record.categorical) & set(record.continuous)
    for name in sorted(overlap):
        problems.append(f"feature {name!r} appears as both categorical and continuous")
    for col in schema.columns:
        if col.kind == CATEGORICAL:
            if col.name not in record.categorical:
                problems.append(f"missing categorical feature {col.name!r}")
        else:
            if col.name not in record.continuous:
                problems.append(f"missing continuous feature {col.name!r}")
            elif not math.isfinite(record.continuous[col.name]):
                problems.append(f"non-finite value for {col.name!r}")
    known = set(schema.names())
    for name in sorted((set(record.categorical) | set(record.continuous)) - known):
        problems.append(f"unknown feature {name!r}")
    if record.label not in (0, 1):
        problems.append(f"label must be 0 or 1, got {record.label!r}")
    return problems
