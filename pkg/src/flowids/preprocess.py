"""Turn labeled datasets into numeric training matrices.

Min-max scaling to [0,1], vocabulary building, embedding-width sizing by the
fourth-root rule, IPv4 octet truncation, one-hot encoding, and the final
dataset-to-matrix encoding consumed by the models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flows import (
    CATEGORICAL,
    IP_FEATURES,
    IP_MODES,
    ConfigError,
    FeatureColumn,
    FeatureSchema,
    LabeledDataset,
    SchemaMismatchError,
    Vocabulary,
)

#: The high-cardinality categorical features sized in the CIC layout.
IP_PORT_FEATURES = ("SrcIP", "DstIP", "SrcPort", "DstPort")

EMBED_SETS = ("all", "ip-port")


def embedding_dims(cardinality: int) -> int:
    """Embedding width for a categorical feature: ceil of the fourth root.

    Computed exactly: the result is the smallest d with d**4 >= cardinality,
    immune to floating-point drift of ``cardinality ** 0.25`` near exact
    fourth powers.
    """
    if cardinality < 1:
        raise ValueError(f"cardinality must be >= 1, got {cardinality}")
    d = max(1, math.ceil(cardinality**0.25))
    while d > 1 and (d - 1) ** 4 >= cardinality:
        d -= 1
    while d**4 < cardinality:
        d += 1
    return d


def truncate_ip(ip: str, octets: int) -> str:
    """First ``octets`` octets of a dotted-quad IPv4 address.

    Accepts an already-truncated form with at least ``octets`` parts, so
    re-truncating a truncated address is the identity.
    """
    if not 1 <= octets <= 4:
        raise ValueError(f"octets must be in 1..4, got {octets}")
    parts = ip.split(".")
    if not octets <= len(parts) <= 4:
        raise ValueError(f"malformed IPv4 address {ip!r}")
    for part in parts:
        if not part.isdigit() or not 0 <= int(part) <= 255:
            raise ValueError(f"malformed IPv4 address {ip!r}")
    return ".".join(parts[:octets])


def one_hot(vocab: Vocabulary, value: str) -> np.ndarray:
    """0/1 vector of length cardinality+1 with a single 1.

    Slot 0 is the reserved out-of-vocabulary slot; in-vocabulary values light
    slots 1..n.
    """
    vec = np.zeros(vocab.cardinality + 1)
    vec[vocab.encode(value)] = 1.0
    return vec


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature (x_min, x_max) bounds, fitted on the training split only."""

    bounds: dict[str, tuple[float, float]]


def fit_scaler(train: LabeledDataset) -> ScalerParams:
    """Observed min/max of every continuous feature over the training records."""
    if not train.records:
        raise ValueError("cannot fit a scaler on an empty dataset")
    bounds: dict[str, tuple[float, float]] = {}
    for col in train.schema.continuous_columns:
        try:
            values = [r.continuous[col.name] for r in train.records]
        except KeyError:
            raise SchemaMismatchError(f"record is missing continuous feature {col.name!r}") from None
        bounds[col.name] = (min(values), max(values))
    return ScalerParams(bounds)


def apply_scaler(params: ScalerParams, x: float, feature: str) -> float:
    """(x - x_min) / (x_max - x_min), clamped to [0,1]; 0 for a constant feature."""
    try:
        lo, hi = params.bounds[feature]
    except KeyError:
        raise KeyError(f"unknown continuous feature {feature!r}") from None
    if hi == lo:
        return 0.0
    return min(1.0, max(0.0, (x - lo) / (hi - lo)))


def fit_schema(
    train: LabeledDataset,
    ip_mode: str = "full",
    embed_set: str = "all",
    dim_overrides: dict[str, int] | None = None,
    exclude: tuple[str, ...] = (),
) -> FeatureSchema:
    """Fit vocabularies, embedding widths and scaler bounds on a training split.

    ``ip_mode='first3'`` rebuilds IP vocabularies over truncated addresses (so
    embedding identity reflects the /24 network); ``'drop'`` omits IP features.
    ``embed_set='ip-port'`` restricts categorical features to the four
    address/port columns, discarding any others. ``exclude`` drops the named
    categorical features outright (the autoencoder path uses it to leave out
    the high-cardinality port columns).
    """
    if ip_mode not in IP_MODES:
        raise ConfigError(f"unknown ip_mode {ip_mode!r}")
    if embed_set not in EMBED_SETS:
        raise ConfigError(f"unknown embed_set {embed_set!r}")
    if not train.records:
        raise ValueError("cannot fit a schema on an empty dataset")
    overrides = dim_overrides or {}
    cols: list[FeatureColumn] = []
    for col in train.schema.columns:
        if col.kind == CATEGORICAL:
            if ip_mode == "drop" and col.name in IP_FEATURES:
                continue
            if embed_set == "ip-port" and col.name not in IP_PORT_FEATURES:
                continue
            if col.name in exclude:
                continue
            try:
                values = [r.categorical[col.name] for r in train.records]
            except KeyError:
                raise SchemaMismatchError(f"record is missing categorical feature {col.name!r}") from None
            if ip_mode == "first3" and col.name in IP_FEATURES:
                values = [truncate_ip(v, 3) for v in values]
            vocab = Vocabulary(values)
            dims = overrides.get(col.name, embedding_dims(vocab.cardinality))
            cols.append(FeatureColumn(col.name, CATEGORICAL, vocab=vocab, embedding_dims=dims))
        else:
            try:
                values = [r.continuous[col.name] for r in train.records]
            except KeyError:
                raise SchemaMismatchError(f"record is missing continuous feature {col.name!r}") from None
            cols.append(FeatureColumn(col.name, col.kind, bounds=(min(values), max(values))))
    if not cols:
        raise ConfigError("no features left after applying ip_mode/embed_set")
    return FeatureSchema(tuple(cols), ip_mode=ip_mode)


@dataclass
class EncodedBatch:
    """Numeric view of a dataset: scaled matrix, index columns, label vector.

    ``continuous`` holds the scaled continuous features (and, in one-hot mode,
    the appended 0/1 categorical columns); every entry lies in [0,1].
    ``categorical`` maps feature name to an int64 index column in index mode
    and is empty in one-hot mode.
    """

    continuous: np.ndarray
    continuous_names: tuple[str, ...]
    categorical: dict[str, np.ndarray]
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.continuous.shape[1])

    def take(self, indexes: np.ndarray) -> EncodedBatch:
        """Row subset in the given order (used for mini-batching)."""
        return EncodedBatch(
            continuous=self.continuous[indexes],
            continuous_names=self.continuous_names,
            categorical={k: v[indexes] for k, v in self.categorical.items()},
            labels=self.labels[indexes],
        )


def encoded_width(schema: FeatureSchema, categorical_mode: str) -> int:
    """Model input width implied by a fitted schema.

    index mode: sum of embedding dims + continuous count (the DNN input).
    onehot mode: per-feature cardinality + continuous count (the autoencoder
    input; the reserved OOV slot is not materialized as a column).
    """
    if not schema.fitted:
        raise ValueError("schema is not fitted")
    n_cont = len(schema.continuous_columns)
    if categorical_mode == "index":
        return n_cont + sum(c.embedding_dims for c in schema.categorical_columns)
    if categorical_mode == "onehot":
        return n_cont + sum(c.vocab.cardinality for c in schema.categorical_columns)
    raise ValueError(f"unknown categorical_mode {categorical_mode!r}")


def _categorical_value(record_map: dict[str, str], col: FeatureColumn, ip_mode: str) -> str:
    try:
        value = record_map[col.name]
    except KeyError:
        raise SchemaMismatchError(f"record is missing categorical feature {col.name!r}") from None
    if ip_mode == "first3" and col.name in IP_FEATURES:
        try:
            return truncate_ip(value, 3)
        except ValueError as err:
            raise SchemaMismatchError(f"feature {col.name!r}: {err}") from None
    return value


def encode_dataset(
    data: LabeledDataset, schema: FeatureSchema, categorical_mode: str = "index"
) -> EncodedBatch:
    """Encode records against a fitted schema; bit-identical across runs.

    index mode keeps one integer column per categorical feature (embedding
    lookup input). onehot mode expands each categorical feature into
    ``cardinality`` 0/1 columns appended after the continuous block;
    out-of-vocabulary values encode as an all-zero block, so the reserved
    slot never widens the matrix.
    """
    if categorical_mode not in ("index", "onehot"):
        raise ValueError(f"unknown categorical_mode {categorical_mode!r}")
    if not schema.fitted:
        raise ValueError("schema is not fitted")
    records = data.records
    n = len(records)
    cont_cols = schema.continuous_columns
    blocks: list[np.ndarray] = []
    names: list[str] = []

    cont = np.empty((n, len(cont_cols)))
    for j, col in enumerate(cont_cols):
        lo, hi = col.bounds
        try:
            raw = np.fromiter((r.continuous[col.name] for r in records), dtype=float, count=n)
        except KeyError:
            raise SchemaMismatchError(f"record is missing continuous feature {col.name!r}") from None
        if hi == lo:
            cont[:, j] = 0.0
        else:
            np.clip((raw - lo) / (hi - lo), 0.0, 1.0, out=cont[:, j])
    blocks.append(cont)
    names.extend(col.name for col in cont_cols)

    categorical: dict[str, np.ndarray] = {}
    for col in schema.categorical_columns:
        idx = np.fromiter(
            (col.vocab.encode(_categorical_value(r.categorical, col, schema.ip_mode)) for r in records),
            dtype=np.int64,
            count=n,
        )
        if categorical_mode == "index":
            categorical[col.name] = idx
        else:
            block = np.zeros((n, col.vocab.cardinality))
            seen = idx > 0
            block[np.nonzero(seen)[0], idx[seen] - 1] = 1.0
            blocks.append(block)
            names.extend(f"{col.name}={v}" for v in col.vocab.values())

    matrix = blocks[0] if len(blocks) == 1 else np.concatenate(blocks, axis=1)
    labels = np.fromiter((r.label for r in records), dtype=np.int64, count=n)
    return EncodedBatch(
        continuous=matrix,
        continuous_names=tuple(names),
        categorical=categorical,
        labels=labels,
    )
