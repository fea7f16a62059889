"""Model files and run manifests as self-describing structured text.

Real numbers are written with 17 significant decimal digits so 64-bit values
round-trip exactly: a saved model reproduces its predictions bit for bit.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields
from typing import Iterator, TextIO

import numpy as np

from . import __version__
from .flows import ConfigError, FeatureSchema, LabeledDataset, format_real
from .models import AutoencoderModel, DnnModel, TrainConfig
from .preprocess import encoded_width

FORMAT_NAME = "flowids-model"
FORMAT_VERSION = 1

_FLOAT_CONFIG_FIELDS = {"learning_rate", "dropout", "l1", "threshold", "rho", "eps"}


def dataset_digest(data: LabeledDataset) -> str:
    """Stable digest of a dataset's provenance and label accounting."""
    h = hashlib.sha256()
    counts = data.label_counts()
    h.update(f"records\t{len(data)}\n".encode())
    h.update(f"labels\t0:{counts.get(0, 0)}\t1:{counts.get(1, 0)}\n".encode())
    for key in sorted(data.provenance):
        h.update(f"{key}\t{data.provenance[key]}\n".encode())
    return "sha256:" + h.hexdigest()


def _write_array(out: TextIO, name: str, arr: np.ndarray) -> None:
    shape = "\t".join(str(d) for d in arr.shape)
    out.write(f"[param\t{name}\t{shape}]\n")
    flat = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
    for row in flat:
        out.write("\t".join(format_real(v) for v in row) + "\n")


def save_model(
    path: str | os.PathLike,
    model: DnnModel | AutoencoderModel,
    config: TrainConfig,
    provenance_digest: str,
) -> None:
    """Write a model, its schema and train config as one UTF-8 text file."""
    if model.schema is None:
        raise ConfigError("model has no attached schema; build it from a fitted schema to save")
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(f"{FORMAT_NAME}\t{FORMAT_VERSION}\n")
        out.write(f"kind\t{model.kind}\n")
        out.write("[config]\n")
        for f in fields(config):
            value = getattr(config, f.name)
            text = format_real(value) if f.name in _FLOAT_CONFIG_FIELDS else str(value)
            out.write(f"{f.name}\t{text}\n")
        out.write("[provenance]\n")
        out.write(f"digest\t{provenance_digest}\n")
        out.write(f"version\t{__version__}\n")
        out.write("[schema]\n")
        for line in model.schema.to_lines():
            out.write(line + "\n")
        out.write("[arch]\n")
        if isinstance(model, DnnModel):
            out.write(f"hidden_units\t{model.hidden_units}\n")
            out.write(f"hidden_layers\t{model.hidden_layers}\n")
        else:
            out.write("widths\t" + "\t".join(str(w) for w in model.widths) + "\n")
            out.write(f"l1_coef\t{format_real(model.l1_coef)}\n")
        for name, arr in model.param_blocks().items():
            _write_array(out, name, arr)
        out.write("[end]\n")


@dataclass
class LoadedModel:
    model: DnnModel | AutoencoderModel
    kind: str
    config: TrainConfig
    digest: str
    version: str


def _read_section(lines: Iterator[str], header: str) -> None:
    line = next(lines, None)
    if line != header:
        raise ConfigError(f"model file: expected {header!r}, found {line!r}")


def load_model(path: str | os.PathLike) -> LoadedModel:
    """Rebuild a model from :func:`save_model` output, bit-for-bit."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = iter(fh.read().splitlines())
    try:
        return _load_model_lines(lines)
    except (StopIteration, ValueError, KeyError, IndexError) as err:
        raise ConfigError(f"model file {os.fspath(path)!r} is malformed: {err}") from None


def _load_model_lines(lines: Iterator[str]) -> LoadedModel:
    magic = next(lines).split("\t")
    if magic[0] != FORMAT_NAME or int(magic[1]) != FORMAT_VERSION:
        raise ConfigError(f"not a {FORMAT_NAME}/{FORMAT_VERSION} file (found {magic!r})")
    kind = next(lines).split("\t")[1]
    if kind not in ("dnn", "autoencoder"):
        raise ConfigError(f"unknown model kind {kind!r}")

    _read_section(lines, "[config]")
    raw: dict[str, str] = {}
    for f in fields(TrainConfig):
        key, value = next(lines).split("\t", 1)
        if key != f.name:
            raise ConfigError(f"config field order mismatch: expected {f.name!r}, found {key!r}")
        raw[key] = value
    config = TrainConfig(
        epochs=int(raw["epochs"]),
        batch_size=int(raw["batch_size"]),
        seed=int(raw["seed"]),
        learning_rate=float(raw["learning_rate"]),
        dropout=float(raw["dropout"]),
        l1=float(raw["l1"]),
        threshold=float(raw["threshold"]),
        ip_mode=raw["ip_mode"],
        rho=float(raw["rho"]),
        eps=float(raw["eps"]),
    )

    _read_section(lines, "[provenance]")
    digest = next(lines).split("\t")[1]
    version = next(lines).split("\t")[1]

    _read_section(lines, "[schema]")
    schema = FeatureSchema.from_lines(lines)

    _read_section(lines, "[arch]")
    if kind == "dnn":
        hidden_units = int(next(lines).split("\t")[1])
        hidden_layers = int(next(lines).split("\t")[1])
        model: DnnModel | AutoencoderModel = DnnModel(
            schema,
            seed=config.seed,
            dropout_rate=config.dropout,
            hidden_units=hidden_units,
            hidden_layers=hidden_layers,
        )
    else:
        widths = tuple(int(v) for v in next(lines).split("\t")[1:])
        l1_coef = float(next(lines).split("\t")[1])
        model = AutoencoderModel(widths[0], seed=config.seed, l1_coef=l1_coef, hidden=widths[1:-1])
        model.schema = schema
        if encoded_width(schema, "onehot") != widths[0]:
            raise ConfigError("schema width does not match autoencoder input width")

    blocks = model.param_blocks()
    loaded: set[str] = set()
    line = next(lines)
    while line != "[end]":
        parts = line.split("\t")
        if parts[0] != "[param" or not parts[-1].endswith("]"):
            raise ConfigError(f"unexpected line in model file: {line!r}")
        name = parts[1]
        shape = tuple(int(v.rstrip("]")) for v in parts[2:])
        if name not in blocks:
            raise ConfigError(f"unknown parameter block {name!r}")
        target = blocks[name]
        if target.shape != shape:
            raise ConfigError(f"parameter {name!r} has shape {shape}, expected {target.shape}")
        rows = shape[0] if len(shape) == 2 else 1
        cols = shape[1] if len(shape) == 2 else shape[0]
        for i in range(rows):
            values = next(lines).split("\t")
            if len(values) != cols:
                raise ConfigError(f"parameter {name!r}: row {i} has {len(values)} values, expected {cols}")
            row = np.array([float(v) for v in values])
            if len(shape) == 2:
                target[i, :] = row
            else:
                target[:] = row
        loaded.add(name)
        line = next(lines)
    missing = set(blocks) - loaded
    if missing:
        raise ConfigError(f"model file is missing parameter blocks: {sorted(missing)}")
    return LoadedModel(model=model, kind=kind, config=config, digest=digest, version=version)


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit a run, rendered as text."""

    command: str
    config_items: dict[str, str]
    ingest_text: str = ""
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    eval_texts: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def to_text(self) -> str:
        out = [f"flowids-manifest\t1", f"version\t{__version__}", f"command\t{self.command}", "[config]"]
        for key in sorted(self.config_items):
            out.append(f"{key}\t{self.config_items[key]}")
        if self.ingest_text:
            out.append("[ingest]")
            out.append(self.ingest_text.rstrip("\n"))
        if self.train_loss:
            out.append("[history]")
            for i, loss in enumerate(self.train_loss, start=1):
                line = f"epoch\t{i}\t{format_real(loss)}"
                if self.val_loss:
                    line += f"\t{format_real(self.val_loss[i - 1])}"
                out.append(line)
        for name in sorted(self.eval_texts):
            out.append(f"[eval\t{name}]")
            out.append(self.eval_texts[name].rstrip("\n"))
        if self.timings:
            out.append("[timings]")
            for key in sorted(self.timings):
                out.append(f"{key}\t{self.timings[key]:.3f}s")
        out.append("[end]")
        return "\n".join(out) + "\n"

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())
