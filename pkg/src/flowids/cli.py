"""Command-line driver: ingest, train, eval, ablation, gradcheck, synth.

Configuration is flat ``key = value`` text; every key can be overridden by a
CLI flag of the same name (dashes for underscores). Exit statuses are a
stable contract: 0 success, 1 evaluation-threshold failure, 2 input or
configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .evaluate import (
    ConfusionMatrix,
    ThresholdCurve,
    compare_report,
    comparison_to_text,
    confusion,
    quantile_thresholds,
    sweep,
)
from .flows import ConfigError, IngestError, LabeledDataset, SchemaMismatchError, format_real
from .ingest import (
    IngestReport,
    SyntheticConfig,
    dataset_to_csv,
    generate_synthetic,
    parse_cic_csv,
    parse_iscx_xml,
    split_stratified,
)
from .models import (
    TrainConfig,
    build_autoencoder,
    build_dnn,
    min_kink_distance,
    model_grad_check,
    predict_dnn,
    reconstruction_error,
    train_autoencoder,
    train_dnn,
)
from .nn import LAYER_KINDS, layer_gradcheck
from .persist import RunManifest, dataset_digest, load_model, save_model
from .preprocess import encode_dataset, fit_schema

OUT_ENV = "FLOWIDS_OUT"
DEFAULT_DNN_THRESHOLD = 0.5
DEFAULT_AE_THRESHOLD = 0.03
GRADCHECK_TOLERANCE = 1e-4

# key -> (caster, default); None defaults are resolved in build_config
_KEYS: dict[str, tuple[type, object]] = {
    "source": (str, "synthetic"),
    "input": (str, ""),
    "holdout": (str, ""),
    "test_fraction": (float, 0.2),
    "benign_labels": (str, "Normal,BENIGN"),
    "label_column": (str, "Label"),
    "csv_missing": (str, "column"),
    "model": (str, "dnn"),
    "ip_mode": (str, None),
    "embed_set": (str, "all"),
    "epochs": (int, 10),
    "batch_size": (int, 512),
    "seed": (int, 0),
    "learning_rate": (float, 0.001),
    "dropout": (float, 0.40),
    "l1": (float, 1e-5),
    "threshold": (float, None),
    "rho": (float, 0.9),
    "eps": (float, 1e-8),
    "synth_flows": (int, 20000),
    "synth_malicious_fraction": (float, 0.1),
    "synth_separation": (float, 4.0),
    "synth_seed": (int, None),
    "synth_subnets": (int, 40),
    "synth_malicious_subnets": (int, 4),
    "synth_hosts_per_subnet": (int, 25),
    "synth_dst_ips": (int, 200),
    "synth_src_ports": (int, 2000),
    "synth_malicious_affinity": (float, 0.97),
    "synth_benign_affinity": (float, 0.03),
    "out": (str, None),
}


@dataclass
class ExperimentConfig:
    """One run's resolved settings (dataset source, model, training, output)."""

    source: str
    input: str
    holdout: str
    test_fraction: float
    benign_labels: str
    label_column: str
    csv_missing: str
    model: str
    ip_mode: str
    embed_set: str
    epochs: int
    batch_size: int
    seed: int
    learning_rate: float
    dropout: float
    l1: float
    threshold: float
    rho: float
    eps: float
    synth_flows: int
    synth_malicious_fraction: float
    synth_separation: float
    synth_seed: int
    synth_subnets: int
    synth_malicious_subnets: int
    synth_hosts_per_subnet: int
    synth_dst_ips: int
    synth_src_ports: int
    synth_malicious_affinity: float
    synth_benign_affinity: float
    out: str

    def validate(self) -> None:
        if self.source not in ("synthetic", "iscx-xml", "cic-csv"):
            raise ConfigError(f"unknown source {self.source!r}")
        if self.source != "synthetic" and not self.input:
            raise ConfigError(f"source {self.source!r} requires input=<path>")
        if self.source == "synthetic" and self.input:
            raise ConfigError("synthetic source does not take an input path")
        if self.model not in ("dnn", "autoencoder"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.ip_mode not in ("full", "first3", "drop"):
            raise ConfigError(f"unknown ip_mode {self.ip_mode!r}")
        if self.model == "autoencoder" and self.ip_mode != "drop":
            raise ConfigError("autoencoder uses no IP features; ip_mode must be 'drop'")
        if self.embed_set not in ("all", "ip-port"):
            raise ConfigError(f"unknown embed_set {self.embed_set!r}")
        if self.csv_missing not in ("column", "row"):
            raise ConfigError("csv_missing must be 'column' or 'row'")
        self.train_config().validate()

    def benign_set(self) -> frozenset[str]:
        return frozenset(v.strip() for v in self.benign_labels.split(",") if v.strip())

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            learning_rate=self.learning_rate,
            dropout=self.dropout,
            l1=self.l1,
            threshold=self.threshold,
            ip_mode=self.ip_mode,
            rho=self.rho,
            eps=self.eps,
        )

    def synth_config(self) -> SyntheticConfig:
        return SyntheticConfig(
            n_flows=self.synth_flows,
            malicious_fraction=self.synth_malicious_fraction,
            seed=self.synth_seed,
            separation=self.synth_separation,
            n_subnets=self.synth_subnets,
            n_malicious_subnets=self.synth_malicious_subnets,
            hosts_per_subnet=self.synth_hosts_per_subnet,
            n_dst_ips=self.synth_dst_ips,
            n_src_ports=self.synth_src_ports,
            malicious_affinity=self.synth_malicious_affinity,
            benign_affinity=self.synth_benign_affinity,
        )

    def to_items(self) -> dict[str, str]:
        items = {}
        for f in fields(self):
            value = getattr(self, f.name)
            items[f.name] = format_real(value) if isinstance(value, float) else str(value)
        return items


def load_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Parse a flat ``key = value`` config file; unknown keys are errors."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{os.fspath(path)}:{lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{os.fspath(path)}:{lineno}: unknown config key {key!r}")
            raw[key] = value.strip()
    return raw


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, object] = {k: default for k, (_, default) in _KEYS.items()}
    if getattr(args, "config", None):
        for key, text in load_config_file(args.config).items():
            caster, _ = _KEYS[key]
            try:
                values[key] = caster(text)
            except ValueError:
                raise ConfigError(f"config key {key!r}: cannot parse {text!r} as {caster.__name__}") from None
    for key in _KEYS:
        override = getattr(args, key, None)
        if override is not None:
            values[key] = override
    if values["ip_mode"] is None:
        values["ip_mode"] = "drop" if values["model"] == "autoencoder" else "full"
    if values["threshold"] is None:
        values["threshold"] = (
            DEFAULT_AE_THRESHOLD if values["model"] == "autoencoder" else DEFAULT_DNN_THRESHOLD
        )
    if values["synth_seed"] is None:
        values["synth_seed"] = values["seed"]
    if values["out"] is None:
        values["out"] = os.environ.get(OUT_ENV, "runs")
    cfg = ExperimentConfig(**values)  # type: ignore[arg-type]
    cfg.validate()
    return cfg


def _synthetic_report(data: LabeledDataset) -> IngestReport:
    counts = data.label_counts()
    return IngestReport(
        source="synthetic",
        rows_read=len(data),
        rows_kept=len(data),
        label_counts=counts,
    )


def load_dataset(cfg: ExperimentConfig, path: str | None = None) -> tuple[LabeledDataset, IngestReport]:
    """Materialize the configured dataset (``path`` overrides cfg.input)."""
    if cfg.source == "synthetic":
        data = generate_synthetic(cfg.synth_config())
        return data, _synthetic_report(data)
    source_path = path if path is not None else cfg.input
    if cfg.source == "iscx-xml":
        return parse_iscx_xml(source_path, benign_labels=cfg.benign_set())
    return parse_cic_csv(
        source_path,
        label_column=cfg.label_column,
        benign_labels=cfg.benign_set(),
        drop_rows_with_missing=(cfg.csv_missing == "row"),
    )


def _out_dir(cfg_out: str) -> Path:
    out = Path(cfg_out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_series(path: Path, series: list[tuple[float, float]], header: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for x, y in series:
            fh.write(f"{x:.17g}\t{y:.6f}\n")


def _write_scores(path: Path, scores: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index\tscore\tlabel\n")
        for i, (s, y) in enumerate(zip(scores, labels)):
            fh.write(f"{i}\t{s:.17g}\t{int(y)}\n")


@dataclass
class _SupervisedRun:
    model: object
    history: object
    matrix: ConfusionMatrix
    scores: np.ndarray
    test_labels: np.ndarray


def _run_dnn(
    train_data: LabeledDataset,
    test_data: LabeledDataset,
    cfg: ExperimentConfig,
    ip_mode: str,
) -> _SupervisedRun:
    schema = fit_schema(train_data, ip_mode=ip_mode, embed_set=cfg.embed_set)
    enc_train = encode_dataset(train_data, schema, "index")
    enc_test = encode_dataset(test_data, schema, "index")
    model = build_dnn(schema, ip_mode, seed=cfg.seed, dropout_rate=cfg.dropout)
    tc = cfg.train_config()
    model, history = train_dnn(model, enc_train, tc, val=enc_test)
    scores = predict_dnn(model, enc_test)
    matrix = confusion(enc_test.labels, scores, cfg.threshold)
    return _SupervisedRun(model, history, matrix, scores, enc_test.labels)


def _run_autoencoder(
    train_data: LabeledDataset,
    test_data: LabeledDataset,
    cfg: ExperimentConfig,
) -> _SupervisedRun:
    benign_idx = [i for i, r in enumerate(train_data.records) if r.label == 0]
    if not benign_idx:
        raise ConfigError("training split contains no benign flows")
    benign_train = train_data.subset(benign_idx, note="benign-only")
    # high-cardinality address/port features stay out of the autoencoder
    schema = fit_schema(
        benign_train, ip_mode="drop", embed_set=cfg.embed_set, exclude=("SrcPort", "DstPort")
    )
    enc_train = encode_dataset(benign_train, schema, "onehot")
    model = build_autoencoder(schema, seed=cfg.seed, l1_coef=cfg.l1)
    tc = cfg.train_config()
    model, history = train_autoencoder(model, enc_train, tc)
    enc_test = encode_dataset(test_data, schema, "onehot")
    scores = reconstruction_error(model, enc_test.continuous)
    matrix = confusion(enc_test.labels, scores, cfg.threshold)
    return _SupervisedRun(model, history, matrix, scores, enc_test.labels)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    data, report = load_dataset(cfg)
    timings["ingest"] = time.perf_counter() - t0

    if cfg.holdout:
        if cfg.source == "synthetic":
            raise ConfigError("holdout mode needs file sources")
        train_data = data
        test_data, _ = load_dataset(cfg, path=cfg.holdout)
    else:
        train_data, test_data = split_stratified(data, cfg.test_fraction, cfg.seed)

    t0 = time.perf_counter()
    if cfg.model == "dnn":
        run = _run_dnn(train_data, test_data, cfg, cfg.ip_mode)
    else:
        run = _run_autoencoder(train_data, test_data, cfg)
    timings["train+eval"] = time.perf_counter() - t0

    out = _out_dir(cfg.out)
    model_path = out / "model.txt"
    save_model(model_path, run.model, cfg.train_config(), dataset_digest(data))
    manifest = RunManifest(
        command="train",
        config_items=cfg.to_items(),
        ingest_text=report.to_text(),
        train_loss=list(run.history.train_loss),
        val_loss=list(run.history.val_loss),
        eval_texts={"test-split": run.matrix.to_text()},
        timings=timings,
    )
    manifest.write(out / "manifest.txt")
    print(f"trained {cfg.model} on {len(train_data)} flows ({len(test_data)} held out)")
    print(f"final training loss {run.history.train_loss[-1]:.6f}")
    print(run.matrix.to_text(), end="")
    print(f"wrote {model_path} and {out / 'manifest.txt'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    loaded = load_model(args.model_file)
    data, report = load_dataset(cfg)
    threshold = args.threshold if args.threshold is not None else (
        DEFAULT_AE_THRESHOLD if loaded.kind == "autoencoder" else DEFAULT_DNN_THRESHOLD
    )

    if loaded.kind == "dnn":
        enc = encode_dataset(data, loaded.model.schema, "index")
        scores = predict_dnn(loaded.model, enc)
    else:
        enc = encode_dataset(data, loaded.model.schema, "onehot")
        scores = reconstruction_error(loaded.model, enc.continuous)
    matrix = confusion(enc.labels, scores, threshold)

    curve: ThresholdCurve | None = None
    if args.thresholds:
        try:
            ts = [float(v) for v in args.thresholds.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse --thresholds {args.thresholds!r}") from None
        curve = sweep(enc.labels, scores, ts)
    elif loaded.kind == "autoencoder" or args.sweep:
        curve = sweep(enc.labels, scores, quantile_thresholds(scores))

    out = _out_dir(cfg.out)
    eval_text = (
        f"model\t{os.fspath(args.model_file)}\nkind\t{loaded.kind}\ndigest\t{loaded.digest}\n"
        + matrix.to_text()
    )
    (out / "eval.txt").write_text(eval_text, encoding="utf-8")
    _write_scores(out / "scores.tsv", scores, enc.labels)
    if curve is not None:
        (out / "sweep.tsv").write_text(curve.to_text(), encoding="utf-8")
        _write_series(out / "sweep_tpr.tsv", curve.tpr_series(), "threshold\ttpr")
        _write_series(out / "sweep_fpr.tsv", curve.fpr_series(), "threshold\tfpr")
    manifest = RunManifest(
        command="eval",
        config_items=cfg.to_items(),
        ingest_text=report.to_text(),
        eval_texts={"eval": eval_text},
    )
    manifest.write(out / "eval_manifest.txt")
    print(eval_text, end="")
    print(f"wrote evaluation outputs to {out}")

    if args.min_tpr is not None and not matrix.tpr >= args.min_tpr:
        print(f"FAIL: TPR {matrix.tpr:.6f} < required {args.min_tpr}", file=sys.stderr)
        return 1
    if args.max_fpr is not None and not matrix.fpr <= args.max_fpr:
        print(f"FAIL: FPR {matrix.fpr:.6f} > allowed {args.max_fpr}", file=sys.stderr)
        return 1
    return 0


def cmd_ablation(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if cfg.model != "dnn":
        raise ConfigError("ablation runs the dnn model only")
    data, report = load_dataset(cfg)
    if cfg.holdout:
        if cfg.source == "synthetic":
            raise ConfigError("holdout mode needs file sources")
        train_data = data
        test_data, _ = load_dataset(cfg, path=cfg.holdout)
    else:
        train_data, test_data = split_stratified(data, cfg.test_fraction, cfg.seed)

    runs: list[tuple[str, ConfusionMatrix]] = []
    timings: dict[str, float] = {}
    for mode in ("full", "first3", "drop"):
        t0 = time.perf_counter()
        run = _run_dnn(train_data, test_data, cfg, mode)
        timings[f"train {mode}"] = time.perf_counter() - t0
        runs.append((f"dnn ip_mode={mode}", run.matrix))

    table = comparison_to_text(compare_report(runs))
    out = _out_dir(cfg.out)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    manifest = RunManifest(
        command="ablation",
        config_items=cfg.to_items(),
        ingest_text=report.to_text(),
        eval_texts={f"ip_mode={name}": cm.to_text() for (name, cm) in runs},
        timings=timings,
    )
    manifest.write(out / "ablation_manifest.txt")
    print(table, end="")
    print(f"wrote {out / 'ablation.txt'}")
    return 0


def _tiny_synthetic() -> SyntheticConfig:
    return SyntheticConfig(
        n_flows=64,
        malicious_fraction=0.25,
        seed=7,
        separation=2.0,
        n_subnets=6,
        n_malicious_subnets=2,
        hosts_per_subnet=4,
        n_dst_ips=6,
        n_src_ports=8,
    )


def _kink_free_seed(build, batch, base_seed: int, h: float) -> object:
    """First build seed whose ReLU pre-activations all clear the step size.

    A pre-activation within the perturbation of a ReLU kink makes the central
    difference straddle the non-differentiable point; the analytic gradient is
    fine there but the comparison is meaningless, so such seeds are skipped.
    """
    margin = 100.0 * h
    model = None
    for seed in range(base_seed, base_seed + 50):
        model = build(seed)
        if min_kink_distance(model, batch) > margin:
            return model
    return model


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.kind == "all":
        kinds = LAYER_KINDS + ("dnn", "autoencoder")
    elif args.kind == "layers":
        kinds = LAYER_KINDS
    else:
        kinds = (args.kind,)
    tolerance = args.tolerance
    failed = False
    data = generate_synthetic(_tiny_synthetic())
    for kind in kinds:
        if kind in LAYER_KINDS:
            err = layer_gradcheck(kind, h=args.h, seed=args.seed)
        elif kind == "dnn":
            schema = fit_schema(data, ip_mode="full")
            enc = encode_dataset(data, schema, "index").take(np.arange(8))
            model = _kink_free_seed(
                lambda s: build_dnn(schema, "full", seed=s), enc, args.seed + 1, args.h
            )
            err = model_grad_check(
                model, enc, h=args.h, seed=args.seed, corrupt=args.corrupt, tolerance=tolerance
            )
        else:
            benign = data.subset([i for i, r in enumerate(data.records) if r.label == 0])
            schema = fit_schema(benign, ip_mode="drop", exclude=("SrcPort", "DstPort"))
            enc = encode_dataset(benign, schema, "onehot")
            model = _kink_free_seed(
                lambda s: build_autoencoder(schema, seed=s), enc.continuous[:8], args.seed + 1, args.h
            )
            err = model_grad_check(
                model, enc.continuous[:8], h=args.h, seed=args.seed, corrupt=args.corrupt, tolerance=tolerance
            )
        ok = err <= tolerance
        failed |= not ok
        print(f"gradcheck {kind}: max relative error {err:.3e} (tolerance {tolerance:g}) {'PASS' if ok else 'FAIL'}")
    return 1 if failed else 0


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.format == "iscx-xml":
        data, report = parse_iscx_xml(
            args.input, benign_labels=frozenset(v.strip() for v in args.benign_labels.split(","))
        )
    else:
        data, report = parse_cic_csv(
            args.input,
            label_column=args.label_column,
            benign_labels=frozenset(v.strip() for v in args.benign_labels.split(",")),
            drop_rows_with_missing=(args.csv_missing == "row"),
        )
    print(report.to_text(), end="")
    print(f"features\t{len(data.schema.columns)} ({len(data.schema.categorical_columns)} categorical)")
    out = _out_dir(args.out if args.out else os.environ.get(OUT_ENV, "runs"))
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    if args.export_csv:
        with open(out / "flows.csv", "w", encoding="utf-8", newline="") as fh:
            dataset_to_csv(data, fh)
        print(f"wrote {out / 'flows.csv'}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    data = generate_synthetic(cfg.synth_config())
    out = _out_dir(cfg.out)
    path = out / "synthetic.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        dataset_to_csv(data, fh)
    counts = data.label_counts()
    print(f"generated {len(data)} flows ({counts[1]} malicious) -> {path}")
    return 0


def _add_key_flags(parser: argparse.ArgumentParser, keys: tuple[str, ...]) -> None:
    for key in keys:
        caster, _ = _KEYS[key]
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, type=caster, default=None, help=f"config key {key}")


_DATASET_KEYS = (
    "source",
    "input",
    "holdout",
    "test_fraction",
    "benign_labels",
    "label_column",
    "csv_missing",
    "synth_flows",
    "synth_malicious_fraction",
    "synth_separation",
    "synth_seed",
    "synth_subnets",
    "synth_malicious_subnets",
    "synth_hosts_per_subnet",
    "synth_dst_ips",
    "synth_src_ports",
    "synth_malicious_affinity",
    "synth_benign_affinity",
)
_MODEL_KEYS = ("model", "ip_mode", "embed_set")
_TRAIN_KEYS = ("epochs", "batch_size", "seed", "learning_rate", "dropout", "l1", "threshold", "rho", "eps")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowids",
        description="Train and evaluate flow-based intrusion detectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a flow file and print the ingest report")
    p.add_argument("--input", required=True, help="path to the flow file")
    p.add_argument("--format", required=True, choices=("iscx-xml", "cic-csv"))
    p.add_argument("--benign-labels", default="Normal,BENIGN")
    p.add_argument("--label-column", default="Label")
    p.add_argument("--csv-missing", choices=("column", "row"), default="column")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--export-csv", action="store_true", help="also write parsed flows as canonical CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model and write model + manifest files")
    p.add_argument("--config", help="flat key=value config file")
    _add_key_flags(p, _DATASET_KEYS + _MODEL_KEYS + _TRAIN_KEYS + ("out",))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    p.add_argument("--model-file", required=True)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--thresholds", help="comma-separated ascending sweep thresholds")
    p.add_argument("--sweep", action="store_true", help="sweep over score quantiles")
    p.add_argument("--min-tpr", type=float, default=None, help="exit 1 if TPR falls below this")
    p.add_argument("--max-fpr", type=float, default=None, help="exit 1 if FPR exceeds this")
    _add_key_flags(p, _DATASET_KEYS + ("threshold", "seed", "out"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", help="train dnn with ip_mode full/first3/drop on a shared split")
    p.add_argument("--config", help="flat key=value config file")
    _add_key_flags(p, _DATASET_KEYS + _MODEL_KEYS + _TRAIN_KEYS + ("out",))
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--kind", choices=LAYER_KINDS + ("dnn", "autoencoder", "layers", "all"), default="all")
    p.add_argument("--h", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help="negative control: damage one gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset as canonical CSV")
    p.add_argument("--config", help="flat key=value config file")
    _add_key_flags(p, ("seed",) + tuple(k for k in _DATASET_KEYS if k.startswith("synth")) + ("out",))
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestError, SchemaMismatchError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
