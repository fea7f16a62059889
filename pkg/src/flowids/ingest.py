"""Parse flow datasets, generate synthetic labeled flows, split data.

Two on-disk formats are supported: an XML file of flow elements (one child
element per field) and a CSV flow table with a header row. Both parsers are
total over arbitrary byte streams: any input produces either a dataset plus
an ingest report or a structured ``IngestError`` — never a crash.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, fields
from datetime import datetime
from typing import BinaryIO, Iterable
from xml.etree import ElementTree as ET

import numpy as np

from .flows import (
    CATEGORICAL,
    CONTINUOUS,
    ConfigError,
    FeatureColumn,
    FeatureSchema,
    FlowRecord,
    IngestError,
    LabeledDataset,
)

#: Source label strings mapped to benign (0); anything else is malicious (1).
DEFAULT_BENIGN_LABELS = frozenset({"Normal", "BENIGN"})

ISCX_CATEGORICAL = ("SrcIP", "DstIP", "SrcPort", "DstPort", "AppName", "Direction", "Protocol")
ISCX_CONTINUOUS = (
    "Duration",
    "TotalSrcBytes",
    "TotalDstBytes",
    "TotalBytes",
    "TotalSrcPkts",
    "TotalDstPkts",
    "TotalPkts",
)

#: Feature name -> XML element name. Duration/TotalBytes/TotalPkts have no
#: default element and are derived (stop - start, and the byte/packet sums).
DEFAULT_ISCX_FIELD_MAP = {
    "SrcIP": "source",
    "DstIP": "destination",
    "SrcPort": "sourcePort",
    "DstPort": "destinationPort",
    "AppName": "appName",
    "Direction": "direction",
    "Protocol": "protocolName",
    "TotalSrcBytes": "totalSourceBytes",
    "TotalDstBytes": "totalDestinationBytes",
    "TotalSrcPkts": "totalSourcePackets",
    "TotalDstPkts": "totalDestinationPackets",
    "StartTime": "startDateTime",
    "StopTime": "stopDateTime",
    "Duration": "",
    "TotalBytes": "",
    "TotalPkts": "",
    "Label": "Tag",
}

#: CSV header aliases (stripped, lower-cased) for the five categorical columns.
CIC_CATEGORICAL_ALIASES = {
    "source ip": "SrcIP",
    "src ip": "SrcIP",
    "srcip": "SrcIP",
    "destination ip": "DstIP",
    "dst ip": "DstIP",
    "dstip": "DstIP",
    "source port": "SrcPort",
    "src port": "SrcPort",
    "srcport": "SrcPort",
    "destination port": "DstPort",
    "dst port": "DstPort",
    "dstport": "DstPort",
    "protocol": "Protocol",
}
CIC_CATEGORICAL_ORDER = ("SrcIP", "DstIP", "SrcPort", "DstPort", "Protocol")

#: Columns discarded outright (identifiers, not features).
CIC_DISCARD = {"flow id", "flowid", "timestamp"}

DROP_MISSING_FIELD = "missing-field"
DROP_UNPARSEABLE = "unparseable"
DROP_NON_FINITE = "non-finite"
COLUMN_MISSING = "missing-values"
COLUMN_ZERO_VARIANCE = "zero-variance"


@dataclass
class IngestReport:
    """Row and column accounting for one parse: reads = kept + dropped."""

    source: str = ""
    rows_read: int = 0
    rows_kept: int = 0
    rows_dropped: dict[str, int] = field(default_factory=dict)
    columns_dropped: dict[str, str] = field(default_factory=dict)
    label_counts: dict[int, int] = field(default_factory=lambda: {0: 0, 1: 0})

    def drop_row(self, reason: str) -> None:
        self.rows_dropped[reason] = self.rows_dropped.get(reason, 0) + 1

    @property
    def rows_dropped_total(self) -> int:
        return sum(self.rows_dropped.values())

    def balanced(self) -> bool:
        return (
            self.rows_read == self.rows_kept + self.rows_dropped_total
            and sum(self.label_counts.values()) == self.rows_kept
        )

    def to_text(self) -> str:
        lines = [
            f"source\t{self.source}",
            f"rows_read\t{self.rows_read}",
            f"rows_kept\t{self.rows_kept}",
        ]
        for reason in sorted(self.rows_dropped):
            lines.append(f"rows_dropped\t{reason}\t{self.rows_dropped[reason]}")
        for col in sorted(self.columns_dropped):
            lines.append(f"column_dropped\t{col}\t{self.columns_dropped[col]}")
        lines.append(f"labels\tbenign\t{self.label_counts.get(0, 0)}")
        lines.append(f"labels\tmalicious\t{self.label_counts.get(1, 0)}")
        return "\n".join(lines) + "\n"


def _as_binary(stream: bytes | str | os.PathLike | BinaryIO) -> tuple[BinaryIO, str]:
    """Normalize bytes / path / binary file into (file object, display name)."""
    if isinstance(stream, bytes):
        return io.BytesIO(stream), "<bytes>"
    if isinstance(stream, (str, os.PathLike)):
        return open(stream, "rb"), os.fspath(stream)
    name = getattr(stream, "name", "<stream>")
    return stream, str(name)


def iscx_schema() -> FeatureSchema:
    """Unfitted schema of the 14 XML flow features, in canonical order."""
    cols = [FeatureColumn(n, CATEGORICAL) for n in ISCX_CATEGORICAL]
    cols += [FeatureColumn(n, CONTINUOUS) for n in ISCX_CONTINUOUS]
    return FeatureSchema(tuple(cols))


def _parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def _byte_offset(buf: BinaryIO, line: int, column: int) -> int | None:
    """Approximate byte offset of (line, column); None if the source can't seek."""
    try:
        buf.seek(0)
    except (OSError, ValueError, AttributeError):
        return None
    offset = 0
    for _ in range(line - 1):
        chunk = buf.readline()
        if not chunk:
            break
        offset += len(chunk)
    return offset + column


def parse_iscx_xml(
    stream: bytes | str | os.PathLike | BinaryIO,
    field_map: dict[str, str] | None = None,
    benign_labels: Iterable[str] = DEFAULT_BENIGN_LABELS,
) -> tuple[LabeledDataset, IngestReport]:
    """Parse an XML file of flow elements into a labeled dataset.

    Every depth-1 child of the root is one flow; its child elements carry the
    fields, bound by ``field_map`` (see ``DEFAULT_ISCX_FIELD_MAP``). Duration
    is stop - start in seconds when not mapped directly; TotalBytes and
    TotalPkts are the source+destination sums when not mapped. A flow missing
    a mapped field is dropped and counted, not fatal.
    """
    fmap = dict(DEFAULT_ISCX_FIELD_MAP)
    fmap.update(field_map or {})
    benign = frozenset(benign_labels)
    buf, source_name = _as_binary(stream)
    schema = iscx_schema()
    report = IngestReport(source=source_name)
    records: list[FlowRecord] = []
    raw_label_counts: dict[str, int] = {}

    try:
        depth = 0
        root: ET.Element | None = None
        for event, elem in ET.iterparse(buf, events=("start", "end")):
            if event == "start":
                depth += 1
                if root is None:
                    root = elem
                continue
            if depth == 2:
                report.rows_read += 1
                values: dict[str, str] = {}
                for child in elem:
                    values.setdefault(child.tag, child.text or "")
                record, reason, raw_label = _iscx_record(values, fmap, benign, report.rows_read, source_name)
                if record is None:
                    report.drop_row(reason)
                else:
                    records.append(record)
                    report.rows_kept += 1
                    report.label_counts[record.label] = report.label_counts.get(record.label, 0) + 1
                    raw_label_counts[raw_label] = raw_label_counts.get(raw_label, 0) + 1
                root.clear()
            depth -= 1
    except ET.ParseError as err:
        line, column = getattr(err, "position", (1, 0))
        offset = _byte_offset(buf, line, column)
        where = f"line {line}, column {column}"
        if offset is not None:
            where += f", byte offset {offset}"
        raise IngestError(f"malformed XML in {source_name} at {where}: {err.msg if hasattr(err, 'msg') else err}") from None
    except (LookupError, ValueError) as err:
        # expat surfaces unknown declared encodings and similar defects as
        # LookupError/ValueError rather than ParseError
        raise IngestError(f"malformed XML in {source_name}: {err}") from None
    finally:
        if isinstance(stream, (str, os.PathLike)):
            buf.close()

    provenance = {
        "source": "iscx-xml",
        "file": source_name,
        "raw_labels": ",".join(f"{k}:{v}" for k, v in sorted(raw_label_counts.items())),
    }
    return LabeledDataset(tuple(records), schema, provenance), report


def _iscx_record(
    values: dict[str, str],
    fmap: dict[str, str],
    benign: frozenset[str],
    ordinal: int,
    source_name: str,
) -> tuple[FlowRecord | None, str, str]:
    categorical: dict[str, str] = {}
    for feat in ISCX_CATEGORICAL:
        element = fmap[feat]
        raw = values.get(element)
        if raw is None or not raw.strip():
            return None, DROP_MISSING_FIELD, ""
        categorical[feat] = raw.strip()

    continuous: dict[str, float] = {}
    for feat in ("TotalSrcBytes", "TotalDstBytes", "TotalSrcPkts", "TotalDstPkts"):
        raw = values.get(fmap[feat])
        if raw is None or not raw.strip():
            return None, DROP_MISSING_FIELD, ""
        try:
            continuous[feat] = float(raw)
        except ValueError:
            return None, DROP_UNPARSEABLE, ""

    duration_element = fmap.get("Duration", "")
    if duration_element and values.get(duration_element, "").strip():
        try:
            continuous["Duration"] = float(values[duration_element])
        except ValueError:
            return None, DROP_UNPARSEABLE, ""
    else:
        start_raw = values.get(fmap["StartTime"])
        stop_raw = values.get(fmap["StopTime"])
        if start_raw is None or stop_raw is None or not start_raw.strip() or not stop_raw.strip():
            return None, DROP_MISSING_FIELD, ""
        try:
            start, stop = _parse_timestamp(start_raw), _parse_timestamp(stop_raw)
        except ValueError:
            return None, DROP_UNPARSEABLE, ""
        continuous["Duration"] = (stop - start).total_seconds()

    for feat, lhs, rhs in (
        ("TotalBytes", "TotalSrcBytes", "TotalDstBytes"),
        ("TotalPkts", "TotalSrcPkts", "TotalDstPkts"),
    ):
        element = fmap.get(feat, "")
        if element and values.get(element, "").strip():
            try:
                continuous[feat] = float(values[element])
            except ValueError:
                return None, DROP_UNPARSEABLE, ""
        else:
            continuous[feat] = continuous[lhs] + continuous[rhs]

    if any(not math.isfinite(v) for v in continuous.values()):
        return None, DROP_NON_FINITE, ""

    raw_label = values.get(fmap["Label"])
    if raw_label is None or not raw_label.strip():
        return None, DROP_MISSING_FIELD, ""
    raw_label = raw_label.strip()
    label = 0 if raw_label in benign else 1
    record = FlowRecord(
        categorical=categorical,
        continuous=continuous,
        label=label,
        source_tag=f"{source_name}:{ordinal}",
    )
    return record, "", raw_label


def parse_cic_csv(
    stream: bytes | str | os.PathLike | BinaryIO,
    label_column: str = "Label",
    benign_labels: Iterable[str] = DEFAULT_BENIGN_LABELS,
    drop_rows_with_missing: bool = False,
) -> tuple[LabeledDataset, IngestReport]:
    """Parse a CSV flow table into a labeled dataset.

    Header names are stripped; the five address/port/protocol columns become
    categorical features (canonical names), flow-ID and timestamp columns are
    discarded, and every other column is continuous. Cells that do not read
    as a finite number ("Infinity", "NaN", empty, garbage) mark the cell
    missing; by default any continuous column containing a missing cell is
    dropped dataset-wide (reason ``missing-values``), as are columns with no
    variability (``zero-variance``). With ``drop_rows_with_missing`` the rows
    holding missing cells are dropped instead (reason ``non-finite``).
    """
    benign = frozenset(benign_labels)
    buf, source_name = _as_binary(stream)
    report = IngestReport(source=source_name)
    try:
        text = io.TextIOWrapper(buf, encoding="utf-8", newline="")
        reader = csv.reader(text)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{source_name}: empty input, label column {label_column!r} not found") from None

        names = [h.strip() for h in header]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise IngestError(f"{source_name}: duplicate column names {dupes}")

        label_idx = None
        cat_idx: dict[str, int] = {}
        cont_idx: list[tuple[str, int]] = []
        for i, name in enumerate(names):
            low = name.lower()
            if name == label_column:
                label_idx = i
            elif low in CIC_DISCARD:
                continue
            elif low in CIC_CATEGORICAL_ALIASES:
                cat_idx[CIC_CATEGORICAL_ALIASES[low]] = i
            else:
                cont_idx.append((name, i))
        if label_idx is None:
            raise ConfigError(f"{source_name}: label column {label_column!r} not found in header")

        cat_order = tuple(n for n in CIC_CATEGORICAL_ORDER if n in cat_idx)
        kept_rows: list[tuple[dict[str, str], list[float | None], int]] = []
        raw_label_counts: dict[str, int] = {}
        width = len(names)

        for row in reader:
            report.rows_read += 1
            if len(row) != width:
                report.drop_row(DROP_UNPARSEABLE)
                continue
            categorical: dict[str, str] = {}
            bad = None
            for cname in cat_order:
                cell = row[cat_idx[cname]].strip()
                if not cell:
                    bad = DROP_MISSING_FIELD
                    break
                categorical[cname] = cell
            if bad is None and not row[label_idx].strip():
                bad = DROP_MISSING_FIELD
            if bad is not None:
                report.drop_row(bad)
                continue
            numeric: list[float | None] = []
            for _, i in cont_idx:
                cell = row[i].strip()
                value: float | None
                if not cell:
                    value = None
                else:
                    try:
                        value = float(cell)
                    except ValueError:
                        value = None
                    else:
                        if not math.isfinite(value):
                            value = None
                numeric.append(value)
            if drop_rows_with_missing and any(v is None for v in numeric):
                report.drop_row(DROP_NON_FINITE)
                continue
            raw_label = row[label_idx].strip()
            label = 0 if raw_label in benign else 1
            raw_label_counts[raw_label] = raw_label_counts.get(raw_label, 0) + 1
            kept_rows.append((categorical, numeric, label))
    except UnicodeDecodeError as err:
        raise IngestError(f"{source_name}: not valid UTF-8 ({err})") from None
    except csv.Error as err:
        raise IngestError(f"{source_name}: CSV error near row {report.rows_read + 1}: {err}") from None
    finally:
        if isinstance(stream, (str, os.PathLike)):
            buf.close()

    # column-level drop policy over the kept rows
    keep_col = []
    for j, (cname, _) in enumerate(cont_idx):
        column = [numeric[j] for _, numeric, _ in kept_rows]
        if any(v is None for v in column):
            report.columns_dropped[cname] = COLUMN_MISSING
        elif column and min(column) == max(column):
            report.columns_dropped[cname] = COLUMN_ZERO_VARIANCE
        else:
            keep_col.append((cname, j))

    records = []
    for ordinal, (categorical, numeric, label) in enumerate(kept_rows, start=1):
        continuous = {cname: numeric[j] for cname, j in keep_col}
        records.append(
            FlowRecord(
                categorical=categorical,
                continuous=continuous,
                label=label,
                source_tag=f"{source_name}:{ordinal}",
            )
        )
        report.rows_kept += 1
        report.label_counts[label] = report.label_counts.get(label, 0) + 1

    cols = [FeatureColumn(n, CATEGORICAL) for n in cat_order]
    cols += [FeatureColumn(n, CONTINUOUS) for n, _ in keep_col]
    schema = FeatureSchema(tuple(cols))
    provenance = {
        "source": "cic-csv",
        "file": source_name,
        "columns_dropped": ",".join(f"{c}:{r}" for c, r in sorted(report.columns_dropped.items())),
        "raw_labels": ",".join(f"{k}:{v}" for k, v in sorted(raw_label_counts.items())),
    }
    return LabeledDataset(tuple(records), schema, provenance), report


SYNTH_CATEGORICAL = ("SrcIP", "DstIP", "SrcPort", "DstPort", "Protocol")
SYNTH_CONTINUOUS = ("Duration", "FwdBytes", "BwdBytes", "FwdPkts", "BwdPkts", "BurstRate")
_SERVICE_PORTS = ("22", "53", "80", "123", "443", "445", "3389", "8080")


@dataclass(frozen=True)
class SyntheticConfig:
    """Synthetic flow generator settings.

    Benign continuous statistics are driven by two latent factors (transfer
    size and intensity), so bytes, packets and duration are correlated the way
    real flow statistics are. ``separation`` scales how far malicious flows
    sit from that benign structure: it shifts BurstRate additively (above ~2.2
    that feature alone separates the classes) and perturbs the bytes-per-packet
    and duration relations, so anomalies fall off the benign manifold. At 0
    the two classes are drawn from the identical process. Malicious flows draw
    their source IP from a small set of enriched /24 subnets with probability
    ``malicious_affinity`` (benign flows with ``benign_affinity``), so IP
    features carry class signal at the subnet level.
    """

    n_flows: int = 20000
    malicious_fraction: float = 0.1
    seed: int = 0
    separation: float = 4.0
    n_subnets: int = 40
    n_malicious_subnets: int = 4
    hosts_per_subnet: int = 25
    n_dst_ips: int = 200
    n_src_ports: int = 2000
    malicious_affinity: float = 0.97
    benign_affinity: float = 0.03

    def validate(self) -> None:
        if self.n_flows < 2:
            raise ConfigError("n_flows must be at least 2")
        if not 0.0 < self.malicious_fraction < 1.0:
            raise ConfigError("malicious_fraction must be in (0,1)")
        n_mal = int(round(self.n_flows * self.malicious_fraction))
        if not 1 <= n_mal <= self.n_flows - 1:
            raise ConfigError("malicious_fraction must produce at least 1 example of each class")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if not 1 <= self.n_malicious_subnets < self.n_subnets:
            raise ConfigError("need 1 <= n_malicious_subnets < n_subnets")
        if self.n_subnets > 250 or self.hosts_per_subnet > 254:
            raise ConfigError("subnet/host cardinalities exceed one dotted-quad octet")
        if min(self.hosts_per_subnet, self.n_dst_ips, self.n_src_ports) < 1:
            raise ConfigError("cardinalities must be positive")
        for name in ("malicious_affinity", "benign_affinity"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0,1]")


def generate_synthetic(config: SyntheticConfig) -> LabeledDataset:
    """Deterministic labeled flows; byte-identical for identical configs."""
    config.validate()
    n = config.n_flows
    n_mal = int(round(n * config.malicious_fraction))
    rng = np.random.default_rng(config.seed)
    mal = np.zeros(n, dtype=bool)
    mal[n - n_mal :] = True
    s = config.separation

    # two latent factors tie the statistics together; malicious flows bend
    # the byte-size and duration relations by a factor scaled with s
    size = rng.uniform(0.2, 1.0, n)
    rate = rng.uniform(0.1, 1.0, n)
    noise = rng.standard_normal((n, 6))
    size_eff = size * (1.0 + 0.25 * s * mal)
    dur_factor = 1.0 + 0.3 * s * mal

    fwd_pkts = 5.0 + 60.0 * size * rate + 0.5 * noise[:, 0]
    fwd_bytes = fwd_pkts * (300.0 + 400.0 * size_eff) * (1.0 + 0.02 * noise[:, 1])
    bwd_pkts = fwd_pkts * (0.6 + 0.2 * rate) + 0.5 * noise[:, 2]
    bwd_bytes = bwd_pkts * (350.0 + 300.0 * size_eff) * (1.0 + 0.02 * noise[:, 3])
    duration = fwd_pkts / (10.0 * rate) * dur_factor * (1.0 + 0.02 * noise[:, 4])
    burst = 2.0 * rate + 0.05 * noise[:, 5] + s * mal

    u = rng.random(n)
    in_enriched = np.where(mal, u < config.malicious_affinity, u < config.benign_affinity)
    enriched_subnet = rng.integers(0, config.n_malicious_subnets, n)
    other_subnet = rng.integers(config.n_malicious_subnets, config.n_subnets, n)
    subnet = np.where(in_enriched, enriched_subnet, other_subnet)
    host = rng.integers(1, config.hosts_per_subnet + 1, n)
    dst = rng.integers(0, config.n_dst_ips, n)
    sport = rng.integers(0, config.n_src_ports, n)
    dport = rng.choice(np.array(_SERVICE_PORTS), n)
    proto = rng.choice(np.array(["tcp", "udp", "icmp"]), n, p=[0.70, 0.25, 0.05])
    perm = rng.permutation(n)

    records = []
    for out_i, j in enumerate(perm):
        j = int(j)
        records.append(
            FlowRecord(
                categorical={
                    "SrcIP": f"10.0.{int(subnet[j])}.{int(host[j])}",
                    "DstIP": f"172.16.{int(dst[j]) // 250}.{int(dst[j]) % 250 + 1}",
                    "SrcPort": str(1024 + int(sport[j])),
                    "DstPort": str(dport[j]),
                    "Protocol": str(proto[j]),
                },
                continuous={
                    "Duration": float(duration[j]),
                    "FwdBytes": float(fwd_bytes[j]),
                    "BwdBytes": float(bwd_bytes[j]),
                    "FwdPkts": float(fwd_pkts[j]),
                    "BwdPkts": float(bwd_pkts[j]),
                    "BurstRate": float(burst[j]),
                },
                label=int(mal[j]),
                source_tag=f"synthetic:{out_i}",
            )
        )

    cols = [FeatureColumn(name, CATEGORICAL) for name in SYNTH_CATEGORICAL]
    cols += [FeatureColumn(name, CONTINUOUS) for name in SYNTH_CONTINUOUS]
    provenance = {"source": "synthetic"}
    for f in fields(config):
        provenance[f.name] = str(getattr(config, f.name))
    provenance["n_malicious"] = str(n_mal)
    return LabeledDataset(tuple(records), FeatureSchema(tuple(cols)), provenance)


def split_stratified(
    data: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint train/test split preserving class proportions within one record."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0,1), got {test_fraction}")
    by_label: dict[int, list[int]] = {0: [], 1: []}
    for i, r in enumerate(data.records):
        by_label.setdefault(r.label, []).append(i)
    for label in (0, 1):
        if len(by_label[label]) < 2:
            raise ConfigError(f"class {label} has fewer than 2 records")
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for label in sorted(by_label):
        idx = np.array(by_label[label])
        k = int(math.floor(idx.size * test_fraction + 0.5))
        perm = rng.permutation(idx.size)
        test_idx.extend(int(v) for v in idx[perm[:k]])
    test_set = set(test_idx)
    train_order = [i for i in range(len(data)) if i not in test_set]
    test_order = sorted(test_set)
    train = data.subset(train_order, note=f"train test_fraction={test_fraction} seed={seed}")
    test = data.subset(test_order, note=f"test test_fraction={test_fraction} seed={seed}")
    return train, test


def dataset_to_csv(data: LabeledDataset, out: io.TextIOBase) -> None:
    """Write a dataset as canonical CSV: categoricals, continuous, Label.

    Continuous values use 17 significant digits, so a re-parse reproduces
    them exactly.
    """
    cat_names = [c.name for c in data.schema.categorical_columns]
    cont_names = [c.name for c in data.schema.continuous_columns]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(cat_names + cont_names + ["Label"])
    for r in data.records:
        row = [r.categorical[n] for n in cat_names]
        row += [f"{r.continuous[n]:.17g}" for n in cont_names]
        row.append("BENIGN" if r.label == 0 else "MALICIOUS")
        writer.writerow(row)
