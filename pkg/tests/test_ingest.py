import io
import random
import time

import numpy as np
import pytest
from scipy import stats

from flowids.flows import ConfigError, IngestError, validate_record
from flowids.ingest import (
    SYNTH_CONTINUOUS,
    SyntheticConfig,
    dataset_to_csv,
    generate_synthetic,
    parse_cic_csv,
    parse_iscx_xml,
    split_stratified,
)


class TestIscxParser:
    def test_small_fixture(self, data_dir):
        data, report = parse_iscx_xml(data_dir / "iscx_small.xml")
        assert len(data) == 3
        assert report.rows_read == 3 and report.rows_kept == 3
        assert report.label_counts == {0: 2, 1: 1}
        assert report.balanced()
        first = data.records[0]
        assert first.categorical["SrcIP"] == "192.168.2.107"
        assert first.categorical["DstPort"] == "80"
        assert first.continuous["Duration"] == 19.0
        assert first.continuous["TotalBytes"] == 16076.0 + 103229.0
        assert first.continuous["TotalPkts"] == 42.0 + 73.0
        # fractional stop timestamp
        assert data.records[1].continuous["Duration"] == 30.5
        assert data.records[1].label == 1

    def test_records_pass_validation(self, data_dir):
        data, _ = parse_iscx_xml(data_dir / "iscx_small.xml")
        for record in data.records:
            assert validate_record(record, data.schema) == []

    def test_empty_document(self, data_dir):
        data, report = parse_iscx_xml(data_dir / "iscx_empty.xml")
        assert len(data) == 0
        assert report.rows_read == 0 and report.balanced()

    def test_missing_field_drops_row(self, data_dir):
        data, report = parse_iscx_xml(data_dir / "iscx_missing_port.xml")
        assert len(data) == 2
        assert report.rows_dropped == {"missing-field": 1}
        assert report.balanced()

    def test_malformed_xml_reports_offset(self):
        with pytest.raises(IngestError, match="byte offset"):
            parse_iscx_xml(b"<dataroot><flow><a>1</a></flwo></dataroot>")

    def test_unknown_declared_encoding(self):
        with pytest.raises(IngestError):
            parse_iscx_xml(b'<?xml version="1.0" encoding="UTQ-8"?>\n<dataroot/>')

    def test_bytes_input(self, data_dir):
        raw = (data_dir / "iscx_small.xml").read_bytes()
        data, _ = parse_iscx_xml(raw)
        assert len(data) == 3

    def test_custom_field_map(self, data_dir):
        raw = (data_dir / "iscx_small.xml").read_bytes().replace(b"appName", b"applicationName")
        data, report = parse_iscx_xml(raw, field_map={"AppName": "applicationName"})
        assert len(data) == 3

    def test_unparseable_number_drops_row(self, data_dir):
        raw = (data_dir / "iscx_small.xml").read_bytes().replace(b"<totalSourceBytes>2318<", b"<totalSourceBytes>abc<")
        data, report = parse_iscx_xml(raw)
        assert len(data) == 2
        assert report.rows_dropped == {"unparseable": 1}

    def test_non_finite_value_drops_row(self, data_dir):
        raw = (data_dir / "iscx_small.xml").read_bytes().replace(b"<totalSourceBytes>2318<", b"<totalSourceBytes>inf<")
        data, report = parse_iscx_xml(raw)
        assert len(data) == 2
        assert report.rows_dropped == {"non-finite": 1}

    def test_raw_labels_exposed(self, data_dir):
        data, _ = parse_iscx_xml(data_dir / "iscx_small.xml")
        assert data.provenance["raw_labels"] == "Attack:1,Normal:2"


class TestCicParser:
    def test_zero_variance_column_dropped(self, data_dir):
        data, report = parse_cic_csv(data_dir / "cic_small.csv")
        assert report.columns_dropped == {"ZeroCol": "zero-variance"}
        assert len(data) == 5
        assert "ZeroCol" not in data.schema.names()

    def test_label_distribution(self, data_dir):
        data, report = parse_cic_csv(data_dir / "cic_small.csv")
        assert report.label_counts == {0: 3, 1: 2}
        assert report.balanced()

    def test_categorical_columns_canonical(self, data_dir):
        data, _ = parse_cic_csv(data_dir / "cic_small.csv")
        assert [c.name for c in data.schema.categorical_columns] == [
            "SrcIP",
            "DstIP",
            "SrcPort",
            "DstPort",
            "Protocol",
        ]
        assert data.records[0].categorical["Protocol"] == "6"

    def test_infinity_cell_drops_column(self, data_dir):
        data, report = parse_cic_csv(data_dir / "cic_infinity.csv")
        assert report.columns_dropped["Flow Bytes/s"] == "missing-values"
        assert len(data) == 4
        assert "Flow Bytes/s" not in data.schema.names()

    def test_row_mode_drops_rows_instead(self, data_dir):
        data, report = parse_cic_csv(data_dir / "cic_infinity.csv", drop_rows_with_missing=True)
        assert report.rows_dropped == {"non-finite": 1}
        assert len(data) == 3
        assert "Flow Bytes/s" in data.schema.names()

    def test_ragged_row_dropped(self, data_dir):
        data, report = parse_cic_csv(data_dir / "cic_ragged.csv")
        assert len(data) == 2
        assert report.rows_dropped == {"unparseable": 1}
        assert report.balanced()

    def test_missing_label_column_fatal(self):
        with pytest.raises(ConfigError, match="Label"):
            parse_cic_csv(b"a,b\n1,2\n")

    def test_records_pass_validation(self, data_dir):
        data, _ = parse_cic_csv(data_dir / "cic_small.csv")
        for record in data.records:
            assert validate_record(record, data.schema) == []

    def test_flow_id_and_timestamp_discarded(self, data_dir):
        data, _ = parse_cic_csv(data_dir / "cic_small.csv")
        names = data.schema.names()
        assert "Flow ID" not in names and "Timestamp" not in names

    def test_duplicate_header_rejected(self):
        with pytest.raises(IngestError, match="duplicate"):
            parse_cic_csv(b"a,a,Label\n1,2,BENIGN\n")


class TestSynthetic:
    def test_determinism_byte_identical(self):
        cfg = SyntheticConfig(n_flows=300, malicious_fraction=0.1, seed=5)
        a = generate_synthetic(cfg)
        b = generate_synthetic(cfg)
        assert a.records == b.records
        buf_a, buf_b = io.StringIO(), io.StringIO()
        dataset_to_csv(a, buf_a)
        dataset_to_csv(b, buf_b)
        assert buf_a.getvalue() == buf_b.getvalue()

    def test_exact_malicious_count(self):
        data = generate_synthetic(SyntheticConfig(n_flows=1000, malicious_fraction=0.1, seed=0))
        assert data.label_counts() == {0: 900, 1: 100}

    def test_zero_separation_marginals_indistinguishable(self):
        data = generate_synthetic(
            SyntheticConfig(n_flows=10000, malicious_fraction=0.5, seed=0, separation=0.0)
        )
        benign = [r for r in data.records if r.label == 0]
        malicious = [r for r in data.records if r.label == 1]
        for name in SYNTH_CONTINUOUS:
            b = [r.continuous[name] for r in benign]
            m = [r.continuous[name] for r in malicious]
            assert stats.ks_2samp(b, m).pvalue > 0.01

    def test_large_separation_is_linearly_separable(self):
        data = generate_synthetic(SyntheticConfig(n_flows=2000, malicious_fraction=0.2, seed=1, separation=4.0))
        benign_max = max(r.continuous["BurstRate"] for r in data.records if r.label == 0)
        malicious_min = min(r.continuous["BurstRate"] for r in data.records if r.label == 1)
        assert malicious_min > benign_max

    def test_enriched_subnets(self):
        cfg = SyntheticConfig(n_flows=5000, malicious_fraction=0.2, seed=2)
        data = generate_synthetic(cfg)
        enriched = {f"10.0.{k}" for k in range(cfg.n_malicious_subnets)}
        mal_in = np.mean(
            [r.categorical["SrcIP"].rsplit(".", 1)[0] in enriched for r in data.records if r.label == 1]
        )
        ben_in = np.mean(
            [r.categorical["SrcIP"].rsplit(".", 1)[0] in enriched for r in data.records if r.label == 0]
        )
        assert mal_in > 0.9 and ben_in < 0.1

    def test_records_pass_validation(self):
        data = generate_synthetic(SyntheticConfig(n_flows=50, malicious_fraction=0.2, seed=3))
        for record in data.records:
            assert validate_record(record, data.schema) == []

    def test_degenerate_configs_rejected(self):
        with pytest.raises(ConfigError):
            SyntheticConfig(n_flows=100, malicious_fraction=0.0).validate()
        with pytest.raises(ConfigError):
            SyntheticConfig(n_flows=100, malicious_fraction=0.001).validate()
        with pytest.raises(ConfigError):
            SyntheticConfig(separation=-1.0).validate()
        with pytest.raises(ConfigError):
            SyntheticConfig(n_subnets=4, n_malicious_subnets=4).validate()


class TestSplit:
    def test_arithmetic(self):
        data = generate_synthetic(SyntheticConfig(n_flows=100, malicious_fraction=0.1, seed=4))
        train, test = split_stratified(data, 0.2, seed=0)
        assert len(test) == 20 and len(train) == 80
        assert test.label_counts() == {0: 18, 1: 2}

    def test_two_of_each(self):
        data = generate_synthetic(SyntheticConfig(n_flows=4, malicious_fraction=0.5, seed=4))
        train, test = split_stratified(data, 0.5, seed=0)
        assert train.label_counts() == {0: 1, 1: 1}
        assert test.label_counts() == {0: 1, 1: 1}

    def test_deterministic(self):
        data = generate_synthetic(SyntheticConfig(n_flows=200, malicious_fraction=0.2, seed=4))
        a = split_stratified(data, 0.25, seed=9)
        b = split_stratified(data, 0.25, seed=9)
        assert a[0].records == b[0].records and a[1].records == b[1].records

    def test_union_and_disjoint(self):
        data = generate_synthetic(SyntheticConfig(n_flows=150, malicious_fraction=0.2, seed=4))
        train, test = split_stratified(data, 0.3, seed=1)
        train_tags = {r.source_tag for r in train.records}
        test_tags = {r.source_tag for r in test.records}
        assert not train_tags & test_tags
        assert train_tags | test_tags == {r.source_tag for r in data.records}

    def test_small_class_rejected(self):
        data = generate_synthetic(SyntheticConfig(n_flows=100, malicious_fraction=0.01, seed=4))
        with pytest.raises(ConfigError):
            split_stratified(data, 0.5, seed=0)

    def test_bad_fraction(self):
        data = generate_synthetic(SyntheticConfig(n_flows=100, malicious_fraction=0.1, seed=4))
        with pytest.raises(ConfigError):
            split_stratified(data, 1.0, seed=0)


class TestCanonicalCsv:
    def test_roundtrip_through_csv_parser(self):
        data = generate_synthetic(SyntheticConfig(n_flows=40, malicious_fraction=0.25, seed=6))
        buf = io.StringIO()
        dataset_to_csv(data, buf)
        reparsed, report = parse_cic_csv(buf.getvalue().encode())
        assert len(reparsed) == len(data)
        assert report.columns_dropped == {}
        assert reparsed.label_counts() == data.label_counts()
        for a, b in zip(data.records, reparsed.records):
            assert a.categorical == b.categorical
            assert a.label == b.label
            for name, value in a.continuous.items():
                assert b.continuous[name] == value  # 17 significant digits round-trip


def fuzz_parser(parse, corpus, seconds, seed):
    """Throw random and mutated inputs at a parser; only IngestError/ConfigError allowed."""
    rng = random.Random(seed)
    deadline = time.monotonic() + seconds
    runs = 0
    while time.monotonic() < deadline:
        choice = rng.random()
        if choice < 0.3:
            data = rng.randbytes(rng.randrange(0, 300))
        else:
            data = bytearray(rng.choice(corpus))
            for _ in range(rng.randrange(1, 8)):
                kind = rng.random()
                if not data:
                    break
                pos = rng.randrange(len(data))
                if kind < 0.4:
                    data[pos] = rng.randrange(256)
                elif kind < 0.7:
                    del data[pos : pos + rng.randrange(1, 9)]
                else:
                    data[pos:pos] = rng.randbytes(rng.randrange(1, 9))
            data = bytes(data)
        try:
            _, report = parse(data)
            assert report.balanced()
        except (IngestError, ConfigError):
            pass
        runs += 1
    return runs


@pytest.mark.parametrize("fmt", ["xml", "csv"])
def test_fuzz_smoke(fmt, data_dir):
    if fmt == "xml":
        corpus = [(data_dir / "iscx_small.xml").read_bytes(), (data_dir / "iscx_missing_port.xml").read_bytes()]
        runs = fuzz_parser(parse_iscx_xml, corpus, seconds=2.0, seed=1)
    else:
        corpus = [(data_dir / "cic_small.csv").read_bytes(), (data_dir / "cic_infinity.csv").read_bytes()]
        runs = fuzz_parser(parse_cic_csv, corpus, seconds=2.0, seed=2)
    assert runs > 10
