import numpy as np
import pytest

from flowids.flows import ConfigError
from flowids.ingest import SyntheticConfig, generate_synthetic
from flowids.models import TrainConfig, build_autoencoder, build_dnn, predict_dnn, reconstruction_error, train_dnn
from flowids.persist import dataset_digest, load_model, save_model
from flowids.preprocess import encode_dataset, fit_schema


@pytest.fixture
def trained_dnn():
    data = generate_synthetic(
        SyntheticConfig(n_flows=400, malicious_fraction=0.2, seed=13, n_subnets=8,
                        n_malicious_subnets=2, hosts_per_subnet=5, n_dst_ips=10, n_src_ports=12)
    )
    schema = fit_schema(data, ip_mode="first3")
    batch = encode_dataset(data, schema, "index")
    model = build_dnn(schema, "first3", seed=13)
    config = TrainConfig(epochs=2, batch_size=64, seed=13, ip_mode="first3")
    model, _ = train_dnn(model, batch, config)
    return data, schema, batch, model, config


class TestModelFile:
    def test_dnn_roundtrip_bitwise(self, trained_dnn, tmp_path):
        data, schema, batch, model, config = trained_dnn
        path = tmp_path / "model.txt"
        save_model(path, model, config, dataset_digest(data))
        loaded = load_model(path)
        assert loaded.kind == "dnn"
        assert loaded.model.schema == schema
        assert loaded.config == config
        before = predict_dnn(model, batch)
        after = predict_dnn(loaded.model, batch)
        assert np.array_equal(before, after)

    def test_autoencoder_roundtrip_bitwise(self, tmp_path):
        data = generate_synthetic(SyntheticConfig(n_flows=200, malicious_fraction=0.2, seed=14))
        benign = data.subset([i for i, r in enumerate(data.records) if r.label == 0])
        schema = fit_schema(benign, ip_mode="drop", exclude=("SrcPort", "DstPort"))
        batch = encode_dataset(benign, schema, "onehot")
        model = build_autoencoder(schema, seed=14)
        config = TrainConfig(seed=14, ip_mode="drop")
        path = tmp_path / "ae.txt"
        save_model(path, model, config, dataset_digest(data))
        loaded = load_model(path)
        assert loaded.kind == "autoencoder"
        before = reconstruction_error(model, batch.continuous)
        after = reconstruction_error(loaded.model, batch.continuous)
        assert np.array_equal(before, after)

    def test_save_is_deterministic(self, trained_dnn, tmp_path):
        data, _, _, model, config = trained_dnn
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        digest = dataset_digest(data)
        save_model(a, model, config, digest)
        save_model(b, model, config, digest)
        assert a.read_bytes() == b.read_bytes()

    def test_corrupt_file_rejected(self, trained_dnn, tmp_path):
        data, _, _, model, config = trained_dnn
        path = tmp_path / "model.txt"
        save_model(path, model, config, dataset_digest(data))
        text = path.read_text()
        path.write_text(text.replace("flowids-model\t1", "other-format\t9", 1))
        with pytest.raises(ConfigError):
            load_model(path)

    def test_truncated_file_rejected(self, trained_dnn, tmp_path):
        data, _, _, model, config = trained_dnn
        path = tmp_path / "model.txt"
        save_model(path, model, config, dataset_digest(data))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[: len(lines) // 2]))
        with pytest.raises(ConfigError):
            load_model(path)


class TestDatasetDigest:
    def test_stable_for_same_data(self):
        cfg = SyntheticConfig(n_flows=50, malicious_fraction=0.2, seed=1)
        assert dataset_digest(generate_synthetic(cfg)) == dataset_digest(generate_synthetic(cfg))

    def test_differs_across_seeds(self):
        a = generate_synthetic(SyntheticConfig(n_flows=50, malicious_fraction=0.2, seed=1))
        b = generate_synthetic(SyntheticConfig(n_flows=50, malicious_fraction=0.2, seed=2))
        assert dataset_digest(a) != dataset_digest(b)
