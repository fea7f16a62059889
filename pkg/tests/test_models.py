import numpy as np
import pytest

from flowids.flows import CATEGORICAL, CONTINUOUS, ConfigError, FeatureColumn, FeatureSchema, Vocabulary
from flowids.ingest import SyntheticConfig, generate_synthetic
from flowids.models import (
    AutoencoderModel,
    TrainConfig,
    build_autoencoder,
    build_dnn,
    model_grad_check,
    predict_dnn,
    reconstruction_error,
    train_autoencoder,
    train_dnn,
)
from flowids.preprocess import embedding_dims, encode_dataset, fit_schema


def tiny_dataset(n=160, seed=7, separation=2.0):
    return generate_synthetic(
        SyntheticConfig(
            n_flows=n,
            malicious_fraction=0.25,
            seed=seed,
            separation=separation,
            n_subnets=6,
            n_malicious_subnets=2,
            hosts_per_subnet=4,
            n_dst_ips=6,
            n_src_ports=8,
        )
    )


def encoded_pair(data, ip_mode="full"):
    schema = fit_schema(data, ip_mode=ip_mode)
    return schema, encode_dataset(data, schema, "index")


def cic_like_schema():
    """Fitted schema mirroring the published cardinalities of the CSV dataset."""

    def vocab(n):
        return Vocabulary(f"v{i}" for i in range(n))

    cols = []
    for name, card in (("SrcIP", 17002), ("DstIP", 19112), ("SrcPort", 64638), ("DstPort", 53791), ("Protocol", 3)):
        v = vocab(card)
        cols.append(FeatureColumn(name, CATEGORICAL, vocab=v, embedding_dims=embedding_dims(card)))
    for i in range(69):
        cols.append(FeatureColumn(f"stat_{i:02d}", CONTINUOUS, bounds=(0.0, 1.0)))
    return FeatureSchema(tuple(cols), ip_mode="full")


class TestBuildDnn:
    def test_input_width_127_for_published_cardinalities(self):
        # (12 + 12 + 16 + 16) for the address/port features, ceil(3**0.25) = 2
        # for the protocol, plus 69 continuous columns
        schema = cic_like_schema()
        model = build_dnn(schema, "full", seed=0)
        assert model.input_width == (12 + 12 + 16 + 16) + 2 + 69 == 127

    def test_ip_drop_has_no_ip_tables(self):
        data = tiny_dataset()
        schema = fit_schema(data, ip_mode="drop")
        model = build_dnn(schema, "drop", seed=0)
        assert "SrcIP" not in model.embeddings and "DstIP" not in model.embeddings
        assert "SrcPort" in model.embeddings

    def test_same_seed_identical_weights(self):
        data = tiny_dataset()
        schema, _ = encoded_pair(data)
        a = build_dnn(schema, "full", seed=3)
        b = build_dnn(schema, "full", seed=3)
        for name, block in a.param_blocks().items():
            assert np.array_equal(block, b.param_blocks()[name])

    def test_ip_mode_must_match_schema(self):
        data = tiny_dataset()
        schema = fit_schema(data, ip_mode="full")
        with pytest.raises(ConfigError):
            build_dnn(schema, "drop", seed=0)

    def test_stack_shape(self):
        data = tiny_dataset()
        schema, _ = encoded_pair(data)
        model = build_dnn(schema, "full", seed=0)
        dense = [l for l in model.stack if l.kind == "dense"]
        assert [d.w.shape[1] for d in dense] == [64, 64, 64, 1]


class TestPredictDnn:
    def test_zeroed_model_outputs_half(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=0)
        for block in model.param_blocks().values():
            block[...] = 0.0
        probs = predict_dnn(model, batch)
        assert np.all(probs == 0.5)

    def test_outputs_in_open_interval(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=1)
        probs = predict_dnn(model, batch)
        assert probs.shape == (len(batch),)
        assert np.all(probs > 0.0) and np.all(probs < 1.0)

    def test_batch_of_one_matches_row_in_batch(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=2)
        full = predict_dnn(model, batch)
        one = predict_dnn(model, batch.take(np.array([13])))
        np.testing.assert_allclose(one[0], full[13], rtol=0.0, atol=1e-12)

    def test_row_order_invariance(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=2)
        full = predict_dnn(model, batch)
        perm = np.random.default_rng(0).permutation(len(batch))
        shuffled = predict_dnn(model, batch.take(perm))
        np.testing.assert_allclose(shuffled, full[perm], rtol=0.0, atol=1e-12)


class TestTrainDnn:
    def test_separable_data_low_loss(self):
        data = tiny_dataset(n=2000, separation=4.0)
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=5)
        model, hist = train_dnn(model, batch, TrainConfig(epochs=5, batch_size=128, seed=5))
        assert hist.train_loss[-1] < 0.1

    def test_separable_data_high_train_tpr(self):
        from flowids.evaluate import confusion

        data = generate_synthetic(SyntheticConfig(n_flows=4000, malicious_fraction=0.1, seed=3, separation=4.0))
        schema = fit_schema(data, "full")
        batch = encode_dataset(data, schema, "index")
        model = build_dnn(schema, "full", seed=3)
        model, _ = train_dnn(model, batch, TrainConfig(epochs=10, batch_size=256, seed=3))
        cm = confusion(batch.labels, predict_dnn(model, batch), 0.5)
        assert cm.tpr >= 0.99 and cm.fpr <= 0.01

    def test_one_epoch_one_batch_one_step(self):
        data = tiny_dataset(n=100)
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=0)
        model, hist = train_dnn(model, batch, TrainConfig(epochs=1, batch_size=500, seed=0))
        assert hist.steps == 1
        assert len(hist.train_loss) == 1

    def test_deterministic_history_and_weights(self):
        data = tiny_dataset(n=300)
        schema, batch = encoded_pair(data)
        runs = []
        for _ in range(2):
            model = build_dnn(schema, "full", seed=4)
            model, hist = train_dnn(model, batch, TrainConfig(epochs=3, batch_size=64, seed=4))
            runs.append((model, hist))
        assert runs[0][1].train_loss == runs[1][1].train_loss
        for name, block in runs[0][0].param_blocks().items():
            assert np.array_equal(block, runs[1][0].param_blocks()[name])

    def test_empty_training_set_rejected(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=0)
        with pytest.raises(ConfigError):
            train_dnn(model, batch.take(np.array([], dtype=int)), TrainConfig())

    def test_val_history_recorded(self):
        data = tiny_dataset(n=200)
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=0)
        model, hist = train_dnn(model, batch, TrainConfig(epochs=2, batch_size=64, seed=0), val=batch)
        assert len(hist.val_loss) == 2


class TestAutoencoder:
    def _benign_batch(self, n=300, seed=9):
        data = tiny_dataset(n=n, seed=seed)
        benign = data.subset([i for i, r in enumerate(data.records) if r.label == 0])
        schema = fit_schema(benign, ip_mode="drop", exclude=("SrcPort", "DstPort"))
        return schema, encode_dataset(benign, schema, "onehot")

    def test_published_width_configuration(self):
        schema = fit_schema(
            generate_synthetic(SyntheticConfig(n_flows=60, malicious_fraction=0.2, seed=0)),
            ip_mode="drop",
        )
        model = AutoencoderModel(72)
        assert model.widths == (72, 140, 35, 16, 16, 35, 72)

    def test_parameterized_width(self):
        model = AutoencoderModel(10)
        assert model.widths == (10, 140, 35, 16, 16, 35, 10)

    def test_schema_driven_width(self):
        schema, batch = self._benign_batch()
        model = build_autoencoder(schema, seed=0)
        assert model.input_width == batch.width

    def test_same_seed_identical_init(self):
        a = AutoencoderModel(12, seed=8)
        b = AutoencoderModel(12, seed=8)
        for name, block in a.param_blocks().items():
            assert np.array_equal(block, b.param_blocks()[name])

    def test_activation_layout(self):
        model = AutoencoderModel(9)
        kinds = [l.kind for l in model.layers]
        assert kinds == ["dense", "sigmoid", "dense", "relu", "dense", "relu",
                         "dense", "relu", "dense", "relu", "dense", "sigmoid"]

    def test_malicious_rows_rejected(self):
        data = tiny_dataset(n=200)
        schema = fit_schema(data, ip_mode="drop", exclude=("SrcPort", "DstPort"))
        batch = encode_dataset(data, schema, "onehot")
        model = build_autoencoder(schema, seed=0)
        with pytest.raises(ConfigError, match="benign-only"):
            train_autoencoder(model, batch, TrainConfig(epochs=1))

    def test_training_reduces_loss(self):
        schema, batch = self._benign_batch(n=600)
        model = build_autoencoder(schema, seed=1)
        model, hist = train_autoencoder(model, batch, TrainConfig(epochs=10, batch_size=64, seed=1))
        assert hist.train_loss[-1] < hist.train_loss[0]

    def test_l1_changes_training(self):
        schema, batch = self._benign_batch(n=300)
        runs = []
        for lam in (0.0, 1e-5):
            model = build_autoencoder(schema, seed=2, l1_coef=lam)
            model, _ = train_autoencoder(model, batch, TrainConfig(epochs=2, batch_size=64, seed=2, l1=lam))
            runs.append(model.param_blocks()["dense0:W"].copy())
        assert not np.array_equal(runs[0], runs[1])

    def test_width_zero_rejected(self):
        with pytest.raises(ConfigError):
            AutoencoderModel(0)


class TestReconstructionError:
    def test_perfect_model_scores_zero(self):
        class Identity:
            def forward(self, x, train=False, rng=None):
                return x

        rows = np.random.default_rng(0).random((5, 7))
        errors = reconstruction_error(Identity(), rows)
        assert np.all(errors == 0.0)

    def test_row_position_invariant(self):
        schema, batch = TestAutoencoder()._benign_batch()
        model = build_autoencoder(schema, seed=3)
        all_errors = reconstruction_error(model, batch.continuous)
        single = reconstruction_error(model, batch.continuous[7:8])
        np.testing.assert_allclose(single[0], all_errors[7], rtol=0.0, atol=1e-12)

    def test_nonnegative(self):
        schema, batch = TestAutoencoder()._benign_batch()
        model = build_autoencoder(schema, seed=3)
        assert np.all(reconstruction_error(model, batch.continuous) >= 0.0)

    def test_anomalies_score_higher_after_training(self):
        data = tiny_dataset(n=1200, seed=11, separation=4.0)
        train_idx = [i for i, r in enumerate(data.records) if r.label == 0][:700]
        rest = [i for i in range(len(data)) if i not in set(train_idx)]
        benign_train = data.subset(train_idx)
        eval_set = data.subset(rest)
        schema = fit_schema(benign_train, ip_mode="drop", exclude=("SrcPort", "DstPort"))
        enc_train = encode_dataset(benign_train, schema, "onehot")
        model = build_autoencoder(schema, seed=11)
        model, _ = train_autoencoder(model, enc_train, TrainConfig(epochs=15, batch_size=64, seed=11))
        enc_eval = encode_dataset(eval_set, schema, "onehot")
        errors = reconstruction_error(model, enc_eval.continuous)
        benign_mean = errors[enc_eval.labels == 0].mean()
        anom_mean = errors[enc_eval.labels == 1].mean()
        assert anom_mean > benign_mean


class TestModelGradChecks:
    def test_dnn_full_model(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=1)
        err = model_grad_check(model, batch.take(np.arange(8)), h=1e-5)
        assert err <= 1e-4

    def test_autoencoder_full_model_including_l1(self):
        schema, batch = TestAutoencoder()._benign_batch()
        model = build_autoencoder(schema, seed=1, l1_coef=1e-5)
        err = model_grad_check(model, batch.continuous[:8], h=1e-5)
        assert err <= 1e-4

    def test_corrupt_control_fails(self):
        data = tiny_dataset()
        schema, batch = encoded_pair(data)
        model = build_dnn(schema, "full", seed=1)
        err = model_grad_check(model, batch.take(np.arange(8)), h=1e-5, corrupt=True)
        assert err > 1e-4
