"""The two detectors: a supervised DNN classifier and a benign-only autoencoder.

DNN: one embedding table per categorical feature (width = ceil of the fourth
root of the cardinality), concatenated with the scaled continuous features,
then three 64-unit ReLU layers with dropout 0.40 each and a single sigmoid
output unit. Trained with RMSProp on binary cross-entropy.

Autoencoder: a dense stack 72 -> 140 -> 35 -> 16 -> 16 -> 35 -> 72 for the
CSV-flow configuration (the outer width follows the schema; the five interior
widths are fixed), sigmoid on the first and last dense layers, ReLU between,
and an L1 activity penalty on the first encoding layer. Trained with RMSProp
on the squared reconstruction error over benign flows only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flows import ConfigError, FeatureSchema, SchemaMismatchError
from .nn import (
    Dense,
    Dropout,
    Embedding,
    Layer,
    Relu,
    RmsPropState,
    Sigmoid,
    bce_loss,
    concat_backward,
    concat_forward,
    fd_resolution_floor,
    grad_check,
    l1_penalty,
    rmsprop_step,
    sq_error_loss,
)
from .preprocess import EncodedBatch, encoded_width

AUTOENCODER_HIDDEN = (140, 35, 16, 16, 35)


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    epochs: int = 10
    batch_size: int = 512
    seed: int = 0
    learning_rate: float = 0.001
    dropout: float = 0.40
    l1: float = 1e-5
    threshold: float = 0.5
    ip_mode: str = "full"
    rho: float = 0.9
    eps: float = 1e-8

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0,1), got {self.threshold}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.l1 < 0:
            raise ConfigError("l1 must be >= 0")


@dataclass
class TrainHistory:
    """Per-epoch training loss, optional held-out loss, optimizer step count."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    steps: int = 0


class DnnModel:
    """Supervised flow classifier over embedded categoricals + scaled stats."""

    kind = "dnn"

    def __init__(
        self,
        schema: FeatureSchema,
        seed: int = 0,
        dropout_rate: float = 0.40,
        hidden_units: int = 64,
        hidden_layers: int = 3,
    ):
        if not schema.fitted:
            raise ConfigError("schema must be fitted before building a model")
        rng = np.random.default_rng(seed)
        self.schema = schema
        self.seed = seed
        self.dropout_rate = dropout_rate
        self.hidden_units = hidden_units
        self.hidden_layers = hidden_layers
        self._cat_names = tuple(c.name for c in schema.categorical_columns)
        self.embeddings: dict[str, Embedding] = {}
        for col in schema.categorical_columns:
            self.embeddings[col.name] = Embedding(col.vocab.cardinality + 1, col.embedding_dims, rng)
        self.input_width = encoded_width(schema, "index")
        if self.input_width == 0:
            raise ConfigError("schema has no features")
        self.stack: list[Layer] = []
        width = self.input_width
        for _ in range(hidden_layers):
            self.stack += [Dense(width, hidden_units, rng), Relu(), Dropout(dropout_rate)]
            width = hidden_units
        self.stack += [Dense(width, 1, rng), Sigmoid()]
        self._widths: list[int] | None = None

    def forward(
        self, batch: EncodedBatch, train: bool = False, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        n_cont = len(self.schema.continuous_columns)
        if batch.continuous.shape[1] != n_cont:
            raise SchemaMismatchError(
                f"batch has {batch.continuous.shape[1]} continuous columns, schema expects {n_cont}"
            )
        parts = []
        for name in self._cat_names:
            if name not in batch.categorical:
                raise SchemaMismatchError(f"batch is missing categorical feature {name!r}")
            parts.append(self.embeddings[name].forward(batch.categorical[name]))
        parts.append(batch.continuous)
        x, self._widths = concat_forward(parts)
        for layer in self.stack:
            x = layer.forward(x, train=train, rng=rng)
        return x[:, 0]

    def _backward(self, dprob: np.ndarray) -> None:
        g = dprob.reshape(-1, 1)
        for layer in reversed(self.stack):
            g = layer.backward(g)
        parts = concat_backward(g, self._widths)
        for name, gpart in zip(self._cat_names, parts):
            self.embeddings[name].backward(gpart)

    def loss_and_grads(
        self, batch: EncodedBatch, train: bool = False, rng: np.random.Generator | None = None
    ) -> tuple[float, dict[str, np.ndarray]]:
        probs = self.forward(batch, train=train, rng=rng)
        loss, dprob = bce_loss(probs, batch.labels.astype(float))
        self._backward(dprob)
        return loss, self.grad_blocks()

    def loss(self, batch: EncodedBatch) -> float:
        probs = self.forward(batch, train=False)
        return bce_loss(probs, batch.labels.astype(float))[0]

    def param_blocks(self) -> dict[str, np.ndarray]:
        blocks = {f"emb:{name}": self.embeddings[name].table for name in self._cat_names}
        j = 0
        for layer in self.stack:
            if isinstance(layer, Dense):
                blocks[f"dense{j}:W"] = layer.w
                blocks[f"dense{j}:b"] = layer.b
                j += 1
        return blocks

    def grad_blocks(self) -> dict[str, np.ndarray]:
        blocks = {f"emb:{name}": self.embeddings[name].dtable for name in self._cat_names}
        j = 0
        for layer in self.stack:
            if isinstance(layer, Dense):
                blocks[f"dense{j}:W"] = layer.dw
                blocks[f"dense{j}:b"] = layer.db
                j += 1
        return blocks


def build_dnn(
    schema: FeatureSchema, ip_mode: str = "full", seed: int = 0, dropout_rate: float = 0.40
) -> DnnModel:
    """Assemble the classifier; ``ip_mode`` must match how the schema was fitted."""
    if ip_mode != schema.ip_mode:
        raise ConfigError(
            f"ip_mode {ip_mode!r} does not match schema fitted with {schema.ip_mode!r}"
        )
    return DnnModel(schema, seed=seed, dropout_rate=dropout_rate)


def train_dnn(
    model: DnnModel,
    train: EncodedBatch,
    config: TrainConfig,
    val: EncodedBatch | None = None,
) -> tuple[DnnModel, TrainHistory]:
    """Mini-batch RMSProp on binary cross-entropy; deterministic in the seed.

    Batches are reshuffled every epoch from the run seed and the final short
    batch is kept. Returns the trained model (updated in place) and history.
    """
    config.validate()
    if len(train) == 0:
        raise ConfigError("training set is empty")
    rng = np.random.default_rng(config.seed)
    params = model.param_blocks()
    state = RmsPropState(config.learning_rate, config.rho, config.eps)
    history = TrainHistory()
    n = len(train)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(train.take(idx), train=True, rng=rng)
            rmsprop_step(state, params, grads)
            running += loss * idx.size
        history.train_loss.append(running / n)
        if val is not None:
            history.val_loss.append(model.loss(val))
    history.steps = state.steps
    return model, history


def predict_dnn(model: DnnModel, batch: EncodedBatch) -> np.ndarray:
    """Malicious-class probabilities in (0,1); dropout is inactive."""
    return model.forward(batch, train=False)


class AutoencoderModel:
    """Reconstruction network; the anomaly score is the per-row error."""

    kind = "autoencoder"

    def __init__(
        self,
        width: int,
        seed: int = 0,
        l1_coef: float = 1e-5,
        hidden: tuple[int, ...] = AUTOENCODER_HIDDEN,
        schema: FeatureSchema | None = None,
    ):
        if width < 1:
            raise ConfigError(f"input width must be positive, got {width}")
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.l1_coef = l1_coef
        self.schema = schema
        self.widths = (width, *hidden, width)
        self.layers: list[Layer] = []
        last = len(self.widths) - 2
        for i, (d_in, d_out) in enumerate(zip(self.widths, self.widths[1:])):
            self.layers.append(Dense(d_in, d_out, rng))
            self.layers.append(Sigmoid() if i in (0, last) else Relu())
        # L1 activity penalty attaches to the first encoding activation
        self._l1_layer = self.layers[1]

    @property
    def input_width(self) -> int:
        return self.widths[0]

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise SchemaMismatchError(
                f"input width {x.shape[1] if x.ndim == 2 else x.shape} != model width {self.input_width}"
            )
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def loss_and_grads(self, x: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        x_hat = self.forward(x)
        loss, g = sq_error_loss(x, x_hat)
        penalty, dpen = l1_penalty(self._l1_layer.out, self.l1_coef)
        loss += penalty
        for layer in reversed(self.layers):
            if layer is self._l1_layer:
                g = g + dpen
            g = layer.backward(g)
        return loss, self.grad_blocks()

    def loss(self, x: np.ndarray) -> float:
        x_hat = self.forward(x)
        loss, _ = sq_error_loss(x, x_hat)
        return loss + l1_penalty(self._l1_layer.out, self.l1_coef)[0]

    def param_blocks(self) -> dict[str, np.ndarray]:
        blocks = {}
        j = 0
        for layer in self.layers:
            if isinstance(layer, Dense):
                blocks[f"dense{j}:W"] = layer.w
                blocks[f"dense{j}:b"] = layer.b
                j += 1
        return blocks

    def grad_blocks(self) -> dict[str, np.ndarray]:
        blocks = {}
        j = 0
        for layer in self.layers:
            if isinstance(layer, Dense):
                blocks[f"dense{j}:W"] = layer.dw
                blocks[f"dense{j}:b"] = layer.db
                j += 1
        return blocks


def build_autoencoder(schema: FeatureSchema, seed: int = 0, l1_coef: float = 1e-5) -> AutoencoderModel:
    """Autoencoder sized for the one-hot encoding of a fitted schema."""
    return AutoencoderModel(encoded_width(schema, "onehot"), seed=seed, l1_coef=l1_coef, schema=schema)


def train_autoencoder(
    model: AutoencoderModel, benign_only: EncodedBatch, config: TrainConfig
) -> tuple[AutoencoderModel, TrainHistory]:
    """RMSProp on squared reconstruction error + L1; rejects malicious rows.

    History records the per-row average objective per epoch so values are
    comparable across batch sizes.
    """
    config.validate()
    if len(benign_only) == 0:
        raise ConfigError("training set is empty")
    if np.any(benign_only.labels != 0):
        bad = int(np.count_nonzero(benign_only.labels))
        raise ConfigError(f"autoencoder training data must be benign-only ({bad} malicious rows)")
    x_all = benign_only.continuous
    if x_all.shape[1] != model.input_width:
        raise SchemaMismatchError(
            f"batch width {x_all.shape[1]} != model width {model.input_width}"
        )
    rng = np.random.default_rng(config.seed)
    params = model.param_blocks()
    state = RmsPropState(config.learning_rate, config.rho, config.eps)
    history = TrainHistory()
    n = x_all.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(x_all[idx])
            rmsprop_step(state, params, grads)
            running += loss
        history.train_loss.append(running / n)
    history.steps = state.steps
    return model, history


def reconstruction_error(model: AutoencoderModel, rows: np.ndarray) -> np.ndarray:
    """Per-row mean squared error between input and reconstruction.

    The mean is over columns (not the sum), so a fixed threshold like 0.03
    means the same thing regardless of the input width.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-D batch, got shape {rows.shape}")
    x_hat = model.forward(rows)
    return ((rows - x_hat) ** 2).mean(axis=1)


def min_kink_distance(model: DnnModel | AutoencoderModel, batch: EncodedBatch | np.ndarray) -> float:
    """Smallest |pre-activation| over all ReLU layers for a batch.

    Central differences are invalid within the perturbation of a ReLU kink;
    gradient-check fixtures pick seeds where this distance comfortably
    exceeds the step size.
    """
    if isinstance(model, DnnModel):
        parts = [model.embeddings[n].forward(batch.categorical[n]) for n in model._cat_names]
        parts.append(batch.continuous)
        x, _ = concat_forward(parts)
        layers = model.stack
    else:
        x = batch
        layers = model.layers
    closest = np.inf
    for layer in layers:
        if layer.kind == "relu":
            closest = min(closest, float(np.abs(x).min()))
        x = layer.forward(x, train=False)
    return closest


def model_grad_check(
    model: DnnModel | AutoencoderModel,
    batch: EncodedBatch | np.ndarray,
    h: float = 1e-5,
    samples_per_block: int = 40,
    seed: int = 0,
    corrupt: bool = False,
    tolerance: float = 1e-4,
) -> float:
    """Finite-difference check of a full model's analytic gradients.

    Dropout stays disabled (inference mode) so the loss is deterministic.
    Coordinates with gradients below the float64 resolution of central
    differences at this step size are skipped (``tolerance`` feeds that
    floor). ``corrupt=True`` deliberately damages one analytic gradient,
    a negative control that must make the check fail.
    """
    def loss_fn() -> float:
        return model.loss(batch)

    _, grads = model.loss_and_grads(batch)
    if corrupt:
        first = sorted(grads)[0]
        grads[first] = grads[first] + 1.0
    return grad_check(
        model.param_blocks(),
        loss_fn,
        grads,
        h=h,
        samples_per_block=samples_per_block,
        rng=np.random.default_rng(seed),
        min_signal=fd_resolution_floor(loss_fn(), h, tolerance),
    )
