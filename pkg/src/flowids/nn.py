"""Minimal differentiable-layer engine over float64 numpy arrays.

Dense and embedding layers, ReLU/sigmoid activations, inverted dropout,
binary cross-entropy and squared-error losses, an L1 activity penalty,
RMSProp, and a central-finite-difference gradient checker. Everything is
deterministic for a fixed seed: batch gradient accumulation is plain
summation in fixed index order and all randomness flows through explicit
``numpy.random.Generator`` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

#: Probabilities are clamped to [P_CLAMP, 1-P_CLAMP] before logs.
P_CLAMP = 1e-12

_SIG_LO = float(np.nextafter(0.0, 1.0))
_SIG_HI = float(np.nextafter(1.0, 0.0))

LAYER_KINDS = ("dense", "embedding", "relu", "sigmoid", "dropout", "concat")


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values in {name}")


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map x @ w + b with the bias broadcast over rows."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"dense shape mismatch: x{x.shape} w{w.shape} b{b.shape}")
    out = x @ w + b
    check_finite("dense output", out)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically careful logistic function, never exactly 0 or 1.

    Uses 1 - t/(1+t) on the positive branch (more accurate than 1/(1+t) next
    to saturation) and clamps into the open unit interval so downstream logs
    stay finite.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    t = np.exp(-x[pos])
    out[pos] = 1.0 - t / (1.0 + t)
    t = np.exp(x[~pos])
    out[~pos] = t / (1.0 + t)
    return np.clip(out, _SIG_LO, _SIG_HI)


def dropout(
    x: np.ndarray,
    rate: float,
    train: bool,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: zero units with probability ``rate``, scale survivors.

    Inference mode is the identity (returns the input array itself). Returns
    the (output, keep-mask) pair; the mask is None whenever no unit was
    touched. A precomputed boolean ``mask`` makes the op deterministic for
    gradient checking.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if mask is None:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng or a fixed mask")
        mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate), mask


def bce_loss(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient with respect to p.

    p is clamped away from {0,1} before the logs; the gradient is
    (p - y) / (p (1 - p)) / N elementwise at the clamped values.
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: p{p.shape} y{y.shape}")
    if p.size == 0:
        raise ValueError("empty input")
    n = p.size
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    loss = float(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)).sum() / n)
    grad = (pc - y) / (pc * (1.0 - pc)) / n
    check_finite("bce gradient", grad)
    return loss, grad


def sq_error_loss(x: np.ndarray, x_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared Frobenius distance and its gradient 2 (x_hat - x)."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: x{x.shape} x_hat{x_hat.shape}")
    d = x_hat - x
    return float((d * d).sum()), 2.0 * d


def l1_penalty(activations: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    """lam * sum |a| with subgradient lam * sign(a) (sign(0) = 0)."""
    if lam < 0:
        raise ValueError(f"l1 coefficient must be >= 0, got {lam}")
    return float(lam * np.abs(activations).sum()), lam * np.sign(activations)


@dataclass
class RmsPropState:
    """Running squared-gradient averages per parameter block + hyperparameters."""

    learning_rate: float = 0.001
    rho: float = 0.9
    eps: float = 1e-8
    avg_sq: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def rmsprop_step(
    state: RmsPropState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> tuple[dict[str, np.ndarray], RmsPropState]:
    """One RMSProp update, in place: v <- rho v + (1-rho) g^2; theta -= lr g/(sqrt(v)+eps)."""
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}: {g.shape} vs {theta.shape}")
        v = state.avg_sq.get(name)
        if v is None:
            v = state.avg_sq[name] = np.zeros_like(theta)
        v *= state.rho
        v += (1.0 - state.rho) * g * g
        theta -= state.learning_rate * g / (np.sqrt(v) + state.eps)
        check_finite(f"updated {name}", theta)
    state.steps += 1
    return params, state


class Layer:
    """Base layer: forward caches whatever backward needs; no parameters."""

    kind = "base"

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        # symmetric uniform init scaled by fan-in; biases zero
        limit = 1.0 / math.sqrt(d_in)
        self.w = rng.uniform(-limit, limit, size=(d_in, d_out))
        self.b = np.zeros(d_out)
        self._x: np.ndarray | None = None
        self.dw: np.ndarray | None = None
        self.db: np.ndarray | None = None

    def forward(self, x, train=False, rng=None):
        self._x = x
        return dense_forward(x, self.w, self.b)

    def backward(self, grad):
        self.dw = self._x.T @ grad
        self.db = grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return {"W": self.w, "b": self.b}

    def grads(self):
        return {"W": self.dw, "b": self.db}


class Relu(Layer):
    kind = "relu"

    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return grad * self._mask


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=False, rng=None):
        self.out = sigmoid(x)
        return self.out

    def backward(self, grad):
        return grad * self.out * (1.0 - self.out)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0,1), got {rate}")
        self.rate = rate
        #: set to a boolean array to freeze the mask (gradient checking)
        self.fixed_mask: np.ndarray | None = None
        self._mask: np.ndarray | None = None

    def forward(self, x, train=False, rng=None):
        out, self._mask = dropout(x, self.rate, train, rng=rng, mask=self.fixed_mask)
        return out

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask / (1.0 - self.rate)


class Embedding(Layer):
    """Lookup table with a reserved row 0 for out-of-vocabulary indices."""

    kind = "embedding"

    def __init__(self, rows: int, dims: int, rng: np.random.Generator):
        # init from uniform[-0.05, 0.05]
        self.table = rng.uniform(-0.05, 0.05, size=(rows, dims))
        self._idx: np.ndarray | None = None
        self.dtable: np.ndarray | None = None

    def forward(self, indices, train=False, rng=None):
        indices = np.asarray(indices)
        if indices.min(initial=0) < 0 or (indices.size and indices.max() >= self.table.shape[0]):
            raise IndexError(
                f"embedding index out of range [0, {self.table.shape[0]})"
            )
        self._idx = indices
        return self.table[indices]

    def backward(self, grad):
        self.dtable = np.zeros_like(self.table)
        np.add.at(self.dtable, self._idx, grad)
        return None

    def params(self):
        return {"table": self.table}

    def grads(self):
        return {"table": self.dtable}


def concat_forward(parts: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Column-wise concatenation; returns (matrix, per-part widths)."""
    widths = [p.shape[1] for p in parts]
    return np.concatenate(parts, axis=1), widths


def concat_backward(grad: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    """Split an upstream gradient back into per-part column blocks."""
    if grad.shape[1] != sum(widths):
        raise ValueError(f"gradient width {grad.shape[1]} != {sum(widths)}")
    return np.split(grad, np.cumsum(widths)[:-1], axis=1)


def grad_check(
    params: dict[str, np.ndarray],
    loss_fn: Callable[[], float],
    grads: dict[str, np.ndarray],
    h: float = 1e-5,
    samples_per_block: int = 0,
    rng: np.random.Generator | None = None,
    min_signal: float = 0.0,
) -> float:
    """Max relative error between analytic gradients and central differences.

    For each parameter block, perturbs sampled coordinates by +-h, re-evaluates
    ``loss_fn`` and compares (L(t+h) - L(t-h)) / 2h against the supplied
    analytic gradient. Relative error is |a - f| / max(|a|, |f|, 1e-8).
    ``samples_per_block=0`` checks every coordinate.

    Coordinates where both |analytic| and |difference| fall below
    ``min_signal`` are skipped: below that magnitude the loss difference is
    float64 cancellation noise at this step size, so the comparison carries
    no information (see :func:`fd_resolution_floor`).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for name in sorted(params):
        theta = params[name].reshape(-1)
        g = np.asarray(grads[name]).reshape(-1)
        if theta.size != g.size:
            raise ValueError(f"gradient size mismatch for {name!r}")
        if samples_per_block and theta.size > samples_per_block:
            coords = rng.choice(theta.size, size=samples_per_block, replace=False)
        else:
            coords = np.arange(theta.size)
        for c in coords:
            orig = theta[c]
            theta[c] = orig + h
            lp = loss_fn()
            theta[c] = orig - h
            lm = loss_fn()
            theta[c] = orig
            fd = (lp - lm) / (2.0 * h)
            if max(abs(g[c]), abs(fd)) < min_signal:
                continue
            rel = abs(g[c] - fd) / max(abs(g[c]), abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst


def fd_resolution_floor(loss_magnitude: float, h: float, tolerance: float) -> float:
    """Smallest gradient magnitude a central difference can certify.

    The difference L(t+h) - L(t-h) carries absolute rounding noise of order
    eps * |L|, so the quotient carries eps * |L| / (2h). A relative-error
    bound of ``tolerance`` is only meaningful for gradients several times
    larger than that noise divided by the tolerance.
    """
    eps = float(np.finfo(float).eps)
    return 8.0 * eps * max(1.0, abs(loss_magnitude)) / (2.0 * h * tolerance)


def _probe_batch(rng: np.random.Generator, n: int = 8, d: int = 5) -> np.ndarray:
    return rng.standard_normal((n, d))


def layer_gradcheck(kind: str, h: float = 1e-5, seed: int = 0) -> float:
    """Gradient check of one layer kind inside a minimal two-layer loss.

    Parameter-free layers (relu, sigmoid, dropout, concat) are sandwiched
    between dense layers so their backward pass is exercised through the
    dense parameter gradients.
    """
    rng = np.random.default_rng(seed)
    if kind == "dense":
        x = _probe_batch(rng)
        layer = Dense(5, 3, rng)
        target = rng.standard_normal((8, 3))

        def loss_fn() -> float:
            return sq_error_loss(target, dense_forward(x, layer.w, layer.b))[0]

        _, d = sq_error_loss(target, layer.forward(x))
        layer.backward(d)
        return grad_check(layer.params(), loss_fn, layer.grads(), h=h)

    if kind == "relu":
        x = _probe_batch(rng)
        stack: list[Layer] = [Dense(5, 4, rng), Relu()]
        target = rng.standard_normal((8, 4))
        return _stack_gradcheck(stack, x, target, h)

    if kind == "sigmoid":
        x = _probe_batch(rng)
        stack = [Dense(5, 1, rng), Sigmoid()]
        y = rng.integers(0, 2, size=(8, 1)).astype(float)

        def loss_fn() -> float:
            out = x
            for layer in stack:
                out = layer.forward(out)
            return bce_loss(out, y)[0]

        out = x
        for layer in stack:
            out = layer.forward(out)
        _, g = bce_loss(out, y)
        for layer in reversed(stack):
            g = layer.backward(g)
        return grad_check(stack[0].params(), loss_fn, stack[0].grads(), h=h)

    if kind == "dropout":
        x = _probe_batch(rng)
        drop = Dropout(0.4)
        drop.fixed_mask = rng.random((8, 4)) >= 0.4
        stack = [Dense(5, 4, rng), drop]
        target = rng.standard_normal((8, 4))
        return _stack_gradcheck(stack, x, target, h, train=True)

    if kind == "embedding":
        emb = Embedding(6, 3, rng)
        dense = Dense(3, 2, rng)
        idx = rng.integers(0, 6, size=8)
        idx[0] = idx[1] = 0  # repeated index exercises gradient accumulation
        target = rng.standard_normal((8, 2))

        def loss_fn() -> float:
            return sq_error_loss(target, dense.forward(emb.forward(idx)))[0]

        _, d = sq_error_loss(target, dense.forward(emb.forward(idx)))
        emb.backward(dense.backward(d))
        params = {"emb": emb.table, "W": dense.w, "b": dense.b}
        grads = {"emb": emb.dtable, "W": dense.dw, "b": dense.db}
        return grad_check(params, loss_fn, grads, h=h)

    if kind == "concat":
        x1 = _probe_batch(rng, d=3)
        x2 = _probe_batch(rng, d=4)
        d1, d2 = Dense(3, 2, rng), Dense(4, 3, rng)
        top = Dense(5, 2, rng)
        target = rng.standard_normal((8, 2))

        def loss_fn() -> float:
            cat, _ = concat_forward([d1.forward(x1), d2.forward(x2)])
            return sq_error_loss(target, top.forward(cat))[0]

        cat, widths = concat_forward([d1.forward(x1), d2.forward(x2)])
        _, d = sq_error_loss(target, top.forward(cat))
        g1, g2 = concat_backward(top.backward(d), widths)
        d1.backward(g1)
        d2.backward(g2)
        params = {"d1.W": d1.w, "d1.b": d1.b, "d2.W": d2.w, "d2.b": d2.b, "top.W": top.w, "top.b": top.b}
        grads = {"d1.W": d1.dw, "d1.b": d1.db, "d2.W": d2.dw, "d2.b": d2.db, "top.W": top.dw, "top.b": top.db}
        return grad_check(params, loss_fn, grads, h=h)

    raise ValueError(f"unknown layer kind {kind!r}")


def _stack_gradcheck(
    stack: list[Layer], x: np.ndarray, target: np.ndarray, h: float, train: bool = False
) -> float:
    def loss_fn() -> float:
        out = x
        for layer in stack:
            out = layer.forward(out, train=train)
        return sq_error_loss(target, out)[0]

    out = x
    for layer in stack:
        out = layer.forward(out, train=train)
    _, g = sq_error_loss(target, out)
    for layer in reversed(stack):
        g = layer.backward(g)
    params = {}
    grads = {}
    for i, layer in enumerate(stack):
        for pname, arr in layer.params().items():
            params[f"{i}.{pname}"] = arr
            grads[f"{i}.{pname}"] = layer.grads()[pname]
    return grad_check(params, loss_fn, grads, h=h)
