"""Value-function approximators shared by the linear and deep Q controllers.

Polynomial feature construction, a linear weight matrix over those features,
and a fully-connected ReLU network with a linear output layer. Gradients are
derived by hand and checked against finite differences in the test suite;
no automatic-differentiation framework is used.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .core import TrainingDiverged


# ------------------------------------------------------------------ features
@lru_cache(maxsize=None)
def _monomial_terms(n_inputs: int, degree: int):
    """Index tuples of all monomials of total degree 0..degree (bias first)."""
    terms = []
    for d in range(degree + 1):
        terms.extend(combinations_with_replacement(range(n_inputs), d))
    return tuple(terms)


def feature_count(n_inputs: int, degree: int) -> int:
    return len(_monomial_terms(n_inputs, degree))


def features(state: np.ndarray, degree: int = 2) -> np.ndarray:
    """Polynomial expansion of a (normalized) state vector, bias term first."""
    x = np.asarray(state, dtype=float).ravel()
    terms = _monomial_terms(x.size, degree)
    out = np.empty(len(terms))
    out[0] = 1.0
    for k, term in enumerate(terms[1:], start=1):
        v = 1.0
        for j in term:
            v *= x[j]
        out[k] = v
    return out


# ------------------------------------------------------------------- linear Q
class LinearQ:
    """Action values as rows of a weight matrix dotted with the features."""

    def __init__(self, n_actions: int, n_features: int):
        self.w = np.zeros((n_actions, n_features))

    @property
    def n_actions(self) -> int:
        return self.w.shape[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.w @ x

    def value(self, x: np.ndarray, a: int) -> float:
        return float(self.w[a] @ x)


def linear_predict(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Value vector over actions for feature vector ``x``."""
    return w @ x


def linear_sgd_step(w: np.ndarray, x_s: np.ndarray, a: int, r: float,
                    x_next: np.ndarray | None, lam: float, gamma: float) -> np.ndarray:
    """One semi-gradient TD(0) update of the weight matrix, in place.

    The loss is half the squared TD error with a frozen target
    r + gamma * max_a' w x(s'); its gradient is supported on row ``a`` only.
    """
    target = r
    if x_next is not None and gamma > 0.0:
        target = r + gamma * float(np.max(w @ x_next))
    td = target - float(w[a] @ x_s)
    w[a] += lam * td * x_s
    if not np.isfinite(w[a]).all():
        raise TrainingDiverged("linear Q weights became non-finite")
    return w


# ----------------------------------------------------------------------- MLP
class Mlp:
    """Fully-connected network: ReLU hidden layers, linear output layer.

    Hidden weights start scaled-uniform by fan-in; the output layer starts at
    zero so initial action values are unbiased zeros.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = rng if rng is not None else np.random.default_rng()
        self.weights = []
        self.biases = []
        last = len(self.sizes) - 2
        for k in range(len(self.sizes) - 1):
            fan_in, fan_out = self.sizes[k], self.sizes[k + 1]
            if k == last:
                w = np.zeros((fan_out, fan_in))
            else:
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, (fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...] of the live arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def copy_from(self, other: "Mlp") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[:] = theirs

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping layer activations for ``backward``.

        Accepts a single state (1-D) or a batch (2-D); the output matches.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        acts = [h]
        for k in range(self.n_layers):
            z = h @ self.weights[k].T + self.biases[k]
            h = np.maximum(z, 0.0) if k < self.n_layers - 1 else z
            acts.append(h)
        y = acts[-1]
        return (y[0] if single else y), (acts, single)

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a loss w.r.t. all parameters given its gradient at the
        outputs. Returns [dW0, db0, dW1, db1, ...]."""
        acts, single = cache
        g = np.asarray(d_out, dtype=float)
        if single:
            g = g[None, :]
        grads = [None] * (2 * self.n_layers)
        for k in range(self.n_layers - 1, -1, -1):
            grads[2 * k] = g.T @ acts[k]
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.weights[k]) * (acts[k] > 0.0)
        return grads


def mlp_forward(net: Mlp, state: np.ndarray) -> np.ndarray:
    """Action-value vector for one state (or a batch of states)."""
    return net.forward(state)


def mlp_backward(net: Mlp, cache, d_out: np.ndarray):
    """Parameter gradients from the loss gradient at the network outputs."""
    return net.backward(cache, d_out)


# ------------------------------------------------------------------ optimizers
class RmsProp:
    """RMSProp with elementwise accumulators: v <- decay v + (1-decay) g^2,
    p <- p - lr g / (sqrt(v) + eps)."""

    def __init__(self, lr: float = 1e-4, decay: float = 0.9, eps: float = 1e-8):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self._acc = None

    def step(self, params, grads) -> None:
        if self._acc is None:
            self._acc = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self._acc):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)
            if not np.isfinite(p).all():
                raise TrainingDiverged("parameters became non-finite")


def rmsprop_step(params, grads, lr: float, decay: float = 0.9,
                 eps: float = 1e-8, acc=None):
    """Single functional RMSProp step; returns the updated accumulators."""
    if acc is None:
        acc = [np.zeros_like(p) for p in params]
    for p, g, v in zip(params, grads, acc):
        v *= decay
        v += (1.0 - decay) * g * g
        p -= lr * g / (np.sqrt(v) + eps)
    return acc


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


# ----------------------------------------------------------------- checkpoints
_CKPT_MAGIC = b"NBQV"
_CKPT_VERSION = 1


def save_arrays(path, arrays) -> None:
    """Versioned flat binary: magic, version, count, then per array the shape
    and row-major float64 data."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(arrays)))
        for a in arrays:
            shape = np.shape(a)
            a = np.ascontiguousarray(a, dtype=np.float64)
            fh.write(struct.pack("<I", len(shape)))
            fh.write(struct.pack(f"<{len(shape)}I", *shape))
            fh.write(a.tobytes())


def load_arrays(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        out = []
        for _ in range(count):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype=np.float64).copy()
            out.append(data.reshape(shape))
        return out
