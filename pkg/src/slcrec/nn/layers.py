"""Dense layers, embedding tables, and an LSTM cell with hand-derived backprop.

All math is float64. Forward methods accept a single vector or a batch
(leading batch axis); backward methods take the same cache the forward
produced plus the upstream gradient and return input and parameter
gradients. Initialization is a pure function of (seed, parameter name,
shape): each parameter draws from its own generator derived from the seed
and the name, so two builds with the same seed are bit-identical and
unrelated parameters never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatchError, UnknownIdError
from ..util import mix_entropy

ACTIVATIONS = ("sigmoid", "relu", "tanh", "identity")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(name: str, x: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return sigmoid(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, y: np.ndarray) -> np.ndarray:
    """Derivative of the activation expressed through its output y."""
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "relu":
        return (y > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - y * y
    if name == "identity":
        return np.ones_like(y)
    raise ValueError(f"unknown activation {name!r}")


def param_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for one named parameter, independent of all other names."""
    return np.random.default_rng(np.random.SeedSequence(mix_entropy(seed, "param", name)))


@dataclass
class DenseLayer:
    """Affine map plus pointwise activation: y = act(W x + b)."""

    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeMismatchError(f"dense layer shapes W{self.W.shape} b{self.b.shape}")

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cache(x)
        return y

    def forward_cache(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeMismatchError(f"dense input width {x.shape[-1]} != {self.in_dim}")
        y = _activate(self.activation, x @ self.W.T + self.b)
        return y, (x, y)

    def backward(self, cache, dy: np.ndarray):
        """Returns (dx, dW, db) for upstream gradient dy on the output."""
        x, y = cache
        da = dy * _activation_grad(self.activation, y)
        if x.ndim == 1:
            return da @ self.W, np.outer(da, x), da
        return da @ self.W, da.T @ x, da.sum(axis=0)


def init_dense(seed: int, name: str, in_dim: int, out_dim: int, activation: str = "identity") -> DenseLayer:
    rng = param_rng(seed, name)
    bound = 1.0 / np.sqrt(in_dim)
    W = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim)
    return DenseLayer(W=W, b=b, activation=activation)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


@dataclass
class EmbeddingTable:
    """Row-per-id lookup table; unknown ids are rejected, never zero-filled."""

    rows: np.ndarray  # (vocab, dim)
    vocab: dict[str, int] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def index_of(self, id_: str) -> int:
        try:
            return self.vocab[id_]
        except KeyError:
            raise UnknownIdError(id_) from None

    def lookup(self, id_: str) -> np.ndarray:
        return self.rows[self.index_of(id_)]


def init_embedding(seed: int, name: str, ids: list[str], dim: int) -> EmbeddingTable:
    rng = param_rng(seed, name)
    rows = rng.normal(0.0, 0.01, size=(len(ids), dim))
    return EmbeddingTable(rows=rows, vocab={id_: i for i, id_ in enumerate(ids)})


@dataclass
class LstmCell:
    """Gated recurrent cell; every gate maps the concat [x, h_prev] to H units."""

    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.W_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_i.shape[1] - self.hidden_size

    def step(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
        h, c, _ = self.step_cache(x, h_prev, c_prev)
        return h, c

    def step_cache(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        h_size = self.hidden_size
        if x.shape[-1] != self.input_size:
            raise ShapeMismatchError(f"lstm input width {x.shape[-1]} != {self.input_size}")
        if h_prev.shape[-1] != h_size or c_prev.shape[-1] != h_size:
            raise ShapeMismatchError(f"lstm state width != {h_size}")
        z = np.concatenate([x, h_prev], axis=-1)
        i = sigmoid(z @ self.W_i.T + self.b_i)
        f = sigmoid(z @ self.W_f.T + self.b_f)
        o = sigmoid(z @ self.W_o.T + self.b_o)
        g = np.tanh(z @ self.W_g.T + self.b_g)
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        return h, c, (z, i, f, o, g, c_prev, tc)

    def backward_step(self, cache, dh: np.ndarray, dc: np.ndarray, grads: dict[str, np.ndarray], prefix: str):
        """Backprop one step; accumulates gate gradients into `grads`.

        Returns (dx, dh_prev, dc_prev). `dc` is the gradient flowing into
        this step's cell state from the future; pass zeros at the last step.
        """
        z, i, f, o, g, c_prev, tc = cache
        d_in = self.input_size
        do = dh * tc
        dc_total = dc + dh * o * (1.0 - tc * tc)
        df = dc_total * c_prev
        dc_prev = dc_total * f
        di = dc_total * g
        dg = dc_total * i
        da = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "g": dg * (1.0 - g * g),
        }
        dz = np.zeros_like(z)
        for gate, d_act in da.items():
            W = getattr(self, f"W_{gate}")
            if z.ndim == 1:
                grads[f"{prefix}.W_{gate}"] += np.outer(d_act, z)
                grads[f"{prefix}.b_{gate}"] += d_act
            else:
                grads[f"{prefix}.W_{gate}"] += d_act.T @ z
                grads[f"{prefix}.b_{gate}"] += d_act.sum(axis=0)
            dz += d_act @ W
        if z.ndim == 1:
            return dz[:d_in], dz[d_in:], dc_prev
        return dz[:, :d_in], dz[:, d_in:], dc_prev

    def param_dict(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.W_i": self.W_i,
            f"{prefix}.W_f": self.W_f,
            f"{prefix}.W_o": self.W_o,
            f"{prefix}.W_g": self.W_g,
            f"{prefix}.b_i": self.b_i,
            f"{prefix}.b_f": self.b_f,
            f"{prefix}.b_o": self.b_o,
            f"{prefix}.b_g": self.b_g,
        }


def init_lstm(seed: int, name: str, input_size: int, hidden_size: int) -> LstmCell:
    bound = 1.0 / np.sqrt(input_size + hidden_size)
    mats = {}
    for gate in ("i", "f", "o", "g"):
        rng_w = param_rng(seed, f"{name}.W_{gate}")
        rng_b = param_rng(seed, f"{name}.b_{gate}")
        mats[f"W_{gate}"] = rng_w.uniform(-bound, bound, size=(hidden_size, input_size + hidden_size))
        mats[f"b_{gate}"] = rng_b.uniform(-bound, bound, size=hidden_size)
    return LstmCell(**mats)


def lstm_step(cell: LstmCell, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    return cell.step(x, h_prev, c_prev)
