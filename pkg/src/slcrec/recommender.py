"""Neural matrix-factorization recommender with optional context input.

The model has two paths over user/item embeddings: an elementwise-product
path (GMF) and an MLP tower whose input is the concatenation of the MLP
user embedding, MLP item embedding, and — in any context mode other than
``none`` — the per-interaction context vector. A linear fusion head
combines both paths into a raw score that a scaled sigmoid maps into the
rating range, so predictions always land inside the scale.

Context modes:
  none               pure user/item model, takes no context at all
  explicit           selected binarized raw dimensions
  latent_current     autoencoder latent of the interaction's own vector
  latent_sequential  sequence-encoder latent of the trailing window of
                     consecutive vectors ending at the interaction

For the sequential mode, the interaction at time position i takes the
window of the L vectors ending at i; the first L-1 interactions have no
full history and repeat their own vector L times instead. Context vectors
are computed once during row assembly; encoders stay frozen while the
recommender trains.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, binarize_all
from .encoders import AutoEncoderModel, LstmEncDecModel, encode_current_batch, encode_sequence_batch
from .errors import (
    DivergedTrainingError,
    EncoderSchemaMismatchError,
    InvalidConfigError,
    ShapeMismatchError,
    UnknownIdError,
    UnknownItemError,
    UnknownUserError,
)
from .nn import AdamState, DenseLayer, EmbeddingTable, TrainConfig, adam_step, init_dense, init_embedding, load_params, mse_loss, save_params
from .nn.layers import sigmoid

logger = logging.getLogger(__name__)

MODES = ("none", "explicit", "latent_current", "latent_sequential")


@dataclass(frozen=True)
class ContextMode:
    """Which context representation feeds the MLP tower, and its width."""

    mode: str
    length: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidConfigError(f"unknown context mode {self.mode!r}")
        if self.mode == "none" and self.length != 0:
            raise InvalidConfigError("mode 'none' must have context length 0")
        if self.mode != "none" and self.length <= 0:
            raise InvalidConfigError(f"mode {self.mode!r} needs a positive context length")


@dataclass(frozen=True)
class ModelConfig:
    d_g: int = 8
    d_m: int = 16
    tower: tuple[int, ...] = (64, 32, 16, 8)
    mode: ContextMode = ContextMode("none", 0)
    seed: int = 0
    rating_scale: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        if self.d_g <= 0 or self.d_m <= 0 or not self.tower or any(w <= 0 for w in self.tower):
            raise InvalidConfigError("embedding dims and tower widths must be positive")
        if not self.rating_scale[0] < self.rating_scale[1]:
            raise InvalidConfigError(f"rating scale {self.rating_scale} not increasing")


@dataclass(frozen=True)
class TrainRow:
    """One materialized training example (indices into the model vocab)."""

    user_idx: int
    item_idx: int
    ctx: np.ndarray
    rating: float


@dataclass
class NeuMfModel:
    gmf_user: EmbeddingTable
    gmf_item: EmbeddingTable
    mlp_user: EmbeddingTable
    mlp_item: EmbeddingTable
    tower: list[DenseLayer]
    fusion: DenseLayer
    mode: ContextMode
    rating_scale: tuple[float, float]
    schema_hash: str | None = None
    encoder_hash: str | None = None
    train_rating_mean: float | None = None
    loss_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def n_users(self) -> int:
        return self.gmf_user.rows.shape[0]

    @property
    def n_items(self) -> int:
        return self.gmf_item.rows.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {
            "gmf_user.rows": self.gmf_user.rows,
            "gmf_item.rows": self.gmf_item.rows,
            "mlp_user.rows": self.mlp_user.rows,
            "mlp_item.rows": self.mlp_item.rows,
            "fusion.W": self.fusion.W,
            "fusion.b": self.fusion.b,
        }
        for i, layer in enumerate(self.tower):
            out[f"tower.{i}.W"] = layer.W
            out[f"tower.{i}.b"] = layer.b
        return out

    def user_index(self, user_id: str) -> int:
        try:
            return self.mlp_user.index_of(user_id)
        except UnknownIdError:
            raise UnknownUserError(user_id) from None

    def item_index(self, item_id: str) -> int:
        try:
            return self.mlp_item.index_of(item_id)
        except UnknownIdError:
            raise UnknownItemError(item_id) from None


def vocab_from_dataset(ds: Dataset) -> tuple[list[str], list[str]]:
    """Sorted unique user and item ids, the canonical embedding order."""
    users = sorted({r.user_id for r in ds.interactions})
    items = sorted({r.item_id for r in ds.interactions})
    return users, items


def build_model(cfg: ModelConfig, user_ids: list[str], item_ids: list[str]) -> NeuMfModel:
    """Deterministically initialized model; same cfg and ids, same bits."""
    if not user_ids or not item_ids:
        raise InvalidConfigError("model needs at least one user and one item")
    seed = cfg.seed
    tower_in = 2 * cfg.d_m + cfg.mode.length
    tower = []
    widths = [tower_in, *cfg.tower]
    for i, (w_in, w_out) in enumerate(zip(widths, widths[1:])):
        tower.append(init_dense(seed, f"tower.{i}", w_in, w_out, "relu"))
    fusion = init_dense(seed, "fusion", cfg.d_g + cfg.tower[-1], 1, "identity")
    return NeuMfModel(
        gmf_user=init_embedding(seed, "gmf_user", user_ids, cfg.d_g),
        gmf_item=init_embedding(seed, "gmf_item", item_ids, cfg.d_g),
        mlp_user=init_embedding(seed, "mlp_user", user_ids, cfg.d_m),
        mlp_item=init_embedding(seed, "mlp_item", item_ids, cfg.d_m),
        tower=tower,
        fusion=fusion,
        mode=cfg.mode,
        rating_scale=cfg.rating_scale,
    )


# --- forward / backward -----------------------------------------------------


def _forward_batch(model: NeuMfModel, uidx: np.ndarray, iidx: np.ndarray, ctx: np.ndarray, with_cache: bool = False):
    u_g = model.gmf_user.rows[uidx]
    i_g = model.gmf_item.rows[iidx]
    gmf = u_g * i_g
    u_m = model.mlp_user.rows[uidx]
    i_m = model.mlp_item.rows[iidx]
    x = np.concatenate([u_m, i_m, ctx], axis=-1)
    tower_caches = []
    for layer in model.tower:
        x, cache = layer.forward_cache(x)
        tower_caches.append(cache)
    fused = np.concatenate([gmf, x], axis=-1)
    raw, fusion_cache = model.fusion.forward_cache(fused)
    raw = raw[:, 0]
    lo, hi = model.rating_scale
    s = sigmoid(raw)
    pred = lo + (hi - lo) * s
    if not with_cache:
        return pred, None
    return pred, (uidx, iidx, u_g, i_g, s, tower_caches, fusion_cache)


def _backward_batch(model: NeuMfModel, cache, d_pred: np.ndarray, return_ctx_grad: bool = False):
    uidx, iidx, u_g, i_g, s, tower_caches, fusion_cache = cache
    lo, hi = model.rating_scale
    d_raw = (d_pred * (hi - lo) * s * (1.0 - s))[:, None]
    d_fused, dW_fusion, db_fusion = model.fusion.backward(fusion_cache, d_raw)
    d_g = model.gmf_user.rows.shape[1]
    d_gmf = d_fused[:, :d_g]
    dx = d_fused[:, d_g:]
    grads = {"fusion.W": dW_fusion, "fusion.b": db_fusion}
    for i in range(len(model.tower) - 1, -1, -1):
        dx, dW, db = model.tower[i].backward(tower_caches[i], dx)
        grads[f"tower.{i}.W"] = dW
        grads[f"tower.{i}.b"] = db
    d_m = model.mlp_user.rows.shape[1]
    du_m = dx[:, :d_m]
    di_m = dx[:, d_m : 2 * d_m]
    du_g = d_gmf * i_g
    di_g = d_gmf * u_g
    for name, rows, idx, d in (
        ("gmf_user.rows", model.gmf_user.rows, uidx, du_g),
        ("gmf_item.rows", model.gmf_item.rows, iidx, di_g),
        ("mlp_user.rows", model.mlp_user.rows, uidx, du_m),
        ("mlp_item.rows", model.mlp_item.rows, iidx, di_m),
    ):
        acc = np.zeros_like(rows)
        np.add.at(acc, idx, d)
        grads[name] = acc
    if return_ctx_grad:
        return grads, dx[:, 2 * d_m :]
    return grads


def _check_ctx(model: NeuMfModel, ctx: np.ndarray | None) -> np.ndarray:
    length = model.mode.length
    if ctx is None:
        ctx = np.zeros(0)
    ctx = np.asarray(ctx, dtype=np.float64)
    if ctx.shape[-1] != length:
        if model.mode.mode == "none":
            raise ShapeMismatchError(f"model takes no context, got a length-{ctx.shape[-1]} vector")
        raise ShapeMismatchError(f"context length {ctx.shape[-1]} != {length}")
    return ctx


def predict(model: NeuMfModel, user_id: str, item_id: str, ctx: np.ndarray | None = None) -> float:
    """Predicted rating for one (user, item, context) triple."""
    uidx = model.user_index(user_id)
    iidx = model.item_index(item_id)
    ctx = _check_ctx(model, ctx)
    pred, _ = _forward_batch(model, np.array([uidx]), np.array([iidx]), ctx[None])
    return float(pred[0])


def predict_batch(model: NeuMfModel, uidx: np.ndarray, iidx: np.ndarray, ctx: np.ndarray) -> np.ndarray:
    """Vectorized prediction over index arrays (callers resolve ids first)."""
    if ctx.ndim != 2 or ctx.shape[1] != model.mode.length:
        raise ShapeMismatchError(f"context matrix {ctx.shape} != (*, {model.mode.length})")
    pred, _ = _forward_batch(model, uidx, iidx, ctx)
    return pred


# --- row assembly -------------------------------------------------------------


def context_matrix(
    ds: Dataset,
    mode: ContextMode,
    encoder: AutoEncoderModel | LstmEncDecModel | None = None,
    L: int | None = None,
    explicit_dims: list[str] | None = None,
) -> np.ndarray:
    """Per-interaction context vectors for a dataset, as an (n, length) matrix."""
    n = len(ds)
    if mode.mode == "none":
        return np.zeros((n, 0))
    if mode.mode == "explicit":
        if not explicit_dims:
            raise InvalidConfigError("explicit mode needs a non-empty dimension selection")
        X = np.stack([v.values for v in binarize_all(ds)]) if n else np.zeros((0, ds.schema.width))
        spans = [ds.schema.column_span(name) for name in explicit_dims]
        cols = [c for start, stop in spans for c in range(start, stop)]
        return X[:, cols]
    if encoder is None:
        raise InvalidConfigError(f"mode {mode.mode!r} needs a trained encoder")
    if encoder.schema_hash is not None and encoder.schema_hash != ds.schema.hash():
        raise EncoderSchemaMismatchError(
            f"encoder was trained on schema {encoder.schema_hash}, data has {ds.schema.hash()}"
        )
    X = np.stack([v.values for v in binarize_all(ds)]) if n else np.zeros((0, ds.schema.width))
    if mode.mode == "latent_current":
        if not isinstance(encoder, AutoEncoderModel):
            raise InvalidConfigError("latent_current needs an autoencoder")
        return encode_current_batch(encoder, X)
    if not isinstance(encoder, LstmEncDecModel):
        raise InvalidConfigError("latent_sequential needs a sequence encoder")
    L = L or encoder.seq_len
    if L != encoder.seq_len:
        raise InvalidConfigError(f"window length {L} != encoder length {encoder.seq_len}")
    windows = np.empty((n, L, ds.schema.width))
    for i in range(n):
        if i >= L - 1:
            windows[i] = X[i - L + 1 : i + 1]
        else:
            windows[i] = np.repeat(X[i][None], L, axis=0)  # no full history yet
    if n == 0:
        return np.zeros((0, mode.length))
    return encode_sequence_batch(encoder, windows)


def assemble_rows(
    ds: Dataset,
    mode: ContextMode,
    encoder: AutoEncoderModel | LstmEncDecModel | None = None,
    L: int | None = None,
    explicit_dims: list[str] | None = None,
    user_index: dict[str, int] | None = None,
    item_index: dict[str, int] | None = None,
    unknown: str = "error",
) -> list[TrainRow]:
    """Materialize one TrainRow per interaction.

    `unknown` controls ids missing from the vocab: "error" raises, "mark"
    emits index -1 so evaluation can apply a fallback.
    """
    if unknown not in ("error", "mark"):
        raise ValueError(f"unknown policy {unknown!r}")
    if user_index is None or item_index is None:
        users, items = vocab_from_dataset(ds)
        user_index = user_index or {u: i for i, u in enumerate(users)}
        item_index = item_index or {it: i for i, it in enumerate(items)}
    ctx_matrix = context_matrix(ds, mode, encoder, L, explicit_dims)
    if ctx_matrix.shape[1] != mode.length:
        raise InvalidConfigError(f"assembled context width {ctx_matrix.shape[1]} != declared {mode.length}")
    rows = []
    for i, r in enumerate(ds.interactions):
        u = user_index.get(r.user_id, -1)
        it = item_index.get(r.item_id, -1)
        if (u < 0 or it < 0) and unknown == "error":
            missing = r.user_id if u < 0 else r.item_id
            raise UnknownIdError(missing)
        rows.append(TrainRow(user_idx=u, item_idx=it, ctx=ctx_matrix[i], rating=r.rating))
    return rows


def rows_to_arrays(rows: list[TrainRow]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    U = np.array([r.user_idx for r in rows], dtype=np.int64)
    I = np.array([r.item_idx for r in rows], dtype=np.int64)
    C = np.stack([r.ctx for r in rows]) if rows else np.zeros((0, 0))
    Y = np.array([r.rating for r in rows], dtype=np.float64)
    return U, I, C, Y


# --- training -----------------------------------------------------------------


def train(model: NeuMfModel, rows: list[TrainRow], hyper: TrainConfig | None = None) -> NeuMfModel:
    """Mini-batch MSE regression on rated rows; deterministic per seed."""
    hyper = hyper or TrainConfig(epochs=100)
    if not rows:
        raise ValueError("no training rows")
    U, I, C, Y = rows_to_arrays(rows)
    if C.shape[1] != model.mode.length:
        raise ShapeMismatchError(f"rows carry context width {C.shape[1]}, model expects {model.mode.length}")
    if (U < 0).any() or (I < 0).any():
        raise UnknownIdError("training rows contain out-of-vocab indices")
    n = len(rows)
    model.train_rating_mean = float(Y.mean())
    params = model.params()
    state = AdamState.for_config(params, hyper, n)

    rng = np.random.default_rng(hyper.seed)
    steps_left = hyper.total_steps(n)
    trace: list[float] = []
    for epoch in range(hyper.epochs):
        if steps_left <= 0:
            break
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, hyper.batch_size):
            if steps_left <= 0:
                break
            idx = order[start : start + hyper.batch_size]
            pred, cache = _forward_batch(model, U[idx], I[idx], C[idx], with_cache=True)
            loss = mse_loss(pred, Y[idx])
            if not np.isfinite(loss):
                raise DivergedTrainingError(f"training loss became {loss} at epoch {epoch}")
            epoch_losses.append(loss)
            d_pred = 2.0 * (pred - Y[idx]) / pred.size
            grads = _backward_batch(model, cache, d_pred)
            adam_step(state, params, grads)
            steps_left -= 1
        if epoch_losses:
            trace.append(float(np.mean(epoch_losses)))
    model.loss_trace = tuple(trace)
    if trace:
        logger.debug("recommender trained: %d epochs, final loss %.6f", len(trace), trace[-1])
    return model


# --- serialization ------------------------------------------------------------


def save_recommender(model: NeuMfModel, path: str | Path) -> None:
    users = sorted(model.mlp_user.vocab, key=model.mlp_user.vocab.get)
    items = sorted(model.mlp_item.vocab, key=model.mlp_item.vocab.get)
    header = {
        "kind": "neumf",
        "mode": model.mode.mode,
        "ctx_len": model.mode.length,
        "rating_scale": list(model.rating_scale),
        "tower": [layer.out_dim for layer in model.tower],
        "schema_hash": model.schema_hash,
        "encoder_hash": model.encoder_hash,
        "train_rating_mean": model.train_rating_mean,
        "users": users,
        "items": items,
    }
    save_params(path, header, model.params())


def load_recommender(path: str | Path) -> NeuMfModel:
    header, params = load_params(path)
    if header.get("kind") != "neumf":
        raise ValueError(f"{path}: not a recommender bundle")
    users = {u: i for i, u in enumerate(header["users"])}
    items = {it: i for i, it in enumerate(header["items"])}
    n_tower = len(header["tower"])
    tower = [DenseLayer(params[f"tower.{i}.W"], params[f"tower.{i}.b"], "relu") for i in range(n_tower)]
    return NeuMfModel(
        gmf_user=EmbeddingTable(params["gmf_user.rows"], users),
        gmf_item=EmbeddingTable(params["gmf_item.rows"], items),
        mlp_user=EmbeddingTable(params["mlp_user.rows"], users),
        mlp_item=EmbeddingTable(params["mlp_item.rows"], items),
        tower=tower,
        fusion=DenseLayer(params["fusion.W"], params["fusion.b"], "identity"),
        mode=ContextMode(header["mode"], header["ctx_len"]),
        rating_scale=tuple(header["rating_scale"]),
        schema_hash=header.get("schema_hash"),
        encoder_hash=header.get("encoder_hash"),
        train_rating_mean=header.get("train_rating_mean"),
    )
