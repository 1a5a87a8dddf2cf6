"""Unsupervised latent-context extraction.

Two encoder-decoder families are trained to reconstruct their own input:

* an autoencoder over single context vectors, whose compressed layer yields
  the latent *current* context of one interaction, and
* an LSTM encoder-decoder over windows of consecutive context vectors,
  whose encoder state yields the latent *sequential* context of a window.

The LSTM decoder is fed the compressed latent vector at every step
(repeat-latent feeding) and starts from the encoder's final state mapped
through an explicit bottleneck: a tanh layer compressing the concatenated
(h, c) to the latent width, and a linear layer expanding it back to the
decoder's initial (h, c). Reconstruction targets keep the input order.
Trained models are frozen; encoding never mutates them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ContextSequence, ContextVector
from .errors import (
    DivergedTrainingError,
    EmptyCorpusError,
    RaggedSequencesError,
    ShapeMismatchError,
)
from .nn import AdamState, DenseLayer, LstmCell, TrainConfig, adam_step, init_dense, init_lstm, load_params, mse_loss, save_params

logger = logging.getLogger(__name__)

SLC_SOURCES = ("encoder_hidden", "bottleneck")


@dataclass(frozen=True)
class LatentContext:
    """Compressed numeric context; kind is 'current' or 'sequential'."""

    values: np.ndarray
    kind: str


@dataclass
class AutoEncoderModel:
    encoder: DenseLayer
    decoder: DenseLayer
    latent_dim: int
    schema_hash: str | None = None
    final_loss: float | None = None
    loss_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def input_width(self) -> int:
        return self.encoder.in_dim

    def params(self) -> dict[str, np.ndarray]:
        return {
            "encoder.W": self.encoder.W,
            "encoder.b": self.encoder.b,
            "decoder.W": self.decoder.W,
            "decoder.b": self.decoder.b,
        }


@dataclass
class LstmEncDecModel:
    encoder_cell: LstmCell
    decoder_cell: LstmCell
    compress: DenseLayer  # (2H -> H), tanh
    expand: DenseLayer  # (H -> 2H), identity
    output_head: DenseLayer  # (H -> width), sigmoid
    seq_len: int
    latent_dim: int
    slc_source: str = "encoder_hidden"
    schema_hash: str | None = None
    final_loss: float | None = None
    loss_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def input_width(self) -> int:
        return self.encoder_cell.input_size

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.encoder_cell.param_dict("enc"))
        out.update(self.decoder_cell.param_dict("dec"))
        out.update({"compress.W": self.compress.W, "compress.b": self.compress.b})
        out.update({"expand.W": self.expand.W, "expand.b": self.expand.b})
        out.update({"head.W": self.output_head.W, "head.b": self.output_head.b})
        return out


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    return np.stack([v.values if isinstance(v, ContextVector) else np.asarray(v, dtype=np.float64) for v in vectors])


def _batches(n: int, cfg: TrainConfig):
    """Yield (epoch, index-array) pairs from a seed-fixed shuffle stream."""
    rng = np.random.default_rng(cfg.seed)
    steps_left = cfg.total_steps(n)
    for epoch in range(cfg.epochs):
        if steps_left <= 0:
            return
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            if steps_left <= 0:
                return
            yield epoch, order[start : start + cfg.batch_size]
            steps_left -= 1


def train_autoencoder(
    vectors,
    latent_dim: int,
    hyper: TrainConfig | None = None,
    schema_hash: str | None = None,
) -> AutoEncoderModel:
    """Fit the reconstruction autoencoder with mini-batch Adam."""
    hyper = hyper or TrainConfig()
    X = _as_matrix(vectors)
    if X.size == 0 or X.shape[0] == 0:
        raise EmptyCorpusError("autoencoder corpus is empty")
    if latent_dim < 1:
        raise ValueError(f"latent_dim must be >= 1, got {latent_dim}")
    n, width = X.shape

    model = AutoEncoderModel(
        encoder=init_dense(hyper.seed, "ae.encoder", width, latent_dim, "sigmoid"),
        decoder=init_dense(hyper.seed, "ae.decoder", latent_dim, width, "sigmoid"),
        latent_dim=latent_dim,
        schema_hash=schema_hash,
    )
    params = model.params()
    state = AdamState.for_config(params, hyper, n)

    trace: list[float] = []
    epoch_losses: list[float] = []
    last_epoch = -1
    for epoch, idx in _batches(n, hyper):
        if epoch != last_epoch and last_epoch >= 0:
            trace.append(float(np.mean(epoch_losses)))
            epoch_losses = []
        last_epoch = epoch
        xb = X[idx]
        z, enc_cache = model.encoder.forward_cache(xb)
        recon, dec_cache = model.decoder.forward_cache(z)
        loss = mse_loss(recon, xb)
        if not np.isfinite(loss):
            raise DivergedTrainingError(f"autoencoder loss became {loss} at epoch {epoch}")
        epoch_losses.append(loss)
        d_recon = 2.0 * (recon - xb) / recon.size
        dz, dW_dec, db_dec = model.decoder.backward(dec_cache, d_recon)
        _, dW_enc, db_enc = model.encoder.backward(enc_cache, dz)
        adam_step(state, params, {"encoder.W": dW_enc, "encoder.b": db_enc, "decoder.W": dW_dec, "decoder.b": db_dec})
    if epoch_losses:
        trace.append(float(np.mean(epoch_losses)))
    if len(trace) >= 1:
        logger.debug("autoencoder trained: %d epochs, final loss %.6f", len(trace), trace[-1])
    model.loss_trace = tuple(trace)
    model.final_loss = trace[-1] if trace else None
    return model


def encode_current(model: AutoEncoderModel, v) -> LatentContext:
    """Encoder half only; the latent current context of one vector."""
    x = v.values if isinstance(v, ContextVector) else np.asarray(v, dtype=np.float64)
    if x.shape[-1] != model.input_width:
        raise ShapeMismatchError(f"vector width {x.shape[-1]} != model width {model.input_width}")
    return LatentContext(values=model.encoder.forward(x), kind="current")


def encode_current_batch(model: AutoEncoderModel, X: np.ndarray) -> np.ndarray:
    if X.shape[-1] != model.input_width:
        raise ShapeMismatchError(f"matrix width {X.shape[-1]} != model width {model.input_width}")
    return model.encoder.forward(X)


def reconstruct_current(model: AutoEncoderModel, v) -> np.ndarray:
    x = v.values if isinstance(v, ContextVector) else np.asarray(v, dtype=np.float64)
    return model.decoder.forward(model.encoder.forward(x))


def _sequence_tensor(sequences) -> np.ndarray:
    if isinstance(sequences, np.ndarray):
        if sequences.ndim != 3:
            raise ShapeMismatchError(f"sequence tensor must be 3-d, got {sequences.shape}")
        return np.asarray(sequences, dtype=np.float64)
    if len(sequences) == 0:
        raise EmptyCorpusError("sequence corpus is empty")
    lengths = {len(s) for s in sequences}
    if len(lengths) != 1:
        raise RaggedSequencesError(f"mixed sequence lengths {sorted(lengths)}")
    mats = [s.as_matrix() if isinstance(s, ContextSequence) else np.asarray(s, dtype=np.float64) for s in sequences]
    return np.stack(mats)


def _encdec_forward(model: LstmEncDecModel, S: np.ndarray, with_cache: bool = False):
    """Full forward pass; returns (outputs, latent, h_last, caches-or-None)."""
    B, L, D = S.shape
    H = model.latent_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    enc_caches = []
    for t in range(L):
        h, c, cache = model.encoder_cell.step_cache(S[:, t], h, c)
        enc_caches.append(cache)
    h_last = h
    latent, compress_cache = model.compress.forward_cache(np.concatenate([h, c], axis=-1))
    h0c0, expand_cache = model.expand.forward_cache(latent)
    hd, cd = h0c0[:, :H], h0c0[:, H:]
    dec_caches, head_caches = [], []
    outputs = np.empty_like(S)
    for t in range(L):
        hd, cd, cache = model.decoder_cell.step_cache(latent, hd, cd)
        dec_caches.append(cache)
        y, head_cache = model.output_head.forward_cache(hd)
        head_caches.append(head_cache)
        outputs[:, t] = y
    if not with_cache:
        return outputs, latent, h_last, None
    return outputs, latent, h_last, (enc_caches, compress_cache, expand_cache, dec_caches, head_caches)


def _zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(p) for k, p in params.items()}


def _encdec_backward(model: LstmEncDecModel, S: np.ndarray, outputs: np.ndarray, caches) -> dict[str, np.ndarray]:
    """BPTT for the reconstruction loss mean((outputs - S)^2)."""
    enc_caches, compress_cache, expand_cache, dec_caches, head_caches = caches
    B, L, D = S.shape
    H = model.latent_dim
    grads = _zero_grads(model.params())
    d_out = 2.0 * (outputs - S) / outputs.size

    d_latent = np.zeros((B, H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(L - 1, -1, -1):
        dh_head, dW_head, db_head = model.output_head.backward(head_caches[t], d_out[:, t])
        grads["head.W"] += dW_head
        grads["head.b"] += db_head
        dx, dh, dc = model.decoder_cell.backward_step(dec_caches[t], dh + dh_head, dc, grads, "dec")
        d_latent += dx
    d_h0c0 = np.concatenate([dh, dc], axis=-1)
    d_latent_2, dW_exp, db_exp = model.expand.backward(expand_cache, d_h0c0)
    grads["expand.W"] += dW_exp
    grads["expand.b"] += db_exp
    d_latent += d_latent_2
    d_hc, dW_cmp, db_cmp = model.compress.backward(compress_cache, d_latent)
    grads["compress.W"] += dW_cmp
    grads["compress.b"] += db_cmp
    dh = d_hc[:, :H].copy()
    dc = d_hc[:, H:].copy()
    for t in range(L - 1, -1, -1):
        _, dh, dc = model.encoder_cell.backward_step(enc_caches[t], dh, dc, grads, "enc")
    return grads


def train_lstm_encdec(
    sequences,
    latent_dim: int,
    hyper: TrainConfig | None = None,
    schema_hash: str | None = None,
    slc_source: str = "encoder_hidden",
) -> LstmEncDecModel:
    """Fit the sequence encoder-decoder on same-length context windows."""
    hyper = hyper or TrainConfig()
    if slc_source not in SLC_SOURCES:
        raise ValueError(f"slc_source must be one of {SLC_SOURCES}")
    S = _sequence_tensor(sequences)
    n, L, width = S.shape
    if n == 0:
        raise EmptyCorpusError("sequence corpus is empty")

    seed = hyper.seed
    model = LstmEncDecModel(
        encoder_cell=init_lstm(seed, "seq.enc", width, latent_dim),
        decoder_cell=init_lstm(seed, "seq.dec", latent_dim, latent_dim),
        compress=init_dense(seed, "seq.compress", 2 * latent_dim, latent_dim, "tanh"),
        expand=init_dense(seed, "seq.expand", latent_dim, 2 * latent_dim, "identity"),
        output_head=init_dense(seed, "seq.head", latent_dim, width, "sigmoid"),
        seq_len=L,
        latent_dim=latent_dim,
        slc_source=slc_source,
        schema_hash=schema_hash,
    )
    params = model.params()
    state = AdamState.for_config(params, hyper, n)

    trace: list[float] = []
    epoch_losses: list[float] = []
    last_epoch = -1
    for epoch, idx in _batches(n, hyper):
        if epoch != last_epoch and last_epoch >= 0:
            trace.append(float(np.mean(epoch_losses)))
            epoch_losses = []
        last_epoch = epoch
        sb = S[idx]
        outputs, _, _, caches = _encdec_forward(model, sb, with_cache=True)
        loss = mse_loss(outputs, sb)
        if not np.isfinite(loss):
            raise DivergedTrainingError(f"encoder-decoder loss became {loss} at epoch {epoch}")
        epoch_losses.append(loss)
        grads = _encdec_backward(model, sb, outputs, caches)
        adam_step(state, params, grads)
    if epoch_losses:
        trace.append(float(np.mean(epoch_losses)))
    if trace:
        logger.debug("lstm enc-dec trained: %d epochs, final loss %.6f", len(trace), trace[-1])
    model.loss_trace = tuple(trace)
    model.final_loss = trace[-1] if trace else None
    return model


def encode_sequence(model: LstmEncDecModel, s) -> LatentContext:
    """The latent sequential context of one window; decoder is not run."""
    mat = s.as_matrix() if isinstance(s, ContextSequence) else np.asarray(s, dtype=np.float64)
    if mat.shape != (model.seq_len, model.input_width):
        raise ShapeMismatchError(f"sequence shape {mat.shape} != ({model.seq_len}, {model.input_width})")
    return LatentContext(values=encode_sequence_batch(model, mat[None])[0], kind="sequential")


def encode_sequence_batch(model: LstmEncDecModel, S: np.ndarray) -> np.ndarray:
    """Latent sequential context for a (batch, L, width) window tensor."""
    if S.ndim != 3 or S.shape[1] != model.seq_len or S.shape[2] != model.input_width:
        raise ShapeMismatchError(f"window tensor {S.shape} != (*, {model.seq_len}, {model.input_width})")
    B, L, _ = S.shape
    H = model.latent_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(L):
        h, c = model.encoder_cell.step(S[:, t], h, c)
    if model.slc_source == "encoder_hidden":
        return h
    return model.compress.forward(np.concatenate([h, c], axis=-1))


def encode_sequence_backward(model: LstmEncDecModel, S: np.ndarray, d_latent: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the encode path w.r.t. encoder parameters.

    Only used for end-to-end gradient verification; recommender training
    treats encoders as frozen.
    """
    B, L, _ = S.shape
    H = model.latent_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    enc_caches = []
    for t in range(L):
        h, c, cache = model.encoder_cell.step_cache(S[:, t], h, c)
        enc_caches.append(cache)
    grads = _zero_grads(model.encoder_cell.param_dict("enc"))
    if model.slc_source == "encoder_hidden":
        dh, dc = d_latent.copy(), np.zeros((B, H))
    else:
        grads.update(_zero_grads({"compress.W": model.compress.W, "compress.b": model.compress.b}))
        _, cmp_cache = model.compress.forward_cache(np.concatenate([h, c], axis=-1))
        d_hc, dW_cmp, db_cmp = model.compress.backward(cmp_cache, d_latent)
        grads["compress.W"] += dW_cmp
        grads["compress.b"] += db_cmp
        dh, dc = d_hc[:, :H].copy(), d_hc[:, H:].copy()
    for t in range(L - 1, -1, -1):
        _, dh, dc = model.encoder_cell.backward_step(enc_caches[t], dh, dc, grads, "enc")
    return grads


def reconstruct(model: LstmEncDecModel, s) -> list[np.ndarray]:
    """Decoder outputs for one window: L vectors of context width."""
    mat = s.as_matrix() if isinstance(s, ContextSequence) else np.asarray(s, dtype=np.float64)
    if mat.shape != (model.seq_len, model.input_width):
        raise ShapeMismatchError(f"sequence shape {mat.shape} != ({model.seq_len}, {model.input_width})")
    outputs, _, _, _ = _encdec_forward(model, mat[None])
    return [outputs[0, t] for t in range(model.seq_len)]


# --- serialization ----------------------------------------------------------


def save_encoder(model: AutoEncoderModel | LstmEncDecModel, path: str | Path) -> None:
    if isinstance(model, AutoEncoderModel):
        header = {
            "kind": "autoencoder",
            "width": model.input_width,
            "latent_dim": model.latent_dim,
            "schema_hash": model.schema_hash,
            "final_loss": model.final_loss,
        }
    else:
        header = {
            "kind": "lstm_encdec",
            "width": model.input_width,
            "latent_dim": model.latent_dim,
            "seq_len": model.seq_len,
            "slc_source": model.slc_source,
            "schema_hash": model.schema_hash,
            "final_loss": model.final_loss,
        }
    save_params(path, header, model.params())


def load_encoder(path: str | Path) -> AutoEncoderModel | LstmEncDecModel:
    header, params = load_params(path)
    kind = header.get("kind")
    if kind == "autoencoder":
        return AutoEncoderModel(
            encoder=DenseLayer(params["encoder.W"], params["encoder.b"], "sigmoid"),
            decoder=DenseLayer(params["decoder.W"], params["decoder.b"], "sigmoid"),
            latent_dim=header["latent_dim"],
            schema_hash=header.get("schema_hash"),
            final_loss=header.get("final_loss"),
        )
    if kind == "lstm_encdec":
        def cell(prefix: str) -> LstmCell:
            return LstmCell(**{k: params[f"{prefix}.{k}"] for k in ("W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g")})

        return LstmEncDecModel(
            encoder_cell=cell("enc"),
            decoder_cell=cell("dec"),
            compress=DenseLayer(params["compress.W"], params["compress.b"], "tanh"),
            expand=DenseLayer(params["expand.W"], params["expand.b"], "identity"),
            output_head=DenseLayer(params["head.W"], params["head.b"], "sigmoid"),
            seq_len=header["seq_len"],
            latent_dim=header["latent_dim"],
            slc_source=header.get("slc_source", "encoder_hidden"),
            schema_hash=header.get("schema_hash"),
            final_loss=header.get("final_loss"),
        )
    raise ValueError(f"{path}: unknown encoder kind {kind!r}")
