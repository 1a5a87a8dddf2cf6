"""Accuracy metrics, top-k ranking evaluation, and the window-length sweep.

Hit@k follows the sampled-candidate protocol: each positively rated test
interaction is ranked against its own candidate set (the positive item plus
uniformly sampled items the user never rated), scored under the
interaction's context. Ranking ties break by item id so results are
reproducible. Test rows whose user or item never appeared in training fall
back to the model's training-mean rating for the error metrics and are
skipped for ranking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, time_split
from .encoders import train_lstm_encdec
from .errors import EmptyInputError, PositiveNotInCandidatesError, ShapeMismatchError
from .nn import TrainConfig, mse_loss
from .data import generate_sequences
from .recommender import (
    ContextMode,
    ModelConfig,
    NeuMfModel,
    assemble_rows,
    build_model,
    predict_batch,
    rows_to_arrays,
    train,
    vocab_from_dataset,
)
from .util import mix_entropy

logger = logging.getLogger(__name__)


def rmse(preds, targets) -> float:
    return math.sqrt(mse_loss(preds, targets))


def mae(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeMismatchError(f"mae operands {preds.shape} vs {targets.shape}")
    if preds.size == 0:
        raise EmptyInputError("mae of empty input")
    return float(np.mean(np.abs(preds - targets)))


@dataclass(frozen=True)
class CandidateSet:
    """The positive item plus the items it competes against."""

    positive_item: str
    candidates: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidate items must be unique")
        if self.positive_item not in self.candidates:
            raise PositiveNotInCandidatesError(f"positive {self.positive_item!r} not among candidates")


class CandidatePolicy:
    """Strategy for building a candidate set per test interaction.

    Subclass hook for alternative policies (e.g. geo-filtered neighbor
    sets); the shipped implementation samples unrated items uniformly.
    """

    def candidates_for(self, row_index: int, user_id: str, positive_item: str) -> CandidateSet | None:
        raise NotImplementedError


class SampledCandidatePolicy(CandidatePolicy):
    """Positive plus n uniformly sampled items the user has not rated.

    Each row draws from its own generator keyed on (seed, row index), so
    results do not depend on evaluation order.
    """

    def __init__(self, item_pool: list[str], rated: dict[str, set[str]], n_candidates: int = 99, seed: int = 0):
        self.item_pool = sorted(item_pool)
        self.rated = rated
        self.n_candidates = n_candidates
        self.seed = seed

    def candidates_for(self, row_index: int, user_id: str, positive_item: str) -> CandidateSet | None:
        exclude = self.rated.get(user_id, set()) | {positive_item}
        available = [it for it in self.item_pool if it not in exclude]
        rng = np.random.default_rng(np.random.SeedSequence(mix_entropy(self.seed, "cand", row_index)))
        k = min(self.n_candidates, len(available))
        if k == 0:
            return None
        picked = rng.choice(len(available), size=k, replace=False)
        return CandidateSet(positive_item, (positive_item, *(available[i] for i in sorted(picked))))


def hit_at_k(model: NeuMfModel, user_id: str, ctx: np.ndarray, candidates: CandidateSet, k: int) -> int:
    """1 if the positive item ranks in the top k of the scored candidates."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    uidx = model.user_index(user_id)
    items = list(candidates.candidates)
    iidx = np.array([model.item_index(it) for it in items], dtype=np.int64)
    U = np.full(len(items), uidx, dtype=np.int64)
    C = np.repeat(np.asarray(ctx, dtype=np.float64)[None], len(items), axis=0)
    scores = predict_batch(model, U, iidx, C)
    by_score = {it: s for it, s in zip(items, scores)}
    ranked = sorted(items, key=lambda it: (-by_score[it], it))
    return 1 if candidates.positive_item in ranked[:k] else 0


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    hits: dict[int, float] = field(default_factory=dict)
    n_test: int = 0
    n_hit_cases: int = 0
    n_fallback: int = 0

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "n_test": self.n_test,
            "n_hit_cases": self.n_hit_cases,
            "n_fallback": self.n_fallback,
        }

    def csv_header(self) -> list[str]:
        return ["rmse", "mae", "n_test", "n_hit_cases", "n_fallback"] + [f"hit@{k}" for k in sorted(self.hits)]

    def csv_row(self) -> list[str]:
        vals = [repr(self.rmse), repr(self.mae), str(self.n_test), str(self.n_hit_cases), str(self.n_fallback)]
        vals += [repr(self.hits[k]) for k in sorted(self.hits)]
        return vals


def evaluate(
    model: NeuMfModel,
    test: Dataset,
    encoder=None,
    explicit_dims: list[str] | None = None,
    ks: tuple[int, ...] = (),
    policy: CandidatePolicy | None = None,
    positive_threshold: float = 3.0,
) -> EvalReport:
    """Error metrics over all test rows plus hit@k over positive rows.

    Rows with out-of-vocabulary users or items contribute the fallback
    prediction (training rating mean, else the scale midpoint) to the
    error metrics and are excluded from ranking.
    """
    if len(test) == 0:
        raise EmptyInputError("empty test set")
    user_index = model.mlp_user.vocab
    item_index = model.mlp_item.vocab
    rows = assemble_rows(
        test,
        model.mode,
        encoder=encoder,
        explicit_dims=explicit_dims,
        user_index=user_index,
        item_index=item_index,
        unknown="mark",
    )
    U, I, C, Y = rows_to_arrays(rows)
    known = (U >= 0) & (I >= 0)
    lo, hi = model.rating_scale
    fallback = model.train_rating_mean if model.train_rating_mean is not None else (lo + hi) / 2.0
    preds = np.full(len(rows), fallback, dtype=np.float64)
    if known.any():
        preds[known] = predict_batch(model, U[known], I[known], C[known])

    hits: dict[int, float] = {}
    n_cases = 0
    if ks and policy is not None:
        totals = {k: 0 for k in ks}
        for i, (r, row) in enumerate(zip(test.interactions, rows)):
            if row.rating < positive_threshold or not known[i]:
                continue
            cand = policy.candidates_for(i, r.user_id, r.item_id)
            if cand is None:
                continue
            n_cases += 1
            for k in ks:
                totals[k] += hit_at_k(model, r.user_id, row.ctx, cand, k)
        hits = {k: (totals[k] / n_cases if n_cases else 0.0) for k in ks}

    return EvalReport(
        rmse=rmse(preds, Y),
        mae=mae(preds, Y),
        hits=hits,
        n_test=len(rows),
        n_hit_cases=n_cases,
        n_fallback=int((~known).sum()),
    )


@dataclass(frozen=True)
class SweepPoint:
    L: int
    rmse: float
    mae: float
    seed: int


def run_pipeline_once(
    ds: Dataset,
    L: int,
    seed: int,
    train_fraction: float = 0.7,
    latent_dim: int = 8,
    enc_hyper: TrainConfig | None = None,
    rec_cfg: ModelConfig | None = None,
    rec_hyper: TrainConfig | None = None,
    slc_source: str = "encoder_hidden",
) -> tuple[float, float]:
    """Split, train the sequence encoder and recommender, return (rmse, mae)."""
    train_ds, test_ds = time_split(ds, train_fraction)
    enc_hyper = enc_hyper or TrainConfig(epochs=40)
    rec_hyper = rec_hyper or TrainConfig(epochs=40)
    enc_seed, rec_seed = (int(w % 2**63) for w in mix_entropy((seed, L, "enc"), (seed, L, "rec")))

    sequences = generate_sequences(train_ds, L)
    enc_cfg = TrainConfig(**{**enc_hyper.__dict__, "seed": enc_seed})
    encoder = train_lstm_encdec(sequences, latent_dim, enc_cfg, schema_hash=ds.schema.hash(), slc_source=slc_source)

    mode = ContextMode("latent_sequential", latent_dim)
    base = rec_cfg or ModelConfig()
    cfg = ModelConfig(
        d_g=base.d_g,
        d_m=base.d_m,
        tower=base.tower,
        mode=mode,
        seed=rec_seed,
        rating_scale=ds.rating_scale,
    )
    users, items = vocab_from_dataset(train_ds)
    model = build_model(cfg, users, items)
    rows = assemble_rows(
        train_ds, mode, encoder=encoder, user_index=model.mlp_user.vocab, item_index=model.mlp_item.vocab
    )
    train(model, rows, TrainConfig(**{**rec_hyper.__dict__, "seed": rec_seed}))
    report = evaluate(model, test_ds, encoder=encoder)
    return report.rmse, report.mae


def sequence_length_sweep(
    ds: Dataset,
    lengths: list[int],
    seeds: tuple[int, ...] = (0,),
    train_fraction: float = 0.7,
    latent_dim: int = 8,
    enc_hyper: TrainConfig | None = None,
    rec_cfg: ModelConfig | None = None,
    rec_hyper: TrainConfig | None = None,
    slc_source: str = "encoder_hidden",
) -> list[SweepPoint]:
    """Retrain the sequential pipeline at each window length; one row per (L, seed)."""
    points = []
    for seed in seeds:
        for L in lengths:
            r, m = run_pipeline_once(
                ds,
                L,
                seed,
                train_fraction=train_fraction,
                latent_dim=latent_dim,
                enc_hyper=enc_hyper,
                rec_cfg=rec_cfg,
                rec_hyper=rec_hyper,
                slc_source=slc_source,
            )
            logger.info("sweep L=%d seed=%d rmse=%.4f mae=%.4f", L, seed, r, m)
            points.append(SweepPoint(L=L, rmse=r, mae=m, seed=seed))
    return points
