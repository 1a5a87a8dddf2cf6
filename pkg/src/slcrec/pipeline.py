"""Stage orchestration shared by the CLI subcommands.

Each stage writes its artifacts under the run's output directory with a
content-addressed file name; re-running an unchanged stage loads the file
instead of recomputing. All randomness comes from config seeds, so a cached
artifact and a recomputed one are byte-identical.
"""

from __future__ import annotations

import csv
import logging
import shutil
from pathlib import Path

import numpy as np

from . import report
from .config import RunConfig
from .data import (
    Dataset,
    RawInteraction,
    binarize_all,
    generate_sequences,
    load_interactions,
    save_interactions,
    time_split,
)
from .encoders import (
    AutoEncoderModel,
    LstmEncDecModel,
    load_encoder,
    save_encoder,
    train_autoencoder,
    train_lstm_encdec,
)
from .errors import InvalidConfigError
from .evaluation import SampledCandidatePolicy, evaluate, sequence_length_sweep
from .recommender import (
    ContextMode,
    ModelConfig,
    NeuMfModel,
    assemble_rows,
    build_model,
    context_matrix,
    load_recommender,
    predict_batch,
    rows_to_arrays,
    save_recommender,
    train,
    vocab_from_dataset,
)
from .schema import FeatureSchema, builtin_schema, load_schema, save_schema
from .synth import SynthSpec, synth_dataset
from .util import sha256_file

logger = logging.getLogger(__name__)


def resolve_schema(ref: str, base: Path | None = None) -> tuple[FeatureSchema, tuple[float, float]]:
    """A schema reference is either ``builtin:<name>`` or a file path."""
    if ref.startswith("builtin:"):
        return builtin_schema(ref)
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    return load_schema(path)


def load_dataset(cfg: RunConfig) -> Dataset:
    ds_sec = cfg.dataset
    base = cfg.path.parent if cfg.path else None
    if "synth" in ds_sec:
        spec_sec = dict(ds_sec["synth"])
        schema_ref = spec_sec.pop("schema", "builtin:small")
        schema, scale = resolve_schema(schema_ref, base)
        spec_sec.setdefault("seed", cfg.seed)
        spec = SynthSpec(schema=schema, rating_scale=scale, **spec_sec)
        return synth_dataset(spec)
    schema, scale = resolve_schema(ds_sec["schema"], base)
    csv_path = Path(ds_sec["csv"])
    if base is not None and not csv_path.is_absolute():
        csv_path = base / csv_path
    return load_interactions(csv_path, schema, rating_scale=scale)


def context_mode(cfg: RunConfig, schema: FeatureSchema) -> ContextMode:
    mode = cfg.mode
    if mode == "none":
        return ContextMode("none", 0)
    if mode == "explicit":
        length = sum(schema.dimension(name).width for name in cfg.explicit_dims)
        return ContextMode("explicit", length)
    return ContextMode(mode, cfg.latent_dim)


def ensure_encoder(cfg: RunConfig, train_ds: Dataset, out: Path) -> tuple[AutoEncoderModel | LstmEncDecModel, Path]:
    """Train (or load, when cached) the encoder the context mode needs."""
    mode = cfg.mode
    if mode not in ("latent_current", "latent_sequential"):
        raise InvalidConfigError(f"mode {mode!r} does not use a trained encoder")
    path = out / f"encoder-{cfg.encoder_key()}.model"
    if path.exists():
        logger.info("reusing cached encoder %s", path.name)
        return load_encoder(path), path
    hyper = cfg.encoder_hyper
    schema_hash = train_ds.schema.hash()
    if mode == "latent_current":
        corpus = binarize_all(train_ds)
        model = train_autoencoder(corpus, cfg.latent_dim, hyper, schema_hash=schema_hash)
    else:
        sequences = generate_sequences(train_ds, cfg.seq_len)
        model = train_lstm_encdec(
            sequences, cfg.latent_dim, hyper, schema_hash=schema_hash, slc_source=cfg.slc_source
        )
    save_encoder(model, path)
    report.write_loss_trace(path.with_suffix(".loss.csv"), model.loss_trace)
    report.loss_curve_figure(model.loss_trace, path.with_suffix(".loss.png"), title="encoder training loss")
    return model, path


def ensure_recommender(cfg: RunConfig, ds: Dataset, out: Path) -> tuple[NeuMfModel, object | None, Path]:
    """Train (or load) the recommender; returns (model, encoder-or-None, path)."""
    train_ds, _ = time_split(ds, cfg.train_fraction)
    mode = context_mode(cfg, ds.schema)
    encoder = None
    encoder_path = None
    if mode.mode in ("latent_current", "latent_sequential"):
        encoder, encoder_path = ensure_encoder(cfg, train_ds, out)
    path = out / f"recommender-{cfg.recommender_key()}.model"
    if path.exists():
        logger.info("reusing cached recommender %s", path.name)
        return load_recommender(path), encoder, path

    d_g, d_m, tower = cfg.rec_dims
    model_cfg = ModelConfig(
        d_g=d_g,
        d_m=d_m,
        tower=tower,
        mode=mode,
        seed=cfg.rec_hyper.seed,
        rating_scale=ds.rating_scale,
    )
    users, items = vocab_from_dataset(train_ds)
    model = build_model(model_cfg, users, items)
    model.schema_hash = ds.schema.hash()
    model.encoder_hash = sha256_file(encoder_path)[:16] if encoder_path else None
    rows = assemble_rows(
        train_ds,
        mode,
        encoder=encoder,
        L=cfg.seq_len if mode.mode == "latent_sequential" else None,
        explicit_dims=cfg.explicit_dims or None,
        user_index=model.mlp_user.vocab,
        item_index=model.mlp_item.vocab,
    )
    train(model, rows, cfg.rec_hyper)
    save_recommender(model, path)
    report.write_loss_trace(path.with_suffix(".loss.csv"), model.loss_trace)
    report.loss_curve_figure(model.loss_trace, path.with_suffix(".loss.png"), title="recommender training loss")
    return model, encoder, path


def run_eval(cfg: RunConfig, ds: Dataset, out: Path) -> Path:
    model, encoder, _ = ensure_recommender(cfg, ds, out)
    train_ds, test_ds = time_split(ds, cfg.train_fraction)
    rated: dict[str, set[str]] = {}
    for r in (*train_ds.interactions, *test_ds.interactions):
        rated.setdefault(r.user_id, set()).add(r.item_id)
    policy = SampledCandidatePolicy(
        item_pool=sorted(model.mlp_item.vocab),
        rated=rated,
        n_candidates=cfg.n_candidates,
        seed=cfg.eval_seed,
    )
    rep = evaluate(
        model,
        test_ds,
        encoder=encoder,
        explicit_dims=cfg.explicit_dims or None,
        ks=cfg.eval_ks,
        policy=policy,
        positive_threshold=cfg.positive_threshold,
    )
    report.write_eval_report(rep, out / "report.json", out / "report.csv")

    mode = context_mode(cfg, ds.schema)
    rows = assemble_rows(
        test_ds,
        mode,
        encoder=encoder,
        explicit_dims=cfg.explicit_dims or None,
        user_index=model.mlp_user.vocab,
        item_index=model.mlp_item.vocab,
        unknown="mark",
    )
    U, I, C, Y = rows_to_arrays(rows)
    known = (U >= 0) & (I >= 0)
    if known.any():
        preds = predict_batch(model, U[known], I[known], C[known])
        report.pred_scatter_figure(preds, Y[known], out / "pred_scatter.png")
    logger.info("eval: rmse=%.4f mae=%.4f n=%d", rep.rmse, rep.mae, rep.n_test)
    return out / "report.json"


def run_sweep(cfg: RunConfig, ds: Dataset, out: Path) -> Path:
    points = sequence_length_sweep(
        ds,
        cfg.sweep_lengths,
        seeds=cfg.sweep_seeds,
        train_fraction=cfg.train_fraction,
        latent_dim=cfg.latent_dim,
        enc_hyper=cfg.encoder_hyper,
        rec_cfg=ModelConfig(*cfg.rec_dims[:2], cfg.rec_dims[2]),
        rec_hyper=cfg.rec_hyper,
        slc_source=cfg.slc_source,
    )
    report.write_sweep_csv(out / "sweep.csv", points)
    report.sweep_figure(points, out / "sweep.png")
    return out / "sweep.csv"


def run_synth(cfg: RunConfig, out: Path) -> tuple[Path, Path]:
    ds = load_dataset(cfg)
    data_path = out / "data.csv"
    schema_path = out / "schema.json"
    save_interactions(ds, data_path)
    save_schema(schema_path, ds.schema, ds.rating_scale)
    logger.info("synth: wrote %d interactions to %s", len(ds), data_path)
    return data_path, schema_path


def run_extract(cfg: RunConfig, ds: Dataset, out: Path) -> Path:
    train_ds, _ = time_split(ds, cfg.train_fraction)
    encoder, _ = ensure_encoder(cfg, train_ds, out)
    mode = context_mode(cfg, ds.schema)
    latents = context_matrix(
        ds, mode, encoder=encoder, L=cfg.seq_len if mode.mode == "latent_sequential" else None
    )
    path = out / "latent.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "user_id", "item_id"] + [f"z{j}" for j in range(latents.shape[1])])
        for r, z in zip(ds.interactions, latents):
            writer.writerow([r.timestamp, r.user_id, r.item_id] + [repr(float(v)) for v in z])
    logger.info("extract: %d latent vectors of width %d", latents.shape[0], latents.shape[1])
    return path


def run_predict(cfg: RunConfig, ds: Dataset, in_csv: Path, out: Path) -> Path:
    """Score a rating-less CSV of (user_id, item_id, context columns).

    Rows are treated as a time-ordered log: sequential-context windows are
    built within the input file, in file order when no timestamp column is
    present. Unknown users or items fall back to the training rating mean
    (flagged in the output).
    """
    model, encoder, _ = ensure_recommender(cfg, ds, out)
    schema = ds.schema
    with in_csv.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        raws = []
        for i, rec in enumerate(reader):
            ctx: dict[str, str | float] = {}
            for d in schema.dimensions:
                cell = rec.get(d.name, "")
                if cell == "":
                    continue
                ctx[d.name] = cell if d.kind == "nominal" else float(cell)
            try:
                ts = int(rec.get("timestamp", i))
            except ValueError:
                ts = i  # no usable timestamp: keep file order
            raws.append(
                RawInteraction(
                    timestamp=ts,
                    user_id=rec["user_id"],
                    item_id=rec["item_id"],
                    rating=ds.rating_scale[0],
                    context=ctx,
                )
            )
    mode = context_mode(cfg, schema)
    scoring_ds = Dataset(schema=schema, interactions=tuple(raws), rating_scale=ds.rating_scale)
    ctx_matrix = context_matrix(
        scoring_ds,
        mode,
        encoder=encoder,
        L=cfg.seq_len if mode.mode == "latent_sequential" else None,
        explicit_dims=cfg.explicit_dims or None,
    )
    lo, hi = model.rating_scale
    fallback_value = model.train_rating_mean if model.train_rating_mean is not None else (lo + hi) / 2.0
    out_path = out / "predictions.csv"
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "item_id", "prediction", "fallback"])
        for r, ctx_vec in zip(scoring_ds.interactions, ctx_matrix):
            u = model.mlp_user.vocab.get(r.user_id, -1)
            it = model.mlp_item.vocab.get(r.item_id, -1)
            if u < 0 or it < 0:
                writer.writerow([r.user_id, r.item_id, repr(float(fallback_value)), 1])
            else:
                pred = predict_batch(model, np.array([u]), np.array([it]), ctx_vec[None])[0]
                writer.writerow([r.user_id, r.item_id, repr(float(pred)), 0])
    return out_path


def prepare_out(cfg: RunConfig, out: Path) -> None:
    """Create the run directory and copy the config next to the artifacts."""
    out.mkdir(parents=True, exist_ok=True)
    if cfg.path is not None and cfg.path.exists():
        target = out / "config.json"
        if target.resolve() != cfg.path.resolve():
            shutil.copyfile(cfg.path, target)
