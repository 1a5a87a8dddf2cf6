"""Declarative run configuration for the command-line pipeline.

One JSON file drives a whole run. Sections:

  seed        master seed; fills any per-stage seed left unset
  out         output directory (flag --out / env SLCREC_OUT override)
  dataset     either {"csv": path, "schema": path} or {"synth": {...}}
  split       {"train_fraction": 0.7}
  context     mode, window length L, latent_dim, slc_source, explicit_dims
  encoder     training hyperparameters for the context encoder
  recommender d_g, d_m, tower, plus training hyperparameters
  eval        ks, n_candidates, positive_threshold, seed
  sweep       lengths, seeds

Stage outputs are content-addressed: the file name embeds a digest of
the config sections the stage depends on, so an unchanged stage is reused
instead of recomputed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidConfigError
from .nn import TrainConfig
from .util import digest, sha256_file

VALID_MODES = ("none", "explicit", "latent_current", "latent_sequential")


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    path: Path | None = None

    # --- sections -----------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def out_dir(self) -> Path:
        return Path(self.raw.get("out", "runs/out"))

    @property
    def dataset(self) -> dict:
        return self.raw["dataset"]

    @property
    def train_fraction(self) -> float:
        return float(self.raw.get("split", {}).get("train_fraction", 0.7))

    @property
    def mode(self) -> str:
        return self.raw.get("context", {}).get("mode", "none")

    @property
    def seq_len(self) -> int:
        return int(self.raw.get("context", {}).get("L", 3))

    @property
    def latent_dim(self) -> int:
        return int(self.raw.get("context", {}).get("latent_dim", 8))

    @property
    def slc_source(self) -> str:
        return self.raw.get("context", {}).get("slc_source", "encoder_hidden")

    @property
    def explicit_dims(self) -> list[str]:
        return list(self.raw.get("context", {}).get("explicit_dims", []))

    def _train_config(self, section: str, default_epochs: int) -> TrainConfig:
        sec = dict(self.raw.get(section, {}))
        for key in ("d_g", "d_m", "tower"):
            sec.pop(key, None)
        sec.setdefault("epochs", default_epochs)
        sec.setdefault("seed", self.seed)
        try:
            return TrainConfig(**sec)
        except TypeError as exc:
            raise InvalidConfigError(f"bad {section} section: {exc}") from exc

    @property
    def encoder_hyper(self) -> TrainConfig:
        return self._train_config("encoder", default_epochs=500)

    @property
    def rec_hyper(self) -> TrainConfig:
        return self._train_config("recommender", default_epochs=100)

    @property
    def rec_dims(self) -> tuple[int, int, tuple[int, ...]]:
        sec = self.raw.get("recommender", {})
        return int(sec.get("d_g", 8)), int(sec.get("d_m", 16)), tuple(sec.get("tower", (64, 32, 16, 8)))

    @property
    def eval_ks(self) -> tuple[int, ...]:
        return tuple(self.raw.get("eval", {}).get("ks", (1, 3, 5)))

    @property
    def n_candidates(self) -> int:
        return int(self.raw.get("eval", {}).get("n_candidates", 99))

    @property
    def positive_threshold(self) -> float:
        return float(self.raw.get("eval", {}).get("positive_threshold", 3.0))

    @property
    def eval_seed(self) -> int:
        return int(self.raw.get("eval", {}).get("seed", self.seed))

    @property
    def sweep_lengths(self) -> list[int]:
        return [int(x) for x in self.raw.get("sweep", {}).get("lengths", [2, 3, 4, 5, 6])]

    @property
    def sweep_seeds(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.raw.get("sweep", {}).get("seeds", [self.seed]))

    # --- content addressing --------------------------------------------

    def _dataset_key(self) -> dict:
        section = dict(self.dataset)
        if "csv" in section:
            csv_path = Path(section["csv"])
            if csv_path.exists():
                section["csv_digest"] = sha256_file(csv_path)
        return section

    def encoder_key(self) -> str:
        return digest(
            {
                "dataset": self._dataset_key(),
                "split": self.train_fraction,
                "context": self.raw.get("context", {}),
                "encoder": self.raw.get("encoder", {}),
                "seed": self.seed,
            }
        )

    def recommender_key(self) -> str:
        key = {
            "encoder": self.encoder_key() if self.mode in ("latent_current", "latent_sequential") else None,
            "dataset": self._dataset_key(),
            "split": self.train_fraction,
            "context": self.raw.get("context", {}),
            "recommender": self.raw.get("recommender", {}),
            "seed": self.seed,
        }
        return digest(key)

    # --- validation -----------------------------------------------------

    def validate(self) -> "RunConfig":
        if "dataset" not in self.raw:
            raise InvalidConfigError("config must declare a dataset section")
        ds = self.raw["dataset"]
        if ("csv" in ds) == ("synth" in ds):
            raise InvalidConfigError("dataset section must have exactly one of 'csv' or 'synth'")
        if "csv" in ds and "schema" not in ds:
            raise InvalidConfigError("csv datasets need a 'schema' path")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfigError(f"train_fraction {self.train_fraction} not in (0, 1)")
        if self.mode not in VALID_MODES:
            raise InvalidConfigError(f"unknown context mode {self.mode!r}")
        if self.mode == "latent_sequential" and self.seq_len < 1:
            raise InvalidConfigError("latent_sequential needs L >= 1")
        if self.mode in ("latent_current", "latent_sequential") and self.latent_dim < 1:
            raise InvalidConfigError("latent modes need latent_dim >= 1")
        if self.mode == "explicit" and not self.explicit_dims:
            raise InvalidConfigError("explicit mode needs explicit_dims")
        _ = self.encoder_hyper  # raises on malformed hyper sections
        _ = self.rec_hyper
        return self


def load_config(path: str | Path, seed_override: int | None = None, out_override: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidConfigError("config root must be a JSON object")
    if seed_override is not None:
        raw["seed"] = seed_override
    if out_override is not None:
        raw["out"] = out_override
    return RunConfig(raw=raw, path=path).validate()
