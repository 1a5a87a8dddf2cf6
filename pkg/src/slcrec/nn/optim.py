"""MSE loss and Adam with a square-root learning-rate decay.

The schedule starts at `base_lr`, decays as 1/sqrt(1 + t/tau), and is
floored at `floor_lr`; tau is solved so the floor is reached exactly at the
final training step. Defaults are base 0.01 and floor 0.001.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyInputError, NonFiniteGradientError, ShapeMismatchError


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"mse operands {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise EmptyInputError("mse of empty input")
    diff = pred - target
    return float(np.mean(diff * diff))


@dataclass
class TrainConfig:
    """Shared mini-batch training hyperparameters."""

    epochs: int = 500
    batch_size: int = 512
    base_lr: float = 0.01
    floor_lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # Optional cap on total optimizer steps; when set, training stops after
    # this many steps and the lr schedule is solved on it instead of epochs.
    max_steps: int | None = None

    def total_steps(self, n_examples: int) -> int:
        batches = max(1, -(-n_examples // self.batch_size))
        steps = self.epochs * batches
        if self.max_steps is not None:
            steps = min(steps, self.max_steps)
        return steps


@dataclass
class AdamState:
    """First/second moment accumulators plus the decaying lr schedule."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    base_lr: float = 0.01
    floor_lr: float = 0.001
    decay_tau: float = field(default=np.inf)

    @classmethod
    def create(
        cls,
        params: dict[str, np.ndarray],
        total_steps: int = 0,
        base_lr: float = 0.01,
        floor_lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        m = {k: np.zeros_like(p) for k, p in params.items()}
        v = {k: np.zeros_like(p) for k, p in params.items()}
        if total_steps > 0 and base_lr > floor_lr > 0:
            tau = total_steps / ((base_lr / floor_lr) ** 2 - 1.0)
        else:
            tau = np.inf
        return cls(m=m, v=v, beta1=beta1, beta2=beta2, eps=eps, base_lr=base_lr, floor_lr=floor_lr, decay_tau=tau)

    @classmethod
    def for_config(cls, params: dict[str, np.ndarray], cfg: TrainConfig, n_examples: int) -> "AdamState":
        return cls.create(
            params,
            total_steps=cfg.total_steps(n_examples),
            base_lr=cfg.base_lr,
            floor_lr=cfg.floor_lr,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
        )


def lr_at(state: AdamState, t: int) -> float:
    if t < 0:
        raise ValueError(f"step {t} < 0")
    if not np.isfinite(state.decay_tau):
        return state.base_lr
    return max(state.base_lr / np.sqrt(1.0 + t / state.decay_tau), state.floor_lr)


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Bias-corrected Adam update, in place; aborts on non-finite gradients."""
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ShapeMismatchError(f"gradient {name!r}: {g.shape} vs {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
    lr = lr_at(state, state.t)
    t_new = state.t + 1
    bc1 = 1.0 - state.beta1**t_new
    bc2 = 1.0 - state.beta2**t_new
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    state.t = t_new
    return params
