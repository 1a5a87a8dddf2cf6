"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import NonDeterministicClosureError


def grad_check(
    fn,
    params: dict[str, np.ndarray],
    eps: float = 1e-4,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and numeric gradients.

    `fn(params) -> (loss, grads)` must be deterministic and must not mutate
    its argument. All coordinates are checked unless `max_coords` caps the
    count, in which case a uniform sample (without replacement) is used.
    The relative error of one coordinate is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    loss_a, grads = fn(params)
    loss_b, _ = fn(params)
    if loss_a != loss_b:
        raise NonDeterministicClosureError(f"closure returned {loss_a!r} then {loss_b!r} at the same point")

    coords = [(name, i) for name, p in sorted(params.items()) for i in range(p.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        picked = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    worst = 0.0
    for name, i in coords:
        p = params[name]
        orig = p.flat[i]
        p.flat[i] = orig + eps
        loss_plus, _ = fn(params)
        p.flat[i] = orig - eps
        loss_minus, _ = fn(params)
        p.flat[i] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        analytic = grads[name].flat[i]
        rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, rel)
    return worst
