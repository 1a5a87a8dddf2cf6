import numpy as np
import pytest

from slcrec.schema import Dimension, FeatureSchema


@pytest.fixture(scope="session")
def small_schema() -> FeatureSchema:
    """3 nominal dims (3/4/2 categories) + 3 numeric dims, width 12."""
    return FeatureSchema(
        (
            Dimension("time_of_day", "nominal", ("morning", "afternoon", "evening")),
            Dimension("weather", "nominal", ("sunny", "cloudy", "rain", "snow")),
            Dimension("day_type", "nominal", ("weekday", "weekend")),
            Dimension("light", "numeric"),
            Dimension("battery", "numeric"),
            Dimension("noise", "numeric"),
        )
    )


@pytest.fixture(scope="session")
def nominal_schema() -> FeatureSchema:
    """3 nominal dims of 3/4/2 categories, width 9."""
    return FeatureSchema(
        (
            Dimension("a", "nominal", ("a0", "a1", "a2")),
            Dimension("b", "nominal", ("b0", "b1", "b2", "b3")),
            Dimension("c", "nominal", ("c0", "c1")),
        )
    )


def rank5_corpus(n: int, width: int = 20, seed: int = 0) -> np.ndarray:
    """Binary corpus of rank <= 5: every column copies one of 5 latent bits."""
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, size=(n, 5)).astype(np.float64)
    mapping = np.concatenate([np.arange(5), rng.integers(0, 5, size=width - 5)])
    return z[:, mapping]
