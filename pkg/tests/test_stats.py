import math

import numpy as np
import pytest

from brt.stats import (
    InsufficientSamples,
    chi_square_geometric,
    chi_square_poisson,
    ks_geometric,
    mean_within,
    two_sample_ks,
)
from brt.utils import Accumulator, RandomStreams, accumulate


@pytest.fixture()
def rng() -> np.random.Generator:
    return RandomStreams(2024).generator()


def test_poisson_null_and_power(rng: np.random.Generator) -> None:
    counts = rng.poisson(10.0, size=10_000)
    assert chi_square_poisson(counts, 10.0) > 0.01
    assert chi_square_poisson(counts, 20.0) < 0.01


def test_geometric_null(rng: np.random.Generator) -> None:
    counts = rng.geometric(1.0 / math.e, size=5_000)
    assert chi_square_geometric(counts, math.e) > 0.01
    assert ks_geometric(counts, math.e) > 0.01
    assert ks_geometric(counts, 5.0) < 0.01


def test_two_sample_ks(rng: np.random.Generator) -> None:
    a = rng.normal(size=2_000)
    b = rng.normal(size=2_000)
    assert two_sample_ks(a, b) > 0.01
    assert two_sample_ks(a, b + 1.0) < 0.01


def test_small_samples_are_rejected() -> None:
    with pytest.raises(InsufficientSamples):
        chi_square_poisson([10] * 50, 10.0)
    with pytest.raises(InsufficientSamples):
        two_sample_ks([0.0] * 200, [0.0] * 99)


def test_mean_within() -> None:
    values = [9.0, 11.0] * 100
    assert mean_within(values, 10.0)
    assert not mean_within(values, 11.0)


def test_accumulators_merge_associatively() -> None:
    left = accumulate([1.0, 2.0, 3.0])
    right = accumulate([4.0, 5.0])
    merged = left.merge(right)
    assert merged == accumulate([1.0, 2.0, 3.0, 4.0, 5.0])
    assert merged.mean == pytest.approx(3.0)
    assert merged.std_error == pytest.approx(math.sqrt(2.5 / 5))
    assert Accumulator().mean == 0.0
    assert Accumulator().add(1.0).std_error == 0.0
