import pytest

from brt.kernels import ConstantDensity
from brt.utils import RandomStreams
from brt.validate import P_MIN, SUITES, gibbs_p_values, gibbs_pairs, run_suite

LOW_SCALE = 0.01


@pytest.mark.parametrize("suite", ["laws", "gibbs"])
def test_suite_passes_at_low_scale(suite: str) -> None:
    results = run_suite(suite, scale=LOW_SCALE, seed=3)
    assert results
    assert {r.suite for r in results} == {suite}
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed


def test_free_energy_suite_passes_at_low_scale() -> None:
    results = run_suite("free_energy", scale=LOW_SCALE, seed=4)
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed
    names = [r.name for r in results]
    assert names[0] == "2d size_balance(0.5) self zero"
    assert len(names) == 7
    assert all(name.startswith("non-negative ") for name in names[1:])


def test_gibbs_rejects_a_mismatched_resampling_kernel() -> None:
    original, resampled = gibbs_pairs(100, RandomStreams(5), resample_kernel=ConstantDensity(3.0))
    p_count, _ = gibbs_p_values(original, resampled)
    assert p_count < P_MIN


def test_gibbs_pairs_needs_a_margin() -> None:
    with pytest.raises(ValueError):
        gibbs_pairs(1, RandomStreams(0), side=4.0, inner_side=4.0)


def test_unknown_suite() -> None:
    assert "free_energy" in SUITES
    with pytest.raises(ValueError):
        run_suite("nope")
