from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy import stats

MIN_SAMPLES = 100
MIN_EXPECTED = 5.0


class InsufficientSamples(ValueError):
    pass


def _check_size(values: Sequence[float], what: str = "sample") -> np.ndarray:
    arr = np.asarray(values)
    if arr.size < MIN_SAMPLES:
        raise InsufficientSamples(f"{what} has {arr.size} values, at least {MIN_SAMPLES} needed")
    return arr


def _pooled_chisquare(counts: np.ndarray, dist) -> float:
    """Chi-square p-value of integer counts against a discrete law, pooling sparse bins."""
    low = int(dist.support()[0])
    if counts.min() < low:
        raise ValueError(f"count {int(counts.min())} outside the support starting at {low}")
    top = int(max(counts.max(), dist.ppf(1.0 - 1e-12)))
    ks = np.arange(low, top + 1)
    probs = dist.pmf(ks)
    probs[-1] += dist.sf(top)
    observed = np.bincount(counts - low, minlength=len(ks))[: len(ks)].astype(float)
    expected = probs * counts.size

    obs_bins: list[float] = []
    exp_bins: list[float] = []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= MIN_EXPECTED:
            obs_bins.append(o_acc)
            exp_bins.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_bins:
            obs_bins[-1] += o_acc
            exp_bins[-1] += e_acc
        else:
            obs_bins.append(o_acc)
            exp_bins.append(e_acc)
    if len(obs_bins) < 2:
        return 1.0
    f_obs = np.asarray(obs_bins)
    f_exp = np.asarray(exp_bins)
    f_exp *= f_obs.sum() / f_exp.sum()
    return float(stats.chisquare(f_obs, f_exp).pvalue)


def chi_square_poisson(counts: Sequence[int], mean: float) -> float:
    arr = _check_size(counts).astype(int)
    return _pooled_chisquare(arr, stats.poisson(mean))


def chi_square_geometric(counts: Sequence[int], mean: float) -> float:
    arr = _check_size(counts).astype(int)
    return _pooled_chisquare(arr, stats.geom(1.0 / mean))


def ks_geometric(counts: Sequence[int], mean: float) -> float:
    """KS p-value of counts on {1, 2, ...} against the geometric law with the given mean.

    The continuous Kolmogorov law overstates p-values for a discrete null, so this
    test rejects too rarely and only serves as a coarse screen. Gate on
    ``chi_square_geometric``, which pools tail cells and keeps its nominal level.
    """
    arr = np.sort(_check_size(counts).astype(int))
    if not mean >= 1.0:
        raise ValueError("a geometric law on {1, 2, ...} has mean at least 1")
    dist = stats.geom(1.0 / mean)
    ks = np.arange(1, int(arr.max()) + 1)
    empirical = np.searchsorted(arr, ks, side="right") / arr.size
    d = float(np.max(np.abs(empirical - dist.cdf(ks))))
    return float(stats.kstwo.sf(d, arr.size))


def two_sample_ks(xs: Sequence[float], ys: Sequence[float]) -> float:
    a = _check_size(xs, "first sample")
    b = _check_size(ys, "second sample")
    return float(stats.ks_2samp(a, b).pvalue)


def mean_within(values: Sequence[float], target: float, n_se: float = 3.0) -> bool:
    """True when the sample mean is within ``n_se`` standard errors of ``target``."""
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1)) / np.sqrt(arr.size)
    return abs(float(arr.mean()) - target) <= n_se * se
