"""Acceptance suites run by ``brt validate``.

``scale`` multiplies every replicate count, so ``scale=1`` runs the full-size
checks and small values give quick smoke runs.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull

from brt.driving import DrivingMeasure, lambda_cell_mass
from brt.estimators import ObservationScheme, estimate_free_energy
from brt.geometry import (
    Cell,
    Polytope,
    SpatialHyperplane,
    area,
    centroid,
    directional_support,
    perimeter,
    split,
)
from brt.kernels import (
    BetaTable,
    ConstantDensity,
    Kernel,
    MutationSizeBalanceAging,
    SizeBalance,
    Stit,
    UnitRate,
)
from brt.simulator import (
    BranchingTessellation,
    Tessellation,
    inner_projection,
    outer_boundary_path,
    shifted_lattice,
    simulate,
    simulate_conditional,
    single_cell,
    subwindow_count,
)
from brt.stats import chi_square_geometric, chi_square_poisson, mean_within, two_sample_ks
from brt.utils import INITIAL_STREAM, RESAMPLE_STREAM, VALIDATE_STREAM, RandomStreams

logger = logging.getLogger(__name__)

SUITES = ("geometry", "laws", "gibbs", "free_energy")
P_MIN = 0.01


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _count(n: int, scale: float, floor: int = 100) -> int:
    return max(floor, int(round(n * scale)))


def random_polygon(rng: np.random.Generator, n_points: int = 12) -> Polytope:
    pts = rng.uniform(-1.0, 1.0, size=(n_points, 2)) * rng.uniform(0.1, 3.0)
    hull = ConvexHull(pts)
    return Polytope.polygon(pts[hull.vertices]).translate(rng.uniform(-5.0, 5.0, size=2))


def _random_cut(p: Polytope, rng: np.random.Generator) -> SpatialHyperplane:
    theta = rng.uniform(0.0, math.pi)
    u = (math.cos(theta), math.sin(theta))
    lo, hi = directional_support(p, u)
    return SpatialHyperplane(u, lo + (hi - lo) * rng.uniform(0.01, 0.99))


def _geometry(scale: float, streams: RandomStreams) -> list[CheckResult]:
    rng = streams.child(VALIDATE_STREAM, 0).generator()
    n = _count(10_000, scale)
    worst_split = worst_shift = worst_cauchy = 0.0
    iso = DrivingMeasure.isotropic()
    for _ in range(n):
        p = random_polygon(rng)
        eta = _random_cut(p, rng)
        plus, minus = split(p, eta)
        worst_split = max(worst_split, abs(area(plus) + area(minus) - area(p)) / area(p))
        x = rng.uniform(-10.0, 10.0, size=2)
        moved = centroid(p.translate(x))
        expected = np.asarray(centroid(p)) + x
        worst_shift = max(worst_shift, float(np.max(np.abs(np.asarray(moved) - expected))))
        worst_cauchy = max(worst_cauchy, abs(lambda_cell_mass(iso, p) - perimeter(p) / math.pi))
    return [
        CheckResult(
            "geometry", "split conservation", worst_split <= 1e-9, f"max rel {worst_split:.3g}"
        ),
        CheckResult(
            "geometry", "centroid covariance", worst_shift <= 1e-9, f"max abs {worst_shift:.3g}"
        ),
        CheckResult(
            "geometry", "cauchy identity", worst_cauchy <= 1e-6, f"max abs {worst_cauchy:.3g}"
        ),
    ]


def _poisson_check(
    name: str, window: Polytope, kernel: Kernel, mean: float, n: int, streams: RandomStreams
) -> CheckResult:
    driving = DrivingMeasure.lebesgue()
    counts = [
        len(simulate(window, single_cell(window), kernel, driving, 1.0, streams.child(i)).events)
        for i in range(n)
    ]
    p = chi_square_poisson(counts, mean)
    ok = p > P_MIN and mean_within(counts, mean)
    return CheckResult("laws", name, ok, f"p={p:.4f} mean={np.mean(counts):.4f}")


def _laws(scale: float, streams: RandomStreams) -> list[CheckResult]:
    n = _count(10_000, scale)
    results = [
        _poisson_check(
            "1d stit poisson(10)", Polytope.interval(0.0, 10.0), Stit(), 10.0, n, streams.child(1)
        ),
        _poisson_check(
            "1d constant(2) poisson(10)",
            Polytope.interval(0.0, 5.0),
            ConstantDensity(2.0),
            10.0,
            n,
            streams.child(2),
        ),
    ]
    driving = DrivingMeasure.lebesgue()
    window = Polytope.interval(0.0, 1.0)
    s3 = streams.child(3)
    leaves = [
        simulate(window, single_cell(window), UnitRate(driving), driving, 1.0, s3.child(i))
        .leaf_count
        for i in range(n)
    ]
    p = chi_square_geometric(leaves, math.e)
    detail = f"p={p:.4f} mean={np.mean(leaves):.4f}"
    results.append(CheckResult("laws", "furry-yule geometric(e)", p > P_MIN, detail))

    m = _count(1_000, scale)
    iso = DrivingMeasure.isotropic()
    inner = Polytope.box((0.0, 0.0), (1.0, 1.0))
    outer = Polytope.box((-1.0, -1.0), (2.0, 2.0))
    s4, s5 = streams.child(4), streams.child(5)
    restricted = [
        subwindow_count(
            simulate(outer, single_cell(outer), Stit(), iso, 1.0, s4.child(i)).leaves(), inner
        )
        for i in range(m)
    ]
    direct = [
        simulate(inner, single_cell(inner), Stit(), iso, 1.0, s5.child(i)).leaf_count
        for i in range(m)
    ]
    p = two_sample_ks(restricted, direct)
    results.append(CheckResult("laws", "stit window consistency", p > P_MIN, f"p={p:.4f}"))
    return results


def _inner_stats(cells: list[Cell]) -> tuple[int, float]:
    return len(cells), sum(perimeter(c.polytope) for c in cells)


def gibbs_pairs(
    n: int,
    streams: RandomStreams,
    side: float = 8.0,
    inner_side: float = 4.0,
    resample_kernel: Optional[Kernel] = None,
) -> tuple[list[tuple[int, float]], list[tuple[int, float]]]:
    """(inner leaf count, inner edge length) of simulated BRTs and of their inner resamples.

    The resamples use ``resample_kernel`` when given, the generating mutation
    kernel otherwise.
    """
    driving = DrivingMeasure.isotropic(n_colours=2)
    kernel = MutationSizeBalanceAging(0.5, BetaTable.rising())
    resample = resample_kernel if resample_kernel is not None else kernel
    margin = (side - inner_side) / 2.0
    if margin < max(kernel.range, resample.range):
        raise ValueError(f"inner window margin {margin!r} is below the kernel range")
    window = Polytope.cube(2, side)
    w = Polytope.cube(2, inner_side)
    original: list[tuple[int, float]] = []
    resampled: list[tuple[int, float]] = []
    for i in range(n):
        rep = streams.child(i)
        history = simulate(window, single_cell(window), kernel, driving, 1.0, rep)
        original.append(_inner_stats(inner_projection(history.leaves(), w)))
        boundary = outer_boundary_path(history, w)
        again = simulate_conditional(
            w,
            boundary,
            Tessellation(w, boundary.inner_initial),
            resample,
            driving,
            history,
            rep.child(RESAMPLE_STREAM),
        )
        resampled.append(_inner_stats(list(again.leaves().cells)))
    return original, resampled


def gibbs_p_values(
    original: list[tuple[int, float]], resampled: list[tuple[int, float]]
) -> tuple[float, float]:
    p_count = two_sample_ks([a for a, _ in original], [a for a, _ in resampled])
    p_length = two_sample_ks([b for _, b in original], [b for _, b in resampled])
    return p_count, p_length


def _gibbs(scale: float, streams: RandomStreams) -> list[CheckResult]:
    p_count, p_length = gibbs_p_values(*gibbs_pairs(_count(1_000, scale), streams.child(6)))
    return [
        CheckResult("gibbs", "inner leaf count", p_count > P_MIN, f"p={p_count:.4f}"),
        CheckResult("gibbs", "inner edge length", p_length > P_MIN, f"p={p_length:.4f}"),
    ]


FREE_ENERGY_STRATA = 16
FREE_ENERGY_N_MC = 16

# (label, generating kernel, target kernel) on the line
FREE_ENERGY_SWEEP: tuple[tuple[str, Kernel, Kernel], ...] = (
    ("stit vs constant(2)", Stit(), ConstantDensity(2.0)),
    ("stit vs size_balance(0.5)", Stit(), SizeBalance(0.5)),
    ("constant(2) vs stit", ConstantDensity(2.0), Stit()),
    ("constant(2) vs size_balance(0.5)", ConstantDensity(2.0), SizeBalance(0.5)),
    ("size_balance(0.5) vs stit", SizeBalance(0.5), Stit()),
    ("size_balance(0.5) vs constant(0.5)", SizeBalance(0.5), ConstantDensity(0.5)),
)


def lattice_runs(
    window: Polytope, kernel: Kernel, driving: DrivingMeasure, n: int, streams: RandomStreams
) -> list[BranchingTessellation]:
    """``n`` replicates started from independently shifted unit lattices."""
    out = []
    for i in range(n):
        rep = streams.replicate(i)
        initial = shifted_lattice(window, rep.child(INITIAL_STREAM).generator())
        out.append(simulate(window, initial, kernel, driving, 1.0, rep))
    return out


def _free_energy(scale: float, streams: RandomStreams) -> list[CheckResult]:
    strata = _count(FREE_ENERGY_STRATA, scale, floor=4)
    n_mc = _count(FREE_ENERGY_N_MC, scale, floor=4)
    n = _count(200, scale, floor=30)

    kernel = SizeBalance(0.5)
    iso = DrivingMeasure.isotropic()
    plane = Polytope.cube(2, 8.0)
    scheme = ObservationScheme(plane, side=2.0, margin=3.0)
    sims = streams.child(7)
    runs = [
        simulate(plane, single_cell(plane), kernel, iso, 1.0, sims.child(i)) for i in range(n)
    ]
    fe = estimate_free_energy(runs, kernel, kernel, iso, scheme, streams.child(8), strata, n_mc)
    three = fe.three_term
    ok = abs(three.value) <= 3.0 * three.std_error + 1e-12
    detail = f"value={three.value:.4f} se={three.std_error:.4f}"
    results = [CheckResult("free_energy", "2d size_balance(0.5) self zero", ok, detail)]

    line = Polytope.interval(0.0, 8.0)
    lebesgue = DrivingMeasure.lebesgue()
    line_scheme = ObservationScheme(line, side=4.0, margin=2.0)
    for k, (label, phi, psi) in enumerate(FREE_ENERGY_SWEEP):
        runs = lattice_runs(line, phi, lebesgue, n, streams.child(9, k))
        fe = estimate_free_energy(
            runs, phi, psi, lebesgue, line_scheme, streams.child(10, k), strata, n_mc
        )
        three = fe.three_term
        ok = three.value >= -3.0 * three.std_error - 1e-12 and fe.direct.value >= 0.0
        detail = f"value={three.value:.4f} se={three.std_error:.4f} direct={fe.direct.value:.4f}"
        results.append(CheckResult("free_energy", f"non-negative {label}", ok, detail))
    return results


_RUNNERS: dict[str, Callable[[float, RandomStreams], list[CheckResult]]] = {
    "geometry": _geometry,
    "laws": _laws,
    "gibbs": _gibbs,
    "free_energy": _free_energy,
}


def run_suite(name: str, scale: float = 1.0, seed: int = 0) -> list[CheckResult]:
    names = SUITES if name == "all" else (name,)
    results: list[CheckResult] = []
    for suite in names:
        if suite not in _RUNNERS:
            raise ValueError(f"unknown suite {suite!r}")
        logger.info("running suite %s at scale %s", suite, scale)
        results.extend(_RUNNERS[suite](scale, RandomStreams(seed)))
    return results
