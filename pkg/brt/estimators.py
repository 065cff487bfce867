"""Monte Carlo estimators of the thermodynamic functionals of a branching tessellation.

All densities are per unit observation volume and per unit time. Expectations
over "a typical cell at a typical time" are realised by stratified time samples
per replicate and the cells of ``T_s`` whose centroid lies in the central
observation window; error bars come from replicate means only.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Optional

import numpy as np

from brt.driving import DrivingMeasure, ZeroMass, lambda_cell_mass, sample_hyperplane
from brt.geometry import (
    BicolouredHyperplane,
    Cell,
    Polytope,
    area,
    centroid,
    contains_point,
    inset_distance,
    intersect,
)
from brt.kernels import Kernel, Stit, state_of
from brt.simulator import BranchingTessellation, Tessellation
from brt.utils import ESTIMATE_STREAM, Accumulator, RandomStreams, accumulate, map_replicates

logger = logging.getLogger(__name__)

_STIT = Stit()

DEFAULT_STRATA = 32
DEFAULT_N_MC = 64
SINGULAR_RATIO = 1e-12

# stream tags below ESTIMATE_STREAM
_ENTROPY = 0
_PRESSURE = 1
_FREE = 2


class NegativeInput(ValueError):
    pass


class Diverged(ValueError):
    pass


class InsufficientMargin(ValueError):
    pass


def rho(a: float) -> float:
    """``1 - a + a log a`` with ``rho(0) = 1``."""
    if a < 0:
        raise NegativeInput(f"rho is defined on [0, inf), got {a!r}")
    if a == 0.0:
        return 1.0
    return 1.0 - a + a * math.log(a)


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n: int
    breakdown: Optional[dict[str, float]] = None
    notes: str = ""

    @classmethod
    def from_accumulator(
        cls,
        acc: Accumulator,
        breakdown: Optional[dict[str, float]] = None,
        notes: str = "",
    ) -> Estimate:
        return cls(acc.mean, acc.std_error, acc.count, breakdown, notes)


@dataclass(frozen=True)
class FreeEnergy:
    three_term: Estimate
    direct: Estimate
    entropy: Estimate
    energy: Estimate
    pressure: Estimate

    @property
    def gap(self) -> float:
        """Difference of the two forms in units of their combined standard error."""
        se = math.hypot(self.three_term.std_error, self.direct.std_error)
        diff = abs(self.three_term.value - self.direct.value)
        if se == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / se


@dataclass(frozen=True)
class ObservationScheme:
    """Central observation cube inside the simulation window, kept ``margin`` away from its rim."""

    simulation: Polytope
    side: float
    margin: float = 0.0

    def __post_init__(self) -> None:
        if not self.side > 0 or self.margin < 0:
            raise InsufficientMargin("observation side must be positive and margin non-negative")
        slack = inset_distance(self.observation, self.simulation)
        if slack < self.margin - 1e-12:
            raise InsufficientMargin(
                f"observation window is {slack!r} from the simulation rim, margin {self.margin!r}"
            )

    @cached_property
    def observation(self) -> Polytope:
        dim = self.simulation.dimension
        return Polytope.cube(dim, self.side, centroid(self.simulation))

    @property
    def volume(self) -> float:
        return self.side**self.simulation.dimension

    def observes(self, c: Cell) -> bool:
        return contains_point(self.observation, centroid(c.polytope))

    @property
    def notes(self) -> str:
        return (
            f"simulation volume {area(self.simulation)!r}; "
            f"observation side {self.side!r}; margin {self.margin!r}"
        )


@dataclass(frozen=True)
class PalmSample:
    time: float
    state: Tessellation
    cell: Cell


def palm_samples(
    history: BranchingTessellation,
    scheme: ObservationScheme,
    strata: int,
    rng: np.random.Generator,
) -> list[PalmSample]:
    """One uniform time per stratum of ``[0, t_end]`` and the observed cells alive then."""
    out: list[PalmSample] = []
    if history.t_end <= 0:
        return out
    for k in range(strata):
        s = history.t_end * (k + rng.random()) / strata
        state = history.state_at(s)
        out.extend(PalmSample(s, state, c) for c in state.cells if scheme.observes(c))
    return out


def _relative_term(phi: float, psi: float) -> float:
    """``psi * rho(phi / psi)``, written without the division."""
    if psi == 0.0:
        return 0.0 if phi == 0.0 else math.inf
    if phi == 0.0:
        return psi
    return psi - phi + phi * math.log(phi / psi)


def _draws(
    driving: DrivingMeasure, c: Cell, n_mc: int, rng: np.random.Generator
) -> list[BicolouredHyperplane]:
    return [sample_hyperplane(driving, c, rng) for _ in range(n_mc)]


def _entropy_values(
    phi: Kernel, psi: Kernel, sample: PalmSample, hs: Sequence[BicolouredHyperplane]
) -> np.ndarray:
    values = np.empty(len(hs))
    for i, h in enumerate(hs):
        a = phi.density(sample.time, sample.state, sample.cell, h)
        b = psi.density(sample.time, sample.state, sample.cell, h)
        if a > 0 and b <= SINGULAR_RATIO * a:
            raise Diverged(
                f"reference density {b!r} vanishes where the generating density is {a!r}; "
                "the relative entropy is infinite"
            )
        values[i] = _relative_term(a, b)
    return values


def cell_rel_entropy(
    phi: Kernel,
    psi: Kernel,
    c: Cell,
    s: float,
    history,
    driving: DrivingMeasure,
    n_mc: int,
    rng: np.random.Generator,
) -> Estimate:
    """``∫_<c> ψ_Ψ ρ(ψ_Φ / ψ_Ψ) dΛ`` by ``n_mc`` draws from ``Λ(· | <c>)``."""
    mass = lambda_cell_mass(driving, c)
    if not mass > 0:
        raise ZeroMass("cell has no hitting hyperplanes")
    state = state_of(history, s)
    hs = _draws(driving, c, n_mc, rng)
    values = mass * _entropy_values(phi, psi, PalmSample(s, state, c), hs)
    return Estimate.from_accumulator(accumulate(values))


@dataclass(frozen=True)
class _ReplicateValues:
    entropy: float = 0.0
    pressure: float = 0.0
    direct: float = 0.0


def _energy_of(history: BranchingTessellation, psi: Kernel, scheme: ObservationScheme) -> float:
    total = 0.0
    for e in history.events:
        parent = history.arena[e.parent_id]
        if not scheme.observes(parent):
            continue
        value = psi.density(e.time, history.state_before(e.time), parent, e.hyperplane)
        if value <= 0.0:
            raise Diverged(f"target density vanishes at the division event s={e.time!r}")
        total += math.log(value)
    return total / scheme.volume


def _sampled_values(
    item: tuple[int, BranchingTessellation],
    phi: Optional[Kernel],
    psi: Optional[Kernel],
    driving: DrivingMeasure,
    scheme: ObservationScheme,
    streams: RandomStreams,
    tag: int,
    strata: int,
    n_mc: int,
) -> _ReplicateValues:
    index, history = item
    rng = streams.child(index, ESTIMATE_STREAM, tag).generator()
    entropy = pressure = direct = 0.0
    for sample in palm_samples(history, scheme, strata, rng):
        mass = lambda_cell_mass(driving, sample.cell)
        hs = _draws(driving, sample.cell, n_mc, rng)
        if phi is not None:
            entropy += mass * float(np.mean(_entropy_values(phi, _STIT, sample, hs)))
        if psi is not None:
            psis = [psi.density(sample.time, sample.state, sample.cell, h) for h in hs]
            pressure += mass * (float(np.mean(psis)) - 1.0)
            if phi is not None:
                direct += mass * float(np.mean(_entropy_values(phi, psi, sample, hs)))
    scale = history.t_end / (strata * scheme.volume)
    return _ReplicateValues(entropy * scale, pressure * scale, direct * scale)


def _run_sampled(
    replicates: Sequence[BranchingTessellation],
    phi: Optional[Kernel],
    psi: Optional[Kernel],
    driving: DrivingMeasure,
    scheme: ObservationScheme,
    streams: RandomStreams,
    tag: int,
    strata: int,
    n_mc: int,
) -> list[_ReplicateValues]:
    fn = partial(
        _sampled_values,
        phi=phi,
        psi=psi,
        driving=driving,
        scheme=scheme,
        streams=streams,
        tag=tag,
        strata=strata,
        n_mc=n_mc,
    )
    return map_replicates(fn, list(enumerate(replicates)))


def estimate_entropy_density(
    replicates: Sequence[BranchingTessellation],
    phi: Kernel,
    driving: DrivingMeasure,
    scheme: ObservationScheme,
    streams: RandomStreams,
    strata: int = DEFAULT_STRATA,
    n_mc: int = DEFAULT_N_MC,
) -> Estimate:
    """Inner entropy density of the law with division kernel ``phi`` against STIT."""
    rows = _run_sampled(replicates, phi, None, driving, scheme, streams, _ENTROPY, strata, n_mc)
    return Estimate.from_accumulator(accumulate(r.entropy for r in rows), notes=scheme.notes)


def estimate_u_in(
    replicates: Sequence[BranchingTessellation],
    psi: Kernel,
    scheme: ObservationScheme,
) -> Estimate:
    """Inner energy density: ``Σ log ψ`` over observed division events per unit volume."""
    values = [_energy_of(h, psi, scheme) for h in replicates]
    return Estimate.from_accumulator(accumulate(values), notes=scheme.notes)


def estimate_v_in(
    replicates: Sequence[BranchingTessellation],
    psi: Kernel,
    driving: DrivingMeasure,
    scheme: ObservationScheme,
    streams: RandomStreams,
    n_mc: int = DEFAULT_N_MC,
    strata: int = DEFAULT_STRATA,
) -> Estimate:
    """Pressure density: ``∫ (ψ - 1) dΛ`` over observed cells per unit volume and time."""
    rows = _run_sampled(replicates, None, psi, driving, scheme, streams, _PRESSURE, strata, n_mc)
    return Estimate.from_accumulator(accumulate(r.pressure for r in rows), notes=scheme.notes)


def estimate_free_energy(
    replicates: Sequence[BranchingTessellation],
    phi: Kernel,
    psi: Kernel,
    driving: DrivingMeasure,
    scheme: ObservationScheme,
    streams: RandomStreams,
    strata: int = DEFAULT_STRATA,
    n_mc: int = DEFAULT_N_MC,
) -> FreeEnergy:
    """Excess free energy of the law generated by ``phi`` relative to the target ``psi``.

    Entropy, pressure and the direct per-cell relative entropy share their
    time samples and hyperplane draws.
    """
    rows = _run_sampled(replicates, phi, psi, driving, scheme, streams, _FREE, strata, n_mc)
    energies = [_energy_of(h, psi, scheme) for h in replicates]
    h_acc = accumulate(r.entropy for r in rows)
    u_acc = accumulate(energies)
    v_acc = accumulate(r.pressure for r in rows)
    three = accumulate(r.entropy - u + r.pressure for r, u in zip(rows, energies))
    direct = accumulate(r.direct for r in rows)
    notes = scheme.notes
    parts = {"h": h_acc.mean, "u": u_acc.mean, "v": v_acc.mean}
    logger.debug("free energy components %s over %d replicates", parts, len(rows))
    return FreeEnergy(
        three_term=Estimate.from_accumulator(three, parts, notes),
        direct=Estimate.from_accumulator(direct, notes=notes),
        entropy=Estimate.from_accumulator(h_acc, notes=notes),
        energy=Estimate.from_accumulator(u_acc, notes=notes),
        pressure=Estimate.from_accumulator(v_acc, notes=notes),
    )


def hitting_intensity(
    replicates: Sequence[BranchingTessellation],
    scheme: ObservationScheme,
    s: Optional[float] = None,
) -> Estimate:
    """Mean number of cells of ``T_s`` meeting the observation window (``s`` defaults to t_end)."""
    w = scheme.observation
    values = []
    for history in replicates:
        state = history.state_at(history.t_end if s is None else s)
        values.append(sum(1 for c in state.cells if intersect(c.polytope, w) is not None))
    return Estimate.from_accumulator(accumulate(values), notes=scheme.notes)

