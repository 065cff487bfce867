"""Division kernels ``Ψ(s, T_s, c, dH) = ψ(s, T_s, c, H) 1<c>(H) Λ(dH)``.

Every kernel is an immutable value exposing its density ``ψ`` relative to the
driving measure together with the moderation constants

* ``kappa``: bound on ``|log ψ|`` (``inf`` when ψ may vanish or explode),
* ``range``: interaction radius (0 for kernels that only look at the cell),
* ``kappa_prime``: declared bound on ``|ψ - 1|``, the deviation from STIT.

Densities read the current state through the small :class:`State` protocol
(``window``, ``alive(c)``, ``living()``) so that the live simulator state, a
replayed snapshot and the conditional inner-plus-outer environment can all be
passed in.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Protocol, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from brt.driving import DrivingMeasure, lambda_cell_mass
from brt.geometry import (
    BicolouredHyperplane,
    Cell,
    Polytope,
    area,
    centroid,
    contains_point,
    diameters,
    inset_distance,
    intersect,
    perimeter,
    retracted_support,
    shared_boundary_length,
)

NEIGHBOUR_RANGE = 1e-6
EDGE_CONVENTIONS = ("neutral", "exclude", "mixed")


class CellNotAlive(ValueError):
    pass


class NonModerate(ValueError):
    pass


class State(Protocol):
    window: Polytope

    def alive(self, c: Cell) -> bool: ...

    def living(self) -> Iterable[Cell]: ...


# ---------------------------------------------------------------------------
# Kernel variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stit:
    kappa: float = field(default=0.0, init=False)
    range: float = field(default=0.0, init=False)
    kappa_prime: float = field(default=0.0, init=False)

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        return 1.0

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        return lambda_cell_mass(driving, c)


def _moderation(lower: float, upper: float) -> tuple[float, float]:
    """``(kappa, kappa_prime)`` of a density confined to ``[lower, upper]``."""
    kappa = max(abs(math.log(lower)), abs(math.log(upper))) if lower > 0 else math.inf
    return kappa, max(abs(lower - 1.0), abs(upper - 1.0))


class _CellDrivenForm:
    """Kernels whose density ``φ(c, H)`` ignores time and the rest of the tessellation.

    Subclasses provide ``phi(c, h)`` and ``bounds = (lower, upper)`` with
    ``lower <= φ <= upper``; ``upper`` sets the thinning envelope.
    """

    phi: Callable[[Cell, BicolouredHyperplane], float]

    @property
    def bounds(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def kappa(self) -> float:
        return _moderation(*self.bounds)[0]

    @property
    def range(self) -> float:
        return 0.0

    @property
    def kappa_prime(self) -> float:
        return _moderation(*self.bounds)[1]

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        return self.phi(c, h)

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        return self.bounds[1] * lambda_cell_mass(driving, c)

    def as_cell_driven(self) -> CellDriven:
        lower, upper = self.bounds
        return CellDriven(self.phi, upper, lower)


@dataclass(frozen=True)
class CellDriven(_CellDrivenForm):
    """``ψ(s, T_s, c, H) = φ(c, H)`` for a user-supplied ``φ``.

    ``upper`` must bound ``φ`` from above and ``lower`` from below (0 when ``φ``
    may vanish, which makes the kernel non-moderate). Values outside the
    declared bounds raise ``ValueError`` when the density is evaluated.
    """

    phi: Callable[[Cell, BicolouredHyperplane], float]
    upper: float
    lower: float = 0.0

    def __post_init__(self) -> None:
        if not callable(self.phi):
            raise ValueError("cell-driven kernel needs a callable phi")
        if not (0.0 <= self.lower <= self.upper and 0.0 < self.upper < math.inf):
            raise ValueError("cell-driven bounds must satisfy 0 <= lower <= upper < inf")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.lower, self.upper

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        value = float(self.phi(c, h))
        tol = 1e-12 * self.upper
        if not self.lower - tol <= value <= self.upper + tol:
            raise ValueError(
                f"phi={value!r} outside the declared bounds [{self.lower!r}, {self.upper!r}]"
            )
        return value


@dataclass(frozen=True)
class ConstantDensity(_CellDrivenForm):
    a: float

    def __post_init__(self) -> None:
        if not self.a > 0 or not math.isfinite(self.a):
            raise ValueError("constant density must be positive and finite")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.a, self.a

    def phi(self, c: Cell, h: BicolouredHyperplane) -> float:
        return self.a


def _hits_retraction(c: Cell, eps: float, h: BicolouredHyperplane) -> bool:
    lo, hi = retracted_support(c.polytope, eps, h.normal)
    return lo < h.offset < hi


@dataclass(frozen=True)
class SizeBalance(_CellDrivenForm):
    """``φ(c, η) = ε 1<c>(η) + ε⁻¹ 1<ε⋆c>(η)``: cuts near the centre are favoured."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("size-balance epsilon must lie in (0, 1]")

    @property
    def bounds(self) -> tuple[float, float]:
        e = self.epsilon
        return e, e + 1.0 / e

    def phi(self, c: Cell, h: BicolouredHyperplane) -> float:
        e = self.epsilon
        if _hits_retraction(c, e, h):
            return e + 1.0 / e
        return e


@dataclass(frozen=True)
class UnitRate:
    """Every living cell divides at total rate one, cut drawn from ``Λ(· | <c>)``."""

    driving: DrivingMeasure
    kappa: float = field(default=math.inf, init=False)
    range: float = field(default=0.0, init=False)
    kappa_prime: float = field(default=math.inf, init=False)

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        return 1.0 / lambda_cell_mass(self.driving, c)

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        return 1.0


@dataclass(frozen=True)
class BetaTable:
    """Flip weight ``β(age, s)`` tabulated on a rectangular grid, bilinear in between.

    ``values[i][j]`` is the weight at ``(ages[i], fractions[j])``; arguments outside
    the grid are clamped to it.
    """

    ages: tuple[float, ...]
    fractions: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        for name, grid in (("ages", self.ages), ("fractions", self.fractions)):
            if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"beta {name} grid needs at least two increasing points")
        if len(self.values) != len(self.ages) or any(
            len(row) != len(self.fractions) for row in self.values
        ):
            raise ValueError("beta values must have shape (len(ages), len(fractions))")
        if any(not (v > 0 and math.isfinite(v)) for row in self.values for v in row):
            raise ValueError("beta values must be positive and finite")

    @classmethod
    def constant(cls, value: float) -> BetaTable:
        v = float(value)
        return cls((0.0, 1.0), (0.0, 1.0), ((v, v), (v, v)))

    @classmethod
    def rising(cls) -> BetaTable:
        # (1 + s) / 2, independent of age
        return cls((0.0, 1.0), (0.0, 1.0), ((0.5, 1.0), (0.5, 1.0)))

    @cached_property
    def _interp(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            (np.asarray(self.ages), np.asarray(self.fractions)),
            np.asarray(self.values, dtype=float),
            method="linear",
        )

    @property
    def lowest(self) -> float:
        return min(v for row in self.values for v in row)

    @property
    def highest(self) -> float:
        return max(v for row in self.values for v in row)

    @property
    def is_constant(self) -> bool:
        return self.lowest == self.highest

    def __call__(self, age: float, fraction: float) -> float:
        if self.is_constant:
            return self.lowest
        a = min(max(age, self.ages[0]), self.ages[-1])
        f = min(max(fraction, self.fractions[0]), self.fractions[-1])
        return float(self._interp([[a, f]])[0])


def check_edge_convention(value: str) -> None:
    if value in EDGE_CONVENTIONS:
        return
    if value.startswith("colour:") and value[len("colour:") :].isdigit():
        return
    raise ValueError(f"unknown window edge convention {value!r}")


@dataclass(frozen=True)
class MutationSizeBalanceAging:
    """Two-colour size-balancing kernel whose daughters may flip colour.

    Colour label 0 stands for -1 and label 1 for +1. Each half-space colour is
    drawn from ``δ_col(c) + β(age, s) δ_-col(c)`` normalised, where ``s`` is the
    opposite-colour surface fraction; the density is taken relative to the
    driving measure's ``ν ⊗ ν``.
    """

    epsilon: float
    beta: BetaTable = field(default_factory=BetaTable.rising)
    nu: tuple[float, float] = (0.5, 0.5)
    edge_convention: str = "neutral"

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("size-balance epsilon must lie in (0, 1]")
        if len(self.nu) != 2 or any(not v > 0 for v in self.nu):
            raise ValueError("mutation kernel needs a positive reference law on two colours")
        if abs(math.fsum(self.nu) - 1.0) > 1e-12:
            raise ValueError("reference colour law must sum to 1")
        check_edge_convention(self.edge_convention)

    @cached_property
    def _geometry(self) -> SizeBalance:
        return SizeBalance(self.epsilon)

    @cached_property
    def _extremes(self) -> tuple[float, float]:
        e = self.epsilon
        values = []
        for beta in {self.beta.lowest, self.beta.highest}:
            z = 1.0 + beta
            for own in (0, 1):
                g = [(1.0 if sigma == own else beta) / (self.nu[sigma] * z) for sigma in (0, 1)]
                for gp in g:
                    for gm in g:
                        values.extend((e * gp * gm, (e + 1.0 / e) * gp * gm))
        return min(values), max(values)

    @property
    def kappa(self) -> float:
        lo, hi = self._extremes
        return max(abs(math.log(lo)), abs(math.log(hi)))

    @property
    def range(self) -> float:
        return NEIGHBOUR_RANGE

    @property
    def kappa_prime(self) -> float:
        lo, hi = self._extremes
        return max(abs(lo - 1.0), abs(hi - 1.0))

    def flip_weight(self, s: float, state: State, c: Cell) -> float:
        if self.beta.is_constant:
            return self.beta.lowest
        frac = surface_fraction(state, c, self.edge_convention)
        return self.beta(s - c.birth_time, frac)

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        beta = self.flip_weight(s, state, c)
        z = 1.0 + beta

        def factor(sigma: int) -> float:
            w = 1.0 if sigma == c.colour else beta
            return w / (self.nu[sigma] * z)

        return self._geometry.phi(c, h) * factor(h.colour_plus) * factor(h.colour_minus)

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        return self._extremes[1] * lambda_cell_mass(driving, c)


HORIZONTAL_NORMAL = (0.0, 1.0)
VERTICAL_NORMAL = (1.0, 0.0)


@dataclass(frozen=True)
class Directional:
    """Cut horizontally when horizontal cells dominate the window, else vertically.

    Meant for a driving measure with atoms at ``theta = pi/2`` (horizontal lines)
    and ``theta = 0`` (vertical lines). The density is 0 or 1, so the kernel is not
    moderate and simulation needs an explicit ``bound``.
    """

    bound: Optional[float] = None
    kappa: float = field(default=math.inf, init=False)
    range: float = field(default=math.inf, init=False)
    kappa_prime: float = field(default=math.inf, init=False)

    def __post_init__(self) -> None:
        if self.bound is not None and not self.bound >= 1.0:
            raise ValueError("directional kernel bound must be at least 1")

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        horizontal = horizontal_density(state) > vertical_density(state)
        wanted = HORIZONTAL_NORMAL if horizontal else VERTICAL_NORMAL
        return 1.0 if _same_direction(h.normal, wanted) else 0.0

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        if self.bound is None:
            raise NonModerate("directional kernel needs an explicit proposal bound")
        return self.bound * lambda_cell_mass(driving, c)


def _same_direction(u: Sequence[float], v: Sequence[float]) -> bool:
    return abs(u[0] * v[0] + u[1] * v[1]) > 1.0 - 1e-12


def _class_density(state: State, window: Optional[Polytope], horizontal: bool) -> float:
    w = window if window is not None else state.window
    count = 0
    for c in state.living():
        if not contains_point(w, centroid(c.polytope)):
            continue
        dh, dv = diameters(c.polytope)
        if (dh > dv) == horizontal:
            count += 1
    return count / area(w)


def horizontal_density(state: State, window: Optional[Polytope] = None) -> float:
    """Horizontal cells (wider than tall) with centroid in the window, per unit area."""
    return _class_density(state, window, True)


def vertical_density(state: State, window: Optional[Polytope] = None) -> float:
    return _class_density(state, window, False)


@dataclass(frozen=True)
class Block:
    """Inner kernel inside the boxes ``[n] + (n + r) i`` of a grid, STIT in the corridors."""

    inner: Kernel
    n: float
    corridor: float

    def __post_init__(self) -> None:
        if not self.n > 0 or not self.corridor >= 0:
            raise ValueError("block side must be positive and corridor non-negative")

    @property
    def kappa(self) -> float:
        return self.inner.kappa

    @property
    def range(self) -> float:
        return self.inner.range

    @property
    def kappa_prime(self) -> float:
        return self.inner.kappa_prime

    def box_of(self, c: Cell) -> Optional[Polytope]:
        pitch = self.n + self.corridor
        m = centroid(c.polytope)
        centre = [pitch * round(x / pitch) for x in m]
        box = Polytope.cube(c.polytope.dimension, self.n, centre)
        return box if inset_distance(c.polytope, box) >= -1e-12 else None

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        if self.box_of(c) is None:
            return 1.0
        return self.inner.density(s, state, c, h)

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        mass = lambda_cell_mass(driving, c)
        if self.box_of(c) is None:
            return mass
        return max(mass, self.inner.proposal_bound(c, driving))


@dataclass(frozen=True)
class Cutoff:
    """STIT before time ``delta``, the inner kernel from then on."""

    inner: Kernel
    delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("cutoff time must lie in [0, 1]")

    @property
    def kappa(self) -> float:
        return self.inner.kappa

    @property
    def range(self) -> float:
        return self.inner.range

    @property
    def kappa_prime(self) -> float:
        return self.inner.kappa_prime

    def density(self, s: float, state: State, c: Cell, h: BicolouredHyperplane) -> float:
        if s < self.delta:
            return 1.0
        return self.inner.density(s, state, c, h)

    def proposal_bound(self, c: Cell, driving: DrivingMeasure) -> float:
        return max(lambda_cell_mass(driving, c), self.inner.proposal_bound(c, driving))


Kernel = Union[
    Stit,
    CellDriven,
    ConstantDensity,
    SizeBalance,
    UnitRate,
    MutationSizeBalanceAging,
    Directional,
    Block,
    Cutoff,
]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def state_of(history, s: float) -> State:
    """The state at ``s`` of a branching tessellation, or ``history`` itself when it is one."""
    state_at = getattr(history, "state_at", None)
    return state_at(s) if state_at is not None else history


def density(kernel: Kernel, s: float, history, c: Cell, h: BicolouredHyperplane) -> float:
    """``ψ(s, T_s, c, H)``; ``history`` is a state or anything with ``state_at``."""
    state = state_of(history, s)
    if not state.alive(c):
        raise CellNotAlive(f"cell {c.cell_id} is not alive at s={s!r}")
    return kernel.density(s, state, c, h)


def block_density(kernel: Block, s: float, history, c: Cell, h: BicolouredHyperplane) -> float:
    return density(kernel, s, history, c, h)


def proposal_bound(kernel: Kernel, c: Cell, driving: DrivingMeasure) -> float:
    return kernel.proposal_bound(c, driving)


def is_moderate(kernel: Kernel) -> bool:
    return math.isfinite(kernel.kappa) and math.isfinite(kernel.range)


def age(history, c: Cell, s: float) -> float:
    state = state_of(history, s)
    if not state.alive(c):
        raise CellNotAlive(f"cell {c.cell_id} is not alive at s={s!r}")
    return s - c.birth_time


def mutation_colour_weight(
    kernel: MutationSizeBalanceAging, s: float, history, c: Cell, sigma: int
) -> float:
    state = state_of(history, s)
    if sigma == c.colour:
        return 1.0
    return kernel.flip_weight(s, state, c)


def _window_contact(c: Cell, window: Polytope) -> tuple[float, float]:
    """Boundary shared with the window, split into the parts left/right of its centre."""
    p = c.polytope
    if p.dimension == 1:
        (a,), (b,) = p.vertices
        (lo,), (hi,) = window.vertices
        tol = 1e-9 * (1.0 + abs(lo) + abs(hi))
        return (1.0 if abs(a - lo) <= tol else 0.0), (1.0 if abs(b - hi) <= tol else 0.0)
    total = shared_boundary_length(p, window)
    if total == 0.0:
        return 0.0, 0.0
    (wlo_x, wlo_y), (whi_x, whi_y) = window.bounds
    mid = centroid(window)[0]
    left_box = Polytope.box((wlo_x - 1.0, wlo_y - 1.0), (mid, whi_y + 1.0))
    left_part = intersect(p, left_box)
    left = 0.0 if left_part is None else shared_boundary_length(left_part, window)
    left = min(left, total)
    return left, total - left


def surface_fraction(state: State, c: Cell, edge_convention: str = "neutral") -> float:
    """Share of the boundary of ``c`` shared with cells of a different colour."""
    p = c.polytope
    opposite = 0.0
    for other in state.living():
        if other.cell_id == c.cell_id or other.colour == c.colour:
            continue
        opposite += shared_boundary_length(p, other.polytope)
    denominator = perimeter(p)
    if edge_convention != "neutral":
        left, right = _window_contact(c, state.window)
        if edge_convention == "exclude":
            denominator -= left + right
        elif edge_convention == "mixed":
            if c.colour != 0:
                opposite += left
            if c.colour != 1:
                opposite += right
        else:
            label = int(edge_convention.split(":", 1)[1])
            if label != c.colour:
                opposite += left + right
    if denominator <= 0.0:
        return 0.0
    return min(1.0, max(0.0, opposite / denominator))
