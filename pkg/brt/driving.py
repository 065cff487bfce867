"""Translation-invariant driving measure ``Λ(dH) = λ(du) dr μ(u, dσ⁺, dσ⁻)``.

The offset marginal is always Lebesgue measure. The directional part is an
isotropic component (normalised to mass 1 on the half-circle), a finite set of
atoms, or a mixture of both; in d=1 the only direction is ``u = 1``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from brt.geometry import (
    TOL_SPLIT,
    BicolouredHyperplane,
    DegenerateChild,
    Polytope,
    PolytopeLike,
    SpatialHyperplane,
    _poly,
    directional_support,
    edges,
)

ISO_GRID = 1024
_MAX_OFFSET_DRAWS = 64

Matrix = tuple[tuple[float, ...], ...]


class ZeroMass(ValueError):
    pass


@dataclass(frozen=True)
class DirectionAtom:
    theta: float
    weight: float


@dataclass(frozen=True)
class DirectionalMeasure:
    iso_weight: float = 1.0
    atoms: tuple[DirectionAtom, ...] = ()
    dimension: int = 2

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.dimension == 1:
            return
        if self.iso_weight < 0 or any(a.weight < 0 for a in self.atoms):
            raise ValueError("direction weights must be non-negative")
        if self.iso_weight <= 0 and not any(a.weight > 0 for a in self.atoms):
            raise ValueError("directional measure needs at least one positive weight")
        thetas = [a.theta for a in self.atoms]
        if any(not 0.0 <= t < math.pi for t in thetas):
            raise ValueError("atom angles must lie in [0, pi)")
        if len(set(thetas)) != len(thetas):
            raise ValueError("atom angles must be distinct")

    @classmethod
    def isotropic(cls, weight: float = 1.0) -> DirectionalMeasure:
        return cls(iso_weight=weight)

    @classmethod
    def from_atoms(cls, pairs: Sequence[tuple[float, float]]) -> DirectionalMeasure:
        return cls(iso_weight=0.0, atoms=tuple(DirectionAtom(float(t), float(w)) for t, w in pairs))

    @classmethod
    def mixture(cls, iso_weight: float, pairs: Sequence[tuple[float, float]]) -> DirectionalMeasure:
        atoms = tuple(DirectionAtom(float(t), float(w)) for t, w in pairs)
        return cls(iso_weight=float(iso_weight), atoms=atoms)

    @classmethod
    def line(cls) -> DirectionalMeasure:
        return cls(iso_weight=0.0, atoms=(), dimension=1)

    @property
    def variant(self) -> str:
        if self.dimension == 1:
            return "line"
        if not self.atoms:
            return "isotropic"
        return "atoms" if self.iso_weight == 0 else "mixture"


def _check_probabilities(values: Sequence[float], what: str) -> None:
    if any(v < 0 for v in values):
        raise ValueError(f"{what} entries must be non-negative")
    if abs(math.fsum(values) - 1.0) > 1e-12:
        raise ValueError(f"{what} must sum to 1")


@dataclass(frozen=True)
class ColourKernel:
    """Joint law of ``(σ⁺, σ⁻)``; ``per_atom[k]`` overrides it for direction atom k."""

    joint: Matrix
    per_atom: tuple[Optional[Matrix], ...] = ()
    nu: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        for m in (self.joint, *[m for m in self.per_atom if m is not None]):
            k = len(m)
            if k == 0 or any(len(row) != k for row in m):
                raise ValueError("colour matrix must be square")
            _check_probabilities([v for row in m for v in row], "colour matrix")
            if k != len(self.joint):
                raise ValueError("all colour matrices must share the colour alphabet")
        if self.nu is not None:
            _check_probabilities(self.nu, "reference colour law")

    @classmethod
    def product(cls, nu: Sequence[float]) -> ColourKernel:
        nu_t = tuple(float(v) for v in nu)
        _check_probabilities(nu_t, "reference colour law")
        joint = tuple(tuple(a * b for b in nu_t) for a in nu_t)
        return cls(joint=joint, nu=nu_t)

    @classmethod
    def uniform(cls, n_colours: int = 1) -> ColourKernel:
        return cls.product([1.0 / n_colours] * n_colours)

    @classmethod
    def matrix(
        cls,
        rows: Sequence[Sequence[float]],
        per_atom: Sequence[Optional[Sequence[Sequence[float]]]] = (),
    ) -> ColourKernel:
        joint = tuple(tuple(float(v) for v in row) for row in rows)
        extra = tuple(
            None if m is None else tuple(tuple(float(v) for v in row) for row in m)
            for m in per_atom
        )
        return cls(joint=joint, per_atom=extra)

    @property
    def n_colours(self) -> int:
        return len(self.joint)

    @property
    def variant(self) -> str:
        return "product" if self.nu is not None else "matrix"

    def matrix_for(self, atom_index: Optional[int]) -> Matrix:
        if atom_index is not None and atom_index < len(self.per_atom):
            m = self.per_atom[atom_index]
            if m is not None:
                return m
        return self.joint

    def sample(self, rng: np.random.Generator, atom_index: Optional[int] = None) -> tuple[int, int]:
        m = self.matrix_for(atom_index)
        k = len(m)
        if k == 1:
            return 0, 0
        flat = np.asarray(m, dtype=float).ravel()
        idx = int(rng.choice(k * k, p=flat / flat.sum()))
        return idx // k, idx % k


@dataclass(frozen=True)
class DrivingMeasure:
    directional: DirectionalMeasure
    colour: ColourKernel
    intensity: float = 1.0

    def __post_init__(self) -> None:
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if len(self.colour.per_atom) > len(self.directional.atoms):
            raise ValueError("more per-direction colour matrices than direction atoms")

    @classmethod
    def isotropic(cls, n_colours: int = 1, intensity: float = 1.0) -> DrivingMeasure:
        return cls(DirectionalMeasure.isotropic(), ColourKernel.uniform(n_colours), intensity)

    @classmethod
    def lebesgue(cls, n_colours: int = 1, intensity: float = 1.0) -> DrivingMeasure:
        return cls(DirectionalMeasure.line(), ColourKernel.uniform(n_colours), intensity)

    @property
    def dimension(self) -> int:
        return self.directional.dimension

    @property
    def n_colours(self) -> int:
        return self.colour.n_colours


def _width_at(pts: np.ndarray, theta: float) -> float:
    proj = pts[:, 0] * math.cos(theta) + pts[:, 1] * math.sin(theta)
    return float(proj.max() - proj.min())


def _breakpoints(p: Polytope) -> list[float]:
    """Angles where the directional width has a kink (edge normals, folded into (0, pi))."""
    out = set()
    for (ax, ay), (bx, by) in edges(p):
        t = math.fmod(math.atan2(by - ay, bx - ax) + 0.5 * math.pi, math.pi)
        if t < 0:
            t += math.pi
        if 1e-12 < t < math.pi - 1e-12:
            out.add(t)
    return sorted(out)


@lru_cache(maxsize=1 << 16)
def _iso_mean_width(p: Polytope) -> float:
    pts = p.array
    value, _ = quad(
        lambda t: _width_at(pts, t),
        0.0,
        math.pi,
        points=_breakpoints(p) or None,
        limit=400,
        epsabs=1e-13,
        epsrel=1e-12,
    )
    return value / math.pi


@lru_cache(maxsize=1 << 14)
def _iso_table(p: Polytope) -> tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, math.pi, ISO_GRID + 1)
    proj = p.array @ np.vstack((np.cos(theta), np.sin(theta)))
    widths = proj.max(axis=0) - proj.min(axis=0)
    return theta, cumulative_trapezoid(widths, theta, initial=0.0)


def direction_masses(driving: DrivingMeasure, c: PolytopeLike) -> tuple[float, tuple[float, ...]]:
    """(isotropic mass, per-atom masses) of the hyperplanes hitting ``c``."""
    p = _poly(c)
    scale = driving.intensity
    if driving.dimension == 1:
        lo, hi = directional_support(p, (1.0,))
        return scale * (hi - lo), ()
    d = driving.directional
    iso = scale * d.iso_weight * _iso_mean_width(p) if d.iso_weight > 0 else 0.0
    pts = p.array
    atoms = tuple(scale * a.weight * _width_at(pts, a.theta) for a in d.atoms)
    return iso, atoms


def lambda_cell_mass(driving: DrivingMeasure, c: PolytopeLike) -> float:
    iso, atoms = direction_masses(driving, c)
    return iso + math.fsum(atoms)


def _offset_in_band(
    p: Polytope, normal: tuple[float, ...], rng: np.random.Generator
) -> float:
    lo, hi = directional_support(p, normal)
    for _ in range(_MAX_OFFSET_DRAWS):
        r = lo + (hi - lo) * rng.random()
        if lo + TOL_SPLIT < r < hi - TOL_SPLIT:
            return r
    raise DegenerateChild("cell too thin to be cut inside the tolerance band")


def sample_hyperplane(
    driving: DrivingMeasure, c: PolytopeLike, rng: np.random.Generator
) -> BicolouredHyperplane:
    """Draw H from ``Λ(· | <c>)``; the result always hits the interior of ``c``."""
    p = _poly(c)
    iso, atoms = direction_masses(driving, p)
    total = iso + math.fsum(atoms)
    if not total > 0:
        raise ZeroMass("no hyperplane of the driving measure hits this cell")
    atom_index: Optional[int] = None
    if driving.dimension == 1:
        spatial = SpatialHyperplane.point(0.0)
    else:
        pick = rng.random() * total
        if pick < iso:
            grid, cdf = _iso_table(p)
            theta = float(np.interp(rng.random() * cdf[-1], cdf, grid))
        else:
            pick -= iso
            atom_index = len(atoms) - 1
            for k, w in enumerate(atoms):
                if pick < w:
                    atom_index = k
                    break
                pick -= w
            theta = driving.directional.atoms[atom_index].theta
        spatial = SpatialHyperplane.from_angle(theta, 0.0)
    r = _offset_in_band(p, spatial.normal, rng)
    plus, minus = driving.colour.sample(rng, atom_index)
    return BicolouredHyperplane(SpatialHyperplane(spatial.normal, r), plus, minus)


def lambda_log_density_ratio(
    driving: DrivingMeasure, c: PolytopeLike, h: BicolouredHyperplane
) -> float:
    """Log density of the sampler against the normalised ``Λ(· ∩ <c>)``; zero, it is exact."""
    return 0.0
