"""Cell-division jump process on a bounded window.

Every living cell carries an exponential clock running at its proposal bound.
When a clock rings the cell proposes a cut ``H ~ Λ(· | <c>)`` and accepts it
with probability ``ψ Λ(<c>) / bound``; accepted cuts split the cell and give
both daughters fresh clocks. Each cell draws from its own counter-based stream
keyed by ``(replicate, CELL_STREAM, cell_id)``, so a run is reproducible no
matter in which order replicates are scheduled.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from brt.driving import DrivingMeasure, lambda_cell_mass, sample_hyperplane
from brt.geometry import (
    TOL_GEOM,
    BicolouredHyperplane,
    Cell,
    DegenerateChild,
    GeometryError,
    NotHitting,
    Polytope,
    area,
    contains,
    intersect,
    split,
)
from brt.kernels import Kernel, proposal_bound
from brt.utils import CELL_STREAM, RandomStreams

logger = logging.getLogger(__name__)

DEFAULT_EVENT_CAP = 10**7
_MAX_REDRAWS = 64


class BudgetExceeded(ValueError):
    pass


class InconsistentBoundary(ValueError):
    pass


class UnknownCell(ValueError):
    pass


@dataclass(frozen=True)
class Tessellation:
    window: Polytope
    cells: tuple[Cell, ...]

    @cached_property
    def _ids(self) -> frozenset[int]:
        return frozenset(c.cell_id for c in self.cells)

    def alive(self, c: Cell) -> bool:
        return c.cell_id in self._ids if c.cell_id >= 0 else c in self.cells

    def living(self) -> tuple[Cell, ...]:
        return self.cells

    def __len__(self) -> int:
        return len(self.cells)


def check_tessellation(t: Tessellation, coverage: bool = True) -> None:
    """Raise GeometryError unless the cells are disjoint, inside the window and cover it."""
    total = 0.0
    for c in t.cells:
        if not contains(t.window, c.polytope, margin=-1e-9):
            raise GeometryError(f"cell {c.cell_id} leaves the window")
        total += area(c.polytope)
    cells = list(t.cells)
    for i, a in enumerate(cells):
        for b in cells[i + 1 :]:
            common = intersect(a.polytope, b.polytope)
            if common is not None and area(common) > 1e-9 * max(1.0, area(t.window)):
                raise GeometryError(f"cells {a.cell_id} and {b.cell_id} overlap")
    if coverage:
        w = area(t.window)
        if abs(total - w) > 1e-9 * w:
            raise GeometryError(f"cells cover area {total!r} of a window of area {w!r}")


@dataclass(frozen=True)
class DivisionEvent:
    time: float
    parent_id: int
    hyperplane: BicolouredHyperplane
    child_plus_id: int
    child_minus_id: int


@dataclass(frozen=True)
class Immigration:
    time: float
    cell: Cell


@dataclass(frozen=True)
class BranchingTessellation:
    """Initial tessellation, time-ordered division events and the forest of all cells."""

    initial: Tessellation
    events: tuple[DivisionEvent, ...]
    arena: Mapping[int, Cell]
    t_end: float
    immigrations: tuple[Immigration, ...] = ()

    @property
    def window(self) -> Polytope:
        return self.initial.window

    @cached_property
    def _deaths(self) -> dict[int, float]:
        return {e.parent_id: e.time for e in self.events}

    def cell(self, cell_id: int) -> Cell:
        try:
            return self.arena[cell_id]
        except KeyError:
            raise UnknownCell(f"no cell with id {cell_id}") from None

    def state_at(self, s: float) -> Tessellation:
        deaths = self._deaths
        cells = tuple(
            c
            for cid, c in sorted(self.arena.items())
            if c.birth_time <= s and deaths.get(cid, math.inf) > s
        )
        return Tessellation(self.window, cells)

    def state_before(self, s: float) -> Tessellation:
        """``T_{s-}``: the cells alive just before time ``s``."""
        deaths = self._deaths
        cells = tuple(
            c
            for cid, c in sorted(self.arena.items())
            if c.birth_time < s and deaths.get(cid, math.inf) >= s
        )
        return Tessellation(self.window, cells)

    def leaves(self) -> Tessellation:
        return self.state_at(self.t_end)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves())


@dataclass(frozen=True)
class BoundaryPath:
    """Immigration schedule into ``window`` and the inner cells present at time 0."""

    window: Polytope
    inner_initial: tuple[Cell, ...]
    schedule: tuple[Immigration, ...] = ()

    def __post_init__(self) -> None:
        times = [m.time for m in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InconsistentBoundary("immigration times must strictly increase")
        if any(not 0.0 < t < 1.0 for t in times):
            raise InconsistentBoundary("immigration times must lie in (0, 1)")
        for m in self.schedule:
            if not contains(self.window, m.cell.polytope):
                raise InconsistentBoundary(f"immigrant at s={m.time!r} is not inside the window")


@dataclass
class _Population:
    """Mutable set of living cells, exposed to kernels as their state."""

    window: Polytope
    cells: dict[int, Cell] = field(default_factory=dict)

    def alive(self, c: Cell) -> bool:
        return self.cells.get(c.cell_id) == c

    def living(self) -> Iterable[Cell]:
        return list(self.cells.values())


@dataclass
class _ConditionalPopulation(_Population):
    """Inner cells plus the outer environment ``T_W^out`` at the current time."""

    outer: Optional[BranchingTessellation] = None
    inner_window: Optional[Polytope] = None
    now: float = 0.0
    _cache: tuple[float, list[Cell]] = (-1.0, [])

    def _outer_cells(self) -> list[Cell]:
        if self.outer is None:
            return []
        if self._cache[0] != self.now:
            cells = [
                c
                for c in self.outer.state_at(self.now).cells
                if not contains(self.inner_window, c.polytope)
            ]
            self._cache = (self.now, cells)
        return self._cache[1]

    def living(self) -> Iterable[Cell]:
        return list(self.cells.values()) + self._outer_cells()


class _Clocks:
    """Per-cell random streams and the priority queue of tentative division times."""

    def __init__(
        self,
        streams: RandomStreams,
        kernel: Kernel,
        driving: DrivingMeasure,
        t_end: float,
    ) -> None:
        self.streams = streams
        self.kernel = kernel
        self.driving = driving
        self.t_end = t_end
        self.heap: list[tuple[float, int]] = []
        self.rngs: dict[int, np.random.Generator] = {}
        self.bounds: dict[int, float] = {}

    def start(self, c: Cell, now: float) -> None:
        self.rngs[c.cell_id] = self.streams.child(CELL_STREAM, c.cell_id).generator()
        self.bounds[c.cell_id] = proposal_bound(self.kernel, c, self.driving)
        self.rewind(c, now)

    def rewind(self, c: Cell, now: float) -> None:
        bound = self.bounds[c.cell_id]
        if not bound > 0:
            return
        t = now + self.rngs[c.cell_id].exponential(1.0 / bound)
        if t <= self.t_end:
            heapq.heappush(self.heap, (t, c.cell_id))

    def stop(self, cell_id: int) -> None:
        self.rngs.pop(cell_id, None)
        self.bounds.pop(cell_id, None)


def _propose(
    clocks: _Clocks, population: _Population, c: Cell, s: float
) -> Optional[tuple[BicolouredHyperplane, Polytope, Polytope]]:
    """One tentative division; returns the cut and the daughters when it is accepted."""
    rng = clocks.rngs[c.cell_id]
    mass = lambda_cell_mass(clocks.driving, c)
    bound = clocks.bounds[c.cell_id]
    for _ in range(_MAX_REDRAWS):
        h = sample_hyperplane(clocks.driving, c, rng)
        psi = clocks.kernel.density(s, population, c, h)
        if rng.random() * bound >= psi * mass:
            return None
        try:
            plus, minus = split(c.polytope, h.spatial)
        except (DegenerateChild, NotHitting):
            logger.warning("degenerate split of cell %d at s=%r, redrawing", c.cell_id, s)
            continue
        return h, plus, minus
    raise DegenerateChild(f"cell {c.cell_id} produced degenerate splits {_MAX_REDRAWS} times")


def _run(
    population: _Population,
    clocks: _Clocks,
    arena: dict[int, Cell],
    next_id: int,
    schedule: Sequence[Immigration],
    event_cap: int,
) -> tuple[list[DivisionEvent], list[Immigration]]:
    events: list[DivisionEvent] = []
    arrived: list[Immigration] = []
    pending = list(schedule)
    for c in list(population.cells.values()):
        clocks.start(c, 0.0)
    while clocks.heap or pending:
        t_clock = clocks.heap[0][0] if clocks.heap else math.inf
        if pending and pending[0].time <= t_clock:
            m = pending.pop(0)
            if isinstance(population, _ConditionalPopulation):
                population.now = m.time
            newcomer = _immigrate(population, m, next_id)
            next_id += 1
            arena[newcomer.cell_id] = newcomer
            arrived.append(Immigration(m.time, newcomer))
            clocks.start(newcomer, m.time)
            continue
        s, cid = heapq.heappop(clocks.heap)
        c = population.cells[cid]
        if isinstance(population, _ConditionalPopulation):
            population.now = s
        accepted = _propose(clocks, population, c, s)
        if accepted is None:
            clocks.rewind(c, s)
            continue
        if len(events) >= event_cap:
            raise BudgetExceeded(f"more than {event_cap} division events")
        h, plus_poly, minus_poly = accepted
        plus = Cell(plus_poly, h.colour_plus, s, next_id)
        minus = Cell(minus_poly, h.colour_minus, s, next_id + 1)
        next_id += 2
        events.append(DivisionEvent(s, cid, h, plus.cell_id, minus.cell_id))
        del population.cells[cid]
        clocks.stop(cid)
        for child in (plus, minus):
            population.cells[child.cell_id] = child
            arena[child.cell_id] = child
            clocks.start(child, s)
    return events, arrived


def _immigrate(population: _Population, m: Immigration, cell_id: int) -> Cell:
    p = m.cell.polytope
    for other in population.cells.values():
        common = intersect(p, other.polytope)
        if common is not None and area(common) > TOL_GEOM:
            raise InconsistentBoundary(
                f"immigrant at s={m.time!r} overlaps living cell {other.cell_id}"
            )
    newcomer = Cell(p, m.cell.colour, m.time, cell_id)
    population.cells[cell_id] = newcomer
    return newcomer


def _numbered(cells: Iterable[Cell]) -> tuple[Cell, ...]:
    return tuple(Cell(c.polytope, c.colour, 0.0, i) for i, c in enumerate(cells))


def simulate(
    window: Polytope,
    initial: Tessellation,
    kernel: Kernel,
    driving: DrivingMeasure,
    t_end: float,
    streams: RandomStreams,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> BranchingTessellation:
    if initial.window != window:
        raise ValueError("initial tessellation lives on a different window")
    if not 0.0 <= t_end <= 1.0:
        raise ValueError("t_end must lie in [0, 1]")
    if initial.cells and initial.cells[0].polytope.dimension != driving.dimension:
        raise ValueError("cell dimension does not match the driving measure")
    start = Tessellation(window, _numbered(initial.cells))
    population = _Population(window, {c.cell_id: c for c in start.cells})
    arena = dict(population.cells)
    clocks = _Clocks(streams, kernel, driving, t_end)
    events, _ = _run(population, clocks, arena, len(arena), (), event_cap)
    logger.debug("simulated %d division events up to s=%r", len(events), t_end)
    return BranchingTessellation(start, tuple(events), arena, t_end)


def simulate_conditional(
    window: Polytope,
    boundary: BoundaryPath,
    inner_initial: Tessellation,
    kernel: Kernel,
    driving: DrivingMeasure,
    outer_history: Optional[BranchingTessellation],
    streams: RandomStreams,
    t_end: Optional[float] = None,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> BranchingTessellation:
    """Inner evolution in ``window`` given the immigration schedule and the outer environment.

    Interacting kernels read the outer cells of ``outer_history``; the outer
    history must extend at least the kernel range beyond ``window`` for the
    environment to be complete.
    """
    end = t_end if t_end is not None else (outer_history.t_end if outer_history else 1.0)
    for c in inner_initial.cells:
        if not contains(window, c.polytope):
            raise InconsistentBoundary(f"initial inner cell {c.cell_id} is not inside the window")
    start = Tessellation(window, _numbered(inner_initial.cells))
    arena_window = outer_history.window if outer_history is not None else window
    population = _ConditionalPopulation(
        arena_window,
        {c.cell_id: c for c in start.cells},
        outer=outer_history,
        inner_window=window,
    )
    arena = dict(population.cells)
    clocks = _Clocks(streams, kernel, driving, end)
    schedule = [m for m in boundary.schedule if m.time <= end]
    events, arrived = _run(population, clocks, arena, len(arena), schedule, event_cap)
    logger.debug(
        "conditional run: %d events, %d immigrants up to s=%r", len(events), len(arrived), end
    )
    return BranchingTessellation(start, tuple(events), arena, end, tuple(arrived))


def build_history(
    initial: Tessellation,
    events: Sequence[DivisionEvent],
    t_end: float,
    immigrations: Sequence[Immigration] = (),
) -> BranchingTessellation:
    """Rebuild the cell forest by replaying the events from the initial tessellation."""
    arena: dict[int, Cell] = {c.cell_id: c for c in initial.cells}
    living = set(arena)
    last = 0.0
    pending = sorted(immigrations, key=lambda m: m.time)
    for e in events:
        while pending and pending[0].time <= e.time:
            _replay_immigrant(arena, living, pending.pop(0))
        if not e.time > last:
            raise ValueError(f"event times must strictly increase (s={e.time!r})")
        if e.parent_id not in living:
            raise UnknownCell(f"event at s={e.time!r} divides dead cell {e.parent_id}")
        last = e.time
        parent = arena[e.parent_id]
        plus, minus = split(parent.polytope, e.hyperplane.spatial)
        h = e.hyperplane
        arena[e.child_plus_id] = Cell(plus, h.colour_plus, e.time, e.child_plus_id)
        arena[e.child_minus_id] = Cell(minus, h.colour_minus, e.time, e.child_minus_id)
        living.discard(e.parent_id)
        living.update((e.child_plus_id, e.child_minus_id))
    for m in pending:
        _replay_immigrant(arena, living, m)
    return BranchingTessellation(initial, tuple(events), arena, t_end, tuple(immigrations))


def _replay_immigrant(arena: dict[int, Cell], living: set[int], m: Immigration) -> None:
    arena[m.cell.cell_id] = m.cell
    living.add(m.cell.cell_id)


def replay(history: BranchingTessellation) -> BranchingTessellation:
    return build_history(history.initial, history.events, history.t_end, history.immigrations)


def state_at(history: BranchingTessellation, s: float) -> Tessellation:
    return history.state_at(s)


def inner_projection(t: Tessellation, w: Polytope) -> list[Cell]:
    """Cells lying in the interior of ``w``."""
    return [c for c in t.cells if contains(w, c.polytope, margin=TOL_GEOM)]


def outer_boundary_path(history: BranchingTessellation, w: Polytope) -> BoundaryPath:
    """Cells that enter ``int(w)`` by the division of a cell crossing its boundary."""
    inner = tuple(inner_projection(history.initial, w))
    schedule: list[Immigration] = []
    for e in history.events:
        parent = history.arena[e.parent_id]
        if contains(w, parent.polytope, margin=TOL_GEOM):
            continue
        for cid in (e.child_plus_id, e.child_minus_id):
            child = history.arena[cid]
            if contains(w, child.polytope, margin=TOL_GEOM):
                schedule.append(Immigration(e.time, child))
    for m in history.immigrations:
        if contains(w, m.cell.polytope, margin=TOL_GEOM) and m.time > 0.0:
            schedule.append(m)
    schedule.sort(key=lambda m: m.time)
    return BoundaryPath(w, inner, tuple(schedule))


@dataclass(frozen=True)
class Family:
    root_id: int
    events: tuple[DivisionEvent, ...]
    leaves: tuple[int, ...]

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)


def descendants(history: BranchingTessellation, root_id: int) -> Family:
    history.cell(root_id)
    by_parent = {e.parent_id: e for e in history.events}
    events: list[DivisionEvent] = []
    leaves: list[int] = []
    stack = [root_id]
    while stack:
        cid = stack.pop()
        e = by_parent.get(cid)
        if e is None:
            leaves.append(cid)
            continue
        events.append(e)
        stack.extend((e.child_minus_id, e.child_plus_id))
    events.sort(key=lambda e: e.time)
    return Family(root_id, tuple(events), tuple(sorted(leaves)))


def subwindow_count(t: Tessellation, w: Polytope) -> int:
    """Number of cells whose interior meets ``w``."""
    return sum(1 for c in t.cells if intersect(c.polytope, w) is not None)


def subwindow_generator(
    kernel: Kernel,
    driving: DrivingMeasure,
    s: float,
    state: Tessellation,
    w: Polytope,
    n_mc: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo value of ``Σ_c Φ(s, T_s, c, <c ∩ w>)``, the rate of new cells in ``w``."""
    total = 0.0
    for c in state.cells:
        piece = intersect(c.polytope, w)
        if piece is None:
            continue
        mass = lambda_cell_mass(driving, piece)
        draws = [
            kernel.density(s, state, c, sample_hyperplane(driving, piece, rng))
            for _ in range(n_mc)
        ]
        total += mass * float(np.mean(draws))
    return total


def single_cell(window: Polytope, colour: int = 0) -> Tessellation:
    return Tessellation(window, (Cell(window, colour, 0.0, 0),))


def from_cells(window: Polytope, cells: Iterable[Cell]) -> Tessellation:
    return Tessellation(window, _numbered(cells))


def shifted_lattice(
    window: Polytope,
    rng: np.random.Generator,
    spacing: float = 1.0,
    nu: Optional[Sequence[float]] = None,
) -> Tessellation:
    """Lattice of cubes with a uniformly random offset, clipped to the window."""
    if not spacing > 0:
        raise ValueError("lattice spacing must be positive")
    lo, hi = window.bounds
    dim = window.dimension
    shift = rng.random(dim) * spacing
    ranges = [
        range(math.floor((lo[k] - shift[k]) / spacing), math.ceil((hi[k] - shift[k]) / spacing))
        for k in range(dim)
    ]
    cells: list[Cell] = []
    for index in np.ndindex(*(len(r) for r in ranges)):
        corner = [shift[k] + spacing * ranges[k][index[k]] for k in range(dim)]
        box = Polytope.box(corner, [x + spacing for x in corner])
        piece = intersect(box, window)
        if piece is None:
            continue
        colour = 0 if nu is None else int(rng.choice(len(nu), p=np.asarray(nu, dtype=float)))
        cells.append(Cell(piece, colour, 0.0, len(cells)))
    return Tessellation(window, tuple(cells))
