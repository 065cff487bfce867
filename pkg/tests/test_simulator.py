import math

import numpy as np
import pytest

from brt.driving import DrivingMeasure
from brt.geometry import BicolouredHyperplane, Cell, Polytope, SpatialHyperplane, area, contains
from brt.kernels import BetaTable, MutationSizeBalanceAging, SizeBalance, Stit, UnitRate
from brt.simulator import (
    BoundaryPath,
    BudgetExceeded,
    DivisionEvent,
    Immigration,
    InconsistentBoundary,
    Tessellation,
    UnknownCell,
    build_history,
    check_tessellation,
    descendants,
    inner_projection,
    outer_boundary_path,
    replay,
    shifted_lattice,
    simulate,
    simulate_conditional,
    single_cell,
    subwindow_count,
    subwindow_generator,
)
from brt.stats import mean_within
from brt.utils import ESTIMATE_STREAM, RandomStreams

SQUARE = Polytope.box((0.0, 0.0), (1.0, 1.0))
LEBESGUE = DrivingMeasure.lebesgue()
ISO = DrivingMeasure.isotropic()


def _event(s: float, parent: int, normal: tuple, r: float, plus: int) -> DivisionEvent:
    h = BicolouredHyperplane(SpatialHyperplane(normal, r))
    return DivisionEvent(s, parent, h, plus, plus + 1)


@pytest.fixture()
def nested():
    events = [
        _event(0.3, 0, (1.0, 0.0), 0.5, 1),
        _event(0.6, 1, (0.0, 1.0), 0.5, 3),
    ]
    return build_history(single_cell(SQUARE), events, 1.0)


def test_t_end_zero_keeps_initial() -> None:
    window = Polytope.cube(2, 3.0)
    history = simulate(window, single_cell(window), Stit(), ISO, 0.0, RandomStreams(1))
    assert history.events == ()
    assert history.leaves().cells == history.initial.cells


def test_1d_stit_event_count_is_poisson() -> None:
    window = Polytope.interval(0.0, 10.0)
    streams = RandomStreams(11)
    counts = [
        len(simulate(window, single_cell(window), Stit(), LEBESGUE, 1.0, streams.child(i)).events)
        for i in range(1000)
    ]
    assert mean_within(counts, 10.0)
    assert np.var(counts, ddof=1) == pytest.approx(10.0, rel=0.3)


def test_unit_rate_leaf_count_has_mean_e() -> None:
    window = Polytope.interval(0.0, 1.0)
    streams = RandomStreams(12)
    kernel = UnitRate(LEBESGUE)
    leaves = [
        simulate(window, single_cell(window), kernel, LEBESGUE, 1.0, streams.child(i)).leaf_count
        for i in range(1000)
    ]
    assert min(leaves) >= 1
    assert mean_within(leaves, math.e)


def test_simulation_produces_a_tessellation() -> None:
    window = Polytope.cube(2, 3.0)
    history = simulate(window, single_cell(window), SizeBalance(0.5), ISO, 1.0, RandomStreams(3))
    assert history.events
    check_tessellation(history.leaves())
    times = [e.time for e in history.events]
    assert times == sorted(times)
    for s in (0.25, 0.5, 0.75):
        check_tessellation(history.state_at(s))


def test_same_seed_same_history() -> None:
    window = Polytope.cube(2, 3.0)
    runs = [
        simulate(window, single_cell(window), SizeBalance(0.5), ISO, 1.0, RandomStreams(seed))
        for seed in (5, 5, 6)
    ]
    assert runs[0].events == runs[1].events
    assert runs[0].events != runs[2].events


def test_replay_rebuilds_every_cell() -> None:
    window = Polytope.cube(2, 3.0)
    history = simulate(window, single_cell(window), Stit(), ISO, 1.0, RandomStreams(8))
    again = replay(history)
    assert again.leaves() == history.leaves()
    assert dict(again.arena) == dict(history.arena)


def test_event_cap() -> None:
    window = Polytope.interval(0.0, 10.0)
    with pytest.raises(BudgetExceeded):
        simulate(window, single_cell(window), Stit(), LEBESGUE, 1.0, RandomStreams(2), 1)


def test_state_at(nested) -> None:
    assert nested.state_at(0.0) == nested.initial
    assert nested.state_at(0.3 - 1e-9).cells == nested.initial.cells
    assert {c.cell_id for c in nested.state_at(0.3).cells} == {1, 2}
    final = nested.state_at(1.0)
    assert len(final) == 3
    assert sum(area(c.polytope) for c in final.cells) == pytest.approx(1.0)
    assert nested.state_before(0.6).alive(nested.cell(1))


def test_descendants(nested) -> None:
    family = descendants(nested, 0)
    assert family.leaves == (2, 3, 4)
    assert len(family.events) == 2
    assert descendants(nested, 2).leaf_count == 1
    assert descendants(nested, 1).leaf_count == 2
    with pytest.raises(UnknownCell):
        descendants(nested, 99)


def test_build_history_rejects_bad_logs() -> None:
    with pytest.raises(ValueError):
        build_history(
            single_cell(SQUARE),
            [_event(0.5, 0, (1.0, 0.0), 0.5, 1), _event(0.5, 1, (0.0, 1.0), 0.5, 3)],
            1.0,
        )
    with pytest.raises(UnknownCell):
        build_history(single_cell(SQUARE), [_event(0.5, 7, (1.0, 0.0), 0.5, 1)], 1.0)


def test_inner_projection() -> None:
    cells = tuple(
        Cell(Polytope.box((i, j), (i + 1, j + 1)), 0, 0.0, 2 * i + j)
        for i in range(2)
        for j in range(2)
    )
    block = Tessellation(Polytope.box((0.0, 0.0), (2.0, 2.0)), cells)
    assert inner_projection(block, Polytope.box((0.5, 0.5), (1.5, 1.5))) == []
    assert inner_projection(block, Polytope.box((0.2, 0.2), (0.3, 0.3))) == []
    assert inner_projection(block, block.window) == []
    big = Polytope.box((-1.0, -1.0), (3.0, 3.0))
    assert len(inner_projection(block, big)) == 4


def test_outer_boundary_path() -> None:
    window = Polytope.box((0.0, 0.0), (2.0, 1.0))
    w = Polytope.box((0.5, -1.0), (2.5, 2.0))
    history = build_history(single_cell(window), [_event(0.4, 0, (1.0, 0.0), 1.0, 1)], 1.0)
    path = outer_boundary_path(history, w)
    assert path.inner_initial == ()
    assert len(path.schedule) == 1
    assert path.schedule[0].time == 0.4
    immigrant = path.schedule[0].cell.polytope
    assert area(immigrant) == pytest.approx(1.0)
    assert immigrant.bounds[0] == pytest.approx([1.0, 0.0])
    quiet = build_history(single_cell(window), [], 1.0)
    assert outer_boundary_path(quiet, w).schedule == ()


def test_boundary_path_validation() -> None:
    w = SQUARE
    inside = Cell(Polytope.box((0.2, 0.2), (0.8, 0.8)))
    outside = Cell(Polytope.box((0.5, 0.5), (1.5, 1.5)))
    with pytest.raises(InconsistentBoundary):
        BoundaryPath(w, (), (Immigration(0.5, outside),))
    with pytest.raises(InconsistentBoundary):
        BoundaryPath(w, (), (Immigration(0.5, inside), Immigration(0.4, inside)))


def test_conditional_without_inner_cells_stays_empty() -> None:
    w = Polytope.cube(2, 2.0)
    path = BoundaryPath(w, ())
    history = simulate_conditional(
        w, path, Tessellation(w, ()), Stit(), ISO, None, RandomStreams(4), t_end=1.0
    )
    assert history.events == ()
    assert len(history.leaves()) == 0


def test_conditional_receives_immigrants() -> None:
    window = Polytope.box((0.0, 0.0), (2.0, 1.0))
    w = Polytope.box((0.5, -1.0), (2.5, 2.0))
    outer = build_history(single_cell(window), [_event(0.4, 0, (1.0, 0.0), 1.0, 1)], 1.0)
    path = outer_boundary_path(outer, w)
    inner = simulate_conditional(
        w, path, Tessellation(w, path.inner_initial), Stit(), ISO, outer, RandomStreams(9)
    )
    assert len(inner.immigrations) == 1
    assert inner.state_at(0.39).cells == ()
    leaves = inner.leaves().cells
    assert sum(area(c.polytope) for c in leaves) == pytest.approx(1.0)
    assert all(contains(w, c.polytope) for c in leaves)
    assert all(e.time > 0.4 for e in inner.events)


def test_conditional_stit_matches_an_independent_run() -> None:
    outer_window = Polytope.cube(2, 4.0)
    w = Polytope.cube(2, 2.0)
    box = Polytope.cube(2, 1.0)
    cell = Cell(box, 0, 0.0, 0)
    path = BoundaryPath(w, (cell,))
    alone = simulate(box, single_cell(box), Stit(), ISO, 1.0, RandomStreams(31))
    for outer_seed in (1, 2):
        outer = simulate(
            outer_window, single_cell(outer_window), Stit(), ISO, 1.0, RandomStreams(outer_seed)
        )
        inner = simulate_conditional(
            w, path, Tessellation(w, path.inner_initial), Stit(), ISO, outer, RandomStreams(31)
        )
        assert inner.events == alone.events
        assert [c.polytope for c in inner.leaves().cells] == [
            c.polytope for c in alone.leaves().cells
        ]


def test_subwindow_count_and_generator() -> None:
    window = Polytope.cube(2, 2.0)
    state = single_cell(window)
    w = SQUARE
    assert subwindow_count(state, w) == 1
    rng = RandomStreams(1).generator()
    rate = subwindow_generator(Stit(), ISO, 0.5, state, w, 16, rng)
    assert rate == pytest.approx(4 / math.pi)


def test_shifted_lattice_covers_window() -> None:
    rng = RandomStreams(3).generator()
    line = shifted_lattice(Polytope.interval(0.0, 10.0), rng)
    assert len(line) in (10, 11)
    check_tessellation(line)
    plane = shifted_lattice(Polytope.cube(2, 3.0), rng, nu=(0.5, 0.5))
    check_tessellation(plane)
    assert {c.colour for c in plane.cells} <= {0, 1}


@pytest.mark.parametrize(
    "kernel",
    [SizeBalance(0.5), MutationSizeBalanceAging(0.5, BetaTable.rising())],
    ids=["size_balance", "mutation"],
)
def test_subwindow_generator_drives_the_expected_count(kernel) -> None:
    window = Polytope.cube(2, 2.0)
    w = Polytope.cube(2, 1.0)
    driving = DrivingMeasure.isotropic(n_colours=2)
    streams = RandomStreams(41)
    gaps = []
    for i in range(300):
        rep = streams.child(i)
        history = simulate(window, single_cell(window), kernel, driving, 1.0, rep)
        rng = rep.child(ESTIMATE_STREAM).generator()
        u = float(rng.random())
        growth = subwindow_count(history.leaves(), w) - subwindow_count(history.initial, w)
        rate = subwindow_generator(kernel, driving, u, history.state_at(u), w, 8, rng)
        gaps.append(growth - rate)
    assert mean_within(gaps, 0.0)
