import math

import numpy as np
import pytest

from brt.driving import (
    ColourKernel,
    DirectionalMeasure,
    DrivingMeasure,
    direction_masses,
    lambda_cell_mass,
    lambda_log_density_ratio,
    sample_hyperplane,
)
from brt.geometry import Polytope, hits_interior, perimeter
from brt.utils import RandomStreams

SQUARE = Polytope.box((0.0, 0.0), (1.0, 1.0))


@pytest.fixture()
def rng() -> np.random.Generator:
    return RandomStreams(7).generator()


def test_isotropic_mass_is_mean_width() -> None:
    assert lambda_cell_mass(DrivingMeasure.isotropic(), SQUARE) == pytest.approx(4 / math.pi)


def test_isotropic_mass_matches_perimeter_over_pi() -> None:
    hexagon = Polytope.polygon(
        [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    )
    mass = lambda_cell_mass(DrivingMeasure.isotropic(), hexagon)
    assert mass == pytest.approx(perimeter(hexagon) / math.pi, rel=1e-9)


def test_atomic_mass_is_directional_width() -> None:
    horizontal = DrivingMeasure(
        DirectionalMeasure.from_atoms([(math.pi / 2, 1.0)]), ColourKernel.uniform()
    )
    assert lambda_cell_mass(horizontal, SQUARE) == pytest.approx(1.0)
    iso, atoms = direction_masses(horizontal, Polytope.box((0.0, 0.0), (3.0, 1.0)))
    assert iso == 0.0
    assert atoms == pytest.approx((1.0,))


def test_lebesgue_mass_is_length() -> None:
    assert lambda_cell_mass(DrivingMeasure.lebesgue(), Polytope.interval(2.0, 5.0)) == 3.0
    assert lambda_cell_mass(
        DrivingMeasure.lebesgue(intensity=2.0), Polytope.interval(2.0, 5.0)
    ) == pytest.approx(6.0)


def test_samples_always_hit_interior(rng: np.random.Generator) -> None:
    mixture = DrivingMeasure(
        DirectionalMeasure.mixture(0.5, [(0.0, 0.25), (math.pi / 2, 0.25)]),
        ColourKernel.product([0.3, 0.7]),
    )
    cell = Polytope.polygon([(0.0, 0.0), (4.0, 0.0), (4.0, 0.5), (0.0, 2.0)])
    for _ in range(500):
        h = sample_hyperplane(mixture, cell, rng)
        assert hits_interior(cell, h)
        assert h.colour_plus in (0, 1) and h.colour_minus in (0, 1)


def test_interval_samples_are_uniform(rng: np.random.Generator) -> None:
    cell = Polytope.interval(2.0, 5.0)
    offsets = np.array(
        [sample_hyperplane(DrivingMeasure.lebesgue(), cell, rng).offset for _ in range(4000)]
    )
    assert offsets.min() > 2.0 and offsets.max() < 5.0
    assert offsets.mean() == pytest.approx(3.5, abs=0.05)


def test_atomic_sampler_only_uses_atom_directions(rng: np.random.Generator) -> None:
    driving = DrivingMeasure(
        DirectionalMeasure.from_atoms([(0.0, 1.0), (math.pi / 2, 1.0)]), ColourKernel.uniform()
    )
    normals = {
        tuple(round(x, 9) for x in sample_hyperplane(driving, SQUARE, rng).normal)
        for _ in range(200)
    }
    assert normals == {(1.0, 0.0), (0.0, 1.0)}


def test_colour_kernel_product_and_matrix() -> None:
    product = ColourKernel.product([0.25, 0.75])
    assert product.n_colours == 2
    assert product.joint[0][1] == pytest.approx(0.1875)
    assert product.variant == "product"
    matrix = ColourKernel.matrix([[0.0, 0.5], [0.5, 0.0]])
    assert matrix.variant == "matrix"
    with pytest.raises(ValueError):
        ColourKernel.matrix([[0.5, 0.5], [0.5, 0.5]])


def test_colour_matrix_sampling_respects_zeros(rng: np.random.Generator) -> None:
    matrix = ColourKernel.matrix([[0.0, 0.5], [0.5, 0.0]])
    for _ in range(200):
        plus, minus = matrix.sample(rng)
        assert plus != minus


def test_log_density_ratio_is_zero(rng: np.random.Generator) -> None:
    iso = DrivingMeasure.isotropic()
    h = sample_hyperplane(iso, SQUARE, rng)
    assert lambda_log_density_ratio(iso, SQUARE, h) == 0.0


def test_directional_measure_validation() -> None:
    with pytest.raises(ValueError):
        DirectionalMeasure.from_atoms([])
    with pytest.raises(ValueError):
        DirectionalMeasure.from_atoms([(4.0, 1.0)])
    with pytest.raises(ValueError):
        DrivingMeasure.isotropic(intensity=0.0)


def test_cell_mass_is_translation_invariant(rng: np.random.Generator) -> None:
    crosses = DrivingMeasure(
        DirectionalMeasure.from_atoms([(0.0, 1.0), (math.pi / 3, 2.0)]), ColourKernel.uniform()
    )
    triangle = Polytope.polygon([(0.0, 0.0), (2.0, 0.5), (0.5, 1.5)])
    for driving in (DrivingMeasure.isotropic(), crosses):
        for _ in range(10):
            x = rng.uniform(-50.0, 50.0, size=2)
            assert lambda_cell_mass(driving, triangle.translate(x)) == pytest.approx(
                lambda_cell_mass(driving, triangle), rel=1e-12
            )
