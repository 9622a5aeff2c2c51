import math

import numpy as np
import pytest

from nccz.core.dyadic import (
    DyadicCube,
    DyadicGrid,
    LevelOutOfRangeError,
    OperatorField,
    PointOutsideGridError,
    conditional_expectation,
    cube_queries,
    dilate,
    expand_level,
    field_norm,
    hl_average,
    hl_average_at,
    level_means,
    trace_phi,
    weak_quasinorm,
)
from nccz.core.operator import keep_below, loewner_between_batch, min_eigenvalues


def random_psd_field(grid: DyadicGrid, n: int, seed: int) -> OperatorField:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((grid.num_cells, n, n)) + 1j * rng.standard_normal(
        (grid.num_cells, n, n)
    )
    return OperatorField(grid, a @ np.conj(np.swapaxes(a, 1, 2)))


@pytest.fixture
def unit_grid() -> DyadicGrid:
    return DyadicGrid(d=1, k_min=0, k_max=1)


def test_grid_shape() -> None:
    grid = DyadicGrid(d=2, k_min=-1, k_max=2)
    assert grid.side == 2.0
    assert grid.per_axis == 8
    assert grid.num_cells == 64
    assert grid.cell_side == 0.25
    assert grid.midpoints.shape == (64, 2)
    assert np.allclose(grid.midpoints[1], [0.125, 0.375])


def test_grid_rejects_bad_levels() -> None:
    with pytest.raises(ValueError):
        DyadicGrid(d=1, k_min=1, k_max=2)
    with pytest.raises(ValueError):
        DyadicGrid(d=3, k_min=0, k_max=1)
    with pytest.raises(ValueError):
        DyadicGrid(d=2, k_min=0, k_max=8)


def test_level_labels_nest() -> None:
    grid = DyadicGrid(d=2, k_min=0, k_max=3)
    fine = grid.level_labels(2)
    coarse = grid.level_labels(1)
    for label in np.unique(fine):
        assert np.unique(coarse[fine == label]).size == 1
    assert np.bincount(coarse).tolist() == [16, 16, 16, 16]


def test_conditional_expectation_of_left_half(unit_grid: DyadicGrid) -> None:
    f = OperatorField.scalar(unit_grid, [1.0, 0.0])
    e0 = conditional_expectation(f, 0)
    assert np.allclose(e0.values[:, 0, 0], [0.5, 0.5])


def test_conditional_expectation_of_constant() -> None:
    grid = DyadicGrid(d=2, k_min=-1, k_max=2)
    c = np.array([[2.0, 1j], [-1j, 3.0]])
    f = OperatorField.constant(grid, c)
    for k in grid.levels():
        assert np.allclose(conditional_expectation(f, k).values, f.values)


def test_conditional_expectation_rejects_level(unit_grid: DyadicGrid) -> None:
    f = OperatorField.zeros(unit_grid, 1)
    with pytest.raises(LevelOutOfRangeError):
        conditional_expectation(f, 2)
    with pytest.raises(LevelOutOfRangeError):
        conditional_expectation(f, -1)


def test_tower_property_and_trace() -> None:
    grid = DyadicGrid(d=2, k_min=0, k_max=3)
    f = random_psd_field(grid, 3, seed=4)
    for k in range(1, 4):
        once = conditional_expectation(conditional_expectation(f, k), k - 1)
        direct = conditional_expectation(f, k - 1)
        assert np.allclose(once.values, direct.values, atol=1e-12)
        assert trace_phi(conditional_expectation(f, k)) == pytest.approx(
            trace_phi(f), rel=1e-12
        )


def test_conditional_expectation_module_property() -> None:
    grid = DyadicGrid(d=1, k_min=-1, k_max=4)
    f = random_psd_field(grid, 3, seed=9)
    k = 2
    # A projection field that is constant on level-2 cubes
    cubes = random_psd_field(grid, 3, seed=10)
    a_cubes = keep_below(level_means(cubes, k), 2.0)
    a = OperatorField(grid, expand_level(grid, k, a_cubes))

    left = conditional_expectation(f.compress(a), k)
    right = conditional_expectation(f, k).compress(a)
    assert np.allclose(left.values, right.values, atol=1e-12)


def test_conditional_expectation_is_positive() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=5)
    f = random_psd_field(grid, 4, seed=2)
    for k in grid.levels():
        assert conditional_expectation(f, k).is_psd()


def test_trace_phi_examples(unit_grid: DyadicGrid) -> None:
    assert trace_phi(OperatorField.zeros(unit_grid, 2)) == 0.0
    assert trace_phi(OperatorField.identity(unit_grid, 2)) == pytest.approx(2.0)
    f = OperatorField(unit_grid, [np.diag([1.0, 3.0]), np.zeros((2, 2))])
    assert trace_phi(f) == pytest.approx(2.0)


def test_field_norm_of_indicator() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    values = np.zeros(8)
    values[:3] = 1.0
    f = OperatorField.scalar(grid, values, n=2)
    assert field_norm(f, 1) == pytest.approx(3.0 / 8.0 * 2.0)
    assert field_norm(f, math.inf) == pytest.approx(1.0)


def test_field_norm_riemann_sum() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=10)
    f = OperatorField.scalar(grid, grid.midpoints[:, 0])
    assert field_norm(f, 2) ** 2 == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_weak_quasinorm_bounded_by_strong() -> None:
    grid = DyadicGrid(d=2, k_min=0, k_max=3)
    for seed in range(5):
        f = random_psd_field(grid, 2, seed=seed)
        for p in (1.0, 2.0):
            assert weak_quasinorm(f, p) <= field_norm(f, p) * (1 + 1e-12)
    assert weak_quasinorm(OperatorField.zeros(grid, 2)) == 0.0


def test_weak_quasinorm_of_indicator() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=2)
    f = OperatorField.scalar(grid, [1.0, 0.0, 0.0, 0.0])
    # sup over lambda < 1 of lambda * 1/4, approached from below on the grid
    value = weak_quasinorm(f, 1.0)
    assert value <= 0.25
    assert value >= 0.25 * 10 ** (-1.0 / 64.0) - 1e-15


def test_hl_average_at_example() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=2)
    f = OperatorField.scalar(grid, [1.0, 1.0, 0.0, 0.0])
    value = hl_average_at(f, 0.25, [0.5])
    assert value[0, 0].real == pytest.approx(1.0, abs=1e-12)


def test_hl_average_interior_constant_d1() -> None:
    grid = DyadicGrid(d=1, k_min=-2, k_max=4)
    f = OperatorField.constant(grid, np.eye(2) * 3.0)
    avg = hl_average(f, 0.25)
    interior = np.abs(grid.midpoints[:, 0] - 2.0) < 1.0
    assert np.allclose(avg.values[interior], 6.0 * np.eye(2), atol=1e-12)


def test_hl_average_interior_constant_d2() -> None:
    grid = DyadicGrid(d=2, k_min=-2, k_max=3)
    f = OperatorField.scalar(grid, np.ones(grid.num_cells))
    avg = hl_average(f, 0.5)
    center = np.all(np.abs(grid.midpoints - 2.0) < 1.0, axis=1)
    assert np.allclose(avg.values[center, 0, 0].real, math.pi, rtol=3e-2)


def test_hl_average_is_positive_and_monotone() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=5)
    f = random_psd_field(grid, 3, seed=21)
    extra = random_psd_field(grid, 3, seed=22)
    g = f + extra
    mf = hl_average(f, 0.1)
    mg = hl_average(g, 0.1)
    assert mf.is_psd()
    assert np.all(min_eigenvalues((mg - mf).values) >= -1e-10)


def test_hl_average_matches_pointwise_evaluation() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=4)
    f = random_psd_field(grid, 2, seed=5)
    avg = hl_average(f, 0.2)
    for cell in (0, 7, 15):
        at = hl_average_at(f, 0.2, grid.midpoints[cell])
        assert np.allclose(avg.values[cell], at, atol=1e-12)


def test_cube_queries() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    cube, center = cube_queries(grid, [0.3], 1)
    assert cube.lower == (0.0,)
    assert cube.side == 0.5
    assert center == (0.25,)

    with pytest.raises(PointOutsideGridError):
        cube_queries(grid, [1.2], 1)
    with pytest.raises(LevelOutOfRangeError):
        cube_queries(grid, [0.3], 5)


def test_dilate() -> None:
    cube = DyadicCube(2, (1,))
    region = dilate(cube, 1)
    assert region.lower == (0.25,) and region.upper == (0.5,)

    wide = dilate(cube, 3)
    assert wide.lower == pytest.approx((0.0,))
    assert wide.upper == pytest.approx((0.75,))

    unclipped = dilate(DyadicCube(2, (0,)), 3)
    assert unclipped.contains([[-0.2]])[0]
    grid = DyadicGrid(d=1, k_min=0, k_max=2)
    assert unclipped.clipped(grid).lower == (0.0,)

    with pytest.raises(ValueError):
        dilate(cube, 2)


def test_cube_family() -> None:
    cube = DyadicCube(3, (5, 2))
    assert cube.father() == DyadicCube(2, (2, 1))
    assert all(child.father() == cube for child in cube.children())
    assert sum(child.volume for child in cube.children()) == pytest.approx(cube.volume)


def test_scalar_reduction_matches_loops() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=4)
    rng = np.random.default_rng(0)
    values = rng.random(16)
    f = OperatorField.scalar(grid, values)
    for k in grid.levels():
        r = 2 ** (4 - k)
        expected = np.repeat([values[i : i + r].mean() for i in range(0, 16, r)], r)
        assert np.allclose(conditional_expectation(f, k).values[:, 0, 0], expected, rtol=1e-12)


def test_refine_preserves_trace() -> None:
    grid = DyadicGrid(d=2, k_min=0, k_max=2)
    f = random_psd_field(grid, 2, seed=3)
    fine = f.refine()
    assert fine.grid.k_max == 3
    assert trace_phi(fine) == pytest.approx(trace_phi(f), rel=1e-12)
    assert np.all(loewner_between_batch(fine.values, fine.abs().values))
