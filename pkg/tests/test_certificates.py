import math

import numpy as np
import pytest

from nccz.certificates import (
    approximant,
    bau_cauchy_test,
    boundary_projection_eta,
    cotlar_norm_check,
    cube_sum_checks,
    deficit_of,
    elementary_tensor,
    good_projection_e1,
    holder_check,
    kernel_domination,
    majorant_F1,
    majorant_F2,
    mollify,
    sandwich_check,
    spread,
    vanishing_index,
    weak11_certificate,
    weak11_sweep,
)
from nccz.core.dyadic import DyadicGrid, OperatorField, field_norm
from nccz.decomposition import decompose
from nccz.kernels import resolve_kernel, riesz_kernel, with_phase
from nccz.operators import SingularIntegralOperator


def random_psd_field(grid: DyadicGrid, n: int, seed: int) -> OperatorField:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((grid.num_cells, n, n)) + 1j * rng.standard_normal(
        (grid.num_cells, n, n)
    )
    weights = rng.exponential(1.0, grid.num_cells) ** 2
    return OperatorField(grid, weights[:, None, None] * (a @ np.conj(np.swapaxes(a, 1, 2))))


def coarse_level(f: OperatorField) -> float:
    mean = np.mean(f.values, axis=0)
    return float(np.max(np.linalg.eigvalsh(0.5 * (mean + mean.conj().T))))


def bumped(grid: DyadicGrid, matrix: np.ndarray) -> OperatorField:
    s = np.sin(math.pi * grid.midpoints[:, 0]) ** 2
    return OperatorField(grid, s[:, None, None] * matrix[None])


@pytest.fixture
def line_grid() -> DyadicGrid:
    return DyadicGrid(d=1, k_min=0, k_max=4)


@pytest.fixture
def hilbert_op(line_grid) -> SingularIntegralOperator:
    return SingularIntegralOperator(resolve_kernel("hilbert", d=1), line_grid)


@pytest.fixture
def rough_input(line_grid) -> OperatorField:
    return random_psd_field(line_grid, 2, seed=5)


def test_vanishing_index() -> None:
    assert vanishing_index(5, 1, 4) == 4
    assert vanishing_index(5, 2, 4) == 5
    assert vanishing_index(3, 1, 8) == 1


def test_spread_ignores_zeros() -> None:
    assert spread([1.0, 2.0, 0.0]) == pytest.approx(2.0)
    assert spread([0.0, 3.0]) == 1.0
    assert spread([]) == 1.0


def test_sandwich_check() -> None:
    x = np.array([np.diag([1.0, -1.0])], dtype=np.complex128)
    assert sandwich_check(x, np.eye(2)[None]).holds
    assert not sandwich_check(x, 0.5 * np.eye(2)[None]).holds


def test_input_validation(hilbert_op, line_grid) -> None:
    f = OperatorField.identity(line_grid, 2)
    with pytest.raises(ValueError):
        weak11_certificate(hilbert_op, f, 0.0)
    negative = OperatorField.constant(line_grid, np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        weak11_certificate(hilbert_op, negative, 1.0)


def test_small_input_keeps_everything(hilbert_op, line_grid) -> None:
    lam = 2.0
    f = OperatorField.constant(line_grid, 1e-3 * lam * np.eye(2))
    cert = weak11_certificate(hilbert_op, f, lam)

    assert cert.summary.trace_total == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(cert.e.values, np.eye(2), atol=1e-9)
    assert cert.summary.failed() == []
    assert cert.decomposition is not None
    assert cert.decomposition.bd == {}


def test_empty_bad_part_gives_zero_majorant(hilbert_op, line_grid) -> None:
    f = OperatorField.constant(line_grid, 0.1 * np.eye(2))
    dec = decompose(f, 1.0)
    majorant, stage = majorant_F1(hilbert_op, dec, 1.0)
    assert field_norm(majorant, 1.0) == 0.0
    assert stage.deficit == pytest.approx(0.0, abs=1e-12)
    assert stage.passed


def test_e1_is_a_chebyshev_cut_of_the_good_part(hilbert_op, rough_input) -> None:
    lam = 4.0 * coarse_level(rough_input)
    dec = decompose(rough_input, lam)
    stage = good_projection_e1(hilbert_op, dec, lam)

    e = stage.e.values
    assert np.allclose(e @ e, e, atol=1e-8)
    assert stage.checks["e1_chebyshev"].holds
    assert stage.checks["e1_sandwich"].holds
    assert stage.deficit >= 0.0


def test_f2_projection_sits_below_zeta(hilbert_op, rough_input) -> None:
    lam = 3.0 * coarse_level(rough_input)
    dec = decompose(rough_input, lam)
    majorant, stage = majorant_F2(hilbert_op, dec, lam, rough_input, holder_samples=8)

    assert majorant.is_psd()
    assert stage.name == "e3"
    assert "e3_holder" in stage.checks
    e = stage.e.values
    assert np.allclose(e @ dec.zeta.values, e, atol=1e-8)


def test_scalar_eta_is_the_level_set(hilbert_op, line_grid) -> None:
    rng = np.random.default_rng(3)
    values = rng.exponential(1.0, line_grid.num_cells) ** 2
    f = OperatorField.scalar(line_grid, values)
    lam = 1.5 * float(np.mean(values))

    stage = boundary_projection_eta(hilbert_op, f, lam)
    averages = np.stack([np.real(a.values[:, 0, 0]) for a in hilbert_op.average_family(f)])
    above = int(np.sum(np.max(np.abs(averages), axis=0) > lam))
    assert stage.deficit == pytest.approx(above * line_grid.cell_volume)
    assert stage.passed


def test_random_field_certificate(hilbert_op, rough_input) -> None:
    lam = 1.5 * coarse_level(rough_input)
    cert = weak11_certificate(hilbert_op, rough_input, lam)
    summary = cert.summary

    assert cert.decomposition is not None
    assert set(cert.stages) == {"eta", "e1", "e2", "e3"}
    assert summary.failed() == []
    assert summary.trace_total <= sum(summary.deficits.values()) * (1.0 + 1e-9) + 1e-12
    assert summary.sup_truncated <= (3.0 + summary.boundary_constant) * lam * (1.0 + 1e-4)
    assert summary.deficit_ratio == pytest.approx(
        summary.trace_total * lam / summary.f_l1
    )


def test_holder_and_cube_sums(hilbert_op, rough_input) -> None:
    lam = 1.5 * coarse_level(rough_input)
    dec = decompose(rough_input, lam)
    if not dec.levels:
        pytest.skip("No stopping cubes at this level")

    check, count = holder_check(hilbert_op, dec, rough_input, lam, max_samples=16)
    assert check.holds
    assert 0 < count <= 16
    for level, sums in cube_sum_checks(dec, rough_input, lam).items():
        assert level in dec.levels
        assert sums.holds


def test_degenerate_level_returns_zero_projection(hilbert_op, rough_input, line_grid) -> None:
    lam = 0.5 * coarse_level(rough_input)
    cert = weak11_certificate(hilbert_op, rough_input, lam)

    assert "decomposition" in cert.summary.degenerate_stages
    assert cert.decomposition is None
    assert np.allclose(cert.e.values, 0.0)
    assert cert.summary.trace_total == pytest.approx(2 * line_grid.volume)
    assert cert.summary.sup_truncated == 0.0


def test_complex_kernel_meets_both_parts(line_grid) -> None:
    kernel = with_phase(resolve_kernel("hilbert", d=1), 0.3)
    op = SingularIntegralOperator(kernel, line_grid)
    f = OperatorField.constant(line_grid, 0.05 * np.eye(2))
    cert = weak11_certificate(op, f, 1.0)

    assert any(name.startswith("re:") for name in cert.stages)
    assert any(name.startswith("im:") for name in cert.stages)
    assert cert.summary.checks["trace_subadditive"].holds
    assert cert.summary.checks["projection"].holds


def test_weak_sweep_levels(hilbert_op, rough_input) -> None:
    top = coarse_level(rough_input)
    lambdas = [1.5 * top, 3.0 * top]
    summaries = weak11_sweep(hilbert_op, rough_input, lambdas)
    assert [s.lam for s in summaries] == pytest.approx(lambdas)
    for summary in summaries:
        assert 0.0 <= summary.trace_total <= 2 * rough_input.grid.volume + 1e-12
        assert summary.kernel == "hilbert"


def test_cotlar_on_zero_input(hilbert_op, line_grid) -> None:
    summary = cotlar_norm_check(hilbert_op, OperatorField.zeros(line_grid, 2))
    assert summary.lhs == 0.0
    assert summary.ratio == 0.0
    assert summary.rhs == 0.0


def test_cotlar_ratio_is_finite(hilbert_op, rough_input) -> None:
    summary = cotlar_norm_check(hilbert_op, rough_input)
    assert summary.lhs > 0.0
    assert math.isfinite(summary.ratio)
    assert summary.maximal_of_input > 0.0
    assert 0.0 <= summary.substitution_drift
    assert summary.domination is not None
    assert summary.checks["kernel_domination"].holds

    with pytest.raises(ValueError):
        cotlar_norm_check(hilbert_op, rough_input, p=3.0)


def test_kernel_domination_is_scale_free() -> None:
    result = kernel_domination(resolve_kernel("hilbert", d=1), [1.0, 0.5, 0.25])
    assert result is not None
    assert result["spread"] <= 1.25
    assert 0.0 < result["constant"] < math.inf
    assert kernel_domination(riesz_kernel(1, 2), [1.0, 0.5]) is None


def test_mollify_preserves_constants_inside(line_grid) -> None:
    f = OperatorField.identity(line_grid, 2)
    h = 0.125
    smooth = mollify(f, h)
    x = line_grid.midpoints[:, 0]
    inside = (x > h) & (x < 1.0 - h)
    assert np.allclose(smooth.values[inside], np.eye(2), rtol=1e-4, atol=1e-4)
    assert np.all(np.real(smooth.values[:, 0, 0]) <= 1.0 + 1e-4)

    with pytest.raises(ValueError):
        mollify(f, 0.0)


def test_approximant_below_half_cell_is_identity(line_grid, rough_input) -> None:
    assert approximant(rough_input, 2, 0.25 * line_grid.cell_side) is rough_input
    g = approximant(rough_input, 1, 0.25)
    assert g.is_psd()


def test_elementary_tensor(line_grid, rough_input) -> None:
    matrix = np.array([[2.0, 1j], [-1j, 1.0]])
    f = bumped(line_grid, matrix)
    split = elementary_tensor(f)
    assert split is not None
    s, a = split
    assert np.allclose(s[:, None, None] * a[None], f.values, atol=1e-12)
    assert elementary_tensor(rough_input) is None
    assert elementary_tensor(OperatorField.zeros(line_grid, 2)) is None


def test_bilateral_cauchy_on_a_smooth_tensor(hilbert_op, line_grid) -> None:
    f = bumped(line_grid, np.eye(2))
    delta = 0.05
    summary = bau_cauchy_test(hilbert_op, f, delta, stages=3)

    assert summary.reached == summary.requested == 3
    assert summary.deficit < delta
    assert summary.checks["deficit"].holds
    assert summary.checks["envelope_monotone"].holds

    matrix = np.asarray(summary.matrix)
    assert np.allclose(matrix, matrix.T)
    assert np.allclose(np.diag(matrix), 0.0)
    assert summary.envelope[-1] <= summary.envelope[0]
    assert all(b <= a for a, b in zip(summary.envelope[:-1], summary.envelope[1:]))

    assert summary.tensor_differences is not None
    eps = summary.epsilons
    h = line_grid.cell_side
    for m, diff in enumerate(summary.tensor_differences):
        bound = 2.0 * (eps[m] - eps[m + 1]) + h * math.log(eps[m] / eps[m + 1])
        assert diff <= 1.01 * bound + 1e-6


def test_bilateral_cauchy_rejects_bad_delta(hilbert_op, line_grid) -> None:
    with pytest.raises(ValueError):
        bau_cauchy_test(hilbert_op, OperatorField.identity(line_grid, 1), 0.0)


def test_deficit_of_identity_and_zero(line_grid) -> None:
    assert deficit_of(OperatorField.identity(line_grid, 3)) == pytest.approx(0.0)
    assert deficit_of(OperatorField.zeros(line_grid, 3)) == pytest.approx(3.0)
