import math

import numpy as np
import pytest

from nccz.core.dyadic import DyadicGrid, OperatorField, field_norm, hl_average
from nccz.maximal import (
    MaximalFamily,
    hermitian_basis,
    scalar_distribution_value,
    strong_max_norm,
    weak_max_quasinorm_upper,
    weak_sweep,
)


def random_hermitian(rng: np.random.Generator, shape, n: int) -> np.ndarray:
    a = rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@pytest.fixture
def small_family() -> MaximalFamily:
    rng = np.random.default_rng(11)
    return MaximalFamily(random_hermitian(rng, (4, 3), 2), cell_volume=0.25)


def test_hermitian_basis_is_orthonormal() -> None:
    basis = hermitian_basis(3)
    assert basis.shape == (9, 3, 3)
    gram = np.real(np.einsum("iab,jba->ij", basis, basis))
    assert np.allclose(gram, np.eye(9), atol=1e-15)
    assert np.allclose(basis, np.conj(np.swapaxes(basis, 1, 2)))


def test_family_rejects_non_hermitian_members() -> None:
    with pytest.raises(ValueError):
        MaximalFamily.from_matrices([np.array([[0.0, 1.0], [0.0, 0.0]])])
    with pytest.raises(ValueError):
        MaximalFamily(np.zeros((2, 0, 2, 2)))


def test_scalar_family_reduces_to_pointwise_max() -> None:
    rng = np.random.default_rng(3)
    x = rng.standard_normal((16, 5))
    family = MaximalFamily(x[:, :, None, None], cell_volume=1.0 / 16.0)
    top = np.max(np.abs(x), axis=1)

    one = strong_max_norm(family, 1)
    two = strong_max_norm(family, 2)
    inf = strong_max_norm(family, math.inf)
    assert one.exact and two.exact and inf.exact
    assert one.objective == pytest.approx(np.sum(top) / 16.0, abs=1e-12)
    assert two.objective == pytest.approx(math.sqrt(np.sum(top**2) / 16.0), abs=1e-12)
    assert inf.objective == pytest.approx(np.max(top), abs=1e-12)

    solved = strong_max_norm(family, 1, method="barrier")
    assert not solved.fallback
    assert solved.objective == pytest.approx(one.objective, rel=1e-5)


def test_single_member_strong_norms() -> None:
    rng = np.random.default_rng(4)
    x = random_hermitian(rng, (), 3)
    family = MaximalFamily.from_matrices([x])
    w = np.linalg.eigvalsh(x)

    inf = strong_max_norm(family, math.inf)
    assert inf.objective == pytest.approx(np.max(np.abs(w)), rel=1e-12)
    assert inf.is_feasible(family)

    one = strong_max_norm(family, 1)
    trace_abs = float(np.sum(np.abs(w)))
    assert one.objective == pytest.approx(trace_abs, rel=1e-5)
    assert one.dual_bound <= trace_abs * (1.0 + 1e-9)
    assert one.gap <= 1e-5 * (1.0 + one.objective)
    assert one.is_feasible(family)


def test_counterexample_matrices() -> None:
    # f = diag(8, -8) rotated away from the diagonal; g = [[10, 6], [6, 10]] is feasible
    theta = 0.4
    u = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    f = u @ np.diag([8.0, -8.0]) @ u.T
    g = u @ np.array([[10.0, 6.0], [6.0, 10.0]]) @ u.T
    family = MaximalFamily.from_matrices([f])
    assert np.min(np.linalg.eigvalsh(g - f)) >= -1e-12
    assert np.min(np.linalg.eigvalsh(g + f)) >= -1e-12

    cert = strong_max_norm(family, 1)
    assert cert.method == "barrier"
    assert 16.0 - 1e-6 <= cert.objective <= 20.0
    assert cert.objective == pytest.approx(16.0, rel=1e-5)

    diagonal = strong_max_norm(MaximalFamily.from_matrices([np.diag([8.0, -8.0])]), 1)
    assert diagonal.exact
    assert diagonal.objective == pytest.approx(16.0)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_barrier_certificate_is_feasible(small_family, p: float) -> None:
    cert = strong_max_norm(small_family, p)
    assert not cert.fallback
    assert cert.is_feasible(small_family)
    assert cert.dual_bound <= cert.objective
    assert cert.gap <= 1e-5 * (1.0 + cert.objective)

    loose = np.sum(np.abs(np.linalg.eigvalsh(small_family.values)), axis=(1, 2))
    if p == 1.0:
        assert cert.objective <= 0.25 * float(np.sum(loose)) * (1.0 + 1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_strong_norm_scales_and_grows_with_the_family(small_family, p: float) -> None:
    base = strong_max_norm(small_family, p)
    scaled = strong_max_norm(small_family.scaled(-3.0), p)
    assert scaled.objective == pytest.approx(3.0 * base.objective, rel=1e-4)

    rng = np.random.default_rng(12)
    extra = MaximalFamily(random_hermitian(rng, (4, 2), 2), cell_volume=0.25)
    bigger = strong_max_norm(small_family.extended(extra), p)
    assert bigger.objective >= base.objective - base.gap - bigger.gap - 1e-9


def test_strong_inf_norm_is_exact(small_family) -> None:
    cert = strong_max_norm(small_family, math.inf)
    assert cert.objective == small_family.sup_norm()
    assert cert.slack >= -1e-12


def test_unsupported_exponent() -> None:
    family = MaximalFamily.from_matrices([np.eye(2)])
    with pytest.raises(ValueError):
        strong_max_norm(family, 3)
    with pytest.raises(ValueError):
        strong_max_norm(family, 1, method="simplex")


def test_weak_certificate_below_sup_is_identity(small_family) -> None:
    cert = weak_max_quasinorm_upper(small_family, small_family.sup_norm() * 1.01)
    assert cert.recipe == "identity"
    assert cert.deficit == 0.0
    assert cert.verify(small_family)


def test_weak_certificates_verify(small_family) -> None:
    for lam in (0.3, 1.0, 2.0):
        cert = weak_max_quasinorm_upper(small_family, lam)
        assert cert.verify(small_family)
        assert cert.worst <= lam * (1.0 + 1e-9) + 1e-9
        assert 0.0 <= cert.deficit <= 0.25 * 4 * 2 + 1e-12


def test_scalar_weak_value_is_exact() -> None:
    rng = np.random.default_rng(6)
    x = rng.standard_normal((32, 4))
    family = MaximalFamily(x[:, :, None, None], cell_volume=1.0 / 32.0)
    lambdas = np.geomspace(0.05, 4.0, 25)
    sweep = weak_sweep(family, lambdas)
    assert sweep.value == pytest.approx(scalar_distribution_value(family, lambdas), abs=1e-12)
    for cert in sweep.certificates:
        top = np.max(np.abs(x), axis=1)
        assert cert.deficit == pytest.approx(np.sum(top > cert.lam) / 32.0, abs=1e-12)


def test_hl_average_weak_sweep_bounded_by_l1() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=5)
    rng = np.random.default_rng(8)
    a = rng.standard_normal((grid.num_cells, 2, 2)) + 1j * rng.standard_normal(
        (grid.num_cells, 2, 2)
    )
    weights = rng.exponential(1.0, grid.num_cells) ** 3
    f = OperatorField(grid, weights[:, None, None] * (a @ np.conj(np.swapaxes(a, 1, 2))))
    radii = [2.0**-j for j in range(1, 5)]
    family = MaximalFamily.from_fields([hl_average(f, r) for r in radii], radii)

    lambdas = np.geomspace(0.1, 10.0, 9) * field_norm(f, 1.0)
    sweep = weak_sweep(family, lambdas)
    assert all(c.verify(family) for c in sweep.certificates)
    assert sweep.value <= 20.0 * field_norm(f, 1.0)
