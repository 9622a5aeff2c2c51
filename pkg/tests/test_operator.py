import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nccz.core.operator import (
    EigensolverError,
    HermitianElement,
    ProjectionElement,
    RankDecisionError,
    SpectralInterval,
    Tolerances,
    absolute,
    get_tolerances,
    jacobi_eigh,
    join,
    lattice_join,
    lattice_meet,
    loewner_between,
    loewner_between_batch,
    matrix_from_json,
    matrix_to_json,
    meet,
    sandwich_constant,
    schatten_norm,
    schatten_norms,
    set_tolerances,
    spectral_projection,
    spectral_projections,
    support_projection,
)


def random_hermitian(rng: np.random.Generator, n: int, batch: int = 0) -> np.ndarray:
    shape = (batch, n, n) if batch else (n, n)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def random_projection(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    cols = q[:, :rank]
    return cols @ cols.conj().T


def test_jacobi_reconstructs_random_stack() -> None:
    rng = np.random.default_rng(7)
    x = random_hermitian(rng, 6, batch=20)
    w, v = jacobi_eigh(x)

    rebuilt = np.einsum("bij,bj,bkj->bik", v, w, v.conj())
    assert np.max(np.abs(rebuilt - x)) <= 1e-10 * np.max(np.abs(x))
    assert np.all(np.diff(w, axis=-1) >= 0)
    unitary = np.einsum("bji,bjk->bik", v.conj(), v)
    assert np.allclose(unitary, np.eye(6)[None], atol=1e-12)


def test_jacobi_matches_lapack_eigenvalues() -> None:
    rng = np.random.default_rng(11)
    x = random_hermitian(rng, 8, batch=5)
    w, _ = jacobi_eigh(x)
    assert np.allclose(w, np.linalg.eigvalsh(x), atol=1e-11)


def test_jacobi_reports_non_convergence() -> None:
    rng = np.random.default_rng(3)
    x = random_hermitian(rng, 5)
    with pytest.raises(EigensolverError) as info:
        jacobi_eigh(x, max_sweeps=0)
    assert info.value.residual > 0
    assert info.value.sweeps == 0


def test_spectral_projection_diagonal() -> None:
    x = HermitianElement(np.diag([0.5, 2.0]))
    p = spectral_projection(x, SpectralInterval(0.0, 1.0))
    assert np.allclose(p.matrix, np.diag([1.0, 0.0]))


def test_spectral_projection_full_line_is_identity() -> None:
    rng = np.random.default_rng(1)
    x = HermitianElement(random_hermitian(rng, 4))
    p = spectral_projection(x, SpectralInterval(-math.inf, math.inf, False, False))
    assert np.allclose(p.matrix, np.eye(4), atol=1e-12)


def test_spectral_projection_rank_one() -> None:
    x = HermitianElement([[2.0, 1.0], [1.0, 2.0]])
    p = spectral_projection(x, SpectralInterval(0.0, 1.5))
    u = np.array([1.0, -1.0]) / math.sqrt(2.0)
    assert np.allclose(p.matrix, np.outer(u, u), atol=1e-12)
    assert np.allclose(p.matrix @ x.matrix, x.matrix @ p.matrix, atol=1e-12)


def test_spectral_interval_excludes_zero_from_open_left_end() -> None:
    x = HermitianElement(np.diag([0.0, 1e-14, 0.7, 1.2]))
    p = spectral_projection(x, SpectralInterval(0.0, 1.0))
    assert np.allclose(p.matrix, np.diag([0.0, 0.0, 1.0, 0.0]))


def test_spectral_interval_parse() -> None:
    interval = SpectralInterval.parse("(0, 1.5]")
    assert interval.lower == 0.0
    assert interval.upper == 1.5
    assert not interval.lower_closed
    assert interval.upper_closed

    with pytest.raises(ValueError):
        SpectralInterval.parse("0, 1")


def test_schatten_norm_examples() -> None:
    x = HermitianElement(np.diag([3.0, -4.0]))
    assert schatten_norm(x, 1) == pytest.approx(7.0)
    assert schatten_norm(x, math.inf) == pytest.approx(4.0)
    y = HermitianElement([[0.0, 2.0], [2.0, 0.0]])
    assert schatten_norm(y, 2) == pytest.approx(2.0 * math.sqrt(2.0))


def test_schatten_quasinorm_half() -> None:
    x = HermitianElement(np.diag([1.0, 4.0]))
    # (1^{1/2} + 4^{1/2})^2
    assert schatten_norm(x, 0.5) == pytest.approx(9.0)
    with pytest.raises(ValueError):
        schatten_norm(x, 0.0)


def test_loewner_counterexample() -> None:
    f = HermitianElement(np.diag([8.0, -8.0]))
    g = HermitianElement([[10.0, 6.0], [6.0, 10.0]])
    assert loewner_between(f, g)
    # g - |f| has eigenvalues 8 and -4
    assert np.min(np.linalg.eigvalsh(g.matrix - f.abs().matrix)) < 0


def test_loewner_trivial_and_failing() -> None:
    zero = HermitianElement(np.zeros((2, 2)))
    assert loewner_between(zero, zero)
    assert not loewner_between(
        HermitianElement(np.diag([1.0, 0.0])), HermitianElement(np.diag([0.5, 0.5]))
    )


def test_sandwich_constant() -> None:
    a = HermitianElement(np.diag([2.0, 1.0]))
    x = HermitianElement(np.diag([1.0, -3.0]))
    assert sandwich_constant(x, a) == pytest.approx(3.0)

    singular = HermitianElement(np.diag([1.0, 0.0]))
    assert sandwich_constant(x, singular) == math.inf
    assert sandwich_constant(HermitianElement(np.diag([0.5, 0.0])), singular) == (
        pytest.approx(0.5)
    )


def test_lattice_commuting_diagonal() -> None:
    p = ProjectionElement(np.diag([1.0, 0.0]))
    q = ProjectionElement(np.diag([1.0, 1.0]))
    assert np.allclose(lattice_meet(p, q).matrix, np.diag([1.0, 0.0]))
    assert np.allclose(lattice_join(p, q).matrix, np.eye(2))


def test_lattice_idempotence() -> None:
    rng = np.random.default_rng(5)
    p = ProjectionElement(random_projection(rng, 4, 2))
    assert np.allclose(lattice_meet(p, p).matrix, p.matrix, atol=1e-12)
    assert np.allclose(lattice_join(p, p).matrix, p.matrix, atol=1e-12)


def test_lattice_two_lines() -> None:
    p = ProjectionElement(np.diag([1.0, 0.0]))
    u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    q = ProjectionElement(np.outer(u, u))
    assert np.allclose(lattice_meet(p, q).matrix, np.zeros((2, 2)), atol=1e-12)
    assert np.allclose(lattice_join(p, q).matrix, np.eye(2), atol=1e-12)


def test_lattice_ambiguous_rank() -> None:
    angle = 2e-4
    u = np.array([math.cos(angle), math.sin(angle)])
    p = np.diag([1.0, 0.0])
    q = np.outer(u, u)
    with pytest.raises(RankDecisionError):
        meet(p, q)
    # Non-strict mode decides the band as nonzero
    assert np.allclose(meet(p, q, strict=False), np.zeros((2, 2)), atol=1e-9)


def test_projection_element_rejects_non_projection() -> None:
    with pytest.raises(ValueError):
        ProjectionElement(np.diag([0.5, 1.0]))


def test_matrix_json_literals() -> None:
    m = matrix_from_json([[1, [0, 2]], [[0, -2], 3]])
    assert m[0, 1] == 2j
    assert m[1, 0] == -2j
    assert matrix_to_json(m)[0][1] == [0.0, 2.0]
    assert HermitianElement.from_json([[1, 0], [0, 2]]).dim == 2

    with pytest.raises(ValueError):
        matrix_from_json([[1, 2, 3]])


def test_scalar_reduction() -> None:
    x = HermitianElement([[-2.5]])
    assert schatten_norm(x, 1) == 2.5
    assert np.allclose(x.abs().matrix, [[2.5]])
    assert np.allclose(
        spectral_projection(x, SpectralInterval(-3.0, 0.0)).matrix, [[1.0]]
    )
    assert loewner_between(x, HermitianElement([[2.5]]))
    assert not loewner_between(x, HermitianElement([[2.4]]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(1, 6))
def test_disjoint_spectral_projections_are_orthogonal(seed: int, n: int) -> None:
    rng = np.random.default_rng(seed)
    x = random_hermitian(rng, n, batch=4)
    cut = float(rng.standard_normal())
    below = spectral_projections(x, SpectralInterval(-math.inf, cut, False, True))
    above = spectral_projections(x, SpectralInterval(cut, math.inf, False, False))
    assert np.max(np.abs(below @ above)) <= 1e-12
    assert np.allclose(below + above, np.eye(n)[None], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    p=st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]),
)
def test_schatten_triangle_inequality(seed: int, p: float) -> None:
    rng = np.random.default_rng(seed)
    x = random_hermitian(rng, 4, batch=8)
    y = random_hermitian(rng, 4, batch=8)
    assert np.all(
        schatten_norms(x + y, p) <= schatten_norms(x, p) + schatten_norms(y, p) + 1e-10
    )


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_sum_of_absolute_values_majorizes_family(seed: int) -> None:
    rng = np.random.default_rng(seed)
    family = random_hermitian(rng, 3, batch=5)
    majorant = np.sum(absolute(family), axis=0)
    assert np.all(loewner_between_batch(family, np.broadcast_to(majorant, family.shape)))


@settings(max_examples=20, deadline=None)
@given(
    small=st.lists(st.booleans(), min_size=5, max_size=5),
    extra=st.lists(st.booleans(), min_size=5, max_size=5),
    other=st.lists(st.booleans(), min_size=5, max_size=5),
    other_extra=st.lists(st.booleans(), min_size=5, max_size=5),
)
def test_meet_and_join_are_monotone(small, extra, other, other_extra) -> None:
    rng = np.random.default_rng(len(small))
    basis, _ = np.linalg.qr(rng.standard_normal((5, 5)))

    def proj(mask):
        return basis @ np.diag(np.asarray(mask, dtype=float)) @ basis.T

    p = proj(small)
    p_big = proj([a or b for a, b in zip(small, extra)])
    q = proj(other)
    q_big = proj([a or b for a, b in zip(other, other_extra)])

    assert np.min(np.linalg.eigvalsh(meet(p_big, q_big) - meet(p, q))) >= -1e-10
    assert np.min(np.linalg.eigvalsh(join(p_big, q_big) - join(p, q))) >= -1e-10


def test_tolerance_overrides() -> None:
    default = get_tolerances()
    x = np.diag([1.0, 1e-5])
    assert np.allclose(support_projection(x), np.eye(2))
    try:
        set_tolerances(Tolerances(rank=1e-4))
        assert np.allclose(support_projection(x), np.diag([1.0, 0.0]))
    finally:
        set_tolerances(default)
    assert get_tolerances() == default

    with pytest.raises(ValueError):
        Tolerances(rank=0.0)
