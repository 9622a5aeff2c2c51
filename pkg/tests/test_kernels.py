import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nccz.kernels import (
    KernelKind,
    KernelRegistryError,
    KernelSpec,
    PartitionFamily,
    RoughSymbol,
    bump,
    cancellation_sup,
    decay_exponent,
    delta_q_modulus,
    delta_q_profile,
    difference_kernel,
    difference_l1,
    halton,
    omega_tools,
    resolve_kernel,
    rough_dini_sum,
    size_and_lipschitz,
    smooth_cutoff,
)

# 2 sqrt(pi) Si(1/2), the Dini integral of the cosine symbol
COS_DINI = 1.7480215


@pytest.fixture
def hilbert() -> KernelSpec:
    return resolve_kernel("hilbert", d=1)


def test_halton_points_are_distinct_and_in_unit_cube() -> None:
    pts = halton(500, 3)
    assert pts.shape == (500, 3)
    assert np.all((pts >= 0.0) & (pts < 1.0))
    assert np.unique(pts, axis=0).shape[0] == 500


def test_hilbert_size_constant(hilbert: KernelSpec) -> None:
    estimate = size_and_lipschitz(hilbert, budget=2048)
    assert estimate.size == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert estimate.lipschitz is not None
    assert estimate.lipschitz <= 2.0 / math.pi * (1.0 + 1e-9)
    assert estimate.skipped == 0


def test_riesz_lipschitz_stable_under_budget_doubling() -> None:
    kernel = resolve_kernel("riesz-1", d=1)
    small = size_and_lipschitz(kernel, budget=4096).lipschitz
    large = size_and_lipschitz(kernel, budget=8192).lipschitz
    assert small is not None and large is not None
    assert large >= small
    assert large <= small * 1.05


def test_zero_kernel_moduli() -> None:
    zero = KernelSpec(
        name="zero",
        kind=KernelKind.CONVOLUTION_SMOOTH,
        d=2,
        evaluator=lambda z: np.zeros(z.shape[:-1]),
        gamma=1.0,
    )
    estimate = size_and_lipschitz(zero, budget=256)
    assert (estimate.size, estimate.lipschitz) == (0.0, 0.0)


def test_delta_q_without_shift_is_zero(hilbert: KernelSpec) -> None:
    assert delta_q_modulus(hilbert, 3, 1.0, shifts=[[0.0]]) == 0.0


def test_delta_one_of_hilbert_at_first_annulus(hilbert: KernelSpec) -> None:
    # log(3/2) + log(6/5) from the two sides of 2 <= |x| <= 4 with v = 1
    expected = (math.log(1.5) + math.log(1.2)) / math.pi
    assert delta_q_modulus(hilbert, 1, 1.0) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_delta_q_of_hilbert_decays_geometrically(hilbert: KernelSpec, q: float) -> None:
    ms = list(range(1, 9))
    values = delta_q_profile(hilbert, ms, q)
    assert np.all(np.diff(values) < 0)
    assert decay_exponent(ms, values) == pytest.approx(1.0, rel=0.15)
    ratios = values[1:] / values[:-1]
    assert np.ptp(ratios[2:]) < 0.05


def test_rough_kernel_dini_sum_is_bounded() -> None:
    omega = RoughSymbol.named("cos", d=2)
    total, bound = rough_dini_sum(omega, range(1, 5), radial_order=32, angular=128)
    assert total > 0.0
    assert total <= 20.0 * bound


def test_cancellation_of_odd_kernel(hilbert: KernelSpec) -> None:
    report = cancellation_sup(hilbert, ladder=[2.0 * 2.0**-j for j in range(1, 5)])
    assert report.supremum == pytest.approx(0.0, abs=1e-14)
    assert report.cancellative
    assert np.allclose(report.ladder_integrals, 0.0, atol=1e-14)


def test_cancellation_of_mean_zero_rough_kernel() -> None:
    kernel = resolve_kernel("rough:cos", d=2)
    assert cancellation_sup(kernel).supremum <= 1e-8


def test_one_sided_kernel_is_flagged() -> None:
    kernel = resolve_kernel("one-sided", d=1)
    report = cancellation_sup(kernel)
    assert report.supremum == pytest.approx(math.log(1e3), rel=1e-10)
    assert report.worst_pair == pytest.approx((1e-3, 1.0))
    assert not report.cancellative


def test_omega_split_of_odd_symbol() -> None:
    omega = RoughSymbol.named("cos", d=2)
    diag = omega_tools(omega)
    assert diag.even.l1_norm() <= 1e-10
    assert np.allclose(diag.even.values + diag.odd.values, omega.values, atol=1e-15)
    assert omega.is_odd()
    assert not RoughSymbol.named("cos2", d=2).is_odd()


def test_omega_modulus_of_cosine() -> None:
    diag = omega_tools(RoughSymbol.named("cos", d=2))
    assert np.all(np.diff(diag.modulus) >= 0.0)
    for delta in (0.1, 0.5, 0.9):
        expected = 2.0 * math.sqrt(math.pi) * math.sin(delta / 2.0)
        assert diag.modulus_at(delta) == pytest.approx(expected, rel=1e-2)
    assert diag.dini == pytest.approx(COS_DINI, rel=1e-2)


def test_constant_symbol() -> None:
    omega = RoughSymbol.named("const", d=2)
    diag = omega_tools(omega)
    assert np.max(diag.modulus) <= 1e-14
    assert diag.dini <= 1e-12
    assert not omega.has_mean_zero()
    assert RoughSymbol.named("cos", d=2).has_mean_zero()


def test_one_dimensional_symbol_is_dini() -> None:
    omega = RoughSymbol.tabulate(1, lambda t: np.cos(t), enforce_mean_zero=False)
    assert omega.values.tolist() == pytest.approx([1.0, -1.0])
    assert omega_tools(omega).dini == 0.0
    assert omega.is_odd()


def test_symbol_from_csv(tmp_path) -> None:
    angles = 2.0 * math.pi * np.arange(64) / 64
    path = tmp_path / "wave.csv"
    path.write_text(
        "angle,value\n" + "\n".join(f"{float(a)!r},{math.cos(a)!r}" for a in angles) + "\n"
    )
    omega = RoughSymbol.from_csv(path, d=2)
    assert omega.name == "wave"
    assert omega.resolution == 512
    assert np.allclose(omega.values, RoughSymbol.named("cos", d=2).values, atol=2e-3)


def test_registry_rejects_unknown_names() -> None:
    with pytest.raises(KernelRegistryError):
        resolve_kernel("hilbert", d=2)
    with pytest.raises(KernelRegistryError):
        resolve_kernel("riesz-3", d=2)
    with pytest.raises(KernelRegistryError):
        resolve_kernel("rough:nothing", d=2)
    with pytest.raises(KernelRegistryError):
        resolve_kernel("poisson", d=1)


def test_registry_custom_factory(tmp_path) -> None:
    (tmp_path / "nccz_sample_kernels.py").write_text(
        "import numpy as np\n"
        "from nccz.kernels import KernelKind, KernelSpec\n"
        "\n"
        "def tilted(d, weight=1.0):\n"
        "    return KernelSpec(\n"
        "        name='tilted',\n"
        "        kind=KernelKind.CUSTOM_NONCONVOLUTION,\n"
        "        d=d,\n"
        "        evaluator=lambda z: weight / z[..., 0],\n"
        "        pair_evaluator=lambda x, y: (\n"
        "            weight * (1.0 + x[..., 0] ** 2) / (x[..., 0] - y[..., 0])\n"
        "        ),\n"
        "    )\n"
    )
    kernel = resolve_kernel(
        f"custom:nccz_sample_kernels:tilted@{tmp_path}", d=1, params={"weight": 2.0}
    )
    assert not kernel.is_convolution
    value = kernel.evaluate_pair(np.array([[1.0]]), np.array([[0.5]]))
    assert value[0] == pytest.approx(8.0)

    with pytest.raises(KernelRegistryError):
        resolve_kernel(f"custom:nccz_sample_kernels:missing@{tmp_path}", d=1)


def test_phase_splits_into_real_and_imaginary(hilbert: KernelSpec) -> None:
    rotated = resolve_kernel("hilbert", d=1, params={"phase": 0.3})
    z = np.array([[0.5], [-2.0]])
    assert not rotated.is_real
    assert np.allclose(rotated.real_part().evaluate(z), math.cos(0.3) * hilbert.evaluate(z))
    assert np.allclose(rotated.imag_part().evaluate(z), math.sin(0.3) * hilbert.evaluate(z))


def test_bump_and_cutoff_profiles() -> None:
    r = np.linspace(0.0, 3.0, 601)
    b = bump(r)
    assert np.all(b[(r < 0.5) | (r > 2.0)] == 0.0)
    assert np.all(b >= 0.0)
    c = smooth_cutoff(r)
    assert np.all(c[r <= 0.25] == 0.0)
    assert np.all(c[r >= 0.75] == 1.0)


def test_partition_of_unity_on_grid_box() -> None:
    family = PartitionFamily.for_grid(2, 0, 4, top=4)
    rng = np.random.default_rng(5)
    z = rng.uniform(-1.0, 1.0, size=(5000, 2))
    # Stay two cells away from the origin
    z = z[np.hypot(z[:, 0], z[:, 1]) >= 2.0 / 16.0]
    assert np.max(family.residual(z)) <= 1e-10

    for i in family.indices():
        inner, outer = family.annulus(i)
        radius = np.hypot(z[:, 0], z[:, 1])
        outside = (radius < inner) | (radius > outer)
        assert np.all(family.phi(i, z)[outside] == 0.0)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=-3, max_value=3),
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_partial_sums_telescope(lo: int, width: int, u: float) -> None:
    family = PartitionFamily(1, lo - 2, lo + width + 2)
    radius = 2.0 ** (-lo - width + 1 + u * width)
    z = np.array([[radius]])
    pieces = sum(family.phi(i, z) for i in range(lo, lo + width))
    assert pieces[0] == pytest.approx(family.partial_sum(lo, lo + width, z)[0], abs=1e-12)


def test_difference_kernel_vanishes_at_center(hilbert: KernelSpec) -> None:
    family = PartitionFamily(1, -2, 8)
    diff = difference_kernel(hilbert, family, 0, 4)
    center = np.array([[3.5 / 16.0]])
    x = np.linspace(-3.0, 3.0, 401)[:, None]
    assert np.all(diff(x, np.broadcast_to(center, x.shape)) == 0.0)


def test_difference_kernel_support() -> None:
    kernel = resolve_kernel("hilbert", d=1)
    family = PartitionFamily(1, -2, 8)
    i, n = 0, 4
    diff = difference_kernel(kernel, family, i, n)
    y = np.array([[0.3]])
    x = np.linspace(-4.0, 4.0, 8001)[:, None]
    values = diff(x, np.broadcast_to(y, x.shape))

    side = 2.0**-n
    lower = math.floor(0.3 / side) * side
    dist = np.maximum(np.maximum(lower - x[:, 0], x[:, 0] - (lower + side)), 0.0)
    lo, hi = diff.support_band()
    hits = values != 0.0
    assert np.any(hits)
    assert np.all((dist[hits] >= lo) & (dist[hits] <= hi))


def test_difference_kernel_l1_bound(hilbert: KernelSpec) -> None:
    family = PartitionFamily(1, -2, 10)
    ys = np.random.default_rng(8).uniform(0.0, 1.0, 12)
    i = 0
    for n in (3, 5, 7):
        lhs = difference_l1(hilbert, family, i, n, ys)
        rhs = (
            delta_q_modulus(hilbert, n - i, 1.0)
            + delta_q_modulus(hilbert, n - i + 1, 1.0)
            + 2.0 ** (i - n)
        )
        assert np.all(lhs <= 8.0 * rhs)
