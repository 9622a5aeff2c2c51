"""
certificates.py

The constructive weak type (1, 1) pipeline for the maximal truncations of a
Calderon-Zygmund operator, plus the two experiments that reuse its parts:
Cotlar's inequality in norm form and the bilateral almost uniform Cauchy
test.

Every stage emits a projection field with the inequalities it promises,
re-measured after construction:

* eta bounds the boundary pieces through the ball averages of f;
* e1 cuts a strong maximal majorant of the lacunary transforms of g;
* e2 and e3 cut the majorants F1 and F2 of the two bad parts under zeta.

The assembled projection is the meet of the four, and its trace deficit is
at most the sum of theirs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from nccz.core.dyadic import DyadicGrid, OperatorField, field_norm, level_means, trace_phi
from nccz.core.operator import (
    absolute,
    clamp_spectrum,
    eigvalsh,
    general_operator_norm,
    hermitize,
    keep_below,
    loewner_slack,
    meet,
    meet_many,
    operator_norm,
    projection_defect,
)
from nccz.core.quadrature import (
    GridQuadrature,
    QuadratureSettings,
    composite_gauss,
    gauss_legendre,
    masked_product,
)
from nccz.core.serializable import ISerializable
from nccz.decomposition import CZDecomposition, StartingIndexError, decompose
from nccz.kernels import KernelSpec, decay_exponent, difference_kernel, norms, plateau
from nccz.maximal import MaximalFamily, strong_max_norm, weak_max_quasinorm_upper
from nccz.operators import SingularIntegralOperator
from nccz.reports import CauchySummary, CotlarSummary, PropertyCheck, Weak11Summary

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

DEFAULT_P0 = 2.0
SANDWICH_TOL = 1e-9
ORDER_TOL = 1e-4
HOLDER_SAMPLES = 64
HOLDER_ORDER = 4
DOMINATION_SPREAD = 1.25


@dataclass
class StageProjection(ISerializable):
    """
    One projection of the pipeline with the bounds it was checked against

    Attributes
    ----------
    name: str
        Stage identifier
    e: OperatorField
        The projection field
    deficit: float
        phi(1 - e)
    checks: Dict[str, PropertyCheck]
        Inequalities measured on e
    degenerate: bool
        True when the stage had to fall back to e = 0
    details: Dict[str, float]
        Diagnostics that are reported but not checked
    """

    name: str
    e: OperatorField
    deficit: float
    checks: Dict[str, PropertyCheck] = field(default_factory=dict)
    degenerate: bool = False
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "deficit": self.deficit,
            "degenerate": self.degenerate,
            "checks": {k: c.model_dump() for k, c in self.checks.items()},
            "details": dict(self.details),
        }


# ---------------------------------------------------------------------------
# Shared measurements
# ---------------------------------------------------------------------------


def deficit_of(e: OperatorField) -> float:
    """phi(1 - e)"""
    missing = OperatorField.identity(e.grid, e.n) - e
    return max(0.0, float(np.real(trace_phi(missing))))


def compressed_sup(e: npt.ArrayLike, fields: Sequence[OperatorField]) -> float:
    """max over the fields and cells of ||e x e||_inf; x need not be Hermitian"""
    ea = np.asarray(e, dtype=np.complex128)
    worst = 0.0
    for x in fields:
        y = ea @ x.values @ ea
        worst = max(worst, float(np.max(general_operator_norm(y), initial=0.0)))
    return worst


def sandwich_check(x: npt.ArrayLike, a: npt.ArrayLike, tol: float = SANDWICH_TOL) -> PropertyCheck:
    """
    -a <= x <= a in every cell

    lhs is the worst Loewner violation relative to 1 + ||a|| + ||x||, so the
    check reads lhs <= 0 up to tol.
    """
    xa = hermitize(x)
    aa = hermitize(a)
    if xa.shape[0] == 0:
        return PropertyCheck.at_most(0.0, 0.0)
    scale = 1.0 + operator_norm(aa) + operator_norm(xa)
    violation = float(np.max(-loewner_slack(xa, aa) / scale))
    return PropertyCheck.at_most(max(violation, 0.0), 0.0, tol)


def ladder_indices(op: SingularIntegralOperator) -> List[int]:
    return [op.ladder.j_of(eps) for eps in op.ladder]


def vanishing_index(level: int, d: int, s: int) -> int:
    """
    The first partition index i with zeta(x) T_{phi,i} b_level(x) zeta(x) = 0

    phi_i lives within 2^{-i+1} sqrt d of the origin and zeta(x) p_Q = 0 on
    the dilate (2s + 1)Q, whose boundary is at least s 2^{-level} away from
    every point of Q. In one dimension with s = 4 this is level - 1.
    """
    return level + 1 - int(math.floor(math.log2(s / math.sqrt(d)) + 1e-12))


def _centre_term(
    op: SingularIntegralOperator,
    piece: OperatorField,
    cubes: Sequence[int],
    level: int,
    i: int,
) -> ComplexArray:
    """sum over the given level cubes Q of k^phi_i(x, c_Q) integral_Q b, at every midpoint"""
    grid = op.grid
    n = piece.n
    out = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    if len(cubes) == 0:
        return out
    means = level_means(piece, level)
    midpoints = grid.midpoints
    kernel = difference_kernel(op.kernel, op.partition, i, level)
    for flat in cubes:
        cube = grid.cube(level, int(flat))
        mass = means[int(flat)] * cube.volume
        if not np.any(mass):
            continue
        centre = np.broadcast_to(np.asarray(cube.center), midpoints.shape)
        weights = kernel.piece(midpoints, centre)
        out += weights[:, None, None] * mass[None]
    return out


def _difference_transform(
    op: SingularIntegralOperator,
    piece: OperatorField,
    cubes: Sequence[int],
    level: int,
    i: int,
) -> ComplexArray:
    """integral of k^phi_{i,level}(x, y) b(y) dy at every midpoint"""
    return op.piece(piece, i).values - _centre_term(op, piece, cubes, level, i)


# ---------------------------------------------------------------------------
# The four projections
# ---------------------------------------------------------------------------


def boundary_projection_eta(
    op: SingularIntegralOperator, f: OperatorField, lam: float
) -> StageProjection:
    """
    eta from the weak certificate of the averages (M_{2^{-j+1} sqrt d} f)_j

    The boundary pieces satisfy -C M f <= T^phi_{eps,j} f <= C M f with the
    measured sandwich constant C, so ||eta T^phi_{eps,j} f eta|| <= C lambda.
    """
    averages = op.average_family(f)
    family = MaximalFamily.from_fields(averages, list(op.ladder.epsilons))
    cert = weak_max_quasinorm_upper(family, lam)
    constant = float(np.max(op.boundary_sandwich(f), initial=0.0))
    if math.isinf(constant):
        logger.warning("Boundary pieces leak outside the support of the averages")

    measured = compressed_sup(cert.e, op.boundary_family(f))
    excess = max(0.0, cert.worst - lam)
    checks = {
        "eta_averages": PropertyCheck.at_most(cert.worst, lam, 1e-9 * (1.0 + lam) + excess),
        "eta_boundary": PropertyCheck.at_most(
            measured,
            constant * lam,
            constant * excess + SANDWICH_TOL * (1.0 + measured + constant * lam),
        ),
    }
    return StageProjection(
        "eta",
        OperatorField(f.grid, cert.e),
        cert.deficit,
        checks,
        cert.degenerate,
        {"boundary_constant": constant, "worst": cert.worst},
    )


def good_projection_e1(
    op: SingularIntegralOperator,
    dec: CZDecomposition,
    lam: float,
    p0: float = DEFAULT_P0,
) -> StageProjection:
    """
    e1 = chi_[0, lambda](a) for a strong majorant a of (T^phi_j g)_j at p0

    e1 commutes with a, so e1 a e1 <= lambda e1 and the majorant bound
    -a <= T^phi_j g <= a passes to -lambda <= e1 T^phi_j g e1 <= lambda.
    Chebyshev gives phi(1 - e1) <= ||a||_{p0}^{p0} / lambda^{p0}.
    """
    grid = dec.grid
    fields = [op.lacunary(dec.g, j) for j in ladder_indices(op)]
    family = MaximalFamily.from_fields(fields, ladder_indices(op))
    cert = strong_max_norm(family, p0)
    a = hermitize(cert.a)
    e = keep_below(a, lam)

    measured = compressed_sup(e, fields)
    infeasible = max(0.0, -cert.slack)
    mass = grid.cell_volume * float(np.sum(np.abs(eigvalsh(a)) ** p0))
    chebyshev = mass / lam**p0
    deficit = deficit_of(OperatorField(grid, e))

    g_one = field_norm(dec.g, 1.0)
    g_inf = field_norm(dec.g, math.inf)
    checks = {
        "e1_sandwich": PropertyCheck.at_most(
            measured, lam, infeasible + SANDWICH_TOL * (1.0 + lam)
        ),
        "e1_chebyshev": PropertyCheck.at_most(deficit, chebyshev, 1e-9 * (1.0 + chebyshev)),
    }
    details = {
        "majorant_norm": cert.objective,
        "dual_bound": cert.dual_bound,
        "good_holder": g_one * g_inf ** (p0 - 1.0) / lam**p0,
        "fallback": float(cert.fallback),
    }
    return StageProjection("e1", OperatorField(grid, e), deficit, checks, False, details)


def _bad_stage(
    name: str,
    op: SingularIntegralOperator,
    dec: CZDecomposition,
    pieces: Dict[int, OperatorField],
    majorant: OperatorField,
    lam: float,
) -> StageProjection:
    """e = zeta ^ chi_[0, lambda](zeta F zeta) with the sandwich and vanishing checks"""
    grid = dec.grid
    n = dec.g.n
    zeta = dec.zeta.values
    compressed = hermitize(zeta @ majorant.values @ zeta)
    e = meet(zeta, keep_below(compressed, lam), strict=False)

    total = OperatorField.zeros(grid, n)
    for piece in pieces.values():
        total = total + piece
    transforms = [op.lacunary(total, j) for j in ladder_indices(op)]

    worst_sandwich = PropertyCheck.at_most(0.0, 0.0)
    for x in transforms:
        check = sandwich_check(zeta @ x.values @ zeta, compressed)
        if check.lhs > worst_sandwich.lhs or not check.holds:
            worst_sandwich = check

    vanishing = 0.0
    scale = 0.0
    for level, piece in pieces.items():
        cut = max(vanishing_index(level, grid.d, dec.s), op.partition.i_min)
        for i in range(cut, op.partition.i_max + 1):
            y = op.piece(piece, i).values
            scale = max(scale, float(np.max(general_operator_norm(y), initial=0.0)))
            vanishing = max(
                vanishing, float(np.max(general_operator_norm(zeta @ y @ zeta), initial=0.0))
            )

    e_field = OperatorField(grid, e)
    deficit = deficit_of(e_field)
    zeta_deficit = deficit_of(dec.zeta)
    f_one = field_norm(majorant, 1.0)
    measured = compressed_sup(e, transforms)
    checks = {
        f"{name}_sandwich": worst_sandwich,
        f"{name}_vanishing": PropertyCheck.at_most(vanishing, 0.0, 1e-8 * (1.0 + scale)),
        f"{name}_bound": PropertyCheck.at_most(measured, lam, ORDER_TOL * (1.0 + lam + measured)),
        f"{name}_trace": PropertyCheck.at_most(
            deficit, zeta_deficit + f_one / lam, 1e-9 * (1.0 + deficit)
        ),
    }
    details = {"zeta_deficit": zeta_deficit, "majorant_l1": f_one}
    return StageProjection(name, e_field, deficit, checks, False, details)


def majorant_F1(
    op: SingularIntegralOperator, dec: CZDecomposition, lam: float
) -> Tuple[OperatorField, StageProjection]:
    """
    F1(x) = sum_n sum_{i below the vanishing index} |integral k^phi_{i,n}(x, y) b_{d,n}(y) dy|
    and the projection e2 = zeta ^ chi_[0, lambda](zeta F1 zeta)
    """
    grid = dec.grid
    n = dec.g.n
    total = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    for level, piece in dec.bd.items():
        cubes = dec.family.active_cubes(level)
        cut = min(vanishing_index(level, grid.d, dec.s), op.partition.i_max + 1)
        for i in range(op.partition.i_min, cut):
            total += absolute(hermitize(_difference_transform(op, piece, cubes, level, i)))
    majorant = OperatorField(grid, total)
    stage = _bad_stage("e2", op, dec, dec.bd, majorant, lam)
    bd_one = sum(field_norm(b, 1.0) for b in dec.bd.values())
    stage.details["bad_l1"] = bd_one
    stage.details["majorant_over_bad"] = (
        field_norm(majorant, 1.0) / bd_one if bd_one > 0 else 0.0
    )
    return majorant, stage


def majorant_F2(
    op: SingularIntegralOperator,
    dec: CZDecomposition,
    lam: float,
    f: OperatorField,
    holder_samples: int = HOLDER_SAMPLES,
) -> Tuple[OperatorField, StageProjection]:
    """
    F2(x) = sum_n sum_i sum_{Q in Q_n} |integral_Q k^phi_{i,n}(x, y) b_n(y) dy|
    and e3 = zeta ^ chi_[0, lambda](zeta F2 zeta)

    The column Hoelder step and the Cauchy-Schwarz sum over cubes are
    measured alongside.
    """
    grid = dec.grid
    n = dec.g.n
    total = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    for level, piece in dec.boff.items():
        labels = grid.level_labels(level)
        cut = min(vanishing_index(level, grid.d, dec.s), op.partition.i_max + 1)
        for flat in dec.family.active_cubes(level):
            mask = (labels == flat)[:, None, None]
            local = piece.with_values(piece.values * mask)
            if not np.any(local.values):
                continue
            for i in range(op.partition.i_min, cut):
                y = _difference_transform(op, local, [int(flat)], level, i)
                total += absolute(hermitize(y))
    majorant = OperatorField(grid, total)
    stage = _bad_stage("e3", op, dec, dec.boff, majorant, lam)

    holder, count = holder_check(op, dec, f, lam, holder_samples)
    stage.checks["e3_holder"] = holder
    stage.details["holder_samples"] = float(count)
    for level, check in cube_sum_checks(dec, f, lam).items():
        stage.checks[f"e3_cube_sum_{level}"] = check
    return majorant, stage


def _cell_nodes(
    grid: DyadicGrid, cells: npt.NDArray[np.int64], order: int
) -> Tuple[RealArray, RealArray]:
    """Tensor Gauss nodes shaped (cells, order^d, d) and the weights of one cell"""
    h = grid.cell_side
    t, w = gauss_legendre(-0.5 * h, 0.5 * h, order)
    if grid.d == 1:
        offsets = t[:, None]
        weights = w
    else:
        tx, ty = np.meshgrid(t, t, indexing="ij")
        offsets = np.stack([tx.reshape(-1), ty.reshape(-1)], axis=1)
        weights = np.outer(w, w).reshape(-1)
    return grid.midpoints[cells][:, None, :] + offsets[None], weights


def holder_check(
    op: SingularIntegralOperator,
    dec: CZDecomposition,
    f: OperatorField,
    lam: float,
    max_samples: int = HOLDER_SAMPLES,
    order: int = HOLDER_ORDER,
) -> Tuple[PropertyCheck, int]:
    """
    ||integral_Q k^phi_{i,n}(x, y) p_Q f(y) q_Q dy||_1
        <= ||integral_Q |k^phi_{i,n}(x, y)|^2 p_Q f(y) p_Q dy||_{1/2}^{1/2} (|Q| lambda)^{1/2}

    on sampled tuples (x, i, n, Q). Both sides use the same positive Gauss
    rule in every cell, for which the inequality is exact. lhs of the
    returned check is the worst violation relative to 1 + rhs.
    """
    grid = dec.grid
    family = dec.family
    midpoints = grid.midpoints
    root = math.sqrt(grid.d)
    worst = 0.0
    count = 0
    for level in dec.levels:
        labels = grid.level_labels(level)
        cut = min(vanishing_index(level, grid.d, dec.s), op.partition.i_max + 1)
        for flat in family.active_cubes(level):
            if count >= max_samples:
                break
            q_cube, p_cube = family.per_cube(level, int(flat))
            cells = np.flatnonzero(labels == flat)
            points, weights = _cell_nodes(grid, cells, order)
            flat_points = points.reshape(-1, grid.d)
            cube = grid.cube(level, int(flat))
            distance = norms(midpoints - np.asarray(cube.center)[None, :])
            half_diagonal = 0.5 * root * cube.side
            f_cells = f.values[cells]
            for i in range(op.partition.i_min, cut):
                inner, outer = op.partition.annulus(i)
                near = np.flatnonzero(
                    (distance >= inner - half_diagonal) & (distance <= outer + half_diagonal)
                )
                if near.size == 0:
                    continue
                kernel = difference_kernel(op.kernel, op.partition, i, level)
                picks = near[np.unique(np.linspace(0, near.size - 1, 2).astype(np.int64))]
                for x in picks:
                    k = np.real(
                        kernel(np.broadcast_to(midpoints[x], flat_points.shape), flat_points)
                    ).reshape(cells.size, -1)
                    w1 = k @ weights
                    w2 = (k * k) @ weights
                    left = np.einsum("c,ab,cbd,de->ae", w1, p_cube, f_cells, q_cube)
                    inner_sq = hermitize(np.einsum("c,ab,cbd,de->ae", w2, p_cube, f_cells, p_cube))
                    lhs = float(np.sum(np.linalg.svd(left, compute_uv=False)))
                    half_norm = float(np.sum(np.sqrt(np.maximum(eigvalsh(inner_sq), 0.0))))
                    rhs = half_norm * math.sqrt(cube.volume * lam)
                    worst = max(worst, (lhs - rhs) / (1.0 + rhs))
                    count += 1
    return PropertyCheck.at_most(max(worst, 0.0), 0.0, 1e-10), count


def cube_sum_checks(dec: CZDecomposition, f: OperatorField, lam: float) -> Dict[int, PropertyCheck]:
    """
    sum_Q (tau(p_Q) phi(f p_Q chi_Q) |Q| lambda)^{1/2}
        <= (lambda phi(p_n))^{1/2} (phi(f p_n))^{1/2}, per level n
    """
    out: Dict[int, PropertyCheck] = {}
    for level in dec.levels:
        active = dec.family.active_cubes(level)
        volume = dec.grid.cube(level, 0).volume
        p = dec.family.p_cubes[level][active]
        means = level_means(f, level)[active]
        tau_p = np.real(np.trace(p, axis1=-2, axis2=-1))
        tau_fp = np.maximum(np.real(np.trace(means @ p, axis1=-2, axis2=-1)), 0.0)
        lhs = float(np.sum(np.sqrt(tau_p * volume * tau_fp * volume * lam)))
        rhs = math.sqrt(lam * volume * float(np.sum(tau_p))) * math.sqrt(
            volume * float(np.sum(tau_fp))
        )
        out[level] = PropertyCheck.at_most(lhs, rhs, 1e-12 * (1.0 + rhs))
    return out


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


@dataclass
class Weak11Certificate(ISerializable):
    """
    The assembled projection e and everything it was built from

    Attributes
    ----------
    lam: float
        The level lambda
    e: OperatorField
        The meet of the stage projections
    stages: Dict[str, StageProjection]
        The stage projections by name
    summary: Weak11Summary
        The measured budget
    decomposition: CZDecomposition, optional
        Absent when lambda is below the coarsest averages
    f1: OperatorField, optional
        The diagonal majorant
    f2: OperatorField, optional
        The off-diagonal majorant
    """

    lam: float
    e: OperatorField
    stages: Dict[str, StageProjection]
    summary: Weak11Summary
    decomposition: Optional[CZDecomposition] = None
    f1: Optional[OperatorField] = None
    f2: Optional[OperatorField] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "summary": self.summary.model_dump(),
            "stages": {k: s.to_dict() for k, s in self.stages.items()},
        }


def _check_pipeline_input(f: OperatorField, lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not f.is_psd():
        raise ValueError("The weak type certificate needs a PSD field")


def _order_defect(e: ComplexArray, stages: Sequence[StageProjection]) -> float:
    """max over stages of ||s e - e||, zero exactly when e <= s"""
    worst = 0.0
    for stage in stages:
        diff = stage.e.values @ e - e
        worst = max(worst, float(np.max(general_operator_norm(diff), initial=0.0)))
    return worst


def _assembly_checks(
    op: SingularIntegralOperator,
    f: OperatorField,
    lam: float,
    e: ComplexArray,
    stages: Sequence[StageProjection],
    bound: float,
) -> Tuple[Dict[str, PropertyCheck], float, float]:
    truncated = op.truncated_family(f)
    lacunary = op.lacunary_family(f)
    sup_truncated = compressed_sup(e, truncated)
    sup_lacunary = compressed_sup(e, lacunary)
    reach = max(compressed_sup(np.eye(f.n), truncated), 1.0)

    e_field = OperatorField(f.grid, e)
    budget = sum(s.deficit for s in stages)
    checks = {
        "projection": PropertyCheck.at_most(
            float(np.max(projection_defect(e), initial=0.0)), 0.0, ORDER_TOL
        ),
        "order": PropertyCheck.at_most(_order_defect(e, stages), 0.0, ORDER_TOL),
        "trace_subadditive": PropertyCheck.at_most(
            deficit_of(e_field), budget, 1e-9 * (1.0 + budget)
        ),
        "sup_bound": PropertyCheck.at_most(
            sup_truncated, bound, ORDER_TOL * (1.0 + bound + reach)
        ),
    }
    return checks, sup_truncated, sup_lacunary


def _summary(
    op: SingularIntegralOperator,
    f: OperatorField,
    lam: float,
    e: OperatorField,
    stages: Dict[str, StageProjection],
    checks: Dict[str, PropertyCheck],
    sups: Tuple[float, float],
    constant: float,
    majorants: Tuple[float, float],
    degenerate: List[str],
) -> Weak11Summary:
    f_one = field_norm(f, 1.0)
    total = deficit_of(e)
    for stage in stages.values():
        for key, check in stage.checks.items():
            checks.setdefault(key, check)
    return Weak11Summary(
        lam=lam,
        kernel=op.kernel.name,
        f_l1=f_one,
        deficits={name: s.deficit for name, s in stages.items()},
        trace_total=total,
        deficit_ratio=total * lam / f_one if f_one > 0 else 0.0,
        sup_truncated=sups[0],
        sup_lacunary=sups[1],
        sup_ratio=sups[0] / lam,
        boundary_constant=constant,
        majorant_f1=majorants[0] / f_one if f_one > 0 else 0.0,
        majorant_f2=majorants[1] / f_one if f_one > 0 else 0.0,
        checks=checks,
        degenerate_stages=degenerate,
    )


def _real_certificate(
    op: SingularIntegralOperator,
    f: OperatorField,
    lam: float,
    p0: float,
    holder_samples: int,
) -> Weak11Certificate:
    grid = f.grid
    eta = boundary_projection_eta(op, f, lam)
    constant = eta.details["boundary_constant"]
    degenerate = ["eta"] if eta.degenerate else []

    try:
        dec = decompose(f, lam)
    except StartingIndexError as err:
        logger.warning("No decomposition at lambda=%g (%s); certifying e = 0", lam, err)
        e = OperatorField.zeros(grid, f.n)
        stages = {"eta": eta}
        checks, sup_t, sup_l = _assembly_checks(op, f, lam, e.values, [], 0.0)
        checks["trace_subadditive"] = PropertyCheck.at_most(
            deficit_of(e), f.n * grid.volume, 1e-9 * f.n * grid.volume
        )
        summary = _summary(
            op, f, lam, e, stages, checks, (sup_t, sup_l), constant, (0.0, 0.0),
            degenerate + ["decomposition"],
        )
        return Weak11Certificate(lam, e, stages, summary)

    e1 = good_projection_e1(op, dec, lam, p0)
    f1, e2 = majorant_F1(op, dec, lam)
    f2, e3 = majorant_F2(op, dec, lam, f, holder_samples)
    stages = {"eta": eta, "e1": e1, "e2": e2, "e3": e3}

    e = meet_many([s.e.values for s in stages.values()], strict=False)
    bound = (3.0 + constant) * lam
    checks, sup_t, sup_l = _assembly_checks(op, f, lam, e, list(stages.values()), bound)
    checks["lacunary_bound"] = PropertyCheck.at_most(
        sup_l, 3.0 * lam, ORDER_TOL * (1.0 + 3.0 * lam + sup_l)
    )
    e_field = OperatorField(grid, e)
    summary = _summary(
        op,
        f,
        lam,
        e_field,
        stages,
        checks,
        (sup_t, sup_l),
        constant,
        (field_norm(f1, 1.0), field_norm(f2, 1.0)),
        degenerate,
    )
    if not summary.passed:
        logger.warning("Weak type certificate at lambda=%g failed: %s", lam, summary.failed())
    return Weak11Certificate(lam, e_field, stages, summary, dec, f1, f2)


def weak11_certificate(
    op: SingularIntegralOperator,
    f: OperatorField,
    lam: float,
    p0: float = DEFAULT_P0,
    holder_samples: int = HOLDER_SAMPLES,
) -> Weak11Certificate:
    """
    Assemble e = eta ^ e1 ^ e2 ^ e3 and measure sup_eps ||e T_eps f e|| and phi(1 - e)

    Complex kernels are certified through their real and imaginary parts
    and the two projections are met. A lambda below the coarsest averages
    yields the trivial projection e = 0 and a flagged report instead of an
    exception.

    Parameters
    ----------
    op: SingularIntegralOperator
        Kernel, grid, ladder and partition
    f: OperatorField
        PSD input field
    lam: float
        Positive level
    p0: float
        Exponent of the strong majorant used for e1
    holder_samples: int
        Number of tuples sampled by the column Hoelder check

    Returns
    -------
    Weak11Certificate
        The projection, its stages and the measured summary
    """
    _check_pipeline_input(f, lam)
    if op.kernel.is_real:
        return _real_certificate(op, f, lam, p0, holder_samples)

    parts = {}
    for label, kernel in (("re", op.kernel.real_part()), ("im", op.kernel.imag_part())):
        part_op = SingularIntegralOperator(kernel, op.grid, op.ladder, op.settings, op.partition)
        parts[label] = _real_certificate(part_op, f, lam, p0, holder_samples)

    e = meet(parts["re"].e.values, parts["im"].e.values, strict=False)
    stages = {
        f"{label}:{name}": stage
        for label, cert in parts.items()
        for name, stage in cert.stages.items()
    }
    constant = parts["re"].summary.boundary_constant + parts["im"].summary.boundary_constant
    bound = (6.0 + constant) * lam
    checks, sup_t, sup_l = _assembly_checks(op, f, lam, e, list(stages.values()), bound)
    for label, cert in parts.items():
        for key, check in cert.summary.checks.items():
            checks[f"{label}:{key}"] = check
    degenerate = [
        f"{label}:{name}"
        for label, cert in parts.items()
        for name in cert.summary.degenerate_stages
    ]
    e_field = OperatorField(f.grid, e)
    majorants = (
        parts["re"].summary.majorant_f1 + parts["im"].summary.majorant_f1,
        parts["re"].summary.majorant_f2 + parts["im"].summary.majorant_f2,
    )
    f_one = field_norm(f, 1.0)
    summary = _summary(
        op,
        f,
        lam,
        e_field,
        stages,
        checks,
        (sup_t, sup_l),
        constant,
        (majorants[0] * f_one, majorants[1] * f_one),
        degenerate,
    )
    return Weak11Certificate(lam, e_field, stages, summary)


def weak11_sweep(
    op: SingularIntegralOperator,
    f: OperatorField,
    lambdas: Sequence[float],
    p0: float = DEFAULT_P0,
) -> List[Weak11Summary]:
    return [weak11_certificate(op, f, float(lam), p0).summary for lam in lambdas]


def spread(values: Sequence[float]) -> float:
    """max / min over the positive values; 1 when fewer than two are positive"""
    positive = [v for v in values if v > 0.0 and math.isfinite(v)]
    if len(positive) < 2:
        return 1.0
    return max(positive) / min(positive)


# ---------------------------------------------------------------------------
# Cotlar's inequality in norm form
# ---------------------------------------------------------------------------


def _bump_mass(d: int) -> float:
    """integral of plateau(2|z|) over R^d, the mass of the unit mollifier"""
    r, w = composite_gauss(np.linspace(0.0, 1.0, 33), 16)
    values = plateau(2.0 * r)
    if d == 1:
        return 2.0 * float(np.sum(w * values))
    return 2.0 * math.pi * float(np.sum(w * values * r))


def _is_odd(kernel: KernelSpec) -> bool:
    z = np.geomspace(1e-2, 1e2, 33)[:, None]
    if kernel.d == 2:
        angle = np.linspace(0.0, 2.0 * math.pi, 33)
        z = np.stack([z[:, 0] * np.cos(angle), z[:, 0] * np.sin(angle)], axis=1)
    plus = np.real(kernel.evaluate(z))
    minus = np.real(kernel.evaluate(-z))
    return bool(np.max(np.abs(plus + minus)) <= 1e-10 * np.max(np.abs(plus)))


def _mollified_kernel(kernel: KernelSpec, x: float, eps: float, mass: float) -> float:
    """(phi_eps * k)(x) in one dimension for an odd kernel, as a regular integral"""
    a = abs(x)
    cuts = np.array([0.0, a - eps, a - 0.5 * eps, a + 0.5 * eps, a + eps])
    cuts = np.unique(np.clip(cuts, 0.0, None))
    breaks = np.unique(
        np.concatenate([np.linspace(lo, hi, 9) for lo, hi in zip(cuts[:-1], cuts[1:])])
    )
    y, w = composite_gauss(breaks, 16)
    scale = 1.0 / (mass * eps)
    bump_minus = scale * plateau(2.0 * np.abs(x - y) / eps)
    bump_plus = scale * plateau(2.0 * np.abs(x + y) / eps)
    values = (bump_minus - bump_plus) * np.real(kernel.evaluate(y[:, None]))
    return float(np.sum(w * values))


def kernel_domination(
    kernel: KernelSpec, epsilons: Sequence[float], samples: int = 41
) -> Optional[Dict[str, float]]:
    """
    max over sampled x of |k chi_{|x| > eps} - phi_eps * k|(x) (1 + |x| / eps)^{d + gamma} eps^d
    for every eps, with phi the normalized glue bump of radius eps

    Only odd, real, Lipschitz convolution kernels in one dimension are
    sampled; None is returned otherwise.
    """
    if (
        kernel.d != 1
        or not kernel.is_convolution
        or not kernel.is_real
        or kernel.gamma is None
        or not _is_odd(kernel)
    ):
        logger.debug("Kernel domination is not sampled for %s", kernel.name)
        return None

    mass = _bump_mass(1)
    exponent = 1.0 + kernel.gamma
    ts = np.geomspace(0.05, 50.0, samples)
    maxima = []
    for eps in epsilons:
        worst = 0.0
        for t in ts:
            x = t * eps
            sharp = float(np.real(kernel.evaluate(np.array([[x]])))[0]) if t > 1.0 else 0.0
            smooth = _mollified_kernel(kernel, x, eps, mass)
            worst = max(worst, abs(sharp - smooth) * (1.0 + t) ** exponent * eps)
        maxima.append(worst)
    out = {f"{eps:.6g}": m for eps, m in zip(epsilons, maxima)}
    out["constant"] = max(maxima)
    out["spread"] = spread(maxima)
    return out


def cotlar_norm_check(
    op: SingularIntegralOperator,
    f: OperatorField,
    p: float = 2.0,
    ratio_bound: float = 10.0,
) -> CotlarSummary:
    """
    ||sup+_eps T_eps f||_p against ||sup+_eps M_eps(T f)||_p + ||sup+_eps M_eps f||_p

    T f is T at the finest ladder radius; the relative change between the two
    finest truncations is reported as the substitution drift.
    """
    if p != 2.0:
        raise ValueError(f"The Cotlar check runs at p = 2, got {p}")
    labels = list(op.ladder.epsilons)
    truncated = op.truncated_family(f)
    finest = truncated[-1]

    smoothed = [op.average(finest, eps) for eps in labels]
    lhs = strong_max_norm(MaximalFamily.from_fields(hermitian_members(truncated)), p).objective
    transform = strong_max_norm(MaximalFamily.from_fields(hermitian_members(smoothed)), p).objective
    averages = strong_max_norm(
        MaximalFamily.from_fields([op.average(f, eps) for eps in labels], labels), p
    ).objective
    rhs = transform + averages
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else math.inf

    drift = 0.0
    if len(truncated) >= 2:
        top = field_norm(finest, math.inf)
        change = field_norm(finest - truncated[-2], math.inf)
        drift = change / top if top > 0 else 0.0

    checks = {"cotlar_ratio": PropertyCheck.at_most(ratio, ratio_bound)}
    domination = kernel_domination(op.kernel, labels)
    if domination is not None:
        checks["kernel_domination"] = PropertyCheck.at_most(
            domination["spread"], DOMINATION_SPREAD
        )
    return CotlarSummary(
        p=p,
        lhs=lhs,
        maximal_of_transform=transform,
        maximal_of_input=averages,
        ratio=ratio,
        substitution_drift=drift,
        domination=domination,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# Bilateral almost uniform convergence
# ---------------------------------------------------------------------------


def mollify(
    f: OperatorField, h: float, settings: Optional[QuadratureSettings] = None
) -> OperatorField:
    """f * phi_h with the normalized glue bump of radius h; f is extended by zero"""
    if not h > 0:
        raise ValueError(f"Mollification radius must be positive, got {h}")
    grid = f.grid
    mass = _bump_mass(grid.d) * h**grid.d

    def profile(r: RealArray) -> RealArray:
        return plateau(2.0 * r / h) / mass

    quad = GridQuadrature(grid.d, grid.per_axis, grid.cell_side, [0.5 * h, h], settings)
    weights = quad.offset_weights(masked_product(profile, None))
    return f.with_values(quad.apply(weights, f.values))


def approximant(f: OperatorField, level: int, h: float) -> OperatorField:
    """
    The smooth truncated approximant g_n: the spectrum of f clipped at
    2^n ||f||_1 / |box|, mollified at radius h

    Radii below half a cell return f itself.
    """
    if h < 0.5 * f.grid.cell_side:
        return f
    cap = 2.0**level * field_norm(f, 1.0) / f.grid.volume
    return mollify(f.with_values(clamp_spectrum(f.values, 0.0, cap)), h)


def elementary_tensor(
    f: OperatorField, rel_tol: float = 1e-12
) -> Optional[Tuple[RealArray, ComplexArray]]:
    """(s, A) with f(x) = s(x) A when f is an elementary tensor, else None"""
    flat = f.values.reshape(f.num_cells, -1)
    if not np.any(flat):
        return None
    u, sv, vh = np.linalg.svd(flat, full_matrices=False)
    if sv.size > 1 and sv[1] > rel_tol * sv[0]:
        return None
    matrix = (sv[0] * vh[0]).reshape(f.n, f.n)
    scalar = u[:, 0]
    # Fix the phase so that A is Hermitian with a real scalar profile
    pivot = int(np.argmax(np.abs(scalar)))
    phase = scalar[pivot] / abs(scalar[pivot])
    scalar = np.real(scalar / phase)
    matrix = hermitize(matrix * phase)
    return scalar, matrix


def tensor_differences(
    op: SingularIntegralOperator, scalar: npt.ArrayLike, matrix: npt.ArrayLike
) -> List[float]:
    """||T_{eps_m} g - T_{eps_{m+1}} g||_inf along the ladder for g = s A"""
    grid = op.grid
    s_field = OperatorField.scalar(grid, scalar)
    norm = float(operator_norm(np.asarray(matrix, dtype=np.complex128)[None])[0])
    transforms = op.truncated_family(s_field)
    return [
        norm * float(np.max(np.abs(a.values - b.values), initial=0.0))
        for a, b in zip(transforms[:-1], transforms[1:])
    ]


def hermitian_members(fields: Sequence[OperatorField]) -> List[OperatorField]:
    """Split non-Hermitian members into their real and imaginary parts"""
    out: List[OperatorField] = []
    for x in fields:
        if x.hermitian:
            out.append(x)
        else:
            out.extend((x.real_part(), x.imag_part()))
    return out


def _cauchy_matrix(e: ComplexArray, transforms: Sequence[OperatorField]) -> RealArray:
    size = len(transforms)
    out = np.zeros((size, size))
    for k in range(size):
        for l in range(k + 1, size):
            diff = e @ (transforms[k].values - transforms[l].values) @ e
            value = float(np.max(general_operator_norm(diff), initial=0.0))
            out[k, l] = out[l, k] = value
    return out


def _envelope(matrix: RealArray) -> List[float]:
    size = matrix.shape[0]
    return [float(np.max(matrix[m:, m:], initial=0.0)) for m in range(max(size - 1, 0))]


def _decay_rate(envelope: Sequence[float]) -> Optional[float]:
    values = np.asarray(envelope, dtype=np.float64)
    keep = values > 0.0
    if np.sum(keep) < 2:
        return None
    return decay_exponent(np.flatnonzero(keep).tolist(), values[keep])


def bau_cauchy_test(
    op: SingularIntegralOperator,
    f: OperatorField,
    delta: float,
    stages: int = 4,
    scale: Optional[float] = None,
    max_halvings: Optional[int] = None,
    decay_ratio: float = 0.1,
) -> CauchySummary:
    """
    Build e = meet of e_n with sup_j ||e_n T_{eps_j}(f - g_n) e_n|| < scale / n
    and phi(1 - e_n) < delta 2^{-n}, then tabulate the Cauchy matrix of
    (e T_{eps_k} f e)_k

    Each stage halves the mollification radius of g_n until its weak
    certificate fits the trace budget; radii below half a cell reproduce f,
    where the budget is met trivially. With max_halvings the chain may stop
    early and the report carries the number of stages reached.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    grid = f.grid
    scale = field_norm(f, 1.0) if scale is None else scale
    labels = list(op.ladder.epsilons)
    n = f.n
    identity = np.broadcast_to(np.eye(n, dtype=np.complex128), (grid.num_cells, n, n)).copy()

    projections: List[ComplexArray] = []
    records: List[Dict[str, float]] = []
    reached = 0
    for level in range(1, stages + 1):
        lam = 0.5 * scale / level if scale > 0 else 1.0
        budget = delta * 2.0 ** (-level)
        h = 2.0 ** (-level) * grid.side
        halvings = 0
        accepted: Optional[Tuple[ComplexArray, float, float, float]] = None
        while accepted is None:
            g = approximant(f, level, h)
            if g is f:
                accepted = (identity, 0.0, 0.0, 0.0)
                break
            residual = f - g
            family = MaximalFamily.from_fields(hermitian_members(op.truncated_family(residual)))
            cert = weak_max_quasinorm_upper(family, lam)
            if not cert.degenerate and cert.deficit < budget:
                accepted = (cert.e, h, cert.deficit, cert.worst)
                break
            h *= 0.5
            halvings += 1
            if max_halvings is not None and halvings > max_halvings:
                break
        if accepted is None:
            logger.warning("Approximation chain stopped at stage %d of %d", level, stages)
            break
        e_n, radius, deficit, worst = accepted
        projections.append(e_n)
        records.append(
            {
                "level": float(level),
                "radius": radius,
                "deficit": deficit,
                "worst": worst,
                "lambda": lam,
            }
        )
        reached = level

    e = meet_many(projections, strict=False) if projections else identity
    deficit = deficit_of(OperatorField(grid, e))
    matrix = _cauchy_matrix(e, op.truncated_family(f))
    envelope = _envelope(matrix)

    checks = {
        "deficit": PropertyCheck.at_most(deficit, delta, 1e-9 * delta),
        "chain_complete": PropertyCheck.at_most(float(stages - reached), 0.0),
    }
    if envelope:
        increase = max((b - a for a, b in zip(envelope[:-1], envelope[1:])), default=0.0)
        checks["envelope_monotone"] = PropertyCheck.at_most(increase, 0.0)
        checks["envelope_decay"] = PropertyCheck.at_most(envelope[-1], decay_ratio * envelope[0])

    tensor: Optional[List[float]] = None
    split = elementary_tensor(f)
    if split is not None:
        tensor = tensor_differences(op, *split)

    return CauchySummary(
        epsilons=labels,
        matrix=matrix.tolist(),
        envelope=envelope,
        decay_rate=_decay_rate(envelope),
        reached=reached,
        requested=stages,
        deficit=deficit,
        delta=delta,
        stages=records,
        tensor_differences=tensor,
        checks=checks,
    )
