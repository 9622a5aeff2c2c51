"""
decomposition.py

Cuculescu's projections for the dyadic filtration of a finite grid and the
operator-valued Calderon-Zygmund decomposition f = g + b_d + b_off built
from them, together with a report-only validation of every property the
decomposition promises.

Projections are stored per cube: q_cubes[k] has one n x n projection per
level-k cube in flat cube order, and fields are produced on demand with
expand_level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from nccz.core.dyadic import (
    DyadicGrid,
    OperatorField,
    conditional_expectation,
    expand_level,
    field_norm,
    level_means,
    trace_phi,
)
from nccz.core.operator import (
    cut_above,
    eigvalsh,
    general_operator_norm,
    hermitize,
    operator_norm,
    support_projection,
)
from nccz.core.serializable import ISerializable
from nccz.reports import PropertyCheck, ValidationReport

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

RECONSTRUCTION_TOL = 1e-8
COMMUTATOR_TOL = 1e-9


class StartingIndexError(Exception):
    """Raised when E_{k_min} f already exceeds lambda, so no stopping time starts in the box"""

    __slots__ = "lam", "level", "excess", "message"

    def __init__(self, lam: float, level: int, excess: float) -> None:
        super(Exception, self).__init__(lam)
        self.lam: float = lam
        self.level: int = level
        self.excess: float = excess
        self.message: str = (
            f"Level {level} averages reach {excess:.6g} > lambda={lam:g}; "
            f"enlarge the box or lambda"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(lam={}, level={})".format(self.__class__.__name__, self.lam, self.level)


class ConsistencyError(Exception):
    """Raised when g + b_d + b_off drifts away from f"""

    __slots__ = "residual", "threshold", "message"

    def __init__(self, residual: float, threshold: float) -> None:
        super(Exception, self).__init__(residual)
        self.residual: float = residual
        self.threshold: float = threshold
        self.message: str = (
            f"Reconstruction residual {residual:.3e} exceeds {threshold:.3e}"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(residual={}, threshold={})".format(
            self.__class__.__name__, self.residual, self.threshold
        )


def default_dilation(d: int) -> int:
    """s = 4 [sqrt(d)]"""
    return 4 * math.isqrt(d)


def _check_input(f: OperatorField, lam: float) -> None:
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    if not f.is_psd():
        raise ValueError("The Calderon-Zygmund decomposition needs a PSD field")


def _father_labels(grid: DyadicGrid, k: int) -> npt.NDArray[np.int64]:
    """Flat index of the father of every level-k cube"""
    c = grid.cubes_per_axis(k)
    idx = np.arange(c**grid.d)
    if grid.d == 1:
        return idx // 2
    row, col = np.divmod(idx, c)
    return (row // 2) * (c // 2) + col // 2


def _has_mass(p: ComplexArray) -> npt.NDArray[np.bool_]:
    return np.real(np.trace(p, axis1=-2, axis2=-1)) > 0.5


def _hermitian_means(f: OperatorField, k: int) -> ComplexArray:
    return hermitize(level_means(f, k))


def starting_index(f: OperatorField, lam: float) -> int:
    """
    m_lambda(f): the greatest level m with E_k f <= lambda for every k <= m

    The comparison uses the same spectral cut as the Cuculescu recursion, so
    eigenvalues within the eigen snap of lambda count as below it.

    Raises
    ------
    StartingIndexError
        If the coarsest averages already exceed lambda
    """
    _check_input(f, lam)
    grid = f.grid
    m = grid.k_max
    for k in grid.levels():
        means = _hermitian_means(f, k)
        if np.any(_has_mass(cut_above(means, lam))):
            m = k - 1
            break

    if m < grid.k_min:
        top = float(np.max(eigvalsh(_hermitian_means(f, grid.k_min))))
        raise StartingIndexError(lam, grid.k_min, top)
    return m


@dataclass(frozen=True)
class CuculescuFamily(ISerializable):
    """
    Cuculescu's decreasing projections q_k and the disjoint p_k = q_{k-1} - q_k

    Attributes
    ----------
    grid: DyadicGrid
        Grid of the input field
    lam: float
        The level lambda
    m_lambda: int
        Starting index; q_k = 1 for k <= m_lambda
    q_cubes: Dict[int, ComplexArray]
        q_Q for every cube, keyed by level
    p_cubes: Dict[int, ComplexArray]
        p_Q = q_{father(Q)} - q_Q for every cube, keyed by level
    """

    grid: DyadicGrid
    lam: float
    m_lambda: int
    q_cubes: Dict[int, ComplexArray]
    p_cubes: Dict[int, ComplexArray]

    @property
    def n(self) -> int:
        return self.q_cubes[self.grid.k_min].shape[-1]

    def q_field(self, k: int) -> OperatorField:
        self.grid.check_level(k)
        return OperatorField(self.grid, expand_level(self.grid, k, self.q_cubes[k]))

    def p_field(self, k: int) -> OperatorField:
        self.grid.check_level(k)
        return OperatorField(self.grid, expand_level(self.grid, k, self.p_cubes[k]))

    @property
    def residual(self) -> OperatorField:
        """q, the meet of the decreasing chain, which is its last member"""
        return self.q_field(self.grid.k_max)

    def per_cube(self, k: int, flat_index: int) -> Tuple[ComplexArray, ComplexArray]:
        """(q_Q, p_Q) for one level-k cube"""
        return self.q_cubes[k][flat_index], self.p_cubes[k][flat_index]

    def active_cubes(self, k: int) -> npt.NDArray[np.int64]:
        """Flat indices of the level-k cubes with p_Q != 0"""
        return np.flatnonzero(_has_mass(self.p_cubes[k]))

    def active_levels(self) -> List[int]:
        return [k for k in self.grid.levels() if self.active_cubes(k).size > 0]

    def stopping_cubes(self) -> Dict[int, npt.NDArray[np.int64]]:
        return {k: self.active_cubes(k) for k in self.active_levels()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "m_lambda": self.m_lambda,
            "active": {str(k): int(v.size) for k, v in self.stopping_cubes().items()},
        }


def cuculescu(f: OperatorField, lam: float) -> CuculescuFamily:
    """
    Run q_Q = q_{father} - chi_(lambda, inf)(q_{father} f_Q q_{father}) level by level

    Directions of q_{father} on which the compressed average vanishes stay
    in q_Q, so n = 1 reproduces the classical dyadic stopping time.

    Parameters
    ----------
    f: OperatorField
        PSD input field
    lam: float
        Positive level

    Returns
    -------
    CuculescuFamily
        Projections for every level of the grid
    """
    m = starting_index(f, lam)
    grid = f.grid
    n = f.n
    ident = np.eye(n, dtype=np.complex128)

    q_cubes: Dict[int, ComplexArray] = {}
    p_cubes: Dict[int, ComplexArray] = {}
    for k in grid.levels():
        count = grid.num_cubes(k)
        if k <= m:
            q_cubes[k] = np.broadcast_to(ident, (count, n, n)).copy()
            p_cubes[k] = np.zeros((count, n, n), dtype=np.complex128)
            continue
        if k == grid.k_min:
            parent = np.broadcast_to(ident, (count, n, n))
        else:
            parent = q_cubes[k - 1][_father_labels(grid, k)]
        compressed = hermitize(parent @ _hermitian_means(f, k) @ parent)
        q = hermitize(parent - cut_above(compressed, lam))
        q_cubes[k] = q
        p_cubes[k] = hermitize(parent - q)
        logger.debug("Level %d: %d stopping cubes", k, int(np.sum(_has_mass(p_cubes[k]))))

    return CuculescuFamily(grid, float(lam), m, q_cubes, p_cubes)


def cuculescu_checks(family: CuculescuFamily, f: OperatorField) -> Dict[str, PropertyCheck]:
    """Monotonicity, the stopping bound, commutation and the trace estimate of the chain"""
    grid = family.grid
    lam = family.lam
    f_inf = field_norm(f, math.inf)
    n = family.n
    ident = np.eye(n, dtype=np.complex128)

    worst_order = 0.0
    worst_chain = -math.inf
    worst_commutator = 0.0
    for k in grid.levels():
        q = family.q_cubes[k]
        if k == grid.k_min:
            parent = np.broadcast_to(ident, q.shape)
        else:
            parent = family.q_cubes[k - 1][_father_labels(grid, k)]
        means = _hermitian_means(f, k)

        worst_order = max(worst_order, float(np.max(-eigvalsh(parent - q))))
        chain = eigvalsh(hermitize(q @ means @ q - lam * q))
        worst_chain = max(worst_chain, float(np.max(chain)))
        compressed = parent @ means @ parent
        commutator = general_operator_norm(q @ compressed - compressed @ q)
        worst_commutator = max(worst_commutator, float(np.max(commutator)))

    complement = OperatorField.identity(grid, n) - family.residual
    psd_scale = 1e-10 * (1.0 + lam + f_inf)
    return {
        "q_decreasing": PropertyCheck.at_most(worst_order, 0.0, psd_scale),
        "q_stopping_bound": PropertyCheck.at_most(worst_chain, 0.0, psd_scale),
        "q_commutes": PropertyCheck.at_most(
            worst_commutator, 0.0, COMMUTATOR_TOL * max(1.0, f_inf)
        ),
        "q_residual_trace": PropertyCheck.at_most(
            trace_phi(complement), field_norm(f, 1.0) / lam, 1e-9 * (1.0 + field_norm(f, 1.0))
        ),
    }


def _box_spread(cubes: ComplexArray, per_axis: int, d: int, s: int) -> ComplexArray:
    """Sum over the (2s + 1)^d neighbourhood of every cube, zero outside the box"""
    n = cubes.shape[-1]
    shape = (per_axis,) * d + (n, n)
    out = cubes.reshape(shape)
    for axis in range(d):
        pad = [(0, 0)] * out.ndim
        pad[axis] = (s, s)
        padded = np.pad(out, pad)
        acc = np.zeros_like(out)
        for shift in range(2 * s + 1):
            acc = acc + np.take(padded, np.arange(shift, shift + per_axis), axis=axis)
        out = acc
    return out.reshape((-1, n, n))


def zeta_projection(
    family: CuculescuFamily, s: int, tol_rank: Optional[float] = None
) -> OperatorField:
    """
    zeta(x) = complement of the join of p_Q over the cubes Q with x in (2s + 1)Q

    Dilated cubes leaving the box only count through their cells inside it.
    The join is the support of the sum of the projections, assembled
    non-strictly.
    """
    grid = family.grid
    n = family.n
    total = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    for k in family.active_levels():
        spread = _box_spread(family.p_cubes[k], grid.cubes_per_axis(k), grid.d, s)
        total += expand_level(grid, k, spread)

    covered = support_projection(total, tol_rank, strict=False)
    return OperatorField(grid, np.eye(n, dtype=np.complex128) - covered)


@dataclass(frozen=True)
class CZDecomposition(ISerializable):
    """
    f = g + sum_n b_{d,n} + sum_n b_n with the projection zeta

    Attributes
    ----------
    lam: float
        The level lambda
    s: int
        Dilation parameter; zeta uses the cubes (2s + 1)Q
    family: CuculescuFamily
        The projections the decomposition is built from
    g: OperatorField
        The good part
    bd: Dict[int, OperatorField]
        Diagonal bad parts p_n (f - f_n) p_n, only for levels with p_n != 0
    boff: Dict[int, OperatorField]
        Off-diagonal bad parts p_n (f - f_n) q_n + q_n (f - f_n) p_n
    zeta: OperatorField
        Projection field away from the dilated stopping cubes
    residual: float
        Largest cellwise norm of f - g - b_d - b_off
    """

    lam: float
    s: int
    family: CuculescuFamily
    g: OperatorField
    bd: Dict[int, OperatorField]
    boff: Dict[int, OperatorField]
    zeta: OperatorField
    residual: float

    @property
    def grid(self) -> DyadicGrid:
        return self.g.grid

    @property
    def levels(self) -> List[int]:
        return sorted(self.bd)

    def b_diagonal(self) -> OperatorField:
        total = OperatorField.zeros(self.grid, self.g.n)
        for piece in self.bd.values():
            total = total + piece
        return total

    def b_off(self) -> OperatorField:
        total = OperatorField.zeros(self.grid, self.g.n)
        for piece in self.boff.values():
            total = total + piece
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "s": self.s,
            "levels": self.levels,
            "residual": self.residual,
            "zeta_deficit": float(
                np.real(trace_phi(OperatorField.identity(self.grid, self.g.n) - self.zeta))
            ),
            "cuculescu": self.family.to_dict(),
        }


def decompose(
    f: OperatorField,
    lam: float,
    s: Optional[int] = None,
    family: Optional[CuculescuFamily] = None,
) -> CZDecomposition:
    """
    Build the Calderon-Zygmund decomposition of a PSD field at level lambda

    g = q f q + sum_n (p_n f_n p_n + p_n f_n q_n + q_n f_n p_n) is assembled
    independently of the bad parts, so the reconstruction residual is a real
    consistency check.

    Parameters
    ----------
    f: OperatorField
        PSD input field
    lam: float
        Positive level
    s: int, optional
        Dilation parameter, 4 [sqrt(d)] by default
    family: CuculescuFamily, optional
        Precomputed projections for (f, lam)

    Raises
    ------
    StartingIndexError
        If lambda is below the coarsest averages
    ConsistencyError
        If the pieces fail to add up to f within 1e-8 ||f||_inf
    """
    if s is None:
        s = default_dilation(f.grid.d)
    if s < 1:
        raise ValueError(f"Dilation parameter must be at least 1, got {s}")
    if family is None:
        family = cuculescu(f, lam)

    q = family.residual.values
    g = q @ f.values @ q
    bd: Dict[int, OperatorField] = {}
    boff: Dict[int, OperatorField] = {}
    for level in family.active_levels():
        p = family.p_field(level).values
        q_n = family.q_field(level).values
        f_n = conditional_expectation(f, level).values
        diff = f.values - f_n
        bd[level] = f.with_values(p @ diff @ p)
        boff[level] = f.with_values(p @ diff @ q_n + q_n @ diff @ p)
        g = g + p @ f_n @ p + p @ f_n @ q_n + q_n @ f_n @ p

    good = f.with_values(g)
    rebuilt = g + sum((b.values for b in bd.values()), np.zeros_like(g))
    rebuilt = rebuilt + sum((b.values for b in boff.values()), np.zeros_like(g))
    residual = float(np.max(operator_norm(hermitize(f.values - rebuilt)), initial=0.0))
    threshold = RECONSTRUCTION_TOL * field_norm(f, math.inf)
    if residual > threshold:
        raise ConsistencyError(residual, threshold)

    zeta = zeta_projection(family, s)
    logger.info(
        "Decomposed at lambda=%g: %d active levels, residual %.2e", lam, len(bd), residual
    )
    return CZDecomposition(float(lam), s, family, good, bd, boff, zeta, residual)


def _mean_defect(pieces: Dict[int, OperatorField]) -> float:
    worst = 0.0
    for level, piece in pieces.items():
        means = hermitize(level_means(piece, level))
        worst = max(worst, float(np.max(operator_norm(means), initial=0.0)))
    return worst


def _vanishing_bound(
    dec: CZDecomposition, pieces: Dict[int, OperatorField], diagonal: bool
) -> float:
    """
    Upper bound of ||zeta(x) b(y) zeta(x)|| over y in (2s + 1)Q_{x,n}

    b_{d,n}(y) = p_Q b p_Q on a stopping cube Q, so the product is at most
    ||zeta(x) p_Q||^2 ||b(y)||; the off-diagonal pieces give
    2 ||zeta(x) p_Q|| ||b(y)||. A zero bound certifies the property exactly.
    """
    grid = dec.grid
    family = dec.family
    midpoints = grid.midpoints
    zeta = dec.zeta.values
    worst = 0.0
    for level, piece in pieces.items():
        labels = grid.level_labels(level)
        piece_norms = operator_norm(piece.values)
        for flat in family.active_cubes(level):
            region = grid.cube(level, int(flat)).dilate(2 * dec.s + 1)
            near = region.contains(midpoints)
            b_sup = float(np.max(piece_norms[labels == flat], initial=0.0))
            if b_sup == 0.0 or not np.any(near):
                continue
            p_q = family.p_cubes[level][flat]
            overlap = float(np.max(general_operator_norm(zeta[near] @ p_q)))
            bound = overlap**2 * b_sup if diagonal else 2.0 * overlap * b_sup
            worst = max(worst, bound)
    return worst


def validate(
    dec: CZDecomposition, f: OperatorField, lam: Optional[float] = None
) -> ValidationReport:
    """
    Measure every property of the decomposition; failures are recorded, not raised

    Returns
    -------
    ValidationReport
        One PropertyCheck per property, read as lhs <= rhs
    """
    lam = dec.lam if lam is None else lam
    d = f.grid.d
    n = f.n
    f_one = field_norm(f, 1.0)
    f_inf = field_norm(f, math.inf)
    g_inf = field_norm(dec.g, math.inf)
    small = 1e-10 * (1.0 + f_inf)

    checks: Dict[str, PropertyCheck] = {}
    checks["reconstruction"] = PropertyCheck.at_most(dec.residual, 1e-10 * f_inf)

    deficit = float(np.real(trace_phi(OperatorField.identity(f.grid, n) - dec.zeta)))
    checks["zeta_trace"] = PropertyCheck.at_most(
        deficit, (2 * dec.s + 1) ** d * f_one / lam, 1e-9
    )

    min_eig = float(np.min(dec.g.min_eigenvalues(), initial=0.0))
    checks["g_positive"] = PropertyCheck.at_most(-min_eig, 0.0, 1e-10 * (1.0 + g_inf))
    checks["g_l1"] = PropertyCheck.at_most(field_norm(dec.g, 1.0), f_one, 1e-9 * (1.0 + f_one))
    checks["g_linf"] = PropertyCheck.at_most(g_inf, 2**d * lam, 1e-9 * lam)

    checks["bd_mean_zero"] = PropertyCheck.at_most(_mean_defect(dec.bd), 0.0, small)
    checks["bd_vanishing"] = PropertyCheck.at_most(_vanishing_bound(dec, dec.bd, True), 0.0, small)
    bd_sum = sum(field_norm(b, 1.0) for b in dec.bd.values())
    checks["bd_l1_sum"] = PropertyCheck.at_most(bd_sum, 2.0 * f_one, 1e-9 * (1.0 + f_one))

    checks["boff_mean_zero"] = PropertyCheck.at_most(_mean_defect(dec.boff), 0.0, small)
    checks["boff_vanishing"] = PropertyCheck.at_most(
        _vanishing_bound(dec, dec.boff, False), 0.0, small
    )

    checks.update(cuculescu_checks(dec.family, f))

    report = ValidationReport(lam=lam, s=dec.s, checks=checks)
    if not report.passed:
        logger.warning("Decomposition checks failed: %s", ", ".join(report.failed()))
    return report
