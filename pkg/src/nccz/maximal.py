"""
maximal.py

Vector-valued maximal norms of finite Hermitian families (x_k):

* the strong norm ||sup+ x_k||_p = inf{||a||_p : -a <= x_k <= a}, solved per
  cell as a semidefinite program for p in {1, 2} and in closed form for
  p = inf, scalar and diagonal families;
* certified upper bounds of the weak quasi-norm, built from explicit
  projections e with ||e x_k e|| <= lambda.

The objective is a sum over cells, so every cell is an independent problem.
The barrier solver runs all of them as one batch in the real orthonormal
basis of the Hermitian n x n matrices.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.core.operator import (
    absolute,
    cut_above,
    eigvalsh,
    hermitize,
    operator_norm,
    psd_power,
)
from nccz.core.serializable import ISerializable

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

WEAK_REL_TOL = 1e-9
GREEDY_MAX_ROUNDS = 50


@dataclass(frozen=True)
class BarrierSettings:
    """
    Parameters of the log-det barrier method

    Attributes
    ----------
    gap_tol: float
        Relative duality gap per cell, gap <= gap_tol * (1 + objective)
    max_outer: int
        Central path steps; the barrier weight grows by 4 at each one
    max_newton: int
        Newton iterations per central path step
    newton_tol: float
        Half the squared Newton decrement at which a centering stops
    armijo: float
        Sufficient decrease factor of the backtracking line search
    max_backtrack: int
        Step halvings before a cell counts as stalled
    start_shift: float
        Relative shift delta of the feasible start sum |x_k| + delta 1
    """

    gap_tol: float = 1e-6
    max_outer: int = 40
    max_newton: int = 50
    newton_tol: float = 1e-10
    armijo: float = 0.25
    max_backtrack: int = 60
    start_shift: float = 1e-2


class MaximalFamily:
    """
    A finite ordered family of Hermitian fields x_1, ..., x_K on the same cells

    Attributes
    ----------
    values: ComplexArray
        Stack shaped (cells, K, n, n)
    labels: List[Any]
        One label per member, e.g. the truncation radius
    grid: DyadicGrid, optional
        The grid the members live on; None for families of plain matrices
    cell_volume: float
        Weight of every cell in the trace
    """

    __slots__ = "_values", "labels", "grid", "cell_volume"

    def __init__(
        self,
        values: npt.ArrayLike,
        labels: Optional[Sequence[Any]] = None,
        grid: Optional[DyadicGrid] = None,
        cell_volume: float = 1.0,
    ) -> None:
        arr = np.asarray(values, dtype=np.complex128)
        if arr.ndim != 4 or arr.shape[-1] != arr.shape[-2] or arr.shape[1] == 0:
            raise ValueError(
                f"Expected a non-empty family shaped (cells, K, n, n), got {arr.shape}"
            )
        skew = np.max(np.abs(arr - np.conj(np.swapaxes(arr, -1, -2))), initial=0.0)
        if skew > 1e-12 * (1.0 + np.max(np.abs(arr), initial=0.0)):
            raise ValueError(f"Family members must be Hermitian (defect {skew:.3e})")
        if grid is not None and arr.shape[0] != grid.num_cells:
            raise ValueError("Family does not match the number of grid cells")

        values_h = hermitize(arr)
        values_h.setflags(write=False)
        self._values: ComplexArray = values_h
        self.labels: List[Any] = (
            list(labels) if labels is not None else list(range(arr.shape[1]))
        )
        if len(self.labels) != arr.shape[1]:
            raise ValueError("Expected one label per family member")
        self.grid: Optional[DyadicGrid] = grid
        self.cell_volume: float = float(cell_volume)

    @classmethod
    def from_fields(
        cls, fields: Sequence[OperatorField], labels: Optional[Sequence[Any]] = None
    ) -> MaximalFamily:
        if len(fields) == 0:
            raise ValueError("A maximal family needs at least one member")
        grid = fields[0].grid
        for f in fields[1:]:
            if f.grid != grid or f.n != fields[0].n:
                raise ValueError("Family members must share their grid and matrix size")
        values = np.stack([f.values for f in fields], axis=1)
        return cls(values, labels, grid, grid.cell_volume)

    @classmethod
    def from_matrices(
        cls, matrices: Sequence[npt.ArrayLike], labels: Optional[Sequence[Any]] = None
    ) -> MaximalFamily:
        """A single-cell family of unit volume"""
        values = np.stack([np.asarray(m, dtype=np.complex128) for m in matrices])[None]
        return cls(values, labels)

    @property
    def values(self) -> ComplexArray:
        return self._values

    @property
    def n(self) -> int:
        return int(self._values.shape[-1])

    @property
    def num_cells(self) -> int:
        return int(self._values.shape[0])

    def __len__(self) -> int:
        return int(self._values.shape[1])

    def member(self, k: int) -> ComplexArray:
        return self._values[:, k]

    def scaled(self, c: float) -> MaximalFamily:
        return MaximalFamily(c * self._values, self.labels, self.grid, self.cell_volume)

    def extended(self, other: MaximalFamily) -> MaximalFamily:
        if other.num_cells != self.num_cells or other.n != self.n:
            raise ValueError("Cannot join families over different cells")
        return MaximalFamily(
            np.concatenate([self._values, other.values], axis=1),
            self.labels + other.labels,
            self.grid,
            self.cell_volume,
        )

    def sup_norm(self) -> float:
        """max over members and cells of ||x_k||"""
        return float(np.max(operator_norm(self._values), initial=0.0))

    def __repr__(self) -> str:
        return "{}(members={}, cells={}, n={})".format(
            self.__class__.__name__, len(self), self.num_cells, self.n
        )


@dataclass
class MajorantCertificate(ISerializable):
    """
    A PSD a with -a <= x_k <= a for every member, and what it proves

    Attributes
    ----------
    a: ComplexArray
        The majorant, shaped (cells, n, n)
    p: float
        Norm exponent
    objective: float
        ||a||_p, an upper bound of the strong maximal norm
    slack: float
        min over members and cells of lambda_min(a -+ x_k)
    dual_bound: float
        A certified lower bound of the strong maximal norm
    exact: bool
        Whether a closed-form optimal majorant was used
    fallback: bool
        Whether some cells kept a feasible but unconverged majorant
    method: str
        Which path produced the certificate
    """

    a: ComplexArray
    p: float
    objective: float
    slack: float
    dual_bound: float
    exact: bool = False
    fallback: bool = False
    method: str = "barrier"
    cell_volume: float = 1.0
    grid: Optional[DyadicGrid] = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return max(0.0, self.objective - self.dual_bound)

    def as_field(self) -> OperatorField:
        if self.grid is None:
            raise ValueError("The certificate does not live on a grid")
        return OperatorField(self.grid, self.a)

    def is_feasible(self, family: MaximalFamily) -> bool:
        tol = 1e-10 * (1.0 + float(np.max(operator_norm(self.a), initial=0.0)) + family.sup_norm())
        return feasibility_slack(self.a, family) >= -tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": _p_label(self.p),
            "objective": self.objective,
            "dual_bound": self.dual_bound,
            "gap": self.gap,
            "slack": self.slack,
            "exact": self.exact,
            "fallback": self.fallback,
            "method": self.method,
        }


@dataclass
class WeakCertificate(ISerializable):
    """
    A projection e with ||e x_k e|| <= lambda for every member

    Attributes
    ----------
    lam: float
        The level lambda
    e: ComplexArray
        Projection per cell, shaped (cells, n, n)
    deficit: float
        phi(1 - e)
    worst: float
        max over members of ||e x_k e||_inf, re-measured after construction
    recipe: str
        "majorant", "scalar", "greedy" or "none"
    p: float
        Exponent of the quasi-norm the value refers to
    degenerate: bool
        True when no recipe succeeded and e = 0 was returned
    """

    lam: float
    e: ComplexArray
    deficit: float
    worst: float
    recipe: str
    p: float = 1.0
    degenerate: bool = False

    @property
    def value(self) -> float:
        """lambda phi(1 - e)^{1/p}, an upper bound at this lambda"""
        return self.lam * self.deficit ** (1.0 / self.p)

    def verify(self, family: MaximalFamily) -> bool:
        return _weak_worst(self.e, family) <= _weak_limit(self.lam, family)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "deficit": self.deficit,
            "worst": self.worst,
            "recipe": self.recipe,
            "value": self.value,
            "degenerate": self.degenerate,
        }


def _p_label(p: float) -> Union[str, float]:
    return "inf" if math.isinf(p) else p


def _check_exponent(p: float) -> float:
    p = float(p)
    if p not in (1.0, 2.0) and not math.isinf(p):
        raise ValueError(f"Strong maximal norms are available for p in {{1, 2, inf}}, got {p}")
    return p


def feasibility_slack(a: ComplexArray, family: MaximalFamily) -> float:
    """min over members and cells of lambda_min(a - x_k) and lambda_min(a + x_k)"""
    x = family.values
    both = np.concatenate([a[:, None] - x, a[:, None] + x], axis=1)
    return float(np.min(eigvalsh(both, method="lapack"), initial=math.inf))


def _norm_of(per_cell: RealArray, p: float, volume: float) -> float:
    """||a||_p from per-cell Tr a (p = 1), Tr a^2 (p = 2) or ||a|| (p = inf)"""
    if math.isinf(p):
        return float(np.max(per_cell, initial=0.0))
    total = volume * float(np.sum(per_cell))
    if p == 1.0:
        return total
    return math.sqrt(max(total, 0.0))


def _cell_objective(a: ComplexArray, p: float) -> RealArray:
    if p == 1.0:
        return np.real(np.trace(a, axis1=-2, axis2=-1))
    return np.sum(np.abs(a) ** 2, axis=(-2, -1))


def _is_diagonal(x: ComplexArray) -> bool:
    n = x.shape[-1]
    off = x * (1.0 - np.eye(n))
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    return bool(np.max(np.abs(off), initial=0.0) <= 1e-14 * scale)


def _certificate(
    a: ComplexArray,
    family: MaximalFamily,
    p: float,
    dual_cells: Optional[RealArray],
    method: str,
    exact: bool = False,
    fallback: bool = False,
) -> MajorantCertificate:
    if math.isinf(p):
        per_cell = operator_norm(a)
    else:
        per_cell = _cell_objective(a, p)
    objective = _norm_of(per_cell, p, family.cell_volume)
    dual = objective if dual_cells is None else _norm_of(dual_cells, p, family.cell_volume)
    return MajorantCertificate(
        a=a,
        p=p,
        objective=objective,
        slack=feasibility_slack(a, family),
        dual_bound=min(dual, objective),
        exact=exact,
        fallback=fallback,
        method=method,
        cell_volume=family.cell_volume,
        grid=family.grid,
    )


def _exact_majorant(family: MaximalFamily, p: float) -> Optional[ComplexArray]:
    """Closed-form optimal majorants: p = inf, n = 1 and diagonal families"""
    x = family.values
    n = family.n
    if math.isinf(p):
        level = np.max(operator_norm(x), axis=1)
        return level[:, None, None] * np.eye(n, dtype=np.complex128)
    if n == 1 or _is_diagonal(x):
        diag = np.max(np.abs(np.real(np.diagonal(x, axis1=-2, axis2=-1))), axis=1)
        a = np.zeros((family.num_cells, n, n), dtype=np.complex128)
        idx = np.arange(n)
        a[:, idx, idx] = diag
        return a
    return None


def hermitian_basis(n: int) -> ComplexArray:
    """Orthonormal basis of the real space of Hermitian n x n matrices for Re Tr(AB)"""
    basis: List[ComplexArray] = []
    for i in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[i, i] = 1.0
        basis.append(e)
    root = 1.0 / math.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            sym = np.zeros((n, n), dtype=np.complex128)
            sym[i, j] = sym[j, i] = root
            basis.append(sym)
            anti = np.zeros((n, n), dtype=np.complex128)
            anti[i, j] = 1j * root
            anti[j, i] = -1j * root
            basis.append(anti)
    return np.stack(basis)


def _barrier_value(
    a: ComplexArray, constraints: ComplexArray, t: RealArray, p: float
) -> RealArray:
    """t F(a) - sum_j log det(a - c_j); inf outside the feasible set"""
    w = eigvalsh(a[:, None] - constraints, method="lapack")
    feasible = np.all(w > 0.0, axis=(1, 2))
    logs = np.sum(np.log(np.where(w > 0.0, w, 1.0)), axis=(1, 2))
    value = t * _cell_objective(a, p) - logs
    return np.where(feasible, value, np.inf)


def _newton_system(
    a: ComplexArray,
    constraints: ComplexArray,
    t: RealArray,
    p: float,
    basis: ComplexArray,
) -> Tuple[RealArray, RealArray, ComplexArray]:
    """Gradient and Hessian of the barrier in basis coordinates, plus the inverses"""
    cells, _, n, _ = constraints.shape
    inverses = hermitize(np.linalg.inv(a[:, None] - constraints))
    grad = -np.sum(inverses, axis=1)
    if p == 1.0:
        grad = grad + t[:, None, None] * np.eye(n)
    else:
        grad = grad + 2.0 * t[:, None, None] * a
    g = np.real(np.einsum("iab,nba->ni", basis, grad))

    flat = basis.reshape(n * n, n * n)
    kron = np.einsum("njac,njdb->nabcd", inverses, inverses).reshape(cells, n * n, n * n)
    h = np.real(np.conj(flat) @ kron @ flat.T)
    if p == 2.0:
        h = h + 2.0 * t[:, None, None] * np.eye(n * n)
    return g, h, inverses


def _barrier_dual(
    a: ComplexArray, constraints: ComplexArray, inverses: ComplexArray, t: RealArray, p: float
) -> RealArray:
    """
    Per-cell dual values from the central-path multipliers Z_j = (a - c_j)^{-1} / t

    For p = 1 the multipliers are rescaled so that sum_j Z_j = 1 exactly;
    for p = 2 any PSD multipliers give a valid bound.
    """
    z = inverses / t[:, None, None, None]
    total = np.sum(z, axis=1)
    if p == 1.0:
        root = psd_power(total, -0.5)
        z = root[:, None] @ z @ root[:, None]
        return np.real(np.einsum("njab,njba->n", z, constraints))
    linear = np.real(np.einsum("njab,njba->n", z, constraints))
    return linear - 0.25 * np.sum(np.abs(total) ** 2, axis=(-2, -1))


def _barrier_solve(
    family: MaximalFamily, p: float, settings: BarrierSettings
) -> Tuple[ComplexArray, RealArray, npt.NDArray[np.bool_]]:
    """
    Minimize Tr a or Tr a^2 subject to a -+ x_k >= 0, cell by cell

    Returns
    -------
    Tuple[ComplexArray, RealArray, NDArray[bool]]
        Strictly feasible majorants, certified dual values and a mask of
        the cells that reached the gap tolerance
    """
    x = family.values
    cells, count, n, _ = x.shape
    constraints = np.concatenate([x, -x], axis=1)
    basis = hermitian_basis(n)
    scale = max(1.0, family.sup_norm())

    a = np.sum(absolute(x), axis=1) + settings.start_shift * scale * np.eye(n)
    t = np.full(cells, 1.0 / scale)
    active = np.ones(cells, dtype=bool)
    stalled = np.zeros(cells, dtype=bool)
    barrier_degree = 2 * count * n

    for outer in range(settings.max_outer):
        for _ in range(settings.max_newton):
            value = _barrier_value(a, constraints, t, p)
            g, h, _ = _newton_system(a, constraints, t, p, basis)
            step = -np.linalg.solve(h, g[..., None])[..., 0]
            slope = np.sum(g * step, axis=1)
            moving = active & (-0.5 * slope > settings.newton_tol)
            if not np.any(moving):
                break

            direction = np.einsum("ni,iab->nab", step, basis)
            # Full Newton steps are safe once the decrement is below 1/4
            damped = -slope >= 0.0625
            size = np.ones(cells)
            ok = np.ones(cells, dtype=bool)
            for _ in range(settings.max_backtrack):
                trial = _barrier_value(a + size[:, None, None] * direction, constraints, t, p)
                decrease = trial <= value + settings.armijo * size * slope
                ok = np.isfinite(trial) & (~damped | decrease)
                retry = moving & ~ok
                if not np.any(retry):
                    break
                size = np.where(retry, 0.5 * size, size)

            stuck = moving & ~ok
            if np.any(stuck):
                logger.debug("Line search stalled in %d cells", int(np.sum(stuck)))
                stalled |= stuck
                active &= ~stuck
            size = np.where(moving & ok, size, 0.0)
            a = hermitize(a + size[:, None, None] * direction)

        gap = barrier_degree / t
        finished = gap <= settings.gap_tol * (1.0 + _cell_objective(a, p))
        active &= ~finished
        logger.debug("Central path step %d: %d cells left", outer, int(np.sum(active)))
        if not np.any(active):
            break
        t = np.where(active, 4.0 * t, t)

    _, _, inverses = _newton_system(a, constraints, t, p, basis)
    dual = _barrier_dual(a, constraints, inverses, t, p)
    converged = ~active & ~stalled
    return a, dual, converged


def strong_max_norm(
    family: MaximalFamily,
    p: float,
    method: str = "auto",
    settings: Optional[BarrierSettings] = None,
) -> MajorantCertificate:
    """
    ||sup+ x_k||_p through an explicit majorant a with -a <= x_k <= a

    Parameters
    ----------
    family: MaximalFamily
        Hermitian members
    p: float
        1, 2 or inf
    method: str
        "auto" uses the closed forms when they apply, "barrier" always runs
        the interior point solver (p in {1, 2})
    settings: BarrierSettings, optional
        Solver tolerances

    Returns
    -------
    MajorantCertificate
        Feasible majorant with its objective and a dual lower bound
    """
    p = _check_exponent(p)
    if method not in ("auto", "barrier"):
        raise ValueError(f"Unknown strong norm method: {method}")
    settings = settings if settings is not None else BarrierSettings()

    if method == "auto" or math.isinf(p):
        a = _exact_majorant(family, p)
        if a is not None:
            return _certificate(a, family, p, None, "exact", exact=True)

    a, dual, converged = _barrier_solve(family, p, settings)
    fallback = not bool(np.all(converged))
    if fallback:
        logger.warning(
            "Barrier solver did not converge in %d of %d cells; "
            "keeping the best feasible majorant",
            int(np.sum(~converged)),
            family.num_cells,
        )
        a = _best_feasible(a, family, p, ~converged)
    return _certificate(a, family, p, dual, "barrier", fallback=fallback)


def _best_feasible(
    a: ComplexArray, family: MaximalFamily, p: float, cells: npt.NDArray[np.bool_]
) -> ComplexArray:
    """Replace unconverged cells by the cheapest of three feasible majorants"""
    x = family.values
    n = family.n
    candidates = [
        a,
        np.sum(absolute(x), axis=1),
        np.max(operator_norm(x), axis=1)[:, None, None] * np.eye(n, dtype=np.complex128),
    ]
    costs = np.stack([_cell_objective(c, p) for c in candidates])
    best = np.argmin(costs, axis=0)
    out = a.copy()
    for i, candidate in enumerate(candidates):
        pick = cells & (best == i)
        out[pick] = candidate[pick]
    return out


def _weak_limit(lam: float, family: MaximalFamily) -> float:
    return lam * (1.0 + WEAK_REL_TOL) + 1e-10 * (1.0 + family.sup_norm())


def _weak_worst(e: ComplexArray, family: MaximalFamily) -> float:
    compressed = e[:, None] @ family.values @ e[:, None]
    return float(np.max(operator_norm(hermitize(compressed)), initial=0.0))


def _deficit(e: ComplexArray, family: MaximalFamily) -> float:
    n = family.n
    missing = np.real(np.trace(np.eye(n) - e, axis1=-2, axis2=-1))
    return max(0.0, family.cell_volume * float(np.sum(missing)))


def _majorant_recipe(a: ComplexArray, lam: float) -> ComplexArray:
    """e = 1 - chi_(lambda, inf)(a): e a e <= lambda e, hence -lambda <= e x_k e <= lambda"""
    n = a.shape[-1]
    return np.eye(n, dtype=np.complex128) - cut_above(a, lam)


def _scalar_recipe(family: MaximalFamily, lam: float) -> ComplexArray:
    """n = 1: keep exactly the cells where max_k |x_k| <= lambda, the optimal choice"""
    top = np.max(np.abs(np.real(family.values[..., 0, 0])), axis=1)
    return (top <= lam).astype(np.complex128)[:, None, None]


def _greedy_recipe(family: MaximalFamily, lam: float) -> ComplexArray:
    """Remove the eigenspaces of e x_k e beyond lambda until no member exceeds it"""
    n = family.n
    e = np.broadcast_to(np.eye(n, dtype=np.complex128), (family.num_cells, n, n)).copy()
    for _ in range(GREEDY_MAX_ROUNDS):
        changed = False
        for k in range(len(family)):
            y = hermitize(e @ family.member(k) @ e)
            excess = cut_above(absolute(y), lam)
            if np.any(np.real(np.trace(excess, axis1=-2, axis2=-1)) > 0.5):
                changed = True
                e = hermitize(e - excess)
        if not changed:
            break
    return e


def weak_max_quasinorm_upper(
    family: MaximalFamily,
    lam: float,
    p: float = 1.0,
    majorant: Optional[MajorantCertificate] = None,
    majorant_p: float = 1.0,
) -> WeakCertificate:
    """
    The best projection among the available recipes at one level lambda

    Recipes are (a) the spectral cut of a strong-norm majorant, (b) the exact
    cellwise choice for scalar families and (c) greedy eigenspace removal.
    Each candidate is re-verified before it is accepted; the one with the
    smallest trace deficit wins.

    Parameters
    ----------
    family: MaximalFamily
        Hermitian members
    lam: float
        Positive level
    p: float
        Exponent of the quasi-norm reported by WeakCertificate.value
    majorant: MajorantCertificate, optional
        Precomputed majorant for recipe (a)
    majorant_p: float
        Exponent of the majorant computed when none is given
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not p >= 1:
        raise ValueError(f"Weak exponent must be at least 1, got {p}")

    n = family.n
    if family.sup_norm() <= lam:
        e = np.broadcast_to(np.eye(n, dtype=np.complex128), (family.num_cells, n, n)).copy()
        return WeakCertificate(lam, e, 0.0, _weak_worst(e, family), "identity", p)

    if majorant is None:
        majorant = strong_max_norm(family, majorant_p)
    candidates: List[Tuple[str, ComplexArray]] = [
        ("majorant", _majorant_recipe(majorant.a, lam))
    ]
    if n == 1:
        candidates.append(("scalar", _scalar_recipe(family, lam)))
    candidates.append(("greedy", _greedy_recipe(family, lam)))

    limit = _weak_limit(lam, family)
    best: Optional[WeakCertificate] = None
    for recipe, e in candidates:
        worst = _weak_worst(e, family)
        if worst > limit:
            logger.debug("Recipe %s rejected: %.3e > %.3e", recipe, worst, limit)
            continue
        cert = WeakCertificate(lam, e, _deficit(e, family), worst, recipe, p)
        if best is None or cert.deficit < best.deficit:
            best = cert

    if best is None:
        logger.warning("No projection recipe reached lambda=%g; returning e = 0", lam)
        e = np.zeros((family.num_cells, n, n), dtype=np.complex128)
        return WeakCertificate(lam, e, _deficit(e, family), 0.0, "none", p, degenerate=True)
    return best


@dataclass
class WeakSweep(ISerializable):
    """Weak certificates over a lambda grid and their supremum"""

    certificates: List[WeakCertificate]

    @property
    def value(self) -> float:
        return max((c.value for c in self.certificates), default=0.0)

    @property
    def argmax(self) -> Optional[float]:
        if not self.certificates:
            return None
        return max(self.certificates, key=lambda c: c.value).lam

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "argmax": self.argmax,
            "points": [c.to_dict() for c in self.certificates],
        }


def weak_sweep(
    family: MaximalFamily,
    lambdas: Sequence[float],
    p: float = 1.0,
    majorant_p: float = 1.0,
) -> WeakSweep:
    """sup over the lambda grid of lambda phi(1 - e_lambda)^{1/p}; one majorant serves all levels"""
    majorant = strong_max_norm(family, majorant_p)
    return WeakSweep(
        [weak_max_quasinorm_upper(family, float(lam), p, majorant) for lam in lambdas]
    )


def scalar_distribution_value(family: MaximalFamily, lambdas: Sequence[float]) -> float:
    """sup over lambda of lambda |{max_k |x_k| > lambda}| for a scalar family"""
    if family.n != 1:
        raise ValueError("The distribution function value is defined for scalar families")
    top = np.max(np.abs(np.real(family.values[..., 0, 0])), axis=1)
    return max(
        (lam * family.cell_volume * float(np.sum(top > lam)) for lam in lambdas), default=0.0
    )
