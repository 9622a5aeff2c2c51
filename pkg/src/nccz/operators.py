"""
operators.py

Truncated, lacunary, directional, rotated and smoothly truncated singular
integral operators acting on operator fields.

Every grid operator here is a weight matrix W[x, y] = integral over cell(y)
of K(x, y') dy', evaluated at cell midpoints x. SingularIntegralOperator
integrates all radial profiles it needs (the truncation at each ladder
radius, every partition piece, the boundary pieces, ball averages) on one
shared node set, so identities between them hold up to rounding.

Directional operators integrate along rays with exact ray/cell segments.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from nccz.core.dyadic import DyadicGrid, OperatorField, ball_profile, field_norm
from nccz.core.operator import sandwich_constants
from nccz.core.parallel import map_chunks
from nccz.core.quadrature import GridQuadrature, QuadratureSettings
from nccz.core.serializable import ISerializable
from nccz.kernels import (
    KernelSpec,
    PartitionFamily,
    RoughSymbol,
    rough_kernel,
    size_and_lipschitz,
    smooth_cutoff,
)

logger = logging.getLogger(__name__)

RealArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
RadialProfile = Callable[[RealArray], RealArray]

DEFAULT_WINDOW_TOL = 1e-10


class UnresolvableTruncationError(Exception):
    """Raised when a truncation radius is below half a finest cell"""

    __slots__ = "eps", "cell_side", "message"

    def __init__(self, eps: float, cell_side: float) -> None:
        super(Exception, self).__init__(eps)
        self.eps: float = eps
        self.cell_side: float = cell_side
        self.message: str = (
            f"Truncation radius {eps:g} is below half the cell side {cell_side:g}"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(eps={}, cell_side={})".format(
            self.__class__.__name__, self.eps, self.cell_side
        )


class PartitionWindowError(Exception):
    """Raised when the partition of unity does not cover the scales in use"""

    __slots__ = "residual", "message"

    def __init__(self, residual: float) -> None:
        super(Exception, self).__init__(residual)
        self.residual: float = residual
        self.message: str = (
            f"Partition window too narrow to telescope (residual {residual:.3e})"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(residual={})".format(self.__class__.__name__, self.residual)


class NotOddSymbolError(Exception):
    """Raised when the method of rotations receives a symbol that is not odd"""

    __slots__ = "even_norm", "message"

    def __init__(self, even_norm: float) -> None:
        super(Exception, self).__init__(even_norm)
        self.even_norm: float = even_norm
        self.message: str = f"Symbol is not odd: ||Omega_e||_1 = {even_norm:.3e}"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(even_norm={})".format(self.__class__.__name__, self.even_norm)


@dataclass(frozen=True)
class TruncationLadder(ISerializable):
    """
    A strictly decreasing sequence of truncation radii

    Attributes
    ----------
    epsilons: Tuple[float, ...]
        The radii
    d: int
        Spatial dimension, which fixes the index map j(eps)
    """

    epsilons: Tuple[float, ...]
    d: int

    def __post_init__(self) -> None:
        eps = np.asarray(self.epsilons, dtype=np.float64)
        if eps.size == 0:
            raise ValueError("A truncation ladder needs at least one radius")
        if np.any(eps <= 0.0):
            raise ValueError("Truncation radii must be positive")
        if np.any(np.diff(eps) >= 0.0):
            raise ValueError("Truncation radii must be strictly decreasing")

    @staticmethod
    def default_top(grid: DyadicGrid) -> int:
        """The largest J <= k_max - k_min with eps_J at least one cell side"""
        resolvable = math.floor(grid.k_max + 1 + 0.5 * math.log2(grid.d) + 1e-12)
        return max(0, min(grid.k_max - grid.k_min, resolvable))

    @classmethod
    def default(cls, grid: DyadicGrid, top: Optional[int] = None) -> TruncationLadder:
        """eps_j = 2 sqrt(d) 2^{-j} for j = 0..J"""
        limit = cls.default_top(grid)
        top = limit if top is None else top
        if not 0 <= top <= limit:
            raise ValueError(f"Ladder top must lie in [0, {limit}], got {top}")
        root = math.sqrt(grid.d)
        return cls(tuple(2.0 * root * 2.0 ** (-j) for j in range(top + 1)), grid.d)

    @property
    def top(self) -> int:
        return self.j_of(self.epsilons[-1])

    def j_of(self, eps: float) -> int:
        """j_eps = [log2(2 sqrt(d) / eps)]"""
        return int(math.floor(math.log2(2.0 * math.sqrt(self.d) / eps) + 1e-12))

    def __len__(self) -> int:
        return len(self.epsilons)

    def __iter__(self) -> Iterator[float]:
        return iter(self.epsilons)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilons": list(self.epsilons),
            "indices": [self.j_of(e) for e in self.epsilons],
        }


@dataclass(frozen=True)
class LacunaryPieces:
    """
    The lacunary split of T_eps f at eps = eps_j

    Attributes
    ----------
    j: int
        Ladder index
    eps: float
        Truncation radius
    pieces: Dict[int, OperatorField]
        T_{phi,i} f for i < j in the partition window
    partial: OperatorField
        T^phi_j f, the sum of the pieces
    boundary: OperatorField
        T^phi_{eps,j} f
    truncated: OperatorField
        T_eps f
    residual: float
        max over cells of ||T_eps f - T^phi_j f - T^phi_{eps,j} f||_inf
    scale: float
        ||f||_inf times the size constant of the kernel
    """

    j: int
    eps: float
    pieces: Dict[int, OperatorField]
    partial: OperatorField
    boundary: OperatorField
    truncated: OperatorField
    residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


class SingularIntegralOperator:
    """
    A Calderon-Zygmund kernel bound to a dyadic grid

    Attributes
    ----------
    kernel: KernelSpec
        The kernel k(x, y)
    grid: DyadicGrid
        Grid on which inputs and outputs live
    ladder: TruncationLadder
        Truncation radii registered with the shared quadrature
    partition: PartitionFamily
        The smooth dyadic partition phi_i
    settings: QuadratureSettings
        Quadrature resolution
    """

    __slots__ = (
        "kernel",
        "grid",
        "ladder",
        "partition",
        "settings",
        "radii",
        "_quadratures",
        "_kernel_values",
        "_weights",
        "_size",
    )

    def __init__(
        self,
        kernel: KernelSpec,
        grid: DyadicGrid,
        ladder: Optional[TruncationLadder] = None,
        settings: Optional[QuadratureSettings] = None,
        partition: Optional[PartitionFamily] = None,
    ) -> None:
        if kernel.d != grid.d:
            raise ValueError(
                f"Kernel dimension {kernel.d} does not match grid dimension {grid.d}"
            )
        self.kernel: KernelSpec = kernel
        self.grid: DyadicGrid = grid
        self.ladder: TruncationLadder = (
            ladder if ladder is not None else TruncationLadder.default(grid)
        )
        self.settings: QuadratureSettings = (
            settings if settings is not None else QuadratureSettings()
        )
        for eps in self.ladder:
            self.check_resolvable(eps)
        self.partition: PartitionFamily = (
            partition
            if partition is not None
            else PartitionFamily.for_grid(grid.d, grid.k_min, grid.k_max, self.ladder.top)
        )

        diameter = 2.0 * math.sqrt(grid.d) * grid.side
        floor = 0.25 * grid.cell_side
        radii = set(self.ladder.epsilons)
        radii.update(r for r in self.partition.breakpoints() if floor <= r <= diameter)
        self.radii: Tuple[float, ...] = tuple(sorted(radii))

        self._quadratures: Dict[Tuple[float, ...], GridQuadrature] = {}
        self._kernel_values: Dict[Tuple[float, ...], npt.NDArray] = {}
        self._weights: Dict[Tuple[Any, ...], npt.NDArray] = {}
        self._size: Optional[float] = None

    def check_resolvable(self, eps: float) -> None:
        if not eps > 0:
            raise ValueError(f"Truncation radius must be positive, got {eps}")
        if eps < 0.5 * self.grid.cell_side:
            raise UnresolvableTruncationError(eps, self.grid.cell_side)

    @property
    def size_constant(self) -> float:
        if self._size is None:
            self._size = size_and_lipschitz(self.kernel, budget=512).size
        return self._size

    # -- quadrature plumbing ------------------------------------------------

    def _key_for(self, radii: Sequence[float]) -> Tuple[float, ...]:
        registered = np.asarray(self.radii)
        if all(np.any(np.abs(registered - r) <= 1e-14 * r) for r in radii):
            return self.radii
        return tuple(sorted(set(float(r) for r in radii)))

    def quadrature(self, radii: Sequence[float] = ()) -> GridQuadrature:
        """The shared quadrature, or a dedicated one when radii are not registered"""
        key = self._key_for(radii)
        if key not in self._quadratures:
            self._quadratures[key] = GridQuadrature(
                self.grid.d, self.grid.per_axis, self.grid.cell_side, key, self.settings
            )
        return self._quadratures[key]

    def _nodal_kernel(self, key: Tuple[float, ...]) -> npt.NDArray:
        if key not in self._kernel_values:
            points = self._quadratures[key].nodes.points
            with np.errstate(divide="ignore", invalid="ignore"):
                values = np.asarray(self.kernel.evaluate(points))
            self._kernel_values[key] = np.where(np.isfinite(values), values, 0.0)
        return self._kernel_values[key]

    def _apply(
        self,
        f: OperatorField,
        tag: Tuple[Any, ...],
        profile: RadialProfile,
        radii: Sequence[float] = (),
        with_kernel: bool = True,
    ) -> OperatorField:
        if f.grid != self.grid:
            raise ValueError("Field lives on a different grid than the operator")
        quad = self.quadrature(radii)
        key = self._key_for(radii)
        hermitian = f.hermitian and (self.kernel.is_real or not with_kernel)

        if with_kernel and not self.kernel.is_convolution:
            pair = self.kernel.evaluate_pair

            def integrand(x: RealArray, z: RealArray) -> npt.NDArray:
                prof = profile(np.sqrt(np.sum(z * z, axis=-1)))
                nz = prof != 0.0
                out = np.zeros(prof.shape, dtype=np.complex128)
                if np.any(nz):
                    out[nz] = prof[nz] * pair(np.broadcast_to(x, z[nz].shape), x - z[nz])
                return out

            values = quad.apply_pointwise(integrand, self.grid.midpoints, f.values)
            return f.with_values(values, hermitian=hermitian)

        cache_key = (key,) + tag
        if cache_key not in self._weights:
            points = quad.nodes.points
            prof = profile(np.sqrt(np.sum(points * points, axis=-1)))
            if with_kernel:
                integrand = np.where(prof != 0.0, prof * self._nodal_kernel(key), 0.0)
            else:
                integrand = prof
            self._weights[cache_key] = quad.nodes.integrate(integrand)
        values = quad.apply(self._weights[cache_key], f.values)
        return f.with_values(values, hermitian=hermitian)

    # -- operators ------------------------------------------------------------

    def truncated(self, f: OperatorField, eps: float) -> OperatorField:
        """T_eps f(x) = integral over |x - y| > eps of k(x, y) f(y) dy"""
        self.check_resolvable(eps)
        return self._apply(
            f, ("truncated", eps), lambda r: np.where(r > eps, 1.0, 0.0), (eps,)
        )

    def piece(self, f: OperatorField, i: int) -> OperatorField:
        """T_{phi,i} f with kernel k(x, y) phi_i(x - y)"""
        return self._apply(f, ("piece", i), self.partition.radial(i))

    def lacunary(self, f: OperatorField, j: int) -> OperatorField:
        """T^phi_j f = sum over i < j of T_{phi,i} f"""
        return self._apply(
            f, ("lacunary", j), self.partition.radial_sum(self.partition.i_min, j)
        )

    def boundary_profile(self, eps: float) -> RadialProfile:
        j = self.ladder.j_of(eps)
        above = self.partition.radial_sum(j, self.partition.i_max + 1)
        below = self.partition.radial_sum(self.partition.i_min, j)

        def profile(r: RealArray) -> RealArray:
            return np.where(r > eps, above(r), -below(r))

        return profile

    def boundary(self, f: OperatorField, eps: float) -> OperatorField:
        """T^phi_{eps, j_eps} f = T_eps f - T^phi_{j_eps} f"""
        self.check_resolvable(eps)
        return self._apply(f, ("boundary", eps), self.boundary_profile(eps), (eps,))

    def smooth_truncated(self, f: OperatorField, eps: float) -> OperatorField:
        """integral of k(y) cutoff(|y| / eps) f(x - y) dy"""
        self.check_resolvable(eps)
        return self._apply(
            f,
            ("smooth", eps),
            lambda r: smooth_cutoff(r / eps),
            (0.25 * eps, 0.75 * eps),
        )

    def average(self, f: OperatorField, radius: float) -> OperatorField:
        """M_r f on the shared nodes"""
        return self._apply(
            f, ("average", radius), ball_profile(radius, self.grid.d), (radius,), False
        )

    def check_window(self, tol: float = DEFAULT_WINDOW_TOL) -> float:
        """
        Partition-of-unity residual on every node beyond the smallest radius

        Raises
        ------
        PartitionWindowError
            If the residual exceeds tol
        """
        points = self.quadrature().nodes.points
        r = np.sqrt(np.sum(points * points, axis=-1))
        active = r > min(self.ladder.epsilons[-1], 0.5 * self.grid.cell_side)
        residual = float(np.max(self.partition.residual(points[active]), initial=0.0))
        if residual > tol:
            raise PartitionWindowError(residual)
        return residual

    def pieces(self, f: OperatorField, j: int) -> LacunaryPieces:
        """
        Split T_{eps_j} f into T_{phi,i} f (i < j) and the boundary piece

        The pieces are summed to form T^phi_j f, so the reported residual is
        the partition-of-unity telescoping error.
        """
        if not 0 <= j <= self.ladder.top:
            raise ValueError(f"Ladder index {j} outside [0, {self.ladder.top}]")
        self.check_window()
        eps = 2.0 * math.sqrt(self.grid.d) * 2.0 ** (-j)

        parts = {i: self.piece(f, i) for i in range(self.partition.i_min, j)}
        total = np.zeros_like(f.values)
        for i in sorted(parts):
            total = total + parts[i].values
        partial = f.with_values(total, hermitian=f.hermitian and self.kernel.is_real)
        truncated = self.truncated(f, eps)
        boundary = self.boundary(f, eps)

        residual = float(
            np.max(np.abs(truncated.values - partial.values - boundary.values), initial=0.0)
        )
        scale = field_norm(f, math.inf) * self.size_constant
        logger.debug("Lacunary split at j=%d: residual %.3e", j, residual)
        return LacunaryPieces(j, eps, parts, partial, boundary, truncated, residual, scale)

    def telescoping_residuals(self, f: OperatorField) -> List[float]:
        """Relative residual of T_eps = T^phi_j + T^phi_{eps,j} at every ladder radius"""
        scale = max(field_norm(f, math.inf) * self.size_constant, 1e-300)
        out = []
        for eps in self.ladder:
            j = self.ladder.j_of(eps)
            diff = (
                self.truncated(f, eps).values
                - self.lacunary(f, j).values
                - self.boundary(f, eps).values
            )
            out.append(float(np.max(np.abs(diff), initial=0.0)) / scale)
        return out

    def boundary_sandwich(self, f: OperatorField) -> RealArray:
        """
        Per ladder radius, the smallest C with
        -C M_{2^{-j+1} sqrt d} f <= T^phi_{eps,j} f <= C M_{2^{-j+1} sqrt d} f
        """
        out = []
        for eps in self.ladder:
            j = self.ladder.j_of(eps)
            radius = 2.0 ** (-j + 1) * math.sqrt(self.grid.d)
            piece = self.boundary(f, eps)
            avg = self.average(f, radius)
            out.append(float(np.max(sandwich_constants(piece.values, avg.values), initial=0.0)))
        return np.array(out)

    def truncated_family(self, f: OperatorField) -> List[OperatorField]:
        return [self.truncated(f, eps) for eps in self.ladder]

    def lacunary_family(self, f: OperatorField) -> List[OperatorField]:
        return [self.lacunary(f, self.ladder.j_of(eps)) for eps in self.ladder]

    def boundary_family(self, f: OperatorField) -> List[OperatorField]:
        return [self.boundary(f, eps) for eps in self.ladder]

    def average_family(self, f: OperatorField) -> List[OperatorField]:
        """M_{2^{-j+1} sqrt d} f along the ladder"""
        root = math.sqrt(self.grid.d)
        return [
            self.average(f, 2.0 ** (-self.ladder.j_of(eps) + 1) * root) for eps in self.ladder
        ]

    def __repr__(self) -> str:
        return "{}(kernel={}, grid=(d={}, k_min={}, k_max={}), ladder={})".format(
            self.__class__.__name__,
            self.kernel.name,
            self.grid.d,
            self.grid.k_min,
            self.grid.k_max,
            len(self.ladder),
        )


def truncated_czo(
    kernel: KernelSpec,
    f: OperatorField,
    eps: float,
    settings: Optional[QuadratureSettings] = None,
) -> OperatorField:
    return SingularIntegralOperator(kernel, f.grid, settings=settings).truncated(f, eps)


def lacunary_pieces(
    kernel: KernelSpec,
    partition: Optional[PartitionFamily],
    f: OperatorField,
    j: int,
    ladder: Optional[TruncationLadder] = None,
    settings: Optional[QuadratureSettings] = None,
) -> LacunaryPieces:
    """
    Raises
    ------
    PartitionWindowError
        When the partition does not sum to one on the grid scales
    """
    op = SingularIntegralOperator(kernel, f.grid, ladder, settings, partition)
    return op.pieces(f, j)


def complex_split(
    kernel: KernelSpec, f: OperatorField, eps: float, settings: Optional[QuadratureSettings] = None
) -> Tuple[OperatorField, OperatorField]:
    """(Re(T_eps) f, Im(T_eps) f) from the real and imaginary kernels"""
    re = truncated_czo(kernel.real_part(), f, eps, settings)
    im = truncated_czo(kernel.imag_part(), f, eps, settings)
    return re, im


# ---------------------------------------------------------------------------
# Directional operators
# ---------------------------------------------------------------------------


def _unit(theta: npt.ArrayLike, d: int) -> RealArray:
    t = np.asarray(theta, dtype=np.float64).reshape(-1)
    if t.size != d:
        raise ValueError(f"Direction must have {d} components, got {t.size}")
    norm = float(np.linalg.norm(t))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"Direction must be a unit vector, |theta| = {norm}")
    return t


def _ray_weights(
    grid: DyadicGrid,
    points: RealArray,
    theta: RealArray,
    eps: float,
    kind: str,
) -> Tuple[npt.NDArray[np.int64], RealArray]:
    """
    Segments of the rays t -> x - t theta through the grid cells

    Returns the flat cell index of each segment (-1 outside the box) and the
    segment weight: integral of dt / t over |t| > eps for "hilbert", or the
    length inside |t| <= eps divided by 2 eps for "average".
    """
    side = grid.side
    h = grid.cell_side
    lines = np.arange(grid.per_axis + 1) * h

    cuts = [np.broadcast_to(np.array([0.0, -eps, eps]), (points.shape[0], 3))]
    lower = np.full(points.shape[0], -np.inf)
    upper = np.full(points.shape[0], np.inf)
    for axis in range(grid.d):
        if theta[axis] == 0.0:
            continue
        x = points[:, axis : axis + 1]
        cuts.append((x - lines[None, :]) / theta[axis])
        ends = np.sort(np.concatenate([x / theta[axis], (x - side) / theta[axis]], axis=1), axis=1)
        lower = np.maximum(lower, ends[:, 0])
        upper = np.minimum(upper, ends[:, 1])

    t = np.sort(np.concatenate(cuts, axis=1), axis=1)
    a = t[:, :-1]
    b = t[:, 1:]
    valid = (b > a) & (a >= lower[:, None] - 1e-15) & (b <= upper[:, None] + 1e-15)

    mid = 0.5 * (a + b)
    pos = points[:, None, :] - mid[..., None] * theta[None, None, :]
    idx = np.clip(np.floor(pos / h).astype(np.int64), 0, grid.per_axis - 1)
    flat = idx[..., 0]
    for axis in range(1, grid.d):
        flat = flat * grid.per_axis + idx[..., axis]

    if kind == "hilbert":
        outside = (a >= eps) | (b <= -eps)
        valid &= outside
        with np.errstate(divide="ignore", invalid="ignore"):
            weights = np.where(valid, np.log(np.where(valid, b / a, 1.0)), 0.0)
    else:
        inside = (a >= -eps) & (b <= eps)
        valid &= inside
        weights = np.where(valid, (b - a) / (2.0 * eps), 0.0)

    return np.where(valid, flat, -1), weights


def _ray_operator(
    f: OperatorField, theta: RealArray, eps: float, kind: str, factor: float
) -> ComplexArray:
    grid = f.grid
    points = grid.midpoints
    values = f.values

    def block(s: slice) -> npt.NDArray:
        cells, weights = _ray_weights(grid, points[s], theta, eps, kind)
        gathered = values[np.where(cells >= 0, cells, 0)]
        return factor * np.einsum("ps,psab->pab", weights, gathered)

    return map_chunks(block, grid.num_cells)


def directional_hilbert(f: OperatorField, theta: npt.ArrayLike, eps: float) -> OperatorField:
    """
    H_{theta,eps} f(x) = (1 / pi) integral over |t| > eps of f(x - t theta) dt / t

    f is extended by zero outside the grid box.
    """
    if not eps > 0:
        raise ValueError(f"Truncation radius must be positive, got {eps}")
    direction = _unit(theta, f.grid.d)
    return f.with_values(_ray_operator(f, direction, eps, "hilbert", 1.0 / math.pi))


def directional_average(f: OperatorField, theta: npt.ArrayLike, eps: float) -> OperatorField:
    """f_{theta,eps}(x) = (2 eps)^{-1} integral over |r| <= eps of f(x - r theta) dr"""
    if not eps > 0:
        raise ValueError(f"Averaging radius must be positive, got {eps}")
    direction = _unit(theta, f.grid.d)
    return f.with_values(_ray_operator(f, direction, eps, "average", 1.0))


def _directions(omega: RoughSymbol) -> RealArray:
    if omega.d == 1:
        return np.array([[1.0], [-1.0]])
    return np.stack([np.cos(omega.angles), np.sin(omega.angles)], axis=1)


def rotation_method(omega: RoughSymbol, f: OperatorField, eps: float) -> OperatorField:
    """
    (pi / 2) integral over the sphere of Omega(theta) H_{theta,eps} f dtheta

    Antipodal directions contribute equally for odd symbols, so only half of
    the angular table is visited.

    Raises
    ------
    NotOddSymbolError
        If ||Omega_e||_1 exceeds 1e-10 ||Omega||_1
    """
    if omega.d != f.grid.d:
        raise ValueError("Symbol and field dimensions differ")
    if not omega.is_odd():
        raise NotOddSymbolError(omega.even_part().l1_norm())

    directions = _directions(omega)
    half = omega.resolution // 2
    total = np.zeros_like(f.values)
    for a in range(half):
        weight = 2.0 * omega.weights[a] * omega.values[a]
        if weight == 0.0:
            continue
        total = total + weight * _ray_operator(f, directions[a], eps, "hilbert", 1.0 / math.pi)
    return f.with_values(0.5 * math.pi * total)


def smooth_truncation(
    omega: RoughSymbol,
    f: OperatorField,
    eps: float,
    settings: Optional[QuadratureSettings] = None,
) -> OperatorField:
    """integral of k_Omega(y) cutoff(y / eps) f(x - y) dy"""
    op = SingularIntegralOperator(rough_kernel(omega), f.grid, settings=settings)
    return op.smooth_truncated(f, eps)


def directional_majorant(omega: RoughSymbol, f: OperatorField, eps: float) -> OperatorField:
    """integral over the sphere of |Omega(theta)| f_{theta,eps} dtheta"""
    directions = _directions(omega)
    total = np.zeros_like(f.values)
    for a in range(omega.resolution):
        weight = omega.weights[a] * abs(omega.values[a])
        if weight == 0.0:
            continue
        total = total + weight * _ray_operator(f, directions[a], eps, "average", 1.0)
    return f.with_values(total)


@dataclass(frozen=True)
class SmoothTruncationCheck(ISerializable):
    """Sandwich -C maj <= smooth - sharp <= C maj for a PSD input"""

    eps: float
    constant: float
    difference_norm: float
    majorant_norm: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "constant": self.constant,
            "difference_norm": self.difference_norm,
            "majorant_norm": self.majorant_norm,
        }


def smooth_truncation_sandwich(
    omega: RoughSymbol,
    f: OperatorField,
    eps: float,
    settings: Optional[QuadratureSettings] = None,
) -> SmoothTruncationCheck:
    op = SingularIntegralOperator(rough_kernel(omega), f.grid, settings=settings)
    difference = op.smooth_truncated(f, eps) - op.truncated(f, eps)
    majorant = directional_majorant(omega, f, eps)
    constants = sandwich_constants(difference.values, majorant.values)
    return SmoothTruncationCheck(
        eps=eps,
        constant=float(np.max(constants, initial=0.0)),
        difference_norm=field_norm(difference, math.inf),
        majorant_norm=field_norm(majorant, math.inf),
    )
