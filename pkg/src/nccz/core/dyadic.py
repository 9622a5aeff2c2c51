"""
dyadic.py

Finite dyadic grids on R^d (d = 1, 2), operator-valued step functions on
them, the tensor trace phi = integral (x) Tr, the dyadic conditional
expectations E_k and Hardy-Littlewood ball averages.

Cells of the finest level are flattened in row-major order of their integer
multi-index, axis 0 being the first coordinate. A level-k cube is a block of
2^{k_max - k} cells per axis, so conditional expectations are block means.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from nccz.core.operator import (
    absolute,
    adjoint,
    eigvalsh,
    hermitize,
    min_eigenvalues,
    operator_norm,
    psd_tolerance,
    schatten_norms,
)
from nccz.core.quadrature import (
    GridQuadrature,
    QuadratureSettings,
    masked_product,
    point_weights,
)

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

MAX_CELLS = {1: 2**12, 2: 2**14}
MAX_MATRIX_DIM = 16


class LevelOutOfRangeError(Exception):
    """Raised when a dyadic level lies outside the grid window"""

    __slots__ = "level", "k_min", "k_max", "message"

    def __init__(self, level: int, k_min: int, k_max: int) -> None:
        super(Exception, self).__init__(level)
        self.level: int = level
        self.k_min: int = k_min
        self.k_max: int = k_max
        self.message: str = f"Level {level} is outside the grid window [{k_min}, {k_max}]"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(level={}, k_min={}, k_max={})".format(
            self.__class__.__name__, self.level, self.k_min, self.k_max
        )


class PointOutsideGridError(Exception):
    """Raised when a query point does not lie in the grid box"""

    __slots__ = "point", "message"

    def __init__(self, point: Sequence[float]) -> None:
        super(Exception, self).__init__(point)
        self.point: Tuple[float, ...] = tuple(float(c) for c in point)
        self.message: str = f"Point {self.point} lies outside the grid box"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(point={})".format(self.__class__.__name__, self.point)


@dataclass(frozen=True)
class DyadicGrid:
    """
    The box [0, 2^{-k_min})^d split into cells of side 2^{-k_max}

    Attributes
    ----------
    d: int
        Spatial dimension, 1 or 2
    k_min: int
        Coarsest level; the whole box is a single level-k_min cube
    k_max: int
        Finest level; fields are constant on level-k_max cubes
    """

    d: int
    k_min: int
    k_max: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise ValueError(f"Grid dimension must be 1 or 2, got {self.d}")
        if not self.k_min <= 0 < self.k_max:
            raise ValueError(
                f"Expected k_min <= 0 < k_max, got k_min={self.k_min}, k_max={self.k_max}"
            )
        if self.num_cells > MAX_CELLS[self.d]:
            raise ValueError(
                f"Grid has {self.num_cells} cells; the limit in d={self.d} "
                f"is {MAX_CELLS[self.d]}"
            )

    @property
    def side(self) -> float:
        return 2.0 ** (-self.k_min)

    @property
    def per_axis(self) -> int:
        return 2 ** (self.k_max - self.k_min)

    @property
    def num_cells(self) -> int:
        return self.per_axis**self.d

    @property
    def cell_side(self) -> float:
        return 2.0 ** (-self.k_max)

    @property
    def cell_volume(self) -> float:
        return self.cell_side**self.d

    @property
    def volume(self) -> float:
        return self.side**self.d

    @cached_property
    def multi_index(self) -> npt.NDArray[np.int64]:
        axes = np.meshgrid(*([np.arange(self.per_axis)] * self.d), indexing="ij")
        return np.stack([a.reshape(-1) for a in axes], axis=1).astype(np.int64)

    @cached_property
    def midpoints(self) -> RealArray:
        return (self.multi_index + 0.5) * self.cell_side

    @cached_property
    def quadrature(self) -> GridQuadrature:
        """Offset quadrature without breakpoints, shared by smooth integrands"""
        return GridQuadrature(self.d, self.per_axis, self.cell_side)

    def check_level(self, k: int) -> None:
        if not self.k_min <= k <= self.k_max:
            raise LevelOutOfRangeError(k, self.k_min, self.k_max)

    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def cubes_per_axis(self, k: int) -> int:
        self.check_level(k)
        return 2 ** (k - self.k_min)

    def num_cubes(self, k: int) -> int:
        return self.cubes_per_axis(k) ** self.d

    def level_labels(self, k: int) -> npt.NDArray[np.int64]:
        """Flat index of the level-k cube containing each finest cell"""
        c = self.cubes_per_axis(k)
        r = 2 ** (self.k_max - k)
        idx = self.multi_index // r
        flat = idx[:, 0]
        for axis in range(1, self.d):
            flat = flat * c + idx[:, axis]
        return flat

    def cube(self, k: int, flat_index: int) -> DyadicCube:
        c = self.cubes_per_axis(k)
        if self.d == 1:
            index: Tuple[int, ...] = (int(flat_index),)
        else:
            index = (int(flat_index) // c, int(flat_index) % c)
        return DyadicCube(k, index)

    def contains(self, points: npt.ArrayLike) -> npt.NDArray[np.bool_]:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((x >= 0.0) & (x < self.side), axis=-1)

    def cell_of(self, point: npt.ArrayLike) -> int:
        """Flat index of the finest cell containing point"""
        x = np.asarray(point, dtype=np.float64).reshape(-1)
        if x.size != self.d or not bool(self.contains(x)[0]):
            raise PointOutsideGridError(x)
        idx = np.floor(x / self.cell_side).astype(np.int64)
        flat = int(idx[0])
        for axis in range(1, self.d):
            flat = flat * self.per_axis + int(idx[axis])
        return flat

    def refine(self) -> DyadicGrid:
        return DyadicGrid(self.d, self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class CubeRegion:
    """A half-open axis-aligned box [lower, upper)"""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def contains(self, points: npt.ArrayLike) -> npt.NDArray[np.bool_]:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((x >= lo) & (x < hi), axis=-1)

    def clipped(self, grid: DyadicGrid) -> CubeRegion:
        """The part of the region inside the grid box, for iteration"""
        return CubeRegion(
            tuple(max(0.0, v) for v in self.lower),
            tuple(min(grid.side, v) for v in self.upper),
        )

    def volume(self) -> float:
        return float(np.prod([max(0.0, b - a) for a, b in zip(self.lower, self.upper)]))


@dataclass(frozen=True)
class DyadicCube:
    """
    The dyadic cube prod_j [index_j 2^{-level}, (index_j + 1) 2^{-level})

    Attributes
    ----------
    level: int
        The level k, so the side is 2^{-k}
    index: Tuple[int, ...]
        Integer position of the cube along each axis
    """

    level: int
    index: Tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def volume(self) -> float:
        return self.side**self.d

    @property
    def lower(self) -> Tuple[float, ...]:
        return tuple(i * self.side for i in self.index)

    @property
    def center(self) -> Tuple[float, ...]:
        return tuple((i + 0.5) * self.side for i in self.index)

    def father(self) -> DyadicCube:
        return DyadicCube(self.level - 1, tuple(i // 2 for i in self.index))

    def children(self) -> Tuple[DyadicCube, ...]:
        if self.d == 1:
            offsets: Sequence[Tuple[int, ...]] = [(0,), (1,)]
        else:
            offsets = [(0, 0), (0, 1), (1, 0), (1, 1)]
        return tuple(
            DyadicCube(self.level + 1, tuple(2 * i + o for i, o in zip(self.index, off)))
            for off in offsets
        )

    def region(self) -> CubeRegion:
        return self.dilate(1)

    def contains(self, points: npt.ArrayLike) -> npt.NDArray[np.bool_]:
        return self.region().contains(points)

    def dilate(self, factor: int) -> CubeRegion:
        """The cube with the same center and factor times the side, unclipped"""
        if factor < 1 or factor % 2 == 0:
            raise ValueError(f"Dilation factor must be an odd positive integer, got {factor}")
        half = 0.5 * factor * self.side
        return CubeRegion(
            tuple(c - half for c in self.center),
            tuple(c + half for c in self.center),
        )

    @classmethod
    def containing(cls, point: npt.ArrayLike, level: int) -> DyadicCube:
        x = np.asarray(point, dtype=np.float64).reshape(-1)
        # Scaling by a power of two is exact, so the floor is exact as well
        idx = np.floor(np.ldexp(x, level)).astype(np.int64)
        return cls(level, tuple(int(i) for i in idx))


def dyadic_centers(points: npt.ArrayLike, level: int) -> RealArray:
    """Centers c_{y,level} of the level cubes containing each point"""
    y = np.asarray(points, dtype=np.float64)
    side = 2.0 ** (-level)
    return (np.floor(np.ldexp(y, level)) + 0.5) * side


class OperatorField:
    """
    A matrix-valued step function on the finest cells of a dyadic grid

    Attributes
    ----------
    grid: DyadicGrid
        The supporting grid
    values: ComplexArray
        Read-only cell values shaped (N, n, n)
    hermitian: bool
        Whether values were symmetrized on construction
    """

    __slots__ = "grid", "_values", "hermitian"

    def __init__(self, grid: DyadicGrid, values: npt.ArrayLike, hermitian: bool = True) -> None:
        arr = np.array(values, dtype=np.complex128)
        if arr.ndim == 1:
            arr = arr.reshape((-1, 1, 1))
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"Field values must be shaped (N, n, n), got {arr.shape}")
        if arr.shape[0] != grid.num_cells:
            raise ValueError(
                f"Field has {arr.shape[0]} cells but the grid has {grid.num_cells}"
            )
        if arr.shape[1] > MAX_MATRIX_DIM:
            raise ValueError(
                f"Matrix dimension {arr.shape[1]} exceeds the limit {MAX_MATRIX_DIM}"
            )
        if hermitian:
            arr = hermitize(arr)
        arr.setflags(write=False)
        self.grid: DyadicGrid = grid
        self._values: ComplexArray = arr
        self.hermitian: bool = hermitian

    @classmethod
    def zeros(cls, grid: DyadicGrid, n: int) -> OperatorField:
        return cls(grid, np.zeros((grid.num_cells, n, n)))

    @classmethod
    def constant(cls, grid: DyadicGrid, matrix: npt.ArrayLike) -> OperatorField:
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim == 0:
            m = m.reshape((1, 1))
        return cls(grid, np.broadcast_to(m, (grid.num_cells,) + m.shape))

    @classmethod
    def identity(cls, grid: DyadicGrid, n: int) -> OperatorField:
        return cls.constant(grid, np.eye(n))

    @classmethod
    def scalar(cls, grid: DyadicGrid, values: npt.ArrayLike, n: int = 1) -> OperatorField:
        """values(x) times the n x n identity"""
        v = np.asarray(values, dtype=np.complex128).reshape(-1)
        return cls(grid, v[:, None, None] * np.eye(n)[None])

    @classmethod
    def from_function(
        cls, grid: DyadicGrid, func: Callable[[RealArray], npt.ArrayLike]
    ) -> OperatorField:
        """Sample func at the cell midpoints; func maps (N, d) points to (N, n, n)"""
        return cls(grid, func(grid.midpoints))

    @property
    def values(self) -> ComplexArray:
        return self._values

    @property
    def n(self) -> int:
        return int(self._values.shape[-1])

    @property
    def num_cells(self) -> int:
        return int(self._values.shape[0])

    def with_values(self, values: npt.ArrayLike, hermitian: Optional[bool] = None) -> OperatorField:
        return OperatorField(
            self.grid, values, self.hermitian if hermitian is None else hermitian
        )

    def _check_compatible(self, other: OperatorField) -> None:
        if other.grid != self.grid or other.n != self.n:
            raise ValueError("Fields live on different grids or matrix dimensions")

    def __add__(self, other: OperatorField) -> OperatorField:
        self._check_compatible(other)
        return OperatorField(
            self.grid, self._values + other.values, self.hermitian and other.hermitian
        )

    def __sub__(self, other: OperatorField) -> OperatorField:
        self._check_compatible(other)
        return OperatorField(
            self.grid, self._values - other.values, self.hermitian and other.hermitian
        )

    def __neg__(self) -> OperatorField:
        return OperatorField(self.grid, -self._values, self.hermitian)

    def __mul__(self, scalar: complex) -> OperatorField:
        keeps = self.hermitian and complex(scalar).imag == 0.0
        return OperatorField(self.grid, self._values * scalar, keeps)

    __rmul__ = __mul__

    def adjoint(self) -> OperatorField:
        return OperatorField(self.grid, adjoint(self._values), self.hermitian)

    def real_part(self) -> OperatorField:
        """(f + f*) / 2"""
        return OperatorField(self.grid, 0.5 * (self._values + adjoint(self._values)))

    def imag_part(self) -> OperatorField:
        """(f - f*) / 2i"""
        return OperatorField(
            self.grid, (self._values - adjoint(self._values)) / 2j
        )

    def product(self, other: OperatorField) -> OperatorField:
        """Cellwise matrix product, not Hermitian in general"""
        self._check_compatible(other)
        return OperatorField(self.grid, self._values @ other.values, hermitian=False)

    def compress(self, p: OperatorField) -> OperatorField:
        """Cellwise p f p"""
        self._check_compatible(p)
        return OperatorField(
            self.grid, p.values @ self._values @ p.values, self.hermitian and p.hermitian
        )

    def abs(self) -> OperatorField:
        return OperatorField(self.grid, absolute(self._values))

    def trace_phi(self) -> complex:
        return trace_phi(self)

    def norm(self, p: float) -> float:
        return field_norm(self, p)

    def operator_norms(self) -> RealArray:
        return operator_norm(self._values)

    def min_eigenvalues(self) -> RealArray:
        return min_eigenvalues(self._values)

    def is_psd(self) -> bool:
        """Certified per cell as min eigenvalue >= -tol_psd"""
        tol = psd_tolerance(np.zeros_like(self._values), self._values)
        return bool(np.all(self.min_eigenvalues() >= -tol))

    def refine(self) -> OperatorField:
        """The same step function on the grid with one more level"""
        fine = self.grid.refine()
        m = self.grid.per_axis
        n = self.n
        if self.grid.d == 1:
            values = np.repeat(self._values, 2, axis=0)
        else:
            block = self._values.reshape(m, m, n, n)
            values = np.repeat(np.repeat(block, 2, axis=0), 2, axis=1).reshape(-1, n, n)
        return OperatorField(fine, values, self.hermitian)

    def __repr__(self) -> str:
        return "{}(d={}, cells={}, n={})".format(
            self.__class__.__name__, self.grid.d, self.num_cells, self.n
        )


def level_means(f: OperatorField, k: int) -> ComplexArray:
    """Averages f_Q over every level-k cube, in flat cube order"""
    grid = f.grid
    c = grid.cubes_per_axis(k)
    r = 2 ** (grid.k_max - k)
    n = f.n
    if grid.d == 1:
        return f.values.reshape(c, r, n, n).mean(axis=1)
    return f.values.reshape(c, r, c, r, n, n).mean(axis=(1, 3)).reshape(c * c, n, n)


def expand_level(grid: DyadicGrid, k: int, cube_values: npt.ArrayLike) -> ComplexArray:
    """Broadcast per-cube values back to the finest cells"""
    arr = np.asarray(cube_values)
    c = grid.cubes_per_axis(k)
    r = 2 ** (grid.k_max - k)
    tail = arr.shape[1:]
    if grid.d == 1:
        return np.repeat(arr, r, axis=0)
    block = arr.reshape((c, c) + tail)
    return np.repeat(np.repeat(block, r, axis=0), r, axis=1).reshape((-1,) + tail)


def conditional_expectation(f: OperatorField, k: int) -> OperatorField:
    """
    E_k f: the field equal to f_Q on every level-k cube Q

    Raises
    ------
    LevelOutOfRangeError
        If k lies outside [k_min, k_max]
    """
    f.grid.check_level(k)
    return f.with_values(expand_level(f.grid, k, level_means(f, k)))


def trace_phi(f: OperatorField) -> complex:
    """phi(f) = sum over cells of vol * Tr(value)"""
    total = f.grid.cell_volume * np.sum(np.trace(f.values, axis1=1, axis2=2))
    if f.hermitian:
        return float(total.real)
    return complex(total)


def field_norm(f: OperatorField, p: float) -> float:
    """
    ||f||_p = (sum vol * Tr|f|^p)^{1/p}; p = inf gives the largest cellwise
    operator norm
    """
    if math.isinf(p):
        return float(np.max(f.operator_norms(), initial=0.0))
    per_cell = schatten_norms(f.values, p) ** p
    return float((f.grid.cell_volume * np.sum(per_cell)) ** (1.0 / p))


def weak_quasinorm(f: OperatorField, p: float = 1.0, per_decade: int = 64) -> float:
    """
    sup over a geometric lambda-grid of lambda * phi(chi_(lambda, inf)(|f|))^{1/p}

    The grid has per_decade points per decade between the smallest and the
    largest nonzero singular values, so the result is a lower bound of the
    true quasi-norm.
    """
    magnitudes = np.sort(np.abs(eigvalsh(f.values)).reshape(-1))
    positive = magnitudes[magnitudes > 0.0]
    if positive.size == 0:
        return 0.0

    lo = math.floor(math.log10(positive[0]) * per_decade) - 1
    hi = math.ceil(math.log10(positive[-1]) * per_decade)
    lambdas = 10.0 ** (np.arange(lo, hi + 1) / per_decade)

    count = positive.size - np.searchsorted(positive, lambdas, side="right")
    trace = count * f.grid.cell_volume
    return float(np.max(lambdas * trace ** (1.0 / p)))


def ball_profile(eps: float, d: int) -> Callable[[RealArray], RealArray]:
    """eps^{-d} on the closed l2-ball of radius eps"""
    scale = eps ** (-d)

    def profile(r: RealArray) -> RealArray:
        return np.where(r <= eps, scale, 0.0)

    return profile


def hl_average(
    f: OperatorField, eps: float, settings: Optional[QuadratureSettings] = None
) -> OperatorField:
    """
    M_eps f(x) = eps^{-d} integral over |x - y| <= eps of f(y) dy at cell midpoints

    Parameters
    ----------
    f: OperatorField
        The field to average; it is extended by zero outside the box
    eps: float
        Ball radius
    settings: QuadratureSettings, optional
        Quadrature resolution

    Returns
    -------
    OperatorField
        The averages, positive whenever f is
    """
    if not eps > 0:
        raise ValueError(f"Averaging radius must be positive, got {eps}")
    grid = f.grid
    quad = GridQuadrature(grid.d, grid.per_axis, grid.cell_side, [eps], settings)
    weights = quad.offset_weights(masked_product(ball_profile(eps, grid.d), None))
    return f.with_values(quad.apply(weights, f.values))


def hl_average_at(
    f: OperatorField,
    eps: float,
    point: npt.ArrayLike,
    settings: Optional[QuadratureSettings] = None,
) -> ComplexArray:
    """M_eps f evaluated at an arbitrary point of R^d"""
    if not eps > 0:
        raise ValueError(f"Averaging radius must be positive, got {eps}")
    grid = f.grid
    w = point_weights(
        grid.midpoints,
        grid.cell_side,
        point,
        masked_product(ball_profile(eps, grid.d), None),
        [eps],
        settings,
    )
    return np.einsum("j,jab->ab", w, f.values)


def cube_queries(
    grid: DyadicGrid, point: npt.ArrayLike, k: int
) -> Tuple[DyadicCube, Tuple[float, ...]]:
    """
    The cube Q_{x,k} containing x and its center c_{x,k}

    Raises
    ------
    PointOutsideGridError
        If x is not in the grid box
    LevelOutOfRangeError
        If k lies outside the grid window
    """
    x = np.asarray(point, dtype=np.float64).reshape(-1)
    if x.size != grid.d or not bool(grid.contains(x)[0]):
        raise PointOutsideGridError(x)
    grid.check_level(k)
    cube = DyadicCube.containing(x, k)
    return cube, cube.center


def dilate(cube: DyadicCube, factor: int) -> CubeRegion:
    return cube.dilate(factor)
