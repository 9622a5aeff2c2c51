"""
quadrature.py

Cell quadrature for integral operators on uniform grids.

An operator with a convolution kernel K acting on a step function f, and
evaluated at cell midpoints x_i, reduces to weights

    W[i, j] = integral over (x_i - cell_j) of K(z) dz

and x_i - cell_j only depends on the integer offset i - j. The weights are
therefore integrated once per offset on a fixed node set and gathered into
dense rows on demand.

In one dimension every cell is split at the registered radii (and at the
origin) and each piece gets Gauss-Legendre nodes, so piecewise smooth
integrands are integrated to machine precision. In two dimensions cells that
cross a registered circle are refined recursively; sub-cells still crossing
at the last level fall back to midpoint inclusion.

Integrands evaluated on the same node set combine linearly, which is what
keeps telescoping identities between operators exact up to rounding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from nccz.core.parallel import map_chunks

logger = logging.getLogger(__name__)

RealArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True)
class QuadratureSettings:
    """
    Resolution of the cell quadrature

    Attributes
    ----------
    gauss_order: int
        Gauss-Legendre nodes per piece in one dimension
    tensor_order: int
        Gauss-Legendre nodes per axis on each (sub-)cell in two dimensions
    subdivision: int
        Children per axis when a two-dimensional cell is refined
    depth: int
        Maximum refinement depth for cells crossing a circle
    """

    gauss_order: int = 12
    tensor_order: int = 4
    subdivision: int = 4
    depth: int = 2


@dataclass(frozen=True)
class NodeSet:
    """Quadrature nodes grouped by the box ("owner") they integrate over"""

    points: RealArray
    weights: RealArray
    owner: IntArray
    size: int

    def integrate(self, values: npt.NDArray) -> npt.NDArray:
        """Sum values * weights per owner box"""
        weighted = np.asarray(values) * self.weights
        if np.iscomplexobj(weighted):
            real = np.bincount(self.owner, weights=weighted.real, minlength=self.size)
            imag = np.bincount(self.owner, weights=weighted.imag, minlength=self.size)
            return real + 1j * imag
        return np.bincount(self.owner, weights=weighted, minlength=self.size)


def _interval_nodes(
    lower: RealArray, upper: RealArray, radii: Sequence[float], order: int
) -> NodeSet:
    breaks = {0.0}
    for r in radii:
        breaks.add(float(r))
        breaks.add(-float(r))
    cuts = np.array(sorted(breaks))

    first = np.searchsorted(cuts, lower, side="right")
    last = np.searchsorted(cuts, upper, side="left")
    counts = last - first
    pieces = counts + 1
    total = int(pieces.sum())

    owner = np.repeat(np.arange(lower.shape[0]), pieces)
    start = np.cumsum(pieces) - pieces
    pos = np.arange(total) - np.repeat(start, pieces)
    base = np.repeat(first, pieces)
    cnt = np.repeat(counts, pieces)

    left = np.where(
        pos == 0,
        np.repeat(lower, pieces),
        cuts[np.clip(base + pos - 1, 0, cuts.size - 1)],
    )
    right = np.where(
        pos == cnt,
        np.repeat(upper, pieces),
        cuts[np.clip(base + pos, 0, cuts.size - 1)],
    )

    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    points = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1, 1)
    weights = (half[:, None] * w[None, :]).reshape(-1)
    node_owner = np.repeat(owner, order)

    return NodeSet(points, weights, node_owner, int(lower.shape[0]))


def _square_nodes(
    centers: RealArray,
    half: float,
    radii: Sequence[float],
    settings: QuadratureSettings,
) -> NodeSet:
    radius = np.asarray(sorted(float(r) for r in radii), dtype=np.float64)
    x, w = np.polynomial.legendre.leggauss(settings.tensor_order)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    gw = np.outer(w, w).reshape(-1)
    gx = gx.reshape(-1)
    gy = gy.reshape(-1)

    sub = settings.subdivision
    steps = (np.arange(sub) + 0.5) / sub * 2.0 - 1.0
    sx, sy = np.meshgrid(steps, steps, indexing="ij")
    sx = sx.reshape(-1)
    sy = sy.reshape(-1)

    box_center = np.asarray(centers, dtype=np.float64)
    box_owner = np.arange(box_center.shape[0])
    box_half = float(half)

    points = []
    weights = []
    owners = []

    for level in range(settings.depth + 1):
        if box_center.shape[0] == 0:
            break

        if radius.size:
            ax = np.abs(box_center[:, 0])
            ay = np.abs(box_center[:, 1])
            near = np.hypot(np.maximum(ax - box_half, 0.0), np.maximum(ay - box_half, 0.0))
            far = np.hypot(ax + box_half, ay + box_half)
            crossing = np.any(
                (near[:, None] < radius[None, :]) & (radius[None, :] < far[:, None]),
                axis=1,
            )
        else:
            crossing = np.zeros(box_center.shape[0], dtype=bool)

        smooth = ~crossing
        if np.any(smooth):
            c = box_center[smooth]
            pts = np.stack(
                [
                    (c[:, 0:1] + box_half * gx[None, :]).reshape(-1),
                    (c[:, 1:2] + box_half * gy[None, :]).reshape(-1),
                ],
                axis=1,
            )
            points.append(pts)
            weights.append(np.tile(gw * box_half * box_half, c.shape[0]))
            owners.append(np.repeat(box_owner[smooth], gw.size))

        if not np.any(crossing):
            break

        c = box_center[crossing]
        o = box_owner[crossing]
        if level == settings.depth:
            points.append(c)
            weights.append(np.full(c.shape[0], 4.0 * box_half * box_half))
            owners.append(o)
        else:
            child_half = box_half / sub
            box_center = np.stack(
                [
                    (c[:, 0:1] + box_half * sx[None, :]).reshape(-1),
                    (c[:, 1:2] + box_half * sy[None, :]).reshape(-1),
                ],
                axis=1,
            )
            box_owner = np.repeat(o, sx.size)
            box_half = child_half

    if not points:
        empty = np.zeros((0, 2))
        return NodeSet(empty, np.zeros(0), np.zeros(0, dtype=np.int64), centers.shape[0])

    return NodeSet(
        np.concatenate(points, axis=0),
        np.concatenate(weights),
        np.concatenate(owners).astype(np.int64),
        int(centers.shape[0]),
    )


def box_nodes(
    centers: npt.ArrayLike,
    half: float,
    radii: Sequence[float] = (),
    settings: Optional[QuadratureSettings] = None,
) -> NodeSet:
    """
    Quadrature nodes for axis-aligned boxes of a common half-width

    Parameters
    ----------
    centers: ArrayLike
        Box centers shaped (K, d) with d in {1, 2}
    half: float
        Half of the box side
    radii: Sequence[float]
        Radii of origin-centered spheres across which the integrand may jump
    settings: QuadratureSettings, optional
        Node counts and refinement depth

    Returns
    -------
    NodeSet
        Nodes whose owner is the index of the box they belong to
    """
    settings = settings if settings is not None else QuadratureSettings()
    c = np.asarray(centers, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] not in (1, 2):
        raise ValueError(f"Box centers must be shaped (K, 1) or (K, 2), got {c.shape}")

    if c.shape[1] == 1:
        return _interval_nodes(c[:, 0] - half, c[:, 0] + half, radii, settings.gauss_order)
    return _square_nodes(c, half, radii, settings)


def masked_product(
    profile: Callable[[RealArray], RealArray],
    kernel: Optional[Callable[[RealArray], npt.NDArray]],
) -> Callable[[RealArray], npt.NDArray]:
    """
    Integrand z -> profile(|z|) * kernel(z), evaluating the kernel only where
    the radial profile is nonzero
    """

    def integrand(z: RealArray) -> npt.NDArray:
        r = np.sqrt(np.sum(z * z, axis=-1))
        prof = profile(r)
        if kernel is None:
            return prof
        nz = prof != 0.0
        values = kernel(z[nz])
        out = np.zeros(r.shape, dtype=np.result_type(values, np.float64))
        out[nz] = prof[nz] * values
        return out

    return integrand


class GridQuadrature:
    """
    Offset-indexed quadrature over a uniform grid of m^d cells of side h

    Attributes
    ----------
    d: int
        Spatial dimension
    per_axis: int
        Cells per axis m
    cell_side: float
        Cell side h
    radii: Tuple[float, ...]
        Registered breakpoint radii
    nodes: NodeSet
        Nodes owned by the (2m - 1)^d offset boxes
    """

    __slots__ = "d", "per_axis", "cell_side", "radii", "settings", "nodes", "_multi_index"

    def __init__(
        self,
        d: int,
        per_axis: int,
        cell_side: float,
        radii: Sequence[float] = (),
        settings: Optional[QuadratureSettings] = None,
    ) -> None:
        self.d: int = d
        self.per_axis: int = per_axis
        self.cell_side: float = cell_side
        self.radii: Tuple[float, ...] = tuple(sorted(set(float(r) for r in radii if r > 0)))
        self.settings: QuadratureSettings = (
            settings if settings is not None else QuadratureSettings()
        )

        span = np.arange(-(per_axis - 1), per_axis)
        grids = np.meshgrid(*([span] * d), indexing="ij")
        offsets = np.stack([g.reshape(-1) for g in grids], axis=1)
        self.nodes: NodeSet = box_nodes(
            offsets * cell_side, 0.5 * cell_side, self.radii, self.settings
        )

        axes = np.meshgrid(*([np.arange(per_axis)] * d), indexing="ij")
        self._multi_index: IntArray = np.stack([a.reshape(-1) for a in axes], axis=1)

        logger.debug(
            "Built offset quadrature: d=%d, m=%d, %d radii, %d nodes",
            d,
            per_axis,
            len(self.radii),
            self.nodes.points.shape[0],
        )

    @property
    def num_cells(self) -> int:
        return int(self.per_axis**self.d)

    def offset_weights(self, integrand: Callable[[RealArray], npt.NDArray]) -> npt.NDArray:
        """Integrate a convolution integrand over every offset box"""
        return self.nodes.integrate(integrand(self.nodes.points))

    def _offset_index(self, rows: IntArray) -> IntArray:
        diff = self._multi_index[rows][:, None, :] - self._multi_index[None, :, :]
        diff = diff + (self.per_axis - 1)
        span = 2 * self.per_axis - 1
        flat = diff[..., 0]
        for axis in range(1, self.d):
            flat = flat * span + diff[..., axis]
        return flat

    def rows(self, offset_weights: npt.NDArray, rows: IntArray) -> npt.NDArray:
        """Dense weight rows W[rows, :]"""
        return offset_weights[self._offset_index(rows)]

    def matrix(self, offset_weights: npt.NDArray) -> npt.NDArray:
        return self.rows(offset_weights, np.arange(self.num_cells))

    def apply(self, offset_weights: npt.NDArray, values: npt.NDArray) -> npt.NDArray:
        """
        Apply the operator with the given offset weights to cell values

        Parameters
        ----------
        offset_weights: NDArray
            Output of offset_weights
        values: NDArray
            Cell values shaped (N, ...) in row-major cell order

        Returns
        -------
        NDArray
            W @ values with the trailing shape preserved
        """
        n_cells = self.num_cells
        flat = values.reshape(n_cells, -1)

        def block(s: slice) -> npt.NDArray:
            w = self.rows(offset_weights, np.arange(s.start, s.stop))
            return w @ flat

        out = map_chunks(block, n_cells)
        return out.reshape(values.shape)

    def apply_pointwise(
        self,
        integrand: Callable[[RealArray, RealArray], npt.NDArray],
        midpoints: RealArray,
        values: npt.NDArray,
    ) -> npt.NDArray:
        """
        Apply a non-convolution operator; integrand(x, z) is the kernel at
        (x, x - z) with x a single evaluation point
        """
        n_cells = self.num_cells
        flat = values.reshape(n_cells, -1)
        points = self.nodes.points

        def block(s: slice) -> npt.NDArray:
            idx = np.arange(s.start, s.stop)
            offsets = self._offset_index(idx)
            out = np.zeros((idx.size, flat.shape[1]), dtype=np.complex128)
            for row, i in enumerate(idx):
                w = self.nodes.integrate(integrand(midpoints[i], points))
                out[row] = w[offsets[row]] @ flat
            return out

        out = map_chunks(block, n_cells, chunk_size=64)
        return out.reshape(values.shape)


def point_weights(
    centers: RealArray,
    cell_side: float,
    point: npt.ArrayLike,
    integrand: Callable[[RealArray], npt.NDArray],
    radii: Sequence[float] = (),
    settings: Optional[QuadratureSettings] = None,
) -> npt.NDArray:
    """
    Weights w_j = integral over (point - cell_j) of integrand, for an
    arbitrary evaluation point
    """
    x = np.asarray(point, dtype=np.float64).reshape(1, -1)
    boxes = x - np.asarray(centers, dtype=np.float64)
    nodes = box_nodes(boxes, 0.5 * cell_side, radii, settings)
    return nodes.integrate(integrand(nodes.points))


def gauss_legendre(lower: float, upper: float, order: int) -> Tuple[RealArray, RealArray]:
    """Gauss-Legendre nodes and weights on [lower, upper]"""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (upper - lower)
    return 0.5 * (upper + lower) + half * x, half * w


def composite_gauss(
    breaks: npt.ArrayLike, order: int
) -> Tuple[RealArray, RealArray]:
    """Gauss-Legendre on each interval between consecutive breakpoints"""
    b = np.asarray(breaks, dtype=np.float64)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (b[1:] + b[:-1])
    half = 0.5 * (b[1:] - b[:-1])
    return (
        (mid[:, None] + half[:, None] * x[None, :]).reshape(-1),
        (half[:, None] * w[None, :]).reshape(-1),
    )
