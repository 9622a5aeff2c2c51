"""
nccz/corpus.py

Deterministic corpora of PSD operator fields. Every random draw comes from
one Philox generator seeded by the experiment, consumed in member order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import numpy.typing as npt

from nccz.config import ExperimentConfig
from nccz.core.dyadic import DyadicGrid, OperatorField, field_norm
from nccz.loaders import make_grid

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

MASS_BAND = (0.5, 2.0)
REGRESSION_MASS = 1.0
NUM_BUMPS = 3
NUM_MODES = 3
ENVELOPE_FLOOR = 0.05
COUNTEREXAMPLE_ANGLE = 0.4


@dataclass(frozen=True)
class CorpusMember:
    """
    One input of a suite run

    Attributes
    ----------
    name: str
        Stable identifier used in tables and reports
    field: OperatorField
        The PSD input
    kind: str
        "random" or "regression"
    """

    name: str
    field: OperatorField
    kind: str = "random"


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def with_mass(f: OperatorField, mass: float) -> OperatorField:
    """Rescale a nonzero PSD field to ||f||_1 = mass"""
    current = field_norm(f, 1.0)
    if current <= 0.0:
        raise ValueError("Cannot rescale a field with zero trace")
    return f.with_values(f.values * (mass / current))


def _envelope(grid: DyadicGrid, rng: np.random.Generator) -> RealArray:
    """A floor plus a few narrow Gaussian bumps, so mass concentrates somewhere"""
    x = grid.midpoints
    out = np.full(grid.num_cells, ENVELOPE_FLOOR)
    for _ in range(NUM_BUMPS):
        centre = rng.uniform(0.0, grid.side, size=grid.d)
        width = rng.uniform(0.02, 0.2) * grid.side
        height = rng.exponential(1.0) / width**grid.d
        r2 = np.sum((x - centre) ** 2, axis=1)
        out += height * np.exp(-0.5 * r2 / width**2)
    return out


def _smooth_factor(
    grid: DyadicGrid, n: int, rank: int, rng: np.random.Generator
) -> ComplexArray:
    """A(x) = sum_m c_m(x) B_m with random trigonometric coefficients c_m"""
    x = grid.midpoints / grid.side
    a = np.zeros((grid.num_cells, n, rank), dtype=np.complex128)
    for _ in range(NUM_MODES):
        b = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
        freq = rng.integers(0, 4, size=grid.d)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        coeff = np.cos(2.0 * math.pi * (x @ freq) + phase)
        a += coeff[:, None, None] * b[None]
    return a


def random_gram_field(
    grid: DyadicGrid, n: int, rank: int, rng: np.random.Generator
) -> OperatorField:
    """
    A smooth rank-r Gram field under a concentrated envelope, with ||f||_1
    drawn uniformly from MASS_BAND
    """
    rank = max(1, min(rank, n))
    envelope = _envelope(grid, rng)
    a = _smooth_factor(grid, n, rank, rng)
    gram = a @ np.conj(np.swapaxes(a, 1, 2))
    # A floor of the identity keeps cells where every mode vanishes nonzero
    trace = np.real(np.trace(gram, axis1=1, axis2=2))
    floor = 1e-3 * (1.0 + float(np.mean(trace))) / n
    values = envelope[:, None, None] * (gram + floor * np.eye(n)[None])
    mass = float(rng.uniform(*MASS_BAND))
    return with_mass(OperatorField(grid, values), mass)


def _first_cube_mask(grid: DyadicGrid) -> npt.NDArray[np.bool_]:
    level = min(grid.k_min + 1, grid.k_max)
    return grid.level_labels(level) == 0


def _rotation(theta: float) -> RealArray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def counterexample_pair() -> Tuple[RealArray, RealArray]:
    """
    f = u diag(8, -8) u^T and a feasible majorant g with Tr g = 20

    The optimal majorant of the single member f is |f| with trace 16, so
    the strong maximal norm must land strictly below the trace of g.
    """
    u = _rotation(COUNTEREXAMPLE_ANGLE)
    f = u @ np.diag([8.0, -8.0]) @ u.T
    g = u @ np.array([[10.0, 6.0], [6.0, 10.0]]) @ u.T
    return f, g


def _embed(grid: DyadicGrid, n: int, block: npt.ArrayLike, at: int = 0) -> ComplexArray:
    m = np.asarray(block, dtype=np.complex128)
    k = m.shape[-1]
    values = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    values[:, at : at + k, at : at + k] = m if m.ndim == 3 else m[None]
    return values


def _scalar_profile(grid: DyadicGrid) -> RealArray:
    """A spike on a power-law background, so cubes stop at several levels"""
    x = grid.midpoints / grid.side
    r = np.sqrt(np.sum((x - 0.3) ** 2, axis=1))
    return 1.0 / (r + 2.0 * grid.cell_side / grid.side) ** (0.8 * grid.d)


def regression_inputs(grid: DyadicGrid, n: int) -> List[CorpusMember]:
    """
    The fixed inputs every run carries, each scaled to unit trace norm

    * indicator: the identity on the first cube below the box
    * scalar: a scalar profile times the identity
    * block-diagonal: two different scalar profiles on the diagonal
    * rotated-pair: two non-commuting rank-one projections of the
      counterexample rotation on the two halves of the box
    """
    members: List[CorpusMember] = []

    indicator = _first_cube_mask(grid).astype(np.float64)
    members.append(
        CorpusMember(
            "indicator",
            with_mass(OperatorField.scalar(grid, indicator, n), REGRESSION_MASS),
            "regression",
        )
    )

    profile = _scalar_profile(grid)
    members.append(
        CorpusMember(
            "scalar",
            with_mass(OperatorField.scalar(grid, profile, n), REGRESSION_MASS),
            "regression",
        )
    )

    if n >= 2:
        mirrored = profile[::-1].copy()
        diag = np.zeros((grid.num_cells, 2, 2))
        diag[:, 0, 0] = profile
        diag[:, 1, 1] = mirrored
        members.append(
            CorpusMember(
                "block-diagonal",
                with_mass(OperatorField(grid, _embed(grid, n, diag)), REGRESSION_MASS),
                "regression",
            )
        )

        u = _rotation(COUNTEREXAMPLE_ANGLE)
        tilted = np.outer(u[:, 0], u[:, 0])
        flat = np.diag([1.0, 0.0])
        left = _first_cube_mask(grid)
        pair = np.where(left[:, None, None], tilted[None], flat[None])
        members.append(
            CorpusMember(
                "rotated-pair",
                with_mass(OperatorField(grid, _embed(grid, n, pair)), REGRESSION_MASS),
                "regression",
            )
        )

    return members


def generate_corpus(config: ExperimentConfig) -> List[CorpusMember]:
    """
    The regression inputs (when enabled) followed by corpus_size random
    Gram fields, all on the configured grid
    """
    grid = make_grid(config.grid)
    n = config.grid.n
    rng = make_generator(config.seed)

    members = regression_inputs(grid, n) if config.regression else []
    for index in range(config.corpus_size):
        members.append(
            CorpusMember(f"random-{index:03d}", random_gram_field(grid, n, config.rank, rng))
        )

    logger.info(
        "Generated %d corpus members on a d=%d grid with %d cells (n=%d)",
        len(members),
        grid.d,
        grid.num_cells,
        n,
    )
    return members
