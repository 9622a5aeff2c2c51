"""
operator.py

Hermitian matrix algebra over M = n x n complex matrices with the standard
(unnormalized) trace. Everything here works on stacks of matrices shaped
(..., n, n) so operator fields can run their functional calculus on every
cell at once. The scalar classes at the bottom of the module wrap single
matrices for the user-facing operations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]

TOL_PROJ: float = 1e-12
TOL_RANK: float = 1e-9
EIGEN_SNAP: float = 1e-12
JACOBI_TOL: float = 1e-13
JACOBI_MAX_SWEEPS: int = 64
TOL_PSD_SCALE: float = 1e-10


@dataclass(frozen=True)
class Tolerances:
    """
    Run-wide numerical tolerances

    Attributes
    ----------
    psd_scale: float
        tol_psd = psd_scale * (1 + ||a|| + ||x||) in Loewner comparisons
    proj: float
        Commutator norm below which two projections are treated as commuting
    rank: float
        Relative eigenvalue cut of every rank decision
    """

    psd_scale: float = TOL_PSD_SCALE
    proj: float = TOL_PROJ
    rank: float = TOL_RANK

    def __post_init__(self) -> None:
        for name in ("psd_scale", "proj", "rank"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Tolerance {name} must be positive")


_tolerances = Tolerances()


def set_tolerances(tolerances: Tolerances) -> None:
    """Replace the tolerances used by every later call"""
    global _tolerances

    _tolerances = tolerances
    logger.debug("Tolerances set to %s", tolerances)


def get_tolerances() -> Tolerances:
    return _tolerances


class EigensolverError(Exception):
    """Raised when the Jacobi sweeps fail to diagonalize a matrix"""

    __slots__ = "residual", "sweeps", "message"

    def __init__(self, residual: float, sweeps: int) -> None:
        super(Exception, self).__init__(residual)
        self.residual: float = residual
        self.sweeps: int = sweeps
        self.message: str = (
            f"Jacobi eigensolver did not converge after {sweeps} sweeps "
            f"(off-diagonal residual {residual:.3e})"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(residual={}, sweeps={})".format(
            self.__class__.__name__, self.residual, self.sweeps
        )


class RankDecisionError(Exception):
    """Raised when a rank cut falls inside the ambiguity band of tol_rank"""

    __slots__ = "value", "message"

    def __init__(self, value: float) -> None:
        super(Exception, self).__init__(value)
        self.value: float = value
        self.message: str = (
            f"Ambiguous rank decision: singular value {value:.3e} lies within "
            f"the tolerance band around the cut"
        )

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(value={})".format(self.__class__.__name__, self.value)


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------


def hermitize(x: npt.ArrayLike) -> ComplexArray:
    """Return (x + x*)/2 for a stack of square matrices"""
    arr = np.asarray(x, dtype=np.complex128)
    return 0.5 * (arr + np.conj(np.swapaxes(arr, -1, -2)))


def adjoint(x: ComplexArray) -> ComplexArray:
    return np.conj(np.swapaxes(x, -1, -2))


def _off_diagonal_mass(a: ComplexArray) -> RealArray:
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[:, mask]) ** 2, axis=-1))


def _rotate(a: ComplexArray, v: ComplexArray, p: int, q: int) -> None:
    """Annihilate the (p, q) entry of every matrix in the stack in place"""
    apq = a[:, p, q]
    r = np.abs(apq)
    active = r > 0.0
    if not np.any(active):
        return

    safe_r = np.where(active, r, 1.0)
    phase = np.where(active, apq / safe_r, 1.0)
    tau = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe_r)
    t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    # R = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
    r00 = c.astype(np.complex128)
    r01 = s.astype(np.complex128)
    r10 = -s * np.conj(phase)
    r11 = c * np.conj(phase)

    col_p = a[:, :, p].copy()
    col_q = a[:, :, q].copy()
    a[:, :, p] = col_p * r00[:, None] + col_q * r10[:, None]
    a[:, :, q] = col_p * r01[:, None] + col_q * r11[:, None]

    row_p = a[:, p, :].copy()
    row_q = a[:, q, :].copy()
    a[:, p, :] = np.conj(r00)[:, None] * row_p + np.conj(r10)[:, None] * row_q
    a[:, q, :] = np.conj(r01)[:, None] * row_p + np.conj(r11)[:, None] * row_q

    a[:, p, q] = 0.0
    a[:, q, p] = 0.0
    a[:, p, p] = a[:, p, p].real
    a[:, q, q] = a[:, q, q].real

    vec_p = v[:, :, p].copy()
    vec_q = v[:, :, q].copy()
    v[:, :, p] = vec_p * r00[:, None] + vec_q * r10[:, None]
    v[:, :, q] = vec_p * r01[:, None] + vec_q * r11[:, None]


def jacobi_eigh(
    x: npt.ArrayLike,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> Tuple[RealArray, ComplexArray]:
    """
    Cyclic complex Jacobi eigensolver for a stack of Hermitian matrices

    Parameters
    ----------
    x: ArrayLike
        Hermitian matrices shaped (..., n, n)
    tol: float
        Relative off-diagonal Frobenius mass at which a matrix counts as
        diagonal
    max_sweeps: int
        Maximum number of full cyclic sweeps

    Returns
    -------
    Tuple[RealArray, ComplexArray]
        Ascending eigenvalues (..., n) and unitary eigenvector columns
        (..., n, n)

    Raises
    ------
    EigensolverError
        If some matrix in the stack is still not diagonal after max_sweeps
    """
    arr = hermitize(x)
    batch_shape = arr.shape[:-2]
    n = arr.shape[-1]
    a = arr.reshape((-1, n, n)).copy()
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()

    if n > 1 and a.shape[0] > 0:
        threshold = tol * np.linalg.norm(a, axis=(1, 2))
        converged = False
        sweeps = 0
        while sweeps <= max_sweeps:
            off = _off_diagonal_mass(a)
            if np.all(off <= threshold):
                converged = True
                break
            if sweeps == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    _rotate(a, v, p, q)
            sweeps += 1

        if not converged:
            off = _off_diagonal_mass(a)
            raise EigensolverError(float(np.max(off - threshold)), sweeps)

    eigenvalues = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    order = np.argsort(eigenvalues, axis=-1, kind="stable")
    eigenvalues = np.take_along_axis(eigenvalues, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)

    return (
        eigenvalues.reshape(batch_shape + (n,)),
        v.reshape(batch_shape + (n, n)),
    )


def eigh(x: npt.ArrayLike, method: str = "jacobi") -> Tuple[RealArray, ComplexArray]:
    """Eigendecomposition of Hermitian stacks with a selectable backend"""
    if method == "jacobi":
        return jacobi_eigh(x)
    elif method == "lapack":
        w, v = np.linalg.eigh(hermitize(x))
        return w, v
    else:
        raise ValueError(f"Unknown eigensolver backend: {method}")


def eigvalsh(x: npt.ArrayLike, method: str = "jacobi") -> RealArray:
    return eigh(x, method)[0]


def from_spectrum(eigenvalues: RealArray, eigenvectors: ComplexArray) -> ComplexArray:
    """Rebuild U diag(w) U* for a stack"""
    return np.einsum(
        "...ij,...j,...kj->...ik", eigenvectors, eigenvalues, np.conj(eigenvectors)
    )


def apply_function(
    x: npt.ArrayLike,
    func: Callable[[RealArray], RealArray],
    method: str = "jacobi",
) -> ComplexArray:
    """Spectral functional calculus func(x) on a Hermitian stack"""
    w, v = eigh(x, method)
    return from_spectrum(func(w), v)


def absolute(x: npt.ArrayLike) -> ComplexArray:
    """|x| = (x*x)^{1/2} for Hermitian stacks"""
    return apply_function(x, np.abs)


def positive_part(x: npt.ArrayLike) -> ComplexArray:
    return apply_function(x, lambda w: np.maximum(w, 0.0))


def negative_part(x: npt.ArrayLike) -> ComplexArray:
    return apply_function(x, lambda w: np.maximum(-w, 0.0))


def clamp_spectrum(x: npt.ArrayLike, lower: float, upper: float) -> ComplexArray:
    return apply_function(x, lambda w: np.clip(w, lower, upper))


def psd_power(x: npt.ArrayLike, exponent: float) -> ComplexArray:
    """x^exponent for PSD stacks; negative rounding noise is clipped to zero"""
    return apply_function(x, lambda w: np.maximum(w, 0.0) ** exponent)


def operator_norm(x: npt.ArrayLike) -> RealArray:
    """Largest absolute eigenvalue of each Hermitian matrix in the stack"""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.shape[-1] == 1:
        return np.abs(arr[..., 0, 0])
    return np.max(np.abs(eigvalsh(arr)), axis=-1)


def general_operator_norm(x: npt.ArrayLike) -> RealArray:
    """Largest singular value, for non-Hermitian intermediates"""
    arr = np.asarray(x, dtype=np.complex128)
    return np.linalg.norm(arr, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Spectral projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralInterval:
    """
    A real interval with independently open or closed endpoints

    Attributes
    ----------
    lower: float
        Left endpoint, may be -inf
    upper: float
        Right endpoint, may be +inf
    lower_closed: bool
        Whether the left endpoint belongs to the interval
    upper_closed: bool
        Whether the right endpoint belongs to the interval
    """

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = True

    def __post_init__(self) -> None:
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("Interval endpoints may not be NaN")
        if self.lower > self.upper:
            raise ValueError(
                f"Interval lower endpoint {self.lower} exceeds upper {self.upper}"
            )

    @classmethod
    def parse(cls, text: str) -> SpectralInterval:
        """Parse interval notation such as '(0, 1]' or '(-inf, 2)'"""
        text = text.strip()
        if len(text) < 5 or text[0] not in "([" or text[-1] not in ")]":
            raise ValueError(f"Malformed interval: {text}")
        lower_text, upper_text = text[1:-1].split(",")
        return cls(
            lower=float(lower_text),
            upper=float(upper_text),
            lower_closed=text[0] == "[",
            upper_closed=text[-1] == "]",
        )

    def contains(self, values: RealArray, snap: Union[float, RealArray]) -> npt.NDArray[np.bool_]:
        """
        Membership mask after rounding values onto nearby endpoints

        Values within ``snap`` of a finite endpoint are classified as equal to
        it, so open or closed endpoints decide them deterministically.
        """
        w = np.asarray(values, dtype=np.float64).copy()
        tol = np.broadcast_to(np.asarray(snap, dtype=np.float64), w.shape[:-1])[
            ..., None
        ]
        if math.isfinite(self.lower):
            w = np.where(np.abs(w - self.lower) <= tol, self.lower, w)
        if math.isfinite(self.upper):
            w = np.where(np.abs(w - self.upper) <= tol, self.upper, w)

        above = w >= self.lower if self.lower_closed else w > self.lower
        below = w <= self.upper if self.upper_closed else w < self.upper
        return above & below

    def __str__(self) -> str:
        return "{}{}, {}{}".format(
            "[" if self.lower_closed else "(",
            self.lower,
            self.upper,
            "]" if self.upper_closed else ")",
        )


FULL_LINE = SpectralInterval(-math.inf, math.inf, False, False)


def snap_tolerance(eigenvalues: RealArray) -> RealArray:
    """Per-matrix eigenvalue rounding scale 1e-12 * max(1, |spectrum|)"""
    scale = np.max(np.abs(eigenvalues), axis=-1, initial=0.0)
    return EIGEN_SNAP * np.maximum(1.0, scale)


def spectral_projections(
    x: npt.ArrayLike, interval: SpectralInterval, method: str = "jacobi"
) -> ComplexArray:
    """chi_interval(x) for every matrix in a Hermitian stack"""
    w, v = eigh(x, method)
    mask = interval.contains(w, snap_tolerance(w)).astype(np.float64)
    return from_spectrum(mask, v)


def cut_above(x: npt.ArrayLike, level: float, method: str = "jacobi") -> ComplexArray:
    """chi_(level, inf)(x); eigenvalues within the snap of level count as below"""
    return spectral_projections(x, SpectralInterval(level, math.inf, False, False), method)


def keep_below(x: npt.ArrayLike, level: float) -> ComplexArray:
    """1 - chi_(level, inf)(x), the projection used by every stopping rule"""
    arr = np.asarray(x, dtype=np.complex128)
    n = arr.shape[-1]
    return np.eye(n, dtype=np.complex128) - cut_above(arr, level)


def reorthogonalize(p: npt.ArrayLike) -> ComplexArray:
    """Round the spectrum of near-projections to {0, 1}"""
    return spectral_projections(p, SpectralInterval(0.5, math.inf, False, False))


def projection_defect(p: npt.ArrayLike) -> RealArray:
    """max(||P^2 - P||, ||P - P*||) for a stack"""
    arr = np.asarray(p, dtype=np.complex128)
    idem = general_operator_norm(arr @ arr - arr)
    herm = general_operator_norm(arr - adjoint(arr))
    return np.maximum(idem, herm)


# ---------------------------------------------------------------------------
# Norms and the Loewner order
# ---------------------------------------------------------------------------


def schatten_norms(x: npt.ArrayLike, p: float) -> RealArray:
    """
    Schatten p-(quasi)norms of a Hermitian stack

    p may be any value in (0, inf]; values below one give the quasi-norms
    used by the column Hoelder estimate.
    """
    if not p > 0:
        raise ValueError(f"Schatten exponent must be positive, got {p}")
    w = np.abs(eigvalsh(x))
    if math.isinf(p):
        return np.max(w, axis=-1, initial=0.0)
    return np.sum(w**p, axis=-1) ** (1.0 / p)


def min_eigenvalues(x: npt.ArrayLike) -> RealArray:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.shape[-1] == 1:
        return np.real(arr[..., 0, 0])
    return np.min(eigvalsh(arr), axis=-1)


def psd_tolerance(x: npt.ArrayLike, a: npt.ArrayLike) -> RealArray:
    """tol_psd = psd_scale * (1 + ||a|| + ||x||), elementwise over the stack"""
    return _tolerances.psd_scale * (1.0 + operator_norm(a) + operator_norm(x))


def loewner_slack(x: npt.ArrayLike, a: npt.ArrayLike) -> RealArray:
    """min(lambda_min(a - x), lambda_min(a + x)) for each pair in the stack"""
    xa = np.asarray(x, dtype=np.complex128)
    aa = np.asarray(a, dtype=np.complex128)
    return np.minimum(min_eigenvalues(aa - xa), min_eigenvalues(aa + xa))


def loewner_between_batch(x: npt.ArrayLike, a: npt.ArrayLike) -> npt.NDArray[np.bool_]:
    """-a <= x <= a for every pair in a stack"""
    return loewner_slack(x, a) >= -psd_tolerance(x, a)


def sandwich_constants(
    x: npt.ArrayLike, a: npt.ArrayLike, rel_tol: float = 1e-9
) -> RealArray:
    """
    Smallest c with -c a <= x <= c a, matrix by matrix

    ``a`` must be PSD. The computation compresses x to the range of a; when x
    leaks outside that range no finite c exists and inf is returned.

    Parameters
    ----------
    x: ArrayLike
        Hermitian stack (..., n, n)
    a: ArrayLike
        PSD stack of the same shape
    rel_tol: float
        Relative eigenvalue cut deciding the range of a, and relative leak
        allowed outside it

    Returns
    -------
    RealArray
        The constants, shaped like the batch
    """
    xa = hermitize(x)
    batch_shape = xa.shape[:-2]
    n = xa.shape[-1]
    xs = xa.reshape((-1, n, n))
    w, v = eigh(np.asarray(a, dtype=np.complex128).reshape((-1, n, n)))

    out = np.zeros(xs.shape[0])
    a_scale = np.max(np.abs(w), axis=-1, initial=0.0)
    x_scale = operator_norm(xs) if xs.shape[0] else np.zeros(0)

    for b in range(xs.shape[0]):
        if x_scale[b] == 0.0:
            continue
        cut = rel_tol * max(a_scale[b], 1e-300)
        keep = w[b] > cut
        if not np.any(keep):
            out[b] = math.inf
            continue
        r = v[b][:, keep]
        inside = r.conj().T @ xs[b] @ r
        leak = xs[b] - r @ inside @ r.conj().T
        if np.linalg.norm(leak, 2) > rel_tol * max(1.0, x_scale[b]) * 10.0:
            out[b] = math.inf
            continue
        scale = 1.0 / np.sqrt(w[b][keep])
        out[b] = float(operator_norm((scale[:, None] * inside * scale[None, :])[None])[0])

    return out.reshape(batch_shape)


# ---------------------------------------------------------------------------
# Projection lattice
# ---------------------------------------------------------------------------


def _kernel_projection(
    s: ComplexArray, tol_rank: Optional[float], strict: bool
) -> ComplexArray:
    """Projection onto the kernel of PSD matrices, with an ambiguity band"""
    tol_rank = _tolerances.rank if tol_rank is None else tol_rank
    w, v = eigh(s)
    scale = np.maximum(1.0, np.max(np.abs(w), axis=-1, initial=0.0))[..., None]
    cut = tol_rank * scale
    ambiguous = (w > cut) & (w <= 100.0 * cut)
    if np.any(ambiguous):
        worst = float(np.max(np.where(ambiguous, w, 0.0)))
        if strict:
            raise RankDecisionError(worst)
        logger.warning(
            "Rank decision inside the ambiguity band (value %.3e); "
            "treating it as nonzero",
            worst,
        )
    mask = (w <= cut).astype(np.float64)
    return from_spectrum(mask, v)


def _commute(p: ComplexArray, q: ComplexArray) -> npt.NDArray[np.bool_]:
    return general_operator_norm(p @ q - q @ p) <= _tolerances.proj


def meet(
    p: npt.ArrayLike,
    q: npt.ArrayLike,
    tol_rank: Optional[float] = None,
    strict: bool = True,
) -> ComplexArray:
    """
    Projection onto range(P) intersected with range(Q), stackwise

    Commuting pairs are resolved exactly as PQ. Otherwise the meet is the
    kernel projection of P^perp + Q^perp.
    """
    pa = np.asarray(p, dtype=np.complex128)
    qa = np.asarray(q, dtype=np.complex128)
    pa, qa = np.broadcast_arrays(pa, qa)
    n = pa.shape[-1]
    ident = np.eye(n, dtype=np.complex128)

    out = hermitize(pa @ qa)
    commuting = _commute(pa, qa)
    if np.all(commuting):
        return out

    rest = ~commuting
    s = (ident - pa[rest]) + (ident - qa[rest])
    out[rest] = _kernel_projection(s, tol_rank, strict)
    return out


def join(
    p: npt.ArrayLike,
    q: npt.ArrayLike,
    tol_rank: Optional[float] = None,
    strict: bool = True,
) -> ComplexArray:
    """Projection onto range(P) + range(Q), as the complement of the meet of complements"""
    pa = np.asarray(p, dtype=np.complex128)
    qa = np.asarray(q, dtype=np.complex128)
    n = pa.shape[-1]
    ident = np.eye(n, dtype=np.complex128)
    return ident - meet(ident - pa, ident - qa, tol_rank, strict)


def support_projection(
    s: npt.ArrayLike, tol_rank: Optional[float] = None, strict: bool = True
) -> ComplexArray:
    """Projection onto the range of PSD matrices (kernel complement)"""
    sa = hermitize(s)
    n = sa.shape[-1]
    return np.eye(n, dtype=np.complex128) - _kernel_projection(sa, tol_rank, strict)


def join_many(
    projections: Sequence[npt.ArrayLike],
    tol_rank: Optional[float] = None,
    strict: bool = True,
) -> ComplexArray:
    """Join of several projection stacks via the support of their sum"""
    if len(projections) == 0:
        raise ValueError("join_many needs at least one projection")
    total = np.sum([np.asarray(p, dtype=np.complex128) for p in projections], axis=0)
    return support_projection(total, tol_rank, strict)


def meet_many(
    projections: Sequence[npt.ArrayLike],
    tol_rank: Optional[float] = None,
    strict: bool = True,
) -> ComplexArray:
    result = np.asarray(projections[0], dtype=np.complex128)
    for p in projections[1:]:
        result = meet(result, p, tol_rank, strict)
    return result


# ---------------------------------------------------------------------------
# JSON matrix literals
# ---------------------------------------------------------------------------


def matrix_from_json(rows: Sequence[Sequence[Any]]) -> ComplexArray:
    """
    Parse an array-of-rows matrix literal

    Entries are either plain numbers or ``[re, im]`` pairs.
    """
    parsed: List[List[complex]] = []
    for row in rows:
        parsed_row: List[complex] = []
        for entry in row:
            if isinstance(entry, (list, tuple)):
                if len(entry) != 2:
                    raise ValueError(f"Complex entries must be [re, im] pairs: {entry}")
                parsed_row.append(complex(float(entry[0]), float(entry[1])))
            else:
                parsed_row.append(complex(float(entry)))
        parsed.append(parsed_row)

    matrix = np.array(parsed, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Matrix literal is not square: shape {matrix.shape}")
    return matrix


def matrix_to_json(matrix: npt.ArrayLike) -> List[List[List[float]]]:
    arr = np.asarray(matrix, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


# ---------------------------------------------------------------------------
# Single elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigenvalues with unitary eigenvector columns"""

    eigenvalues: RealArray
    eigenvectors: ComplexArray

    def reconstruct(self) -> ComplexArray:
        return from_spectrum(self.eigenvalues, self.eigenvectors)


class HermitianElement:
    """
    An n x n complex Hermitian matrix, symmetrized on construction

    Attributes
    ----------
    matrix: ComplexArray
        Read-only entries
    """

    __slots__ = "_matrix"

    def __init__(self, entries: npt.ArrayLike) -> None:
        arr = np.asarray(entries, dtype=np.complex128)
        if arr.ndim == 0:
            arr = arr.reshape((1, 1))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise ValueError(f"Expected a non-empty square matrix, got shape {arr.shape}")
        matrix = hermitize(arr)
        matrix.setflags(write=False)
        self._matrix: ComplexArray = matrix

    @classmethod
    def from_json(cls, rows: Sequence[Sequence[Any]]) -> HermitianElement:
        return cls(matrix_from_json(rows))

    @classmethod
    def identity(cls, n: int) -> HermitianElement:
        return cls(np.eye(n))

    @property
    def matrix(self) -> ComplexArray:
        return self._matrix

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[0])

    def spectral_data(self) -> SpectralData:
        w, v = jacobi_eigh(self._matrix)
        return SpectralData(w, v)

    def eigenvalues(self) -> RealArray:
        return self.spectral_data().eigenvalues

    def abs(self) -> HermitianElement:
        return HermitianElement(absolute(self._matrix))

    def to_json(self) -> List[List[List[float]]]:
        return matrix_to_json(self._matrix)

    def __add__(self, other: HermitianElement) -> HermitianElement:
        return HermitianElement(self._matrix + other.matrix)

    def __sub__(self, other: HermitianElement) -> HermitianElement:
        return HermitianElement(self._matrix - other.matrix)

    def __neg__(self) -> HermitianElement:
        return HermitianElement(-self._matrix)

    def __mul__(self, scalar: float) -> HermitianElement:
        return HermitianElement(self._matrix * float(scalar))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return "{}(dim={})".format(self.__class__.__name__, self.dim)


class ProjectionElement(HermitianElement):
    """A Hermitian idempotent, re-orthogonalized on construction"""

    __slots__ = ()

    def __init__(self, entries: npt.ArrayLike) -> None:
        super().__init__(entries)
        defect = float(projection_defect(self.matrix))
        if defect > 1e-6:
            raise ValueError(f"Matrix is not a projection (defect {defect:.3e})")
        if defect > _tolerances.proj:
            clean = reorthogonalize(self.matrix)
            clean.setflags(write=False)
            self._matrix = clean

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.matrix).real)))

    def complement(self) -> ProjectionElement:
        return ProjectionElement(np.eye(self.dim) - self.matrix)


def spectral_projection(
    x: HermitianElement, interval: SpectralInterval
) -> ProjectionElement:
    """
    Spectral projection of x onto the eigenvalues lying in interval

    Parameters
    ----------
    x: HermitianElement
        The element to decompose
    interval: SpectralInterval
        The spectral window; endpoints may be infinite

    Returns
    -------
    ProjectionElement
        Sum of the spectral projectors of eigenvalues inside the interval

    Raises
    ------
    EigensolverError
        When the eigensolver fails to converge
    """
    return ProjectionElement(spectral_projections(x.matrix, interval))


def schatten_norm(x: HermitianElement, p: float) -> float:
    """(sum |lambda_i|^p)^{1/p}; p = inf gives the operator norm"""
    return float(schatten_norms(x.matrix, p))


def loewner_between(x: HermitianElement, a: HermitianElement) -> bool:
    """True iff -a <= x <= a up to tol_psd"""
    if x.dim != a.dim:
        raise ValueError(f"Dimension mismatch: {x.dim} and {a.dim}")
    return bool(loewner_between_batch(x.matrix, a.matrix))


def sandwich_constant(x: HermitianElement, a: HermitianElement) -> float:
    return float(sandwich_constants(x.matrix, a.matrix))


def lattice_meet(
    p: ProjectionElement, q: ProjectionElement, strict: bool = True
) -> ProjectionElement:
    if p.dim != q.dim:
        raise ValueError(f"Dimension mismatch: {p.dim} and {q.dim}")
    return ProjectionElement(meet(p.matrix, q.matrix, strict=strict))


def lattice_join(
    p: ProjectionElement, q: ProjectionElement, strict: bool = True
) -> ProjectionElement:
    if p.dim != q.dim:
        raise ValueError(f"Dimension mismatch: {p.dim} and {q.dim}")
    return ProjectionElement(join(p.matrix, q.matrix, strict=strict))
