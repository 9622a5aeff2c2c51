"""
kernels.py

Calderon-Zygmund kernels and the numerical tools that measure them.

A kernel is a KernelSpec: a vectorized evaluator plus metadata. Convolution
kernels are evaluated on differences z = x - y shaped (M, d), non-convolution
kernels on pairs. Rough homogeneous kernels carry the tabulated symbol Omega
on the sphere so the rotation tools can reach it.

All moduli computed here (size and Lipschitz constants, the annular
regularity delta_q(m), the cancellation supremum, the Dini modulus) are
suprema estimated on finite samples. They are lower bounds of the true
constants and are labelled "empirical" wherever they are reported.
"""
from __future__ import annotations

import enum
import importlib
import logging
import math
import os
import pathlib
import sys
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from nccz.core.dyadic import dyadic_centers
from nccz.core.quadrature import composite_gauss, gauss_legendre
from nccz.core.serializable import ISerializable

logger = logging.getLogger(__name__)

RealArray = npt.NDArray[np.float64]
Evaluator = Callable[[RealArray], npt.NDArray]
PairEvaluator = Callable[[RealArray, RealArray], npt.NDArray]

DEFAULT_SYMBOL_RESOLUTION = 512

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class KernelRegistryError(Exception):
    """Raised when a kernel name cannot be resolved"""

    __slots__ = "name", "message"

    def __init__(self, name: str, reason: str) -> None:
        super(Exception, self).__init__(name)
        self.name: str = name
        self.message: str = f"Cannot resolve kernel '{name}': {reason}"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(name={})".format(self.__class__.__name__, self.name)


class KernelKind(str, enum.Enum):
    CONVOLUTION_SMOOTH = "convolution-smooth"
    ROUGH_HOMOGENEOUS = "rough-homogeneous"
    CUSTOM_NONCONVOLUTION = "custom-nonconvolution"


def norms(z: RealArray) -> RealArray:
    return np.sqrt(np.sum(np.asarray(z) ** 2, axis=-1))


def halton(count: int, dims: int, skip: int = 1) -> RealArray:
    """
    The Halton low-discrepancy sequence in [0, 1)^dims

    Parameters
    ----------
    count: int
        Number of points
    dims: int
        Dimension, at most 8
    skip: int
        Leading points to drop (the first point is the origin)
    """
    if dims > len(_PRIMES):
        raise ValueError(f"Halton sequence supports at most {len(_PRIMES)} dimensions")
    idx = np.arange(skip, skip + count, dtype=np.int64)
    out = np.zeros((count, dims))
    for axis in range(dims):
        base = _PRIMES[axis]
        n = idx.copy()
        f = 1.0
        while np.any(n > 0):
            f /= base
            out[:, axis] += f * (n % base)
            n //= base
    return out


# ---------------------------------------------------------------------------
# Rough symbols on the sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RoughSymbol:
    """
    A degree-zero homogeneous function Omega tabulated on S^{d-1}

    In d = 1 the sphere is {+1, -1} and ``values`` holds (Omega(+1), Omega(-1)).
    In d = 2 ``values`` holds Omega at the angles 2 pi a / A and is evaluated
    by periodic linear interpolation, so the trapezoid sum over the table is
    the exact integral of the interpolant.

    Attributes
    ----------
    d: int
        Dimension of the ambient space
    values: RealArray
        The table
    name: str
        Label used in reports
    """

    d: int
    values: RealArray
    name: str = "custom"

    @classmethod
    def tabulate(
        cls,
        d: int,
        func: Callable[[RealArray], RealArray],
        resolution: int = DEFAULT_SYMBOL_RESOLUTION,
        enforce_mean_zero: bool = True,
        name: str = "custom",
    ) -> RoughSymbol:
        """Tabulate func(theta) and optionally subtract its angular mean"""
        if d == 1:
            angles = np.array([0.0, math.pi])
        elif d == 2:
            if resolution < 8 or resolution % 2:
                raise ValueError(f"Angular resolution must be even and >= 8, got {resolution}")
            angles = 2.0 * math.pi * np.arange(resolution) / resolution
        else:
            raise ValueError(f"Rough symbols support d in {{1, 2}}, got {d}")

        values = np.asarray(func(angles), dtype=np.float64)
        if enforce_mean_zero:
            values = values - values.mean()
        values.setflags(write=False)
        return cls(d, values, name)

    @classmethod
    def named(
        cls,
        name: str,
        d: int,
        resolution: int = DEFAULT_SYMBOL_RESOLUTION,
    ) -> RoughSymbol:
        if name not in NAMED_SYMBOLS:
            raise KernelRegistryError(
                f"rough:{name}", f"known symbols are {sorted(NAMED_SYMBOLS)}"
            )
        func, mean_zero = NAMED_SYMBOLS[name]
        return cls.tabulate(d, func, resolution, mean_zero, name)

    @classmethod
    def from_csv(
        cls,
        path: Union[str, pathlib.Path],
        d: int = 2,
        resolution: int = DEFAULT_SYMBOL_RESOLUTION,
        enforce_mean_zero: bool = True,
    ) -> RoughSymbol:
        """Load (angle, value) samples and resample them periodically"""
        table = pd.read_csv(path)
        if not {"angle", "value"} <= set(table.columns):
            raise ValueError(f"{path} must have 'angle' and 'value' columns")
        angles = np.mod(table["angle"].to_numpy(dtype=np.float64), 2.0 * math.pi)
        order = np.argsort(angles)
        angles = angles[order]
        samples = table["value"].to_numpy(dtype=np.float64)[order]

        def func(theta: RealArray) -> RealArray:
            return np.interp(theta, angles, samples, period=2.0 * math.pi)

        return cls.tabulate(
            d, func, resolution, enforce_mean_zero, name=pathlib.Path(path).stem
        )

    @property
    def resolution(self) -> int:
        return int(self.values.size)

    @property
    def sphere_measure(self) -> float:
        return 2.0 if self.d == 1 else 2.0 * math.pi

    @property
    def angles(self) -> RealArray:
        if self.d == 1:
            return np.array([0.0, math.pi])
        return 2.0 * math.pi * np.arange(self.resolution) / self.resolution

    @property
    def weights(self) -> RealArray:
        """Quadrature weights of the table on S^{d-1}"""
        if self.d == 1:
            return np.ones(2)
        return np.full(self.resolution, 2.0 * math.pi / self.resolution)

    def at_angle(self, theta: npt.ArrayLike) -> RealArray:
        t = np.asarray(theta, dtype=np.float64)
        if self.d == 1:
            # theta is 0 or pi on S^0
            return np.where(np.cos(t) >= 0.0, self.values[0], self.values[1])
        a = self.resolution
        pos = np.mod(t, 2.0 * math.pi) * a / (2.0 * math.pi)
        lo = np.floor(pos).astype(np.int64) % a
        frac = pos - np.floor(pos)
        return (1.0 - frac) * self.values[lo] + frac * self.values[(lo + 1) % a]

    def __call__(self, z: npt.ArrayLike) -> RealArray:
        """Omega(z / |z|) for points shaped (M, d)"""
        pts = np.asarray(z, dtype=np.float64)
        if self.d == 1:
            return np.where(pts[..., 0] >= 0.0, self.values[0], self.values[1])
        return self.at_angle(np.arctan2(pts[..., 1], pts[..., 0]))

    def _antipodal(self) -> RealArray:
        if self.d == 1:
            return self.values[::-1]
        return np.roll(self.values, -self.resolution // 2)

    def even_part(self) -> RoughSymbol:
        values = 0.5 * (self.values + self._antipodal())
        values.setflags(write=False)
        return RoughSymbol(self.d, values, f"{self.name}:even")

    def odd_part(self) -> RoughSymbol:
        values = 0.5 * (self.values - self._antipodal())
        values.setflags(write=False)
        return RoughSymbol(self.d, values, f"{self.name}:odd")

    def integral(self) -> float:
        return float(np.sum(self.weights * self.values))

    def mean(self) -> float:
        return self.integral() / self.sphere_measure

    def l1_norm(self) -> float:
        return float(np.sum(self.weights * np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(math.sqrt(np.sum(self.weights * self.values**2)))

    def has_mean_zero(self, tol: float = 1e-10) -> bool:
        return abs(self.integral()) <= tol * max(self.l1_norm(), 1e-300)

    def is_odd(self, tol: float = 1e-10) -> bool:
        return self.even_part().l1_norm() <= tol * max(1.0, self.l1_norm())

    def __repr__(self) -> str:
        return "{}(name={}, d={}, resolution={})".format(
            self.__class__.__name__, self.name, self.d, self.resolution
        )


def _sawtooth(theta: RealArray) -> RealArray:
    return np.mod(theta, 2.0 * math.pi) / math.pi - 1.0


NAMED_SYMBOLS: Dict[str, Tuple[Callable[[RealArray], RealArray], bool]] = {
    "cos": (np.cos, True),
    "sin": (np.sin, True),
    "sign": (lambda t: np.sign(np.cos(t)), True),
    "cos2": (lambda t: np.cos(2.0 * t), True),
    "sawtooth": (_sawtooth, True),
    "const": (np.ones_like, False),
}


@dataclass(frozen=True)
class OmegaDiagnostics(ISerializable):
    """
    Summary of a rough symbol

    Attributes
    ----------
    even: RoughSymbol
        (Omega(x) + Omega(-x)) / 2
    odd: RoughSymbol
        (Omega(x) - Omega(-x)) / 2
    deltas: RealArray
        Increasing rotation sizes
    modulus: RealArray
        The L2 modulus omega_2 at each delta
    dini: float
        integral over (0, 1) of omega_2(s) / s ds
    llogl: float
        integral of |Omega| log(2 + |Omega|) over the sphere
    mean: float
        Angular mean of Omega
    """

    even: RoughSymbol
    odd: RoughSymbol
    deltas: RealArray
    modulus: RealArray
    dini: float
    llogl: float
    mean: float
    l2_norm: float

    def modulus_at(self, delta: float) -> float:
        return float(np.interp(delta, self.deltas, self.modulus, left=0.0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dini": self.dini,
            "llogl": self.llogl,
            "mean": self.mean,
            "l2_norm": self.l2_norm,
            "even_l1": self.even.l1_norm(),
            "odd_l1": self.odd.l1_norm(),
            "modulus": {
                "delta": self.deltas.tolist(),
                "omega2": self.modulus.tolist(),
            },
        }


def rotation_modulus(omega: RoughSymbol, alphas: npt.ArrayLike) -> RealArray:
    """(integral |Omega(theta) - Omega(theta + alpha)|^2 dtheta)^{1/2} per alpha"""
    a = np.asarray(alphas, dtype=np.float64)
    if omega.d == 1:
        return np.zeros(a.shape)
    theta = omega.angles
    base = omega.values
    out = np.empty(a.shape)
    for i, alpha in enumerate(a.reshape(-1)):
        diff = base - omega.at_angle(theta + alpha)
        out.reshape(-1)[i] = math.sqrt(float(np.sum(omega.weights * diff * diff)))
    return out


def omega_tools(
    omega: RoughSymbol,
    smallest: float = 1e-6,
    panels: int = 48,
    order: int = 8,
) -> OmegaDiagnostics:
    """
    Even/odd split, L2 Dini modulus, Dini integral and LlogL functional

    omega_2(delta) is the running maximum of the rotation modulus over all
    sampled rotations |alpha| <= delta, so it is nondecreasing by
    construction. The Dini integral is computed in the variable log s with
    composite Gauss-Legendre on [smallest, 1], plus omega_2(smallest) for the
    remaining piece (exact when omega_2 is linear near zero).
    """
    u, w = composite_gauss(np.linspace(math.log(smallest), 0.0, panels + 1), order)
    deltas = np.exp(u)

    if omega.d == 2:
        step = 2.0 * math.pi / omega.resolution
        shifts = step * np.arange(1, omega.resolution // 2 + 1)
        alphas = np.union1d(deltas, shifts[shifts <= 1.0])
        g = rotation_modulus(omega, alphas)
        # rotations by -alpha give the same value, so alpha > 0 suffices
        running = np.maximum.accumulate(g)
        modulus = running[np.searchsorted(alphas, deltas, side="right") - 1]
        # omega_2 is close to linear below the first node
        tail = float(modulus[0])
    else:
        modulus = np.zeros_like(deltas)
        tail = 0.0

    dini = float(np.sum(w * modulus)) + tail
    magnitude = np.abs(omega.values)
    llogl = float(np.sum(omega.weights * magnitude * np.log(2.0 + magnitude)))

    return OmegaDiagnostics(
        even=omega.even_part(),
        odd=omega.odd_part(),
        deltas=deltas,
        modulus=modulus,
        dini=dini,
        llogl=llogl,
        mean=omega.mean(),
        l2_norm=omega.l2_norm(),
    )


# ---------------------------------------------------------------------------
# Kernel specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    A singular integral kernel

    Attributes
    ----------
    name: str
        Registry name
    kind: KernelKind
        Convolution (smooth or rough) or a general two-point kernel
    d: int
        Spatial dimension
    evaluator: Callable[[RealArray], NDArray]
        k(z) on differences shaped (M, d); for non-convolution kernels the
        restriction to x = 0
    pair_evaluator: Callable[[RealArray, RealArray], NDArray], optional
        k(x, y) for broadcastable (M, d) arrays; required for non-convolution
        kernels
    gamma: float, optional
        Lipschitz exponent, when the kernel is known to be regular
    omega: RoughSymbol, optional
        The symbol of a rough homogeneous kernel
    is_real: bool
        Whether the evaluator returns real values
    params: Dict[str, Any]
        Parameters used to build the kernel
    """

    name: str
    kind: KernelKind
    d: int
    evaluator: Evaluator
    pair_evaluator: Optional[PairEvaluator] = None
    gamma: Optional[float] = None
    omega: Optional[RoughSymbol] = None
    is_real: bool = True
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_convolution(self) -> bool:
        return self.kind != KernelKind.CUSTOM_NONCONVOLUTION

    def evaluate(self, z: npt.ArrayLike) -> npt.NDArray:
        return self.evaluator(np.asarray(z, dtype=np.float64))

    def evaluate_pair(self, x: npt.ArrayLike, y: npt.ArrayLike) -> npt.NDArray:
        xa = np.asarray(x, dtype=np.float64)
        ya = np.asarray(y, dtype=np.float64)
        if self.pair_evaluator is not None:
            xa, ya = np.broadcast_arrays(xa, ya)
            return self.pair_evaluator(xa, ya)
        return self.evaluator(xa - ya)

    def _part(self, extract: Callable[[npt.NDArray], RealArray], suffix: str) -> KernelSpec:
        evaluator = self.evaluator
        pair = self.pair_evaluator
        return replace(
            self,
            name=f"{self.name}:{suffix}",
            evaluator=lambda z: extract(evaluator(z)),
            pair_evaluator=None if pair is None else (lambda x, y: extract(pair(x, y))),
            is_real=True,
        )

    def real_part(self) -> KernelSpec:
        if self.is_real:
            return self
        return self._part(np.real, "re")

    def imag_part(self) -> KernelSpec:
        return self._part(np.imag, "im")

    def __repr__(self) -> str:
        return "{}(name={}, kind={}, d={})".format(
            self.__class__.__name__, self.name, self.kind.value, self.d
        )


def riesz_constant(d: int) -> float:
    """Gamma((d + 1) / 2) / pi^{(d + 1) / 2}"""
    return math.gamma(0.5 * (d + 1)) / math.pi ** (0.5 * (d + 1))


def hilbert_kernel() -> KernelSpec:
    return KernelSpec(
        name="hilbert",
        kind=KernelKind.CONVOLUTION_SMOOTH,
        d=1,
        evaluator=lambda z: 1.0 / (math.pi * z[..., 0]),
        gamma=1.0,
    )


def riesz_kernel(j: int, d: int) -> KernelSpec:
    if not 1 <= j <= d:
        raise KernelRegistryError(f"riesz-{j}", f"component must lie in 1..{d}")
    c = riesz_constant(d)

    def evaluator(z: RealArray) -> RealArray:
        r = norms(z)
        return c * z[..., j - 1] / r ** (d + 1)

    return KernelSpec(
        name=f"riesz-{j}",
        kind=KernelKind.CONVOLUTION_SMOOTH,
        d=d,
        evaluator=evaluator,
        gamma=1.0,
    )


def rough_kernel(omega: RoughSymbol) -> KernelSpec:
    """k_Omega(z) = Omega(z / |z|) / |z|^d"""
    d = omega.d

    def evaluator(z: RealArray) -> RealArray:
        return omega(z) / norms(z) ** d

    return KernelSpec(
        name=f"rough:{omega.name}",
        kind=KernelKind.ROUGH_HOMOGENEOUS,
        d=d,
        evaluator=evaluator,
        omega=omega,
    )


def one_sided_kernel() -> KernelSpec:
    """chi_{z > 0} / z, which violates the cancellation condition"""

    def evaluator(z: RealArray) -> RealArray:
        t = z[..., 0]
        return np.where(t > 0.0, 1.0 / np.where(t > 0.0, t, 1.0), 0.0)

    return KernelSpec(
        name="one-sided",
        kind=KernelKind.CONVOLUTION_SMOOTH,
        d=1,
        evaluator=evaluator,
    )


def with_phase(kernel: KernelSpec, phase: float) -> KernelSpec:
    """e^{i phase} k, a complex kernel for exercising the real/imaginary split"""
    factor = complex(math.cos(phase), math.sin(phase))
    evaluator = kernel.evaluator
    pair = kernel.pair_evaluator
    return replace(
        kernel,
        name=f"{kernel.name}@{phase:g}",
        evaluator=lambda z: factor * evaluator(z),
        pair_evaluator=None if pair is None else (lambda x, y: factor * pair(x, y)),
        is_real=factor.imag == 0.0,
    )


def load_kernel_factory(
    module_name: str, factory_name: str, path: Optional[str] = None
) -> Callable[..., KernelSpec]:
    """Import a kernel factory from a user module, optionally from a directory"""
    path_prepended = False

    if path:
        path_prepended = True
        sys.path.insert(0, os.path.abspath(path))

    try:
        module = importlib.import_module(module_name)
        return getattr(module, factory_name)
    except (ImportError, AttributeError) as err:
        raise KernelRegistryError(f"custom:{module_name}:{factory_name}", str(err))
    finally:
        # Keep module resolution unaffected for later imports
        if path_prepended:
            sys.path.pop(0)


def resolve_kernel(
    name: str, d: int = 1, params: Optional[Dict[str, Any]] = None
) -> KernelSpec:
    """
    Build a kernel from its registry name

    Recognized names are ``hilbert``, ``riesz-<j>``, ``one-sided``,
    ``rough:<symbol>`` (a named symbol or a CSV path) and
    ``custom:<module>:<factory>[@<path>]``. A ``phase`` parameter multiplies
    any kernel by e^{i phase}.

    Raises
    ------
    KernelRegistryError
        For unknown names or names that do not fit the dimension
    """
    params = dict(params) if params else {}
    phase = float(params.pop("phase", 0.0))

    if name == "hilbert":
        if d != 1:
            raise KernelRegistryError(name, "the Hilbert kernel lives in d = 1")
        kernel = hilbert_kernel()
    elif name.startswith("riesz-"):
        try:
            j = int(name.split("-", 1)[1])
        except ValueError:
            raise KernelRegistryError(name, "expected riesz-<component>")
        kernel = riesz_kernel(j, d)
    elif name == "one-sided":
        if d != 1:
            raise KernelRegistryError(name, "the one-sided kernel lives in d = 1")
        kernel = one_sided_kernel()
    elif name.startswith("rough:"):
        spec = name.split(":", 1)[1]
        resolution = int(params.get("resolution", DEFAULT_SYMBOL_RESOLUTION))
        if spec.lower().endswith(".csv"):
            omega = RoughSymbol.from_csv(spec, d, resolution)
        else:
            omega = RoughSymbol.named(spec, d, resolution)
        kernel = rough_kernel(omega)
    elif name.startswith("custom:"):
        target = name.split(":", 1)[1]
        path: Optional[str] = None
        if "@" in target:
            target, path = target.split("@", 1)
        if ":" not in target:
            raise KernelRegistryError(name, "expected custom:<module>:<factory>")
        module_name, factory_name = target.split(":", 1)
        factory = load_kernel_factory(module_name, factory_name, path)
        kernel = factory(d=d, **params)
        if not isinstance(kernel, KernelSpec):
            raise KernelRegistryError(name, "factory did not return a KernelSpec")
    else:
        raise KernelRegistryError(name, "unknown kernel")

    if kernel.d != d:
        raise KernelRegistryError(name, f"kernel dimension {kernel.d} does not match d = {d}")

    if phase != 0.0:
        kernel = with_phase(kernel, phase)

    logger.debug("Resolved kernel %s in d=%d", kernel.name, d)
    return kernel


# ---------------------------------------------------------------------------
# Smooth dyadic partition of unity
# ---------------------------------------------------------------------------


def _exp_inv(t: RealArray) -> RealArray:
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, np.exp(-1.0 / safe), 0.0)


def glue(t: npt.ArrayLike) -> RealArray:
    """Smooth step: 0 for t <= 0, 1 for t >= 1, C-infinity in between"""
    ta = np.asarray(t, dtype=np.float64)
    a = _exp_inv(ta)
    b = _exp_inv(1.0 - ta)
    return a / (a + b)


def plateau(r: npt.ArrayLike) -> RealArray:
    """1 for r <= 1, 0 for r >= 2"""
    return 1.0 - glue(np.asarray(r, dtype=np.float64) - 1.0)


def bump(r: npt.ArrayLike) -> RealArray:
    """Radial profile supported in [1/2, 2] whose dyadic dilates telescope to 1"""
    ra = np.asarray(r, dtype=np.float64)
    return plateau(ra) - plateau(2.0 * ra)


def smooth_cutoff(r: npt.ArrayLike) -> RealArray:
    """0 for r <= 1/4, 1 for r >= 3/4"""
    return glue((np.asarray(r, dtype=np.float64) - 0.25) / 0.5)


@dataclass(frozen=True)
class PartitionFamily:
    """
    phi_i(x) = phi(2^i x / sqrt d) for i in the window [i_min, i_max]

    phi_i is supported in the annulus 2^{-i-1} sqrt d <= |x| <= 2^{-i+1} sqrt d
    and sums over consecutive indices telescope:
    sum_{lo <= i < hi} phi_i(x) = plateau(2^lo s) - plateau(2^hi s), s = |x| / sqrt d.

    Attributes
    ----------
    d: int
        Spatial dimension
    i_min: int
        Coarsest index in the window
    i_max: int
        Finest index in the window
    """

    d: int
    i_min: int
    i_max: int

    def __post_init__(self) -> None:
        if self.i_min > self.i_max:
            raise ValueError(f"Empty partition window [{self.i_min}, {self.i_max}]")

    @classmethod
    def for_grid(cls, d: int, k_min: int, k_max: int, top: int) -> PartitionFamily:
        """
        A window that sums to one on the whole grid box except a
        neighborhood of the origin smaller than a quarter cell
        """
        return cls(d, k_min - 1, max(top, k_max) + 2)

    @property
    def scale(self) -> float:
        return math.sqrt(self.d)

    def indices(self) -> range:
        return range(self.i_min, self.i_max + 1)

    def annulus(self, i: int) -> Tuple[float, float]:
        return (2.0 ** (-i - 1) * self.scale, 2.0 ** (-i + 1) * self.scale)

    def radial(self, i: int) -> Callable[[RealArray], RealArray]:
        s = 2.0**i / self.scale
        return lambda r: bump(s * r)

    def radial_sum(self, lo: int, hi: int) -> Callable[[RealArray], RealArray]:
        """sum over lo <= i < hi of phi_i as a function of |x|, clipped to the window"""
        lo = max(lo, self.i_min)
        hi = min(hi, self.i_max + 1)
        if hi <= lo:
            return lambda r: np.zeros_like(np.asarray(r, dtype=np.float64))
        a = 2.0**lo / self.scale
        b = 2.0**hi / self.scale
        return lambda r: plateau(a * r) - plateau(b * r)

    def phi(self, i: int, z: npt.ArrayLike) -> RealArray:
        return self.radial(i)(norms(np.asarray(z, dtype=np.float64)))

    def partial_sum(self, lo: int, hi: int, z: npt.ArrayLike) -> RealArray:
        return self.radial_sum(lo, hi)(norms(np.asarray(z, dtype=np.float64)))

    def total(self, z: npt.ArrayLike) -> RealArray:
        return self.partial_sum(self.i_min, self.i_max + 1, z)

    def residual(self, z: npt.ArrayLike) -> RealArray:
        return np.abs(self.total(z) - 1.0)

    def breakpoints(self) -> List[float]:
        """Support endpoints of every phi_i, for quadrature splitting"""
        return sorted({2.0 ** (-i) * self.scale for i in range(self.i_min - 1, self.i_max + 2)})


# ---------------------------------------------------------------------------
# Moduli
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModuliEstimate(ISerializable):
    """Empirical size and Lipschitz constants"""

    size: float
    lipschitz: Optional[float]
    samples: int
    skipped: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "lipschitz": self.lipschitz,
            "samples": self.samples,
            "skipped": self.skipped,
            "empirical": True,
        }


def _directions(u: RealArray, d: int) -> RealArray:
    if d == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    angle = 2.0 * math.pi * u[:, 0]
    return np.stack([np.cos(angle), np.sin(angle)], axis=1)


def size_and_lipschitz(
    kernel: KernelSpec,
    budget: int = 4096,
    radius_range: Tuple[float, float] = (1e-3, 1e3),
) -> ModuliEstimate:
    """
    Sampled size constant sup |x - y|^d |k(x, y)| and, when the kernel
    declares a Lipschitz exponent gamma, the constant
    sup |k(x, y) - k(x, z)| |x - y|^{d + gamma} / |y - z|^gamma over
    |x - y| >= 2 |y - z|

    Points come from a Halton sequence in log-radius and direction, so
    doubling the budget only adds samples and estimates never decrease.
    Non-finite kernel values are skipped and counted.
    """
    d = kernel.d
    u = halton(budget, 2 * d + 3)
    lo, hi = (math.log(r) for r in radius_range)

    radius = np.exp(lo + (hi - lo) * u[:, 0])
    a = radius[:, None] * _directions(u[:, 1 : 1 + d], d)
    x = (u[:, 1 + d : 1 + 2 * d] - 0.5) * radius[:, None] * 4.0
    y = x - a

    with np.errstate(divide="ignore", invalid="ignore"):
        k_xy = np.asarray(kernel.evaluate_pair(x, y))
        size_vals = radius**d * np.abs(k_xy)
    finite = np.isfinite(size_vals)
    skipped = int(np.sum(~finite))
    size = float(np.max(size_vals[finite], initial=0.0))

    lipschitz: Optional[float] = None
    if kernel.gamma is not None:
        gamma = kernel.gamma
        # |y - z| = t |x - y| with t in (0, 1/2]
        t = 0.5 * u[:, 2 * d + 1] + 1e-9
        b = (t * radius)[:, None] * _directions(u[:, 2 * d + 2 :], d)
        z = y + b
        with np.errstate(divide="ignore", invalid="ignore"):
            k_xz = np.asarray(kernel.evaluate_pair(x, z))
            ratio = (
                np.abs(k_xy - k_xz) * radius ** (d + gamma) / (t * radius) ** gamma
            )
        ok = np.isfinite(ratio)
        skipped += int(np.sum(~ok & finite))
        lipschitz = float(np.max(ratio[ok], initial=0.0))

    if skipped:
        logger.warning("Skipped %d singular kernel samples for %s", skipped, kernel.name)

    return ModuliEstimate(size, lipschitz, budget, skipped)


def _default_shifts(d: int) -> RealArray:
    """Unit-scale shifts v with |v| <= 1"""
    if d == 1:
        return np.array([[1.0], [-1.0], [0.5], [-0.5], [0.25], [-0.25]])
    angles = 2.0 * math.pi * np.arange(8) / 8.0
    unit = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.concatenate([unit, 0.5 * unit], axis=0)


def annulus_integral(
    integrand: Callable[[RealArray], npt.NDArray],
    d: int,
    inner: float,
    outer: float,
    radial_order: int = 64,
    angular: int = 256,
    panels: int = 8,
) -> complex:
    """
    Integral of integrand over inner <= |x| <= outer

    In d = 1 the two intervals are integrated with composite Gauss-Legendre
    on geometric panels; in d = 2 a radial Gauss rule of radial_order points
    is combined with a uniform angular grid.
    """
    if d == 1:
        r, w = composite_gauss(np.geomspace(inner, outer, panels + 1), 16)
        pts = np.concatenate([r, -r])[:, None]
        vals = np.asarray(integrand(pts))
        return complex(np.sum(np.concatenate([w, w]) * vals))

    r, w = gauss_legendre(inner, outer, radial_order)
    theta = 2.0 * math.pi * (np.arange(angular) + 0.5) / angular
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([(rr * np.cos(tt)).reshape(-1), (rr * np.sin(tt)).reshape(-1)], axis=1)
    vals = np.asarray(integrand(pts)).reshape(rr.shape)
    weights = (w * r)[:, None] * (2.0 * math.pi / angular)
    return complex(np.sum(weights * vals))


def delta_q_modulus(
    kernel: KernelSpec,
    m: int,
    q: float,
    radii: Sequence[float] = (1.0,),
    shifts: Optional[npt.ArrayLike] = None,
    bases: Optional[npt.ArrayLike] = None,
    radial_order: int = 64,
    angular: int = 256,
) -> float:
    """
    Sampled L_q annular regularity

    sup over (R, y, v) of
    ((2^m R)^{d(q - 1)} integral over 2^m R <= |x - y| <= 2^{m+1} R of
    |k(x, y + v) - k(x, y)|^q dx)^{1/q}, with |v| <= R.

    Convolution kernels are sampled at y = 0 only. ``shifts`` are given at
    unit scale and multiplied by R.
    """
    if m < 1:
        raise ValueError(f"Annulus index must be at least 1, got {m}")
    if not q > 0:
        raise ValueError(f"Exponent q must be positive, got {q}")

    d = kernel.d
    unit_shifts = _default_shifts(d) if shifts is None else np.atleast_2d(shifts)
    if kernel.is_convolution or bases is None:
        base_points = np.zeros((1, d))
    else:
        base_points = np.atleast_2d(np.asarray(bases, dtype=np.float64))

    best = 0.0
    for radius in radii:
        inner = 2.0**m * radius
        for y in base_points:
            for v in unit_shifts * radius:

                def integrand(z: RealArray) -> RealArray:
                    x = y + z
                    diff = kernel.evaluate_pair(x, y + v) - kernel.evaluate_pair(x, y)
                    return np.abs(diff) ** q

                total = annulus_integral(
                    integrand, d, inner, 2.0 * inner, radial_order, angular
                ).real
                value = (inner ** (d * (q - 1.0)) * max(total, 0.0)) ** (1.0 / q)
                best = max(best, value)
    return best


def delta_q_profile(kernel: KernelSpec, ms: Sequence[int], q: float, **kwargs: Any) -> RealArray:
    return np.array([delta_q_modulus(kernel, m, q, **kwargs) for m in ms])


def decay_exponent(ms: Sequence[int], values: npt.ArrayLike) -> float:
    """Least-squares exponent g in values ~ C 2^{-g m}"""
    v = np.asarray(values, dtype=np.float64)
    slope, _ = np.polyfit(np.asarray(ms, dtype=np.float64), np.log2(v), 1)
    return float(-slope)


@dataclass(frozen=True)
class CancellationReport(ISerializable):
    """sup |integral over r < |x| < R of k| and the lacunary ladder drift"""

    supremum: float
    worst_pair: Tuple[float, float]
    ladder: List[float]
    ladder_integrals: List[float]
    cancellative: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "supremum": self.supremum,
            "worst_pair": list(self.worst_pair),
            "ladder": self.ladder,
            "ladder_integrals": self.ladder_integrals,
            "cancellative": self.cancellative,
            "empirical": True,
        }


def cancellation_sup(
    kernel: KernelSpec,
    r_grid: Optional[Sequence[float]] = None,
    big_r_grid: Optional[Sequence[float]] = None,
    ladder: Sequence[float] = (),
    threshold: float = 1e-6,
) -> CancellationReport:
    """
    Measure the cancellation condition of a convolution kernel

    Raises
    ------
    ValueError
        For non-convolution kernels
    """
    if not kernel.is_convolution:
        raise ValueError("The cancellation supremum is defined for convolution kernels")

    small = list(r_grid) if r_grid is not None else list(np.geomspace(1e-3, 1.0, 7))
    large = list(big_r_grid) if big_r_grid is not None else list(np.geomspace(1e-3, 1.0, 7))
    angular = kernel.omega.resolution if kernel.omega is not None else 256

    def integral(inner: float, outer: float) -> float:
        # Uniform angular midpoints shifted onto the symbol table when there is one
        if kernel.d == 2 and kernel.omega is not None:
            return _table_annulus(kernel, inner, outer)
        return annulus_integral(kernel.evaluate, kernel.d, inner, outer, angular=angular).real

    best = 0.0
    worst = (0.0, 0.0)
    for r in small:
        for big in large:
            if r >= big:
                continue
            value = abs(integral(r, big))
            if value > best:
                best, worst = value, (r, big)

    ladder_values = [integral(eps, 1.0) if eps < 1.0 else 0.0 for eps in ladder]
    cancellative = best <= threshold
    if not cancellative:
        logger.warning(
            "Kernel %s fails the cancellation check (sup %.3e over %s)",
            kernel.name,
            best,
            worst,
        )
    return CancellationReport(best, worst, list(ladder), ladder_values, cancellative)


def _table_annulus(kernel: KernelSpec, inner: float, outer: float) -> float:
    omega = kernel.omega
    assert omega is not None
    # k_Omega factorizes: integral of Omega over the circle times log(outer / inner)
    r, w = composite_gauss(np.geomspace(inner, outer, 9), 16)
    theta = omega.angles
    pts_r, pts_t = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack(
        [(pts_r * np.cos(pts_t)).reshape(-1), (pts_r * np.sin(pts_t)).reshape(-1)], axis=1
    )
    vals = np.real(kernel.evaluate(pts)).reshape(pts_r.shape)
    weights = (w * r)[:, None] * omega.weights[None, :]
    return float(np.sum(weights * vals))


@dataclass(frozen=True)
class DifferenceKernel:
    """k^phi_{i,n}(x, y) = k^phi_i(x, y) - k^phi_i(x, c_{y,n})"""

    kernel: KernelSpec
    partition: PartitionFamily
    i: int
    n: int

    def piece(self, x: RealArray, y: RealArray) -> npt.NDArray:
        """k^phi_i(x, y) = k(x, y) phi_i(x - y), evaluated only on the support"""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
        weight = self.partition.phi(self.i, x - y)
        nz = weight != 0.0
        out = np.zeros(weight.shape, dtype=np.complex128 if not self.kernel.is_real else np.float64)
        if np.any(nz):
            out[nz] = weight[nz] * self.kernel.evaluate_pair(x[nz], y[nz])
        return out

    def __call__(self, x: npt.ArrayLike, y: npt.ArrayLike) -> npt.NDArray:
        xa = np.asarray(x, dtype=np.float64)
        ya = np.asarray(y, dtype=np.float64)
        return self.piece(xa, ya) - self.piece(xa, dyadic_centers(ya, self.n))

    def support_band(self) -> Tuple[float, float]:
        """Distances dist(x, Q_{y,n}) at which the kernel may be nonzero, for i < n - 1"""
        root = self.partition.scale
        return (2.0 ** (-self.i - 2) * root, 3.0 * 2.0 ** (-self.i) * root)


def difference_kernel(
    kernel: KernelSpec, partition: PartitionFamily, i: int, n: int
) -> DifferenceKernel:
    return DifferenceKernel(kernel, partition, i, n)


def difference_l1(
    kernel: KernelSpec,
    partition: PartitionFamily,
    i: int,
    n: int,
    ys: npt.ArrayLike,
    panels: int = 16,
    order: int = 16,
) -> RealArray:
    """
    integral |k^phi_{i,n}(x, y)| dx for each sample y (d = 1), by composite
    Gauss over the two annuli around y and c_{y,n}
    """
    if kernel.d != 1:
        raise ValueError("difference_l1 integrates in one dimension")
    diff = difference_kernel(kernel, partition, i, n)
    inner, outer = partition.annulus(i)
    samples = np.asarray(ys, dtype=np.float64).reshape(-1)
    centers = dyadic_centers(samples, n)
    out = np.empty(samples.size)
    for idx, (y, c) in enumerate(zip(samples, centers)):
        # Both pieces are smooth between these cuts
        cuts = np.unique(
            np.concatenate([base + np.array([-outer, -inner, inner, outer]) for base in (y, c)])
        )
        breaks = np.unique(
            np.concatenate([np.linspace(a, b, panels + 1) for a, b in zip(cuts[:-1], cuts[1:])])
        )
        x, w = composite_gauss(breaks, order)
        vals = np.abs(diff(x[:, None], np.full((x.size, 1), y)))
        out[idx] = float(np.sum(w * vals))
    return out


def rough_dini_sum(
    omega: RoughSymbol, ms: Sequence[int], **kwargs: Any
) -> Tuple[float, float]:
    """(sum over m of delta_2(m), Dini integral + ||Omega||_2) for k_Omega"""
    kernel = rough_kernel(omega)
    total = float(np.sum(delta_q_profile(kernel, ms, 2.0, **kwargs)))
    diag = omega_tools(omega)
    return total, diag.dini + diag.l2_norm
