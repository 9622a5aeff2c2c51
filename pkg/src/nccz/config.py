from __future__ import annotations

from typing import Any, Dict, List, Optional

import pydantic

from nccz.core.operator import TOL_PROJ, TOL_PSD_SCALE, TOL_RANK, Tolerances
from nccz.core.quadrature import QuadratureSettings
from nccz.maximal import BarrierSettings

SUITES = ("czdecomp", "maxnorm", "weak11", "cotlar", "rough", "bau")


def merge_settings(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge nested settings, keeping the base values the update does not name

    A kernel section that names a different kernel drops the old parameters.
    """
    merged = dict(base)
    for key, value in update.items():
        current = merged.get(key)
        if isinstance(current, dict) and isinstance(value, dict):
            if key == "kernel" and value.get("name", current.get("name")) != current.get("name"):
                current = {**current, "params": {}}
            merged[key] = merge_settings(current, value)
        else:
            merged[key] = value
    return merged


class GridConfig(pydantic.BaseModel):
    """
    The dyadic grid every corpus field lives on

    Attributes
    ----------
    d: int
        Spatial dimension, 1 or 2
    k_min: int
        Coarsest level; the box is [0, 2^{-k_min})^d
    k_max: int
        Finest level; cells have side 2^{-k_max}
    n: int
        Matrix size of the field values
    """

    d: int = 1
    k_min: int = 0
    k_max: int = 5
    n: int = 2

    @pydantic.field_validator("d")
    @classmethod
    def _check_dimension(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError(f"Grid dimension must be 1 or 2, got {value}")
        return value

    @pydantic.field_validator("n")
    @classmethod
    def _check_matrix_size(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"Matrix size must be positive, got {value}")
        return value


class KernelConfig(pydantic.BaseModel):
    """Registry name of the kernel and the parameters passed to it"""

    name: str = "hilbert"
    params: Dict[str, Any] = pydantic.Field(default_factory=dict)


class SweepConfig(pydantic.BaseModel):
    """
    A geometric lambda-grid, relative to the corpus member it is applied to

    The levels are start * r, ..., stop * r with r the largest eigenvalue of
    the mean of the field over the box, so every level clears the coarsest
    averages when start > 1.
    """

    start: float = 1.5
    stop: float = 1500.0
    num: int = 4

    @pydantic.model_validator(mode="after")
    def _check_range(self) -> SweepConfig:
        if not 0 < self.start <= self.stop:
            raise ValueError(f"Expected 0 < start <= stop, got {self.start}, {self.stop}")
        if self.num < 1:
            raise ValueError(f"A sweep needs at least one level, got {self.num}")
        return self

    def levels(self, reference: float = 1.0) -> List[float]:
        if self.num == 1:
            return [self.start * reference]
        ratio = (self.stop / self.start) ** (1.0 / (self.num - 1))
        return [self.start * ratio**i * reference for i in range(self.num)]

    @classmethod
    def parse(cls, text: str) -> SweepConfig:
        """Read the "start:stop:num" shorthand"""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Expected a sweep written as start:stop:num, got {text!r}")
        return cls(start=float(parts[0]), stop=float(parts[1]), num=int(parts[2]))


class LadderConfig(pydantic.BaseModel):
    """Top index J of the default ladder; None picks the finest resolvable one"""

    top: Optional[int] = None


class ToleranceConfig(pydantic.BaseModel):
    """
    Numerical tolerances and quadrature resolution for one run

    Attributes
    ----------
    psd_scale: float
        Scale of the Loewner comparison tolerance
    proj: float
        Commutation threshold for projections
    rank: float
        Relative cut of rank decisions
    gap: float
        Relative duality gap accepted from the strong-norm solver; the solver
        itself runs at half of it
    gauss_order: int
        Gauss-Legendre nodes per piece in one dimension
    tensor_order: int
        Tensor Gauss nodes per axis in two dimensions
    depth: int
        Refinement depth for cells crossing a circle
    """

    psd_scale: float = TOL_PSD_SCALE
    proj: float = TOL_PROJ
    rank: float = TOL_RANK
    gap: float = 1e-6
    gauss_order: int = 12
    tensor_order: int = 4
    depth: int = 2

    def tolerances(self) -> Tolerances:
        return Tolerances(psd_scale=self.psd_scale, proj=self.proj, rank=self.rank)

    def quadrature(self) -> QuadratureSettings:
        return QuadratureSettings(
            gauss_order=self.gauss_order, tensor_order=self.tensor_order, depth=self.depth
        )

    def barrier(self) -> BarrierSettings:
        """Solver settings at half the accepted gap, so the checks keep some room"""
        return BarrierSettings(gap_tol=0.5 * self.gap)


class BauConfig(pydantic.BaseModel):
    """Parameters of the bilateral almost uniform test"""

    delta: float = 0.05
    stages: int = 3
    decay: float = 0.1


class ExperimentConfig(pydantic.BaseModel):
    """
    Everything a suite run depends on

    Attributes
    ----------
    seed: int
        Seed of the counter-based generator behind the corpus
    grid: GridConfig
        Grid and matrix size
    kernel: KernelConfig
        The singular integral kernel
    lambda_sweep: SweepConfig
        Levels used by the decomposition and weak type suites
    ladder: LadderConfig
        Truncation ladder
    corpus_size: int
        Number of random fields, on top of the regression inputs
    rank: int
        Rank of the Gram matrices behind the random fields
    regression: bool
        Include the fixed regression inputs in the corpus
    tolerances: ToleranceConfig
        Numerical tolerances
    bau: BauConfig
        The bilateral almost uniform test
    threads: int
        Worker pool cap
    svg: bool
        Emit SVG plots next to the CSV tables
    """

    seed: int = 1
    grid: GridConfig = pydantic.Field(default_factory=GridConfig)
    kernel: KernelConfig = pydantic.Field(default_factory=KernelConfig)
    lambda_sweep: SweepConfig = pydantic.Field(default_factory=SweepConfig)
    ladder: LadderConfig = pydantic.Field(default_factory=LadderConfig)
    corpus_size: int = 8
    rank: int = 2
    regression: bool = True
    tolerances: ToleranceConfig = pydantic.Field(default_factory=ToleranceConfig)
    bau: BauConfig = pydantic.Field(default_factory=BauConfig)
    threads: int = 1
    svg: bool = False

    @pydantic.field_validator("corpus_size", "threads", "rank")
    @classmethod
    def _check_counts(cls, value: int, info: pydantic.ValidationInfo) -> int:
        lowest = 0 if info.field_name == "corpus_size" else 1
        if value < lowest:
            raise ValueError(f"{info.field_name} must be at least {lowest}, got {value}")
        return value


class NcczCLIConfig(ExperimentConfig):
    suite: str = "czdecomp"
    out_dir: Optional[str] = None
    path: str = "."

    @pydantic.field_validator("suite")
    @classmethod
    def _check_suite(cls, value: str) -> str:
        if value not in SUITES:
            raise ValueError(f"Unknown suite {value!r}; expected one of {', '.join(SUITES)}")
        return value

    @classmethod
    def from_partial(cls, data: Dict[str, Any], defaults: NcczCLIConfig) -> NcczCLIConfig:
        """Construct new config from a default config and a partial set of parameters"""
        return cls(**merge_settings(defaults.model_dump(), data))

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(**self.model_dump(exclude={"suite", "out_dir", "path"}))