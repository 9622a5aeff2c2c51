"""
reports.py

Pydantic schemas of the JSON reports written by validation, certificate and
suite runs. Each measured property is a PropertyCheck read as "lhs <= rhs".
"""
from __future__ import annotations

import math
from typing import Any, Dict, List, Optional

import pydantic

from nccz.data_collection import SCHEMA_VERSION


class PropertyCheck(pydantic.BaseModel):
    """
    One measured inequality lhs <= rhs

    Attributes
    ----------
    holds: bool
        Whether the inequality was met
    lhs: float
        The measured quantity
    rhs: float
        The bound it is compared with
    slack: float
        rhs - lhs; negative when the property fails
    """

    holds: bool
    lhs: float
    rhs: float
    slack: float

    @classmethod
    def at_most(cls, lhs: float, rhs: float, tol: float = 0.0) -> PropertyCheck:
        """lhs <= rhs + tol; the recorded slack ignores tol"""
        lhs = float(lhs)
        rhs = float(rhs)
        if math.isnan(lhs) or math.isnan(rhs):
            return cls(holds=False, lhs=lhs, rhs=rhs, slack=math.nan)
        slack = rhs - lhs if not (math.isinf(lhs) and math.isinf(rhs)) else 0.0
        return cls(holds=lhs <= rhs + tol, lhs=lhs, rhs=rhs, slack=slack)


class ValidationReport(pydantic.BaseModel):
    """Property checks of one Calderon-Zygmund decomposition"""

    lam: float
    s: int
    checks: Dict[str, PropertyCheck] = pydantic.Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks.values())

    def failed(self) -> List[str]:
        return [name for name, c in self.checks.items() if not c.holds]


class CheckResult(pydantic.BaseModel):
    """
    A single pass/fail line of a suite run

    Attributes
    ----------
    name: str
        Identifier of the check within its suite
    holds: bool
        Whether the check passed
    value: float, optional
        The measured value
    bound: float, optional
        The value it was compared with
    hard: bool
        Hard checks decide the exit status; soft ones are only reported
    detail: Dict[str, Any]
        Free-form extra measurements
    """

    name: str
    holds: bool
    value: Optional[float] = None
    bound: Optional[float] = None
    hard: bool = True
    detail: Dict[str, Any] = pydantic.Field(default_factory=dict)

    @classmethod
    def from_property(cls, name: str, check: PropertyCheck, hard: bool = True) -> CheckResult:
        return cls(name=name, holds=check.holds, value=check.lhs, bound=check.rhs, hard=hard)


class Weak11Summary(pydantic.BaseModel):
    """
    Trace budget and measured bounds of one weak type (1, 1) certificate

    Attributes
    ----------
    lam: float
        The level lambda
    kernel: str
        Registry name of the kernel
    f_l1: float
        ||f||_1
    deficits: Dict[str, float]
        phi(1 - e_stage) for every stage projection
    trace_total: float
        phi(1 - e) of the assembled projection
    deficit_ratio: float
        trace_total * lambda / ||f||_1
    sup_truncated: float
        max over the ladder of ||e T_eps f e||_inf
    sup_lacunary: float
        max over the ladder of ||e T^phi_j f e||_inf
    sup_ratio: float
        sup_truncated / lambda
    boundary_constant: float
        Sandwich constant of the boundary pieces against the ball averages
    majorant_f1: float
        ||F1||_1 / ||f||_1
    majorant_f2: float
        ||F2||_1 / ||f||_1
    checks: Dict[str, PropertyCheck]
        Every inequality re-measured after assembly
    degenerate_stages: List[str]
        Stages that fell back to a trivial projection
    """

    lam: float
    kernel: str
    f_l1: float
    deficits: Dict[str, float] = pydantic.Field(default_factory=dict)
    trace_total: float = 0.0
    deficit_ratio: float = 0.0
    sup_truncated: float = 0.0
    sup_lacunary: float = 0.0
    sup_ratio: float = 0.0
    boundary_constant: float = 0.0
    majorant_f1: float = 0.0
    majorant_f2: float = 0.0
    checks: Dict[str, PropertyCheck] = pydantic.Field(default_factory=dict)
    degenerate_stages: List[str] = pydantic.Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks.values())

    def failed(self) -> List[str]:
        return [name for name, c in self.checks.items() if not c.holds]


class CertifyReport(pydantic.BaseModel):
    """
    What `nccz certify` writes: one weak type (1, 1) summary per level

    Attributes
    ----------
    schema_version: int
        Version of this layout, shared with the CSV tables
    version: str
        Package version
    field: str
        Where the field was read from
    kernel: str
        Registry name of the kernel
    lambdas: List[float]
        The levels, in sweep order
    summaries: List[Weak11Summary]
        One summary per level
    """

    schema_version: int = SCHEMA_VERSION
    version: str
    field: str
    kernel: str
    lambdas: List[float] = pydantic.Field(default_factory=list)
    summaries: List[Weak11Summary] = pydantic.Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.summaries)

    def failed(self) -> List[str]:
        return [f"lam={s.lam:g}/{name}" for s in self.summaries for name in s.failed()]


class CotlarSummary(pydantic.BaseModel):
    """Both sides of the norm form of Cotlar's inequality"""

    p: float
    lhs: float
    maximal_of_transform: float
    maximal_of_input: float
    ratio: float
    substitution_drift: float
    domination: Optional[Dict[str, float]] = None
    checks: Dict[str, PropertyCheck] = pydantic.Field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return self.maximal_of_transform + self.maximal_of_input


class CauchySummary(pydantic.BaseModel):
    """
    The bilateral almost uniform Cauchy test

    Attributes
    ----------
    epsilons: List[float]
        The ladder
    matrix: List[List[float]]
        ||e (T_{eps_k} f - T_{eps_l} f) e||_inf
    envelope: List[float]
        max of the matrix over k, l >= m, for m along the ladder
    decay_rate: float, optional
        Least-squares exponent of the envelope in base 2
    reached: int
        Number of approximation stages completed
    requested: int
        Number of stages asked for
    deficit: float
        phi(1 - e)
    delta: float
        The requested bound on phi(1 - e)
    stages: List[Dict[str, float]]
        Level, mollification radius, deficit and compressed norm per stage
    tensor_differences: List[float], optional
        ||T_{eps_m} g - T_{eps_{m+1}} g||_inf for an elementary tensor input
    """

    epsilons: List[float]
    matrix: List[List[float]]
    envelope: List[float]
    decay_rate: Optional[float] = None
    reached: int
    requested: int
    deficit: float
    delta: float
    stages: List[Dict[str, float]] = pydantic.Field(default_factory=list)
    tensor_differences: Optional[List[float]] = None
    checks: Dict[str, PropertyCheck] = pydantic.Field(default_factory=dict)


class RunReport(pydantic.BaseModel):
    """
    Everything a suite run writes to report.json

    Attributes
    ----------
    schema_version: int
        Version of the report and table layout
    suite: str
        The suite that ran
    seed: int
        Seed of the corpus generator
    version: str
        Package version
    config: Dict[str, Any]
        Echo of the experiment configuration
    members: List[str]
        Names of the corpus members, in run order
    checks: List[CheckResult]
        Every pass/fail line
    tables: List[str]
        Names of the collected tables
    environment: Dict[str, str]
        Interpreter, platform and library versions
    timings: Dict[str, float]
        Wall-clock seconds per stage; the only field that varies between
        runs with the same configuration
    """

    schema_version: int = SCHEMA_VERSION
    suite: str
    seed: int
    version: str
    config: Dict[str, Any] = pydantic.Field(default_factory=dict)
    members: List[str] = pydantic.Field(default_factory=list)
    checks: List[CheckResult] = pydantic.Field(default_factory=list)
    tables: List[str] = pydantic.Field(default_factory=list)
    environment: Dict[str, str] = pydantic.Field(default_factory=dict)
    timings: Dict[str, float] = pydantic.Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks if c.hard)

    def failed(self, hard_only: bool = True) -> List[str]:
        return [c.name for c in self.checks if not c.holds and (c.hard or not hard_only)]

    def without_timings(self) -> Dict[str, Any]:
        return self.model_dump(exclude={"timings"})
