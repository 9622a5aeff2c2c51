"""
nccz/suites.py

The acceptance suites. Each suite walks the corpus, measures the properties
its module promises, and records one CheckResult per property together with
the sweep tables that become CSV files.

Hard checks decide the exit status of a run. Soft checks are stability and
calibration measurements that are reported but never fail a run.
"""
from __future__ import annotations

import contextlib
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import pydantic

from nccz import __version__
from nccz.certificates import (
    bau_cauchy_test,
    cotlar_norm_check,
    hermitian_members,
    spread,
    weak11_sweep,
)
from nccz.config import SUITES, ExperimentConfig
from nccz.core.dyadic import DyadicGrid, OperatorField, conditional_expectation
from nccz.core.operator import get_tolerances, set_tolerances
from nccz.core.parallel import get_max_workers, set_max_workers
from nccz.corpus import CorpusMember, counterexample_pair, generate_corpus
from nccz.data_collection import DataCollector
from nccz.decomposition import decompose, validate
from nccz.kernels import (
    KernelSpec,
    RoughSymbol,
    decay_exponent,
    delta_q_profile,
    rough_dini_sum,
)
from nccz.loaders import load_kernel, make_grid
from nccz.maximal import (
    BarrierSettings,
    MajorantCertificate,
    MaximalFamily,
    scalar_distribution_value,
    strong_max_norm,
    weak_sweep,
)
from nccz.operators import SingularIntegralOperator, TruncationLadder
from nccz.plotting import PlotSpec
from nccz.reports import CheckResult, PropertyCheck, RunReport

logger = logging.getLogger(__name__)

RealArray = npt.NDArray[np.float64]

TELESCOPING_TOL = 1e-9
ORACLE_TOL = 1e-12
SCALAR_REDUCTION_TOL = 1e-8
COUNTEREXAMPLE_TOL = 1e-4
SWEEP_SPREAD = 4.0
REFINEMENT_DRIFT = 0.25
MAJORANT_SPREAD = 5.0
COTLAR_RATIO = 10.0
DECAY_TOL = 0.15
MODULI_RANGE = tuple(range(1, 9))
DINI_RANGE = tuple(range(1, 7))
DINI_SYMBOLS = ("cos", "sign", "sawtooth")
DINI_CONSTANT = 20.0
DINI_QUADRATURE = {"radial_order": 32, "angular": 128}
WEAK_LEVELS = (0.07, 0.13, 0.29, 0.61)
FAMILIES = ("martingale", "lacunary", "averages", "truncated")


@dataclass
class SuiteContext:
    """
    Shared state of one suite run

    Attributes
    ----------
    config: ExperimentConfig
        The experiment being run
    grid: DyadicGrid
        The grid every corpus member lives on
    corpus: List[CorpusMember]
        The inputs
    collector: DataCollector
        Tables emitted as CSV at the end of the run
    checks: List[CheckResult]
        Every recorded pass/fail line, in order
    timings: Dict[str, float]
        Wall-clock seconds per stage
    plots: List[PlotSpec]
        SVG plots drawn when requested
    """

    config: ExperimentConfig
    grid: DyadicGrid
    corpus: List[CorpusMember]
    collector: DataCollector = field(default_factory=DataCollector)
    checks: List[CheckResult] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    plots: List[PlotSpec] = field(default_factory=list)
    _kernel: Optional[KernelSpec] = None
    _operators: Dict[int, SingularIntegralOperator] = field(default_factory=dict)

    @property
    def barrier(self) -> BarrierSettings:
        return self.config.tolerances.barrier()

    @property
    def kernel(self) -> KernelSpec:
        if self._kernel is None:
            self._kernel = load_kernel(self.config.kernel, self.grid.d)
        return self._kernel

    def operator(self, grid: Optional[DyadicGrid] = None) -> SingularIntegralOperator:
        """The configured operator on the run grid, or on a refinement of it"""
        grid = self.grid if grid is None else grid
        if grid.k_max not in self._operators:
            top = self.config.ladder.top
            if grid != self.grid:
                top = self.operator().ladder.top
            self._operators[grid.k_max] = SingularIntegralOperator(
                self.kernel,
                grid,
                TruncationLadder.default(grid, top),
                self.config.tolerances.quadrature(),
            )
        return self._operators[grid.k_max]

    def check(
        self, name: str, prop: PropertyCheck, hard: bool = True, **detail: Any
    ) -> CheckResult:
        result = CheckResult.from_property(name, prop, hard)
        result.detail.update(detail)
        self.checks.append(result)
        if not result.holds:
            log = logger.error if hard else logger.warning
            log("Check %s failed: %.6g > %.6g", name, prop.lhs, prop.rhs)
        return result

    def table(self, name: str, columns: Tuple[str, ...], description: str = "") -> None:
        if name not in self.collector.tables:
            self.collector.create_new_table(name, columns, description)

    @contextlib.contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        logger.info("Stage %s", name)
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


@dataclass
class SuiteRun:
    """The report of a run and the tables behind it"""

    report: RunReport
    collector: DataCollector
    plots: List[PlotSpec]

    @property
    def passed(self) -> bool:
        return self.report.passed


SuiteRunner = Callable[[SuiteContext], None]


def coarse_top(f: OperatorField) -> float:
    """Largest eigenvalue of the mean of f over the whole box"""
    mean = np.mean(f.values, axis=0)
    return float(np.max(np.linalg.eigvalsh(0.5 * (mean + np.conj(mean.T)))))


def sweep_levels(config: ExperimentConfig, f: OperatorField) -> List[float]:
    top = coarse_top(f)
    return config.lambda_sweep.levels(top if top > 0 else 1.0)


def is_scalar_embedding(f: OperatorField) -> bool:
    diag = f.values[:, 0, 0]
    return bool(np.allclose(f.values, diag[:, None, None] * np.eye(f.n)[None], atol=0.0))


def scalar_oracle(
    grid: DyadicGrid, values: RealArray, lam: float
) -> Tuple[RealArray, Dict[int, RealArray]]:
    """
    The classical dyadic decomposition of a nonnegative step function

    Returns the good part and the bad part of every level at which some
    maximal cube with average above lam stops.
    """
    stop = np.full(grid.num_cells, grid.k_max + 1)
    for k in grid.levels():
        labels = grid.level_labels(k)
        means = np.bincount(labels, weights=values) / np.bincount(labels)
        fresh = (means[labels] > lam) & (stop > grid.k_max)
        stop[fresh] = k

    good = values.copy()
    bad: Dict[int, RealArray] = {}
    for k in np.unique(stop[stop <= grid.k_max]):
        labels = grid.level_labels(int(k))
        means = (np.bincount(labels, weights=values) / np.bincount(labels))[labels]
        mask = stop == k
        good[mask] = means[mask]
        bad[int(k)] = np.where(mask, values - means, 0.0)
    return good, bad


def environment() -> Dict[str, str]:
    return {
        "nccz": __version__,
        "python": platform.python_version(),
        "platform": platform.platform(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "workers": str(get_max_workers()),
    }


# ---------------------------------------------------------------------------
# czdecomp
# ---------------------------------------------------------------------------


def run_czdecomp(ctx: SuiteContext) -> None:
    ctx.table(
        "czdecomp",
        ("member", "lam", "s", "num_levels", "g_inf", "zeta_deficit", "q_deficit", "failed"),
        "one row per decomposition of the lambda sweep",
    )
    ctx.plots.append(
        PlotSpec("czdecomp", "lam", ("zeta_deficit", "q_deficit"), "member", True, True)
    )

    for member in ctx.corpus:
        f = member.field
        scalar = is_scalar_embedding(f)
        for index, lam in enumerate(sweep_levels(ctx.config, f)):
            with ctx.stage("decompose"):
                dec = decompose(f, lam)
            with ctx.stage("validate"):
                report = validate(dec, f)

            prefix = f"czdecomp/{member.name}/lam{index}"
            for name, prop in report.checks.items():
                ctx.check(f"{prefix}/{name}", prop)

            if scalar:
                values = np.real(f.values[:, 0, 0])
                good, bad = scalar_oracle(ctx.grid, values, lam)
                scale = ORACLE_TOL * (1.0 + float(np.max(values)))
                g_error = float(np.max(np.abs(np.real(dec.g.values[:, 0, 0]) - good)))
                ctx.check(f"{prefix}/oracle_good", PropertyCheck.at_most(g_error, scale))
                mismatch = len(set(dec.bd) ^ set(bad))
                ctx.check(f"{prefix}/oracle_levels", PropertyCheck.at_most(mismatch, 0.0))

            row = {
                "member": member.name,
                "lam": lam,
                "s": dec.s,
                "num_levels": len(dec.levels),
                "g_inf": report.checks["g_linf"].lhs,
                "zeta_deficit": report.checks["zeta_trace"].lhs,
                "q_deficit": report.checks["q_residual_trace"].lhs,
                "failed": len(report.failed()),
            }
            ctx.collector.add_table_row("czdecomp", row)


# ---------------------------------------------------------------------------
# maxnorm
# ---------------------------------------------------------------------------


def martingale_family(f: OperatorField) -> MaximalFamily:
    levels = list(f.grid.levels())
    return MaximalFamily.from_fields([conditional_expectation(f, k) for k in levels], levels)


def field_family(
    f: OperatorField, name: str, op: Optional[SingularIntegralOperator] = None
) -> MaximalFamily:
    """
    One of the maximal families built from a single field

    Non-Hermitian members are split into their real and imaginary parts.
    Every family except the martingale one needs an operator.
    """
    if name == "martingale":
        return martingale_family(f)
    if name not in FAMILIES:
        raise ValueError(f"Unknown family {name!r}; expected one of {', '.join(FAMILIES)}")
    if op is None:
        raise ValueError(f"The {name} family needs an operator")
    if name == "lacunary":
        members = op.lacunary_family(f)
    elif name == "truncated":
        members = op.truncated_family(f)
    else:
        members = op.average_family(f)
    return MaximalFamily.from_fields(hermitian_members(members))


def scalar_family(family: MaximalFamily) -> MaximalFamily:
    values = np.real(family.values[..., :1, :1])
    return MaximalFamily(values, family.labels, family.grid, family.cell_volume)


def pointwise_max_norm(family: MaximalFamily, p: float) -> float:
    top = np.max(np.abs(np.real(family.values[..., 0, 0])), axis=1)
    return float(np.sum(top**p) * family.cell_volume) ** (1.0 / p)


def gap_check(cert: MajorantCertificate, family: MaximalFamily, tol: float) -> PropertyCheck:
    """Duality gap against the per-cell stopping rule of the barrier solver, summed"""
    volume = family.cell_volume * family.num_cells
    if cert.p == 2.0:
        # The solver stops on Tr a^2, the square of the reported norm
        gap = cert.objective**2 - cert.dual_bound**2
        return PropertyCheck.at_most(gap, tol * (volume + cert.objective**2))
    return PropertyCheck.at_most(cert.gap, tol * (volume + cert.objective))


def _counterexample_checks(ctx: SuiteContext) -> None:
    f, g = counterexample_pair()
    family = MaximalFamily.from_matrices([f])
    cert = strong_max_norm(family, 1.0, method="barrier", settings=ctx.barrier)
    trace_g = float(np.trace(g))
    ctx.check(
        "maxnorm/counterexample/optimum",
        PropertyCheck.at_most(abs(cert.objective - 16.0), COUNTEREXAMPLE_TOL),
        objective=cert.objective,
    )
    ctx.check(
        "maxnorm/counterexample/below_trace_g",
        PropertyCheck.at_most(cert.objective, trace_g),
    )


def run_maxnorm(ctx: SuiteContext) -> None:
    ctx.table(
        "maxnorm",
        ("member", "family", "p", "objective", "dual_bound", "gap", "method", "weak"),
        "strong maximal norms with their dual bounds, and the weak sweep value",
    )
    gap_tol = ctx.config.tolerances.gap
    op = ctx.operator()

    with ctx.stage("counterexample"):
        _counterexample_checks(ctx)

    for member in ctx.corpus:
        f = member.field
        families = {name: field_family(f, name, op) for name in FAMILIES[:3]}
        prefix = f"maxnorm/{member.name}"

        for name, family in families.items():
            with ctx.stage("strong_norms"):
                certs = {
                    p: strong_max_norm(family, p, method="barrier", settings=ctx.barrier)
                    for p in (1.0, 2.0)
                }
            with ctx.stage("weak_sweep"):
                top = family.sup_norm()
                lambdas = [c * top for c in WEAK_LEVELS] if top > 0 else [1.0]
                weak = weak_sweep(family, lambdas).value

            for p, cert in certs.items():
                ctx.check(
                    f"{prefix}/{name}/gap_p{int(p)}",
                    gap_check(cert, family, gap_tol),
                )
                ctx.check(
                    f"{prefix}/{name}/feasible_p{int(p)}",
                    PropertyCheck.at_most(-cert.slack, 0.0, 1e-9 * (1.0 + cert.objective)),
                )
                ctx.collector.add_table_row(
                    "maxnorm",
                    {
                        "member": member.name,
                        "family": name,
                        "p": p,
                        "objective": cert.objective,
                        "dual_bound": cert.dual_bound,
                        "gap": cert.gap,
                        "method": cert.method,
                        "weak": weak,
                    },
                )

            ctx.check(
                f"{prefix}/{name}/weak_below_strong",
                PropertyCheck.at_most(weak, certs[1.0].objective * (1.0 + 1e-6)),
            )

        with ctx.stage("scalar_reduction"):
            scalar = scalar_family(families["martingale"])
            for p in (1.0, 2.0):
                direct = pointwise_max_norm(scalar, p)
                solved = strong_max_norm(scalar, p, settings=ctx.barrier).objective
                ctx.check(
                    f"{prefix}/scalar_reduction_p{int(p)}",
                    PropertyCheck.at_most(
                        abs(solved - direct), SCALAR_REDUCTION_TOL * (1.0 + direct)
                    ),
                )
            top = scalar.sup_norm()
            lambdas = [c * top for c in WEAK_LEVELS] if top > 0 else [1.0]
            exact = scalar_distribution_value(scalar, lambdas)
            weak = weak_sweep(scalar, lambdas).value
            ctx.check(
                f"{prefix}/scalar_weak",
                PropertyCheck.at_most(abs(weak - exact), 1e-9 * (1.0 + exact)),
            )

        with ctx.stage("single_member"):
            finest = hermitian_members([op.lacunary(f, op.ladder.top)])[0]
            single = MaximalFamily.from_fields([finest])
            cert = strong_max_norm(single, 1.0, method="barrier", settings=ctx.barrier)
            trace_abs = finest.abs().norm(1.0)
            ctx.check(
                f"{prefix}/single_member_trace",
                PropertyCheck.at_most(
                    abs(cert.objective - trace_abs),
                    gap_tol * (ctx.grid.volume + trace_abs),
                ),
            )


# ---------------------------------------------------------------------------
# weak11
# ---------------------------------------------------------------------------


def _ratio_drift(base: float, refined: float) -> float:
    if base <= 0.0 and refined <= 0.0:
        return 0.0
    return abs(refined - base) / max(base, refined)


def run_weak11(ctx: SuiteContext) -> None:
    ctx.table(
        "weak11",
        (
            "member",
            "lam",
            "trace_total",
            "deficit_ratio",
            "sup_truncated",
            "sup_ratio",
            "sup_lacunary",
            "majorant_f1",
            "majorant_f2",
            "boundary_constant",
            "degenerate",
        ),
        "weak type (1, 1) certificates along the lambda sweep",
    )
    ctx.plots.append(
        PlotSpec("weak11", "lam", ("deficit_ratio", "sup_ratio"), "member", True, False)
    )
    op = ctx.operator()
    first_f1: List[float] = []
    first_f2: List[float] = []

    for member in ctx.corpus:
        f = member.field
        prefix = f"weak11/{member.name}"
        lambdas = sweep_levels(ctx.config, f)

        with ctx.stage("telescoping"):
            residual = max(op.telescoping_residuals(f))
        ctx.check(f"{prefix}/telescoping", PropertyCheck.at_most(residual, TELESCOPING_TOL))

        with ctx.stage("certificates"):
            summaries = weak11_sweep(op, f, lambdas)

        for index, summary in enumerate(summaries):
            for name, prop in summary.checks.items():
                ctx.check(f"{prefix}/lam{index}/{name}", prop)
            ctx.collector.add_table_row(
                "weak11",
                {
                    "member": member.name,
                    "lam": summary.lam,
                    "trace_total": summary.trace_total,
                    "deficit_ratio": summary.deficit_ratio,
                    "sup_truncated": summary.sup_truncated,
                    "sup_ratio": summary.sup_ratio,
                    "sup_lacunary": summary.sup_lacunary,
                    "majorant_f1": summary.majorant_f1,
                    "majorant_f2": summary.majorant_f2,
                    "boundary_constant": summary.boundary_constant,
                    "degenerate": ",".join(summary.degenerate_stages),
                },
            )

        ctx.check(
            f"{prefix}/deficit_ratio_spread",
            PropertyCheck.at_most(spread([s.deficit_ratio for s in summaries]), SWEEP_SPREAD),
            hard=False,
        )
        ctx.check(
            f"{prefix}/sup_ratio_spread",
            PropertyCheck.at_most(spread([s.sup_ratio for s in summaries]), SWEEP_SPREAD),
            hard=False,
        )
        first_f1.append(summaries[0].majorant_f1)
        first_f2.append(summaries[0].majorant_f2)

        with ctx.stage("refinement"):
            fine = f.refine()
            refined = weak11_sweep(ctx.operator(fine.grid), fine, lambdas[:1])[0]
        base = summaries[0]
        ctx.check(
            f"{prefix}/refinement_deficit_ratio",
            PropertyCheck.at_most(
                _ratio_drift(base.deficit_ratio, refined.deficit_ratio), REFINEMENT_DRIFT
            ),
            hard=False,
        )
        ctx.check(
            f"{prefix}/refinement_sup_ratio",
            PropertyCheck.at_most(
                _ratio_drift(base.sup_ratio, refined.sup_ratio), REFINEMENT_DRIFT
            ),
            hard=False,
        )

    for name, values in (("majorant_f1", first_f1), ("majorant_f2", first_f2)):
        positive = [v for v in values if v > 0.0]
        if len(positive) >= 2:
            ratio = max(positive) / float(np.median(positive))
            ctx.check(
                f"weak11/{name}_max_over_median",
                PropertyCheck.at_most(ratio, MAJORANT_SPREAD),
                hard=False,
            )


# ---------------------------------------------------------------------------
# cotlar
# ---------------------------------------------------------------------------


def run_cotlar(ctx: SuiteContext) -> None:
    ctx.table(
        "cotlar",
        ("member", "k_max", "lhs", "maximal_of_transform", "maximal_of_input", "ratio", "drift"),
        "both sides of the norm form of Cotlar's inequality at p = 2",
    )
    op = ctx.operator()
    for member in ctx.corpus:
        f = member.field
        prefix = f"cotlar/{member.name}"
        with ctx.stage("cotlar"):
            summary = cotlar_norm_check(op, f, 2.0, COTLAR_RATIO)
        with ctx.stage("refinement"):
            fine = f.refine()
            refined = cotlar_norm_check(ctx.operator(fine.grid), fine, 2.0, COTLAR_RATIO)

        for name, prop in summary.checks.items():
            ctx.check(f"{prefix}/{name}", prop)
        ctx.check(
            f"{prefix}/refinement",
            PropertyCheck.at_most(_ratio_drift(summary.ratio, refined.ratio), REFINEMENT_DRIFT),
            hard=False,
        )
        for grid, result in ((f.grid, summary), (fine.grid, refined)):
            ctx.collector.add_table_row(
                "cotlar",
                {
                    "member": member.name,
                    "k_max": grid.k_max,
                    "lhs": result.lhs,
                    "maximal_of_transform": result.maximal_of_transform,
                    "maximal_of_input": result.maximal_of_input,
                    "ratio": result.ratio,
                    "drift": result.substitution_drift,
                },
            )


# ---------------------------------------------------------------------------
# rough
# ---------------------------------------------------------------------------


def run_rough(ctx: SuiteContext) -> None:
    kernel = ctx.kernel
    if kernel.gamma is not None:
        ctx.table("rough_moduli", ("kernel", "m", "delta_2"), "L2 moduli across annuli")
        ctx.plots.append(PlotSpec("rough_moduli", "m", ("delta_2",), None, False, True))
        with ctx.stage("moduli"):
            values = delta_q_profile(kernel, MODULI_RANGE, 2.0)
        for m, value in zip(MODULI_RANGE, values):
            ctx.collector.add_table_row(
                "rough_moduli", {"kernel": kernel.name, "m": m, "delta_2": float(value)}
            )
        if np.all(values > 0.0):
            exponent = decay_exponent(MODULI_RANGE, values)
            ctx.check(
                f"rough/{kernel.name}/decay_exponent",
                PropertyCheck.at_most(abs(exponent - kernel.gamma), DECAY_TOL * kernel.gamma),
                exponent=exponent,
            )
        else:
            logger.warning("Kernel %s has vanishing moduli; no decay fit", kernel.name)
    else:
        logger.info("Kernel %s carries no Lipschitz exponent; skipping the decay fit", kernel.name)

    ctx.table("rough_dini", ("symbol", "delta_sum", "dini_bound", "ratio"), "")
    ratios: List[float] = []
    for name in DINI_SYMBOLS:
        with ctx.stage("rough_dini"):
            total, bound = rough_dini_sum(RoughSymbol.named(name, 2), DINI_RANGE, **DINI_QUADRATURE)
        ratio = total / bound if bound > 0 else math.inf
        ratios.append(ratio)
        ctx.collector.add_table_row(
            "rough_dini",
            {"symbol": name, "delta_sum": total, "dini_bound": bound, "ratio": ratio},
        )
    constant = max(ratios)
    ctx.check("rough/dini_constant", PropertyCheck.at_most(constant, DINI_CONSTANT))
    ctx.check("rough/dini_spread", PropertyCheck.at_most(spread(ratios), 10.0), hard=False)


# ---------------------------------------------------------------------------
# bau
# ---------------------------------------------------------------------------


def run_bau(ctx: SuiteContext) -> None:
    ctx.table(
        "bau",
        ("member", "stage", "eps_index", "envelope", "deficit", "delta"),
        "Cauchy envelope of the compressed truncations",
    )
    ctx.plots.append(PlotSpec("bau", "eps_index", ("envelope",), "member", False, True))
    op = ctx.operator()
    settings = ctx.config.bau
    cancellative = ctx.kernel.name != "one-sided"

    members = [m for m in ctx.corpus if m.kind == "regression"] or ctx.corpus
    for member in members:
        prefix = f"bau/{member.name}"
        with ctx.stage("bau"):
            summary = bau_cauchy_test(
                op, member.field, settings.delta, settings.stages, decay_ratio=settings.decay
            )
        for name, prop in summary.checks.items():
            hard = cancellative and name != "chain_complete"
            ctx.check(f"{prefix}/{name}", prop, hard=hard)
        for index, value in enumerate(summary.envelope):
            ctx.collector.add_table_row(
                "bau",
                {
                    "member": member.name,
                    "stage": summary.reached,
                    "eps_index": index,
                    "envelope": value,
                    "deficit": summary.deficit,
                    "delta": summary.delta,
                },
            )


RUNNERS: Dict[str, SuiteRunner] = {
    "czdecomp": run_czdecomp,
    "maxnorm": run_maxnorm,
    "weak11": run_weak11,
    "cotlar": run_cotlar,
    "rough": run_rough,
    "bau": run_bau,
}


def run_suite(
    config: ExperimentConfig,
    suite: str,
    corpus: Optional[Sequence[CorpusMember]] = None,
) -> SuiteRun:
    """
    Run one suite over the corpus of config, or over the given corpus

    An empty corpus gives a report without checks, which passes.

    Raises
    ------
    ValueError
        For an unknown suite
    """
    if suite not in RUNNERS:
        raise ValueError(f"Unknown suite {suite!r}; expected one of {', '.join(SUITES)}")

    previous_tolerances = get_tolerances()
    previous_workers = get_max_workers()
    set_tolerances(config.tolerances.tolerances())
    set_max_workers(config.threads)

    try:
        grid = make_grid(config.grid)
        start = time.perf_counter()
        members = list(corpus) if corpus is not None else generate_corpus(config)
        ctx = SuiteContext(config, grid, members)
        ctx.timings["corpus"] = time.perf_counter() - start

        if members:
            RUNNERS[suite](ctx)
        else:
            logger.warning("The corpus is empty; suite %s records no checks", suite)

        report = RunReport(
            suite=suite,
            seed=config.seed,
            version=__version__,
            config=config.model_dump(),
            members=[m.name for m in members],
            checks=ctx.checks,
            tables=ctx.collector.table_names(),
            environment=environment(),
            timings=ctx.timings,
        )
    finally:
        set_tolerances(previous_tolerances)
        set_max_workers(previous_workers)

    failed = report.failed()
    logger.info(
        "Suite %s: %d checks, %d hard failures", suite, len(report.checks), len(failed)
    )
    return SuiteRun(report, ctx.collector, ctx.plots)
