import numpy as np
import pytest

from nccz.config import ExperimentConfig, GridConfig, SweepConfig, ToleranceConfig
from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.core.operator import get_tolerances
from nccz.decomposition import decompose
from nccz.maximal import MajorantCertificate, MaximalFamily, strong_max_norm
from nccz.suites import (
    FAMILIES,
    coarse_top,
    field_family,
    gap_check,
    is_scalar_embedding,
    run_suite,
    scalar_oracle,
    sweep_levels,
)


def small_config(**updates) -> ExperimentConfig:
    data = {
        "seed": 11,
        "grid": GridConfig(d=1, k_min=0, k_max=4, n=2),
        "corpus_size": 1,
        "lambda_sweep": SweepConfig(start=1.5, stop=150.0, num=3),
    }
    data.update(updates)
    return ExperimentConfig(**data)


def names_of(run) -> list:
    return [c.name for c in run.report.checks]


def test_empty_corpus_passes_without_checks() -> None:
    config = ExperimentConfig(corpus_size=0, regression=False)
    for suite in ("czdecomp", "weak11"):
        run = run_suite(config, suite)
        assert run.report.checks == []
        assert run.report.members == []
        assert run.passed


def test_unknown_suite() -> None:
    with pytest.raises(ValueError):
        run_suite(small_config(), "everything")


def test_czdecomp_suite_passes() -> None:
    config = small_config()
    run = run_suite(config, "czdecomp")
    report = run.report

    assert report.passed, report.failed()
    assert report.members == ["indicator", "scalar", "block-diagonal", "rotated-pair", "random-000"]
    assert any(name.endswith("/oracle_good") for name in names_of(run))
    assert not any(
        name.startswith("czdecomp/rotated-pair") and "oracle" in name for name in names_of(run)
    )
    assert run.collector.num_rows("czdecomp") == 5 * 3
    assert report.tables == ["czdecomp"]
    assert set(report.environment) >= {"python", "numpy", "nccz"}
    assert "decompose" in report.timings


def test_runs_are_reproducible() -> None:
    config = small_config(regression=False, corpus_size=2)
    first = run_suite(config, "czdecomp").report
    second = run_suite(config, "czdecomp").report
    assert first.without_timings() == second.without_timings()


def test_suite_restores_global_settings() -> None:
    before = get_tolerances()
    config = small_config(regression=False)
    config = config.model_copy(
        update={"tolerances": config.tolerances.model_copy(update={"rank": 1e-7})}
    )
    run_suite(config, "czdecomp")
    assert get_tolerances() == before


def test_maxnorm_suite_passes() -> None:
    config = small_config(grid=GridConfig(d=1, k_min=0, k_max=3, n=2))
    run = run_suite(config, "maxnorm")
    report = run.report

    assert report.passed, report.failed()
    names = names_of(run)
    assert "maxnorm/counterexample/optimum" in names
    assert "maxnorm/scalar/scalar_reduction_p1" in names
    objective = next(
        c for c in report.checks if c.name == "maxnorm/counterexample/optimum"
    ).detail["objective"]
    assert objective == pytest.approx(16.0, abs=1e-4)

    frame = run.collector.get_table_dataframe("maxnorm")
    assert set(frame["family"]) == {"martingale", "lacunary", "averages"}
    assert np.all(frame["gap"] >= 0.0)


def small_family() -> MaximalFamily:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    rng = np.random.default_rng(3)
    fields = []
    for _ in range(3):
        a = rng.standard_normal((grid.num_cells, 2, 2))
        fields.append(OperatorField(grid, 1e-3 * (a + np.swapaxes(a, 1, 2))))
    return MaximalFamily.from_fields(fields)


def test_gap_check_accepts_solver_output_at_small_scale() -> None:
    family = small_family()
    tolerances = ToleranceConfig()
    for p in (1.0, 2.0):
        cert = strong_max_norm(family, p, method="barrier", settings=tolerances.barrier())
        assert gap_check(cert, family, tolerances.gap).holds


def test_gap_check_measures_p2_gaps_in_squared_units() -> None:
    family = small_family()
    a = np.zeros((family.num_cells, 2, 2), dtype=np.complex128)

    squared = MajorantCertificate(a=a, p=2.0, objective=1e-3, slack=0.0, dual_bound=0.0)
    assert gap_check(squared, family, 1e-6).holds

    linear = MajorantCertificate(a=a, p=1.0, objective=1e-3, slack=0.0, dual_bound=0.0)
    assert not gap_check(linear, family, 1e-6).holds


def test_field_family_members_share_the_grid() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    f = OperatorField(grid, np.tile(np.array([[2.0, 1.0], [1.0, 2.0]]), (grid.num_cells, 1, 1)))
    assert len(field_family(f, "martingale")) == len(list(grid.levels()))
    with pytest.raises(ValueError):
        field_family(f, "lacunary")
    with pytest.raises(ValueError):
        field_family(f, "everything")
    assert "truncated" in FAMILIES


def test_weak11_suite_records_sweeps() -> None:
    config = small_config(
        grid=GridConfig(d=1, k_min=0, k_max=3, n=2),
        regression=False,
        lambda_sweep=SweepConfig(start=1.5, stop=15.0, num=2),
    )
    run = run_suite(config, "weak11")
    names = names_of(run)

    assert "weak11/random-000/telescoping" in names
    assert any(name.startswith("weak11/random-000/lam1/") for name in names)
    assert run.collector.num_rows("weak11") == 2
    soft = {c.name for c in run.report.checks if not c.hard}
    assert "weak11/random-000/refinement_sup_ratio" in soft
    telescoping = next(c for c in run.report.checks if c.name.endswith("/telescoping"))
    assert telescoping.holds


def test_cotlar_suite_compares_two_grids() -> None:
    config = small_config(grid=GridConfig(d=1, k_min=0, k_max=3, n=2), regression=False)
    run = run_suite(config, "cotlar")
    frame = run.collector.get_table_dataframe("cotlar")
    assert frame["k_max"].tolist() == [3, 4]
    assert "cotlar/random-000/cotlar_ratio" in names_of(run)


def test_rough_suite_fits_the_hilbert_decay() -> None:
    run = run_suite(small_config(regression=False), "rough")
    decay = next(c for c in run.report.checks if c.name == "rough/hilbert/decay_exponent")
    assert decay.holds
    assert decay.detail["exponent"] == pytest.approx(1.0, rel=0.15)
    assert run.collector.num_rows("rough_moduli") == 8
    assert run.collector.get_table_dataframe("rough_dini")["symbol"].tolist() == [
        "cos",
        "sign",
        "sawtooth",
    ]


def test_scalar_oracle_matches_decomposition() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=5)
    values = np.random.default_rng(8).exponential(1.0, grid.num_cells) ** 3
    f = OperatorField.scalar(grid, values, n=2)
    assert is_scalar_embedding(f)

    lam = 3.0 * coarse_top(f)
    good, bad = scalar_oracle(grid, values, lam)
    dec = decompose(f, lam)
    assert np.allclose(np.real(dec.g.values[:, 1, 1]), good, atol=1e-12)
    assert set(dec.bd) == set(bad)


def test_sweep_is_relative_to_the_coarse_average() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    f = OperatorField.constant(grid, np.diag([2.0, 1.0]))
    assert coarse_top(f) == pytest.approx(2.0)
    levels = sweep_levels(small_config(), f)
    assert levels == pytest.approx([3.0, 30.0, 300.0])
    assert not is_scalar_embedding(f)
