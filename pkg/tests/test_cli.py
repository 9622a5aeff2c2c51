import io
import json
import math
import pathlib
import sys

import numpy as np
import pandas as pd
import pytest

from nccz import __version__
from nccz.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, get_args, load_config, run
from nccz.config import SweepConfig, ToleranceConfig
from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.kernels import resolve_kernel
from nccz.loaders import read_field, write_field
from nccz.maximal import strong_max_norm, weak_sweep
from nccz.operators import SingularIntegralOperator, TruncationLadder, truncated_czo
from nccz.reports import CertifyReport
from nccz.suites import martingale_family

FAST = ["--corpus-size", "1", "--sweep", "1.5:15:2"]


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("NCCZ_OUT_DIR", raising=False)
    return tmp_path


@pytest.fixture
def field_file(tmp_path):
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    x = grid.midpoints[:, 0]
    f = OperatorField(grid, (1.0 + x)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]]))
    path = tmp_path / "f.ndjson"
    write_field(f, path)
    return path


def test_version(capsys) -> None:
    assert run(["--version"]) == EXIT_PASS
    assert capsys.readouterr().out.strip() == __version__


def test_project_metadata_names_the_maintainers() -> None:
    root = pathlib.Path(__file__).resolve().parents[1]
    manifest = (root / "pyproject.toml").read_text()
    assert '{ name="The nccz maintainers" }' in manifest
    docs = (root / "docs" / "source" / "conf.py").read_text()
    assert 'author = "The nccz maintainers"' in docs


def test_flags_override_config_file(tmp_path) -> None:
    path = tmp_path / "run.yaml"
    path.write_text("seed: 3\nsuite: rough\ngrid:\n  k_max: 4\n")

    config = load_config(get_args(["--config", str(path), "--seed", "9", "maxnorm"]))
    assert config.seed == 9
    assert config.suite == "maxnorm"
    assert config.grid.k_max == 4
    assert config.path == str(path)

    config = load_config(get_args(["--config", str(path), "--kernel", "one-sided"]))
    assert config.suite == "rough"
    assert config.kernel.name == "one-sided"


def test_local_config_is_picked_up(isolated_cwd) -> None:
    (isolated_cwd / "nccz.config.json").write_text(json.dumps({"seed": 21}))
    assert load_config(get_args([])).seed == 21


def test_suite_run_writes_artifacts(tmp_path) -> None:
    out = tmp_path / "out"
    code = run(["--suite", "czdecomp", "--out-dir", str(out), "--seed", "4", "-q"] + FAST)
    assert code == EXIT_PASS

    target = out / "nccz_czdecomp_4"
    report = json.loads((target / "report.json").read_text())
    assert report["suite"] == "czdecomp"
    assert report["seed"] == 4
    assert report["checks"]

    first = (target / "czdecomp.csv").read_text().splitlines()[0]
    assert first.startswith("# nccz-table schema=v1 table=czdecomp")
    frame = pd.read_csv(target / "czdecomp.csv", comment="#")
    assert "zeta_deficit" in frame.columns


def test_output_root_from_environment(tmp_path, monkeypatch) -> None:
    monkeypatch.setenv("NCCZ_OUT_DIR", str(tmp_path / "env"))
    assert run(["-q", "czdecomp"] + FAST) == EXIT_PASS
    assert (tmp_path / "env" / "nccz_czdecomp_1" / "report.json").exists()


def test_empty_corpus_exits_zero(tmp_path) -> None:
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"corpus_size": 0, "regression": False, "suite": "weak11"}))
    assert run(["-q", "--config", str(path), "--out-dir", str(tmp_path)]) == EXIT_PASS
    report = json.loads((tmp_path / "nccz_weak11_1" / "report.json").read_text())
    assert report["checks"] == []


def test_usage_errors(tmp_path) -> None:
    bad = tmp_path / "run.toml"
    bad.write_text("seed = 1")
    assert run(["-q", "--config", str(bad)]) == EXIT_USAGE
    assert run(["-q", "--threads", "0"]) == EXIT_USAGE
    assert run(["-q", "--sweep", "1:2"]) == EXIT_USAGE

    with pytest.raises(SystemExit) as info:
        run(["--suite", "everything"])
    assert info.value.code == EXIT_USAGE


def test_apply_writes_a_field(tmp_path, field_file) -> None:
    out = tmp_path / "tf.ndjson"
    assert run(["-q", "apply", str(field_file), "--eps", "0.25", "-o", str(out)]) == EXIT_PASS
    result = read_field(out)
    assert result.grid == DyadicGrid(d=1, k_min=0, k_max=3)
    assert result.n == 2
    assert np.max(np.abs(result.values)) > 0.0


def test_apply_rejects_unresolvable_radius(field_file) -> None:
    assert run(["-q", "apply", str(field_file), "--eps", "0.01"]) == EXIT_USAGE
    assert run(["-q", "apply", "missing.ndjson", "--eps", "0.25"]) == EXIT_USAGE


def test_single_field_verbs_parse() -> None:
    args = get_args(["ladder", "--kernel", "hilbert", "--J", "4"])
    assert (args.command, args.kernel, args.top, args.field) == ("ladder", "hilbert", 4, None)

    args = get_args(["maxnorm", "--p", "2"])
    assert args.p == 2.0
    args = get_args(["maxnorm", "f.ndjson", "--p", "inf", "--family", "lacunary"])
    assert math.isinf(args.p)
    assert args.family == "lacunary"

    args = get_args(["weaknorm", "--lambda-sweep", "0.1:10:5"])
    assert args.lambda_sweep == "0.1:10:5"
    assert args.p == 1.0

    args = get_args(["rotate", "f.ndjson", "--omega", "cos"])
    assert args.omega == "cos"
    assert args.eps is None

    args = get_args(["certify", "--kernel", "hilbert", "--lambda-sweep", "1:10:3", "--out", "r"])
    assert (args.kernel, args.output, args.lam) == ("hilbert", "r", None)


@pytest.mark.parametrize(
    "argv",
    [
        ["maxnorm", "--p", "3"],
        ["certify", "f.ndjson"],
        ["certify", "f.ndjson", "--lam", "1", "--lambda-sweep", "1:2:2"],
        ["rotate", "f.ndjson"],
        ["weaknorm", "f.ndjson"],
    ],
)
def test_single_field_verbs_reject_bad_arguments(argv) -> None:
    with pytest.raises(SystemExit) as info:
        get_args(argv)
    assert info.value.code == EXIT_USAGE


def test_ladder_writes_lacunary_fields(tmp_path, field_file) -> None:
    out = tmp_path / "ladder"
    code = run(["-q", "ladder", str(field_file), "--kernel", "hilbert", "--J", "2", "-o", str(out)])
    assert code == EXIT_PASS

    summary = json.loads((out / "ladder.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["J"] == 2
    assert summary["ladder"]["indices"] == [0, 1, 2]
    assert summary["files"] == ["lacunary_j0.ndjson", "lacunary_j1.ndjson", "lacunary_j2.ndjson"]
    assert max(summary["residuals"]) <= 1e-9

    f = read_field(field_file)
    op = SingularIntegralOperator(
        resolve_kernel("hilbert", d=1), f.grid, TruncationLadder.default(f.grid, 2)
    )
    for j in range(3):
        written = read_field(out / f"lacunary_j{j}.ndjson")
        assert np.allclose(written.values, op.lacunary(f, j).values, atol=1e-12)


def test_ladder_prints_summary_and_rejects_deep_ladders(field_file, capsys) -> None:
    assert run(["-q", "ladder", str(field_file)]) == EXIT_PASS
    summary = json.loads(capsys.readouterr().out)
    assert summary["J"] == 3
    assert len(summary["residuals"]) == 4

    assert run(["-q", "ladder", str(field_file), "--J", "9"]) == EXIT_USAGE


def test_rotate_with_cosine_symbol_is_pi_times_hilbert(tmp_path, field_file) -> None:
    f = read_field(field_file)
    expected = math.pi * truncated_czo(resolve_kernel("hilbert", d=1), f, 0.125).values

    out = tmp_path / "rotated.ndjson"
    code = run(
        ["-q", "rotate", str(field_file), "--omega", "cos", "--eps", "0.125", "-o", str(out)]
    )
    assert code == EXIT_PASS
    assert np.allclose(read_field(out).values, expected, atol=1e-10)

    angles = 2.0 * math.pi * np.arange(8) / 8
    table = tmp_path / "wave.csv"
    table.write_text(
        "angle,value\n" + "\n".join(f"{float(a)!r},{math.cos(a)!r}" for a in angles) + "\n"
    )
    out = tmp_path / "from_table.ndjson"
    code = run(
        ["-q", "rotate", str(field_file), "--omega", str(table), "--eps", "0.125", "-o", str(out)]
    )
    assert code == EXIT_PASS
    assert np.allclose(read_field(out).values, expected, atol=1e-10)


def test_rotate_rejects_even_and_unknown_symbols(field_file) -> None:
    assert run(["-q", "rotate", str(field_file), "--omega", "const"]) == EXIT_USAGE
    assert run(["-q", "rotate", str(field_file), "--omega", "nothing"]) == EXIT_USAGE
    assert run(["-q", "rotate", str(field_file), "--omega", "cos", "--eps", "0"]) == EXIT_USAGE


def test_maxnorm_of_one_field(tmp_path, field_file) -> None:
    f = read_field(field_file)
    family = martingale_family(f)
    expected = strong_max_norm(family, 2.0, settings=ToleranceConfig().barrier())

    out = tmp_path / "norm.json"
    majorant = tmp_path / "majorant.ndjson"
    code = run(
        [
            "-q",
            "maxnorm",
            str(field_file),
            "--p",
            "2",
            "-o",
            str(out),
            "--majorant",
            str(majorant),
        ]
    )
    assert code == EXIT_PASS

    result = json.loads(out.read_text())
    assert result["family"] == "martingale"
    assert result["members"] == len(family)
    assert result["p"] == 2.0
    assert result["objective"] == pytest.approx(expected.objective, rel=1e-9)
    assert result["dual_bound"] <= result["objective"]
    assert np.allclose(read_field(majorant).values, expected.a, atol=1e-12)


def test_maxnorm_at_infinity_is_the_sup_norm(field_file, capsys) -> None:
    f = read_field(field_file)
    assert run(["-q", "maxnorm", str(field_file), "--p", "inf"]) == EXIT_PASS
    result = json.loads(capsys.readouterr().out)
    assert result["p"] == "inf"
    assert result["objective"] == pytest.approx(martingale_family(f).sup_norm(), rel=1e-9)


def test_weaknorm_over_a_sweep(tmp_path, field_file) -> None:
    f = read_field(field_file)
    levels = SweepConfig.parse("0.5:8:5").levels()
    expected = weak_sweep(martingale_family(f), levels)

    out = tmp_path / "weak.json"
    code = run(["-q", "weaknorm", str(field_file), "--lambda-sweep", "0.5:8:5", "-o", str(out)])
    assert code == EXIT_PASS

    result = json.loads(out.read_text())
    assert [point["lambda"] for point in result["points"]] == pytest.approx(levels)
    assert result["value"] == pytest.approx(expected.value, rel=1e-9)
    assert result["value"] == max(point["value"] for point in result["points"])

    assert run(["-q", "weaknorm", str(field_file), "--lambda-sweep", "0:8:5"]) == EXIT_USAGE


def test_field_is_read_from_stdin(field_file, monkeypatch, capsys) -> None:
    monkeypatch.setattr(sys, "stdin", io.StringIO(field_file.read_text()))
    assert run(["-q", "weaknorm", "--lambda-sweep", "1:4:2"]) == EXIT_PASS
    result = json.loads(capsys.readouterr().out)
    assert result["field"] == "<stdin>"
    assert len(result["points"]) == 2


def test_certify_writes_a_versioned_report(tmp_path, field_file) -> None:
    out = tmp_path / "report.json"
    code = run(["-q", "certify", str(field_file), "--lam", "10.0", "-o", str(out)])
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    assert report["version"] == __version__
    assert report["kernel"] == "hilbert"
    assert report["lambdas"] == [10.0]
    assert report["summaries"][0]["lam"] == 10.0
    holds = all(c["holds"] for c in report["summaries"][0]["checks"].values())
    assert code == (EXIT_PASS if holds else EXIT_FAIL)

    assert run(["-q", "certify", str(field_file), "--lam", "-1"]) == EXIT_USAGE


def test_certify_over_a_lambda_sweep(tmp_path, field_file) -> None:
    out = tmp_path / "reports" / "sweep.json"
    code = run(
        [
            "-q",
            "certify",
            str(field_file),
            "--kernel",
            "hilbert",
            "--lambda-sweep",
            "2:20:3",
            "--out",
            str(out),
        ]
    )
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    assert report["field"] == str(field_file)
    assert report["lambdas"] == pytest.approx([2.0, 2.0 * math.sqrt(10.0), 20.0])
    assert [s["lam"] for s in report["summaries"]] == pytest.approx(report["lambdas"])
    assert all(s["kernel"] == "hilbert" for s in report["summaries"])

    holds = all(c["holds"] for s in report["summaries"] for c in s["checks"].values())
    assert code == (EXIT_PASS if holds else EXIT_FAIL)
    assert CertifyReport(**report).passed == holds

    assert run(["-q", "certify", str(field_file), "--lambda-sweep", "0:2:2"]) == EXIT_USAGE
