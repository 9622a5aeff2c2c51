import json

import numpy as np
import pandas as pd
import pytest

from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.core.serializable import to_jsonable
from nccz.data_collection import SCHEMA_VERSION, DataCollector
from nccz.decomposition import decompose
from nccz.exporter import REPORT_FILE, export_to_json, schema_line, write_report, write_table
from nccz.plotting import PlotSpec, emit_plots
from nccz.reports import CertifyReport, CheckResult, PropertyCheck, RunReport, Weak11Summary


@pytest.fixture
def collector() -> DataCollector:
    collector = DataCollector({"sweep": ("member", "lam", "ratio")})
    collector.add_table_row("sweep", {"member": "a", "lam": 1.5, "ratio": 0.25})
    collector.add_table_row("sweep", {"member": "a", "lam": 15.0, "ratio": 0.125, "extra": 1})
    return collector


def test_table_rows(collector) -> None:
    assert collector.num_rows("sweep") == 2
    frame = collector.get_table_dataframe("sweep")
    assert list(frame.columns) == ["member", "lam", "ratio"]
    assert frame["ratio"].tolist() == [0.25, 0.125]

    with pytest.raises(KeyError):
        collector.add_table_row("missing", {})
    with pytest.raises(ValueError):
        collector.add_table_row("sweep", {"member": "b"})
    with pytest.raises(ValueError):
        collector.create_new_table("twice", ("a", "a"))


def test_csv_starts_with_the_schema_line(tmp_path, collector) -> None:
    collector.descriptions["sweep"] = "a test sweep"
    path = write_table(collector, "sweep", tmp_path)

    lines = path.read_text().splitlines()
    assert lines[0] == schema_line("sweep", "a test sweep")
    assert lines[0].startswith("# nccz-table schema=v1 table=sweep")
    assert lines[1] == "member,lam,ratio"

    frame = pd.read_csv(path, comment="#")
    assert frame["lam"].tolist() == [1.5, 15.0]


def test_emit_plots_without_svg_writes_one_csv_per_table(tmp_path, collector) -> None:
    collector.create_new_table("empty", ("x",))
    written = emit_plots(collector, tmp_path, [PlotSpec("sweep", "lam", ("ratio",))], svg=False)
    assert sorted(p.name for p in written) == ["empty.csv", "sweep.csv"]


def test_report_json(tmp_path) -> None:
    report = RunReport(
        suite="czdecomp",
        seed=1,
        version="0.1.0",
        checks=[
            CheckResult(name="hard", holds=True, value=0.0, bound=1.0),
            CheckResult(name="soft", holds=False, value=2.0, bound=1.0, hard=False),
        ],
        timings={"corpus": 0.5},
    )
    assert report.passed
    assert report.failed() == []
    assert report.failed(hard_only=False) == ["soft"]
    assert "timings" not in report.without_timings()

    path = write_report(report, tmp_path / "nested")
    assert path.name == REPORT_FILE
    data = json.loads(path.read_text())
    assert data["suite"] == "czdecomp"
    assert data["schema_version"] == SCHEMA_VERSION
    assert [c["name"] for c in data["checks"]] == ["hard", "soft"]
    assert RunReport.model_validate(data) == report


def test_export_to_json_handles_numpy_values() -> None:
    grid = DyadicGrid(d=1, k_min=0, k_max=3)
    values = np.linspace(0.5, 8.0, grid.num_cells)
    dec = decompose(OperatorField.scalar(grid, values, n=2), 6.0)

    data = json.loads(export_to_json(dec))
    assert data["lambda"] == 6.0
    assert data["cuculescu"]["m_lambda"] == dec.family.m_lambda
    assert to_jsonable({"z": np.complex128(1.0 - 2.0j), "a": np.arange(2)}) == {
        "z": [1.0, -2.0],
        "a": [0, 1],
    }


def test_certify_report_names_failures_by_level() -> None:
    good = Weak11Summary(
        lam=2.0, kernel="hilbert", f_l1=1.0, checks={"trace": PropertyCheck.at_most(0.5, 1.0)}
    )
    bad = Weak11Summary(
        lam=8.0, kernel="hilbert", f_l1=1.0, checks={"trace": PropertyCheck.at_most(3.0, 1.0)}
    )
    report = CertifyReport(
        version="0.1.0",
        field="f.ndjson",
        kernel="hilbert",
        lambdas=[2.0, 8.0],
        summaries=[good, bad],
    )
    assert report.schema_version == SCHEMA_VERSION
    assert not report.passed
    assert report.failed() == ["lam=8/trace"]
    assert CertifyReport(version="0.1.0", field="f.ndjson", kernel="hilbert").passed
