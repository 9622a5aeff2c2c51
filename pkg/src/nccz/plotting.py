"""
nccz/plotting.py

CSV emission for collected tables and optional SVG line plots. matplotlib
is imported lazily and only when SVG output is requested.
"""
from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

from nccz.data_collection import DataCollector
from nccz.exporter import ExportError, write_tables

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlotSpec:
    """
    One SVG drawn from a table

    Attributes
    ----------
    table: str
        The source table
    x: str
        Column on the horizontal axis
    ys: Sequence[str]
        Columns drawn against x
    group: str, optional
        Column splitting the rows into one line per value
    log_x: bool
        Logarithmic horizontal axis
    log_y: bool
        Logarithmic vertical axis
    """

    table: str
    x: str
    ys: Sequence[str] = field(default_factory=tuple)
    group: Optional[str] = None
    log_x: bool = False
    log_y: bool = False


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    return plt


def draw_svg(
    collector: DataCollector, spec: PlotSpec, out_dir: Union[str, pathlib.Path]
) -> Optional[pathlib.Path]:
    """Draw one plot; returns None if matplotlib is missing or the table is empty"""
    plt = _pyplot()
    if plt is None:
        logger.warning("matplotlib is not installed; skipping %s.svg", spec.table)
        return None

    frame = collector.get_table_dataframe(spec.table)
    if frame.empty:
        return None

    if spec.group is None:
        groups = [(None, frame)]
    else:
        groups = list(frame.groupby(spec.group, sort=False))

    fig = plt.figure()
    ax = fig.add_subplot(1, 1, 1)
    for name, rows in groups:
        for column in spec.ys:
            label = column if name is None else f"{name}: {column}"
            ax.plot(rows[spec.x], rows[column], marker="o", label=label)

    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_title(spec.table)
    if len(groups) * len(spec.ys) <= 12:
        ax.legend(fontsize="small")

    path = pathlib.Path(out_dir) / f"{spec.table}.svg"
    try:
        fig.savefig(path, format="svg", bbox_inches="tight")
    except OSError as err:
        raise ExportError(path, err.strerror or str(err))
    finally:
        plt.close(fig)
    return path


def emit_plots(
    collector: DataCollector,
    out_dir: Union[str, pathlib.Path],
    specs: Sequence[PlotSpec] = (),
    svg: bool = False,
) -> List[pathlib.Path]:
    """Write every table as CSV, then the requested SVG plots"""
    written = write_tables(collector, out_dir)
    if not svg:
        return written

    for spec in specs:
        if spec.table not in collector.tables:
            continue
        path = draw_svg(collector, spec, out_dir)
        if path is not None:
            written.append(path)
    return written
