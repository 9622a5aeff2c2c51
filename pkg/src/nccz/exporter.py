"""
nccz/exporter.py

Writing run artifacts: report.json, one CSV per collected table and the
NDJSON dumps of individual fields.
"""
from __future__ import annotations

import json
import logging
import pathlib
from typing import Any, Dict, List, Optional, Union

from nccz.core.serializable import ISerializable, to_jsonable
from nccz.data_collection import SCHEMA_VERSION, DataCollector
from nccz.reports import RunReport

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"


class ExportError(Exception):
    """Raised when an artifact cannot be written"""

    __slots__ = "message", "path"

    def __init__(self, path: Union[str, pathlib.Path], reason: str) -> None:
        super().__init__()
        self.path: str = str(path)
        self.message: str = f"Could not write {self.path}: {reason}"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(path={})".format(self.__class__.__name__, self.path)


def schema_line(table_name: str, description: str = "") -> str:
    line = f"# nccz-table schema=v{SCHEMA_VERSION} table={table_name}"
    if description:
        line += f" :: {description}"
    return line


def export_to_json(obj: ISerializable, indent: Optional[int] = None) -> str:
    return json.dumps(to_jsonable(obj), indent=indent)


def _ensure_dir(out_dir: Union[str, pathlib.Path]) -> pathlib.Path:
    path = pathlib.Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ExportError(path, err.strerror or str(err))
    return path


def write_table(
    collector: DataCollector, table_name: str, out_dir: Union[str, pathlib.Path]
) -> pathlib.Path:
    """One CSV whose first line names the schema version and the table"""
    path = _ensure_dir(out_dir) / f"{table_name}.csv"
    frame = collector.get_table_dataframe(table_name)
    try:
        with open(path, "w", newline="") as f:
            f.write(schema_line(table_name, collector.descriptions.get(table_name, "")) + "\n")
            frame.to_csv(f, index=False, float_format="%.17g")
    except OSError as err:
        raise ExportError(path, err.strerror or str(err))
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def write_tables(
    collector: DataCollector, out_dir: Union[str, pathlib.Path]
) -> List[pathlib.Path]:
    return [write_table(collector, name, out_dir) for name in collector.table_names()]


def write_report(report: RunReport, out_dir: Union[str, pathlib.Path]) -> pathlib.Path:
    path = _ensure_dir(out_dir) / REPORT_FILE
    try:
        with open(path, "w") as f:
            f.write(report.model_dump_json(indent=2))
    except OSError as err:
        raise ExportError(path, err.strerror or str(err))
    logger.info("Wrote %s", path)
    return path


def write_json(data: Dict[str, Any], path: Union[str, pathlib.Path]) -> pathlib.Path:
    target = pathlib.Path(path)
    _ensure_dir(target.parent)
    try:
        with open(target, "w") as f:
            json.dump(to_jsonable(data), f, indent=2)
    except OSError as err:
        raise ExportError(target, err.strerror or str(err))
    return target
