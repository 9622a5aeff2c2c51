"""
nccz/loaders.py

Functions for reading configuration files and operator fields from disk
"""
from __future__ import annotations

import json
import os
import pathlib
from typing import Any, Dict, Iterable, Optional, TextIO, Union

import numpy as np
import yaml

from nccz.config import GridConfig, KernelConfig
from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.core.operator import matrix_from_json, matrix_to_json
from nccz.kernels import KernelSpec, resolve_kernel

LOCAL_CONFIG_NAMES = ("nccz.config.yaml", "nccz.config.yml", "nccz.config.json")


class FieldFormatError(Exception):
    """Raised when an NDJSON field file does not match its header"""

    __slots__ = "message", "path", "line"

    def __init__(self, path: str, line: int, reason: str) -> None:
        super().__init__()
        self.path: str = path
        self.line: int = line
        self.message: str = f"{path}:{line}: {reason}"

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return "{}(path={}, line={})".format(self.__class__.__name__, self.path, self.line)


def load_config_from_path(config_path: Union[str, pathlib.Path]) -> Dict[str, Any]:
    """
    Load the configuration file at the given path

    Parameters
    ----------
    config_path: str
        Path to a JSON or YAML configuration file

    Raises
    ------
    ValueError
        If the suffix is neither .json, .yaml nor .yml
    """
    path = pathlib.Path(os.path.abspath(config_path))
    suffix = path.suffix.lower()

    if suffix not in (".json", ".yaml", ".yml"):
        raise ValueError(f"Attempted to load config from incorrect file type: {path.suffix}.")

    with open(path, "r") as f:
        if suffix == ".json":
            data = json.load(f)
        else:
            data = yaml.safe_load(f)

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Expected a mapping at the top of {path}")
    return data


def try_load_local_config(directory: Optional[str] = None) -> Optional[Dict[str, Any]]:
    """
    Attempt to load a configuration file from a directory, by default the
    current working directory
    """
    root = directory if directory is not None else os.getcwd()

    for name in LOCAL_CONFIG_NAMES:
        path = os.path.join(root, name)
        if os.path.exists(path):
            return load_config_from_path(path)

    return None


def load_kernel(config: KernelConfig, d: int) -> KernelSpec:
    return resolve_kernel(config.name, d, config.params)


def make_grid(config: GridConfig) -> DyadicGrid:
    return DyadicGrid(d=config.d, k_min=config.k_min, k_max=config.k_max)


def _header_of(f: OperatorField) -> Dict[str, int]:
    grid = f.grid
    return {"d": grid.d, "k_min": grid.k_min, "k_max": grid.k_max, "n": f.n}


def dump_field(f: OperatorField, stream: TextIO) -> None:
    """Write a field as NDJSON: a header line, then one record per finest cell"""
    stream.write(json.dumps(_header_of(f)) + "\n")
    for flat, cell in enumerate(f.grid.multi_index):
        record = {"cell": [int(i) for i in cell], "value": matrix_to_json(f.values[flat])}
        stream.write(json.dumps(record) + "\n")


def write_field(f: OperatorField, path: Union[str, pathlib.Path]) -> None:
    with open(path, "w") as stream:
        dump_field(f, stream)


def parse_field(lines: Iterable[str], source: str = "<stream>") -> OperatorField:
    """
    Read an NDJSON field; cells may come in any order but each must appear once

    Raises
    ------
    FieldFormatError
        For a malformed header, unknown or repeated cells, a wrong matrix
        size, or missing cells
    """
    records = ((i + 1, line) for i, line in enumerate(lines) if line.strip())

    try:
        line_no, first = next(records)
    except StopIteration:
        raise FieldFormatError(source, 1, "empty field file")

    try:
        header = json.loads(first)
        grid = DyadicGrid(
            d=int(header["d"]), k_min=int(header["k_min"]), k_max=int(header["k_max"])
        )
        n = int(header["n"])
    except (KeyError, TypeError, ValueError) as err:
        raise FieldFormatError(source, line_no, f"bad header ({err})")

    values = np.zeros((grid.num_cells, n, n), dtype=np.complex128)
    seen = np.zeros(grid.num_cells, dtype=bool)

    for line_no, line in records:
        try:
            record = json.loads(line)
            cell = [int(i) for i in record["cell"]]
            matrix = matrix_from_json(record["value"])
        except (KeyError, TypeError, ValueError) as err:
            raise FieldFormatError(source, line_no, f"bad record ({err})")

        if len(cell) != grid.d or not all(0 <= i < grid.per_axis for i in cell):
            raise FieldFormatError(source, line_no, f"cell {cell} is outside the grid")
        if matrix.shape != (n, n):
            raise FieldFormatError(source, line_no, f"expected a {n}x{n} matrix")

        flat = int(np.ravel_multi_index(tuple(cell), (grid.per_axis,) * grid.d))
        if seen[flat]:
            raise FieldFormatError(source, line_no, f"cell {cell} appears twice")
        seen[flat] = True
        values[flat] = matrix

    if not np.all(seen):
        missing = int(np.sum(~seen))
        raise FieldFormatError(source, line_no, f"{missing} cells have no value")

    return OperatorField(grid, values)


def read_field(path: Union[str, pathlib.Path]) -> OperatorField:
    with open(path, "r") as stream:
        return parse_field(stream, str(path))
