#!/usr/bin/env python3

"""
samples/weak_certificate.py

Build the weak type (1, 1) certificate of the maximal truncated Hilbert
transform for one field and write the field and the summary to disk.
"""

import pathlib

import numpy as np

from nccz.certificates import weak11_certificate
from nccz.core.dyadic import DyadicGrid, OperatorField
from nccz.exporter import write_json
from nccz.kernels import resolve_kernel
from nccz.loaders import write_field
from nccz.operators import SingularIntegralOperator

out_dir = pathlib.Path("weak_certificate_output")

grid = DyadicGrid(d=1, k_min=0, k_max=5)
x = grid.midpoints[:, 0]
rotation = np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
left = rotation @ np.diag([1.0, 0.0]) @ rotation.T
right = np.diag([1.0, 0.0])
profile = 1.0 / (0.05 + np.abs(x - 0.5))
values = np.where((x < 0.5)[:, None, None], left, right) * profile[:, None, None]
f = OperatorField(grid, values)

op = SingularIntegralOperator(resolve_kernel("hilbert"), grid)
for lam in (10.0, 40.0, 160.0):
    summary = weak11_certificate(op, f, lam).summary
    print(
        f"lambda = {lam:6.1f}  phi(1 - e) lambda / |f|_1 = {summary.deficit_ratio:.3f}"
        f"  sup |e T_eps f e| / lambda = {summary.sup_ratio:.3f}"
        f"  {'ok' if summary.passed else summary.failed()}"
    )

out_dir.mkdir(parents=True, exist_ok=True)
write_field(f, out_dir / "field.ndjson")
write_json(summary.model_dump(), out_dir / "summary.json")
