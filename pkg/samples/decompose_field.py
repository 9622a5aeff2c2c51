#!/usr/bin/env python3

"""
samples/decompose_field.py

Decompose one random positive field at a few levels and print which of the
decomposition's properties held.

Run it from the repository root after installing nccz.
"""

from nccz.config import ExperimentConfig, GridConfig
from nccz.corpus import generate_corpus
from nccz.decomposition import decompose, validate
from nccz.suites import coarse_top

config = ExperimentConfig(seed=42, grid=GridConfig(d=1, k_max=6, n=3), corpus_size=1)
member = generate_corpus(config.model_copy(update={"regression": False}))[0]
f = member.field

top = coarse_top(f)
for factor in (2.0, 20.0, 200.0):
    lam = factor * top
    dec = decompose(f, lam)
    report = validate(dec, f)
    status = "ok" if report.passed else f"failed: {', '.join(report.failed())}"
    print(f"lambda = {lam:10.4f}  stopping levels = {dec.levels}  {status}")
    for name, check in report.checks.items():
        print(f"    {name:20s} {check.lhs: .3e} <= {check.rhs: .3e}")
