#!/usr/bin/env python3

"""
samples/maximal_norms.py

The smallest example where the maximal norm of a matrix family is not
attained at the obvious candidate. With f = u diag(8, -8) u^T and g a
positive matrix with -g <= f <= g, Tr g = 20, but the best majorant of the
family (f) has trace Tr |f| = 16.
"""

import numpy as np

from nccz.corpus import counterexample_pair
from nccz.maximal import MaximalFamily, strong_max_norm, weak_sweep

f, g = counterexample_pair()
family = MaximalFamily.from_matrices([f])

cert = strong_max_norm(family, 1.0, method="barrier")
print(f"Tr g               = {np.trace(g).real:.6f}")
print(f"Tr |f|             = {np.sum(np.abs(np.linalg.eigvalsh(f))):.6f}")
print(f"barrier optimum    = {cert.objective:.6f}")
print(f"dual lower bound   = {cert.dual_bound:.6f}")
print(f"duality gap        = {cert.gap:.2e}")

sweep = weak_sweep(family, [1.0, 4.0, 7.0])
print(f"weak quasi-norm    <= {sweep.value:.6f}")
