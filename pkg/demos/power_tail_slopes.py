"""Algebraic approach to b+ Lambda_n when b+ - b(x) decays like x^-M.

For M=2 the fitted log-log slope is close to -2. For M=1 it settles near -0.95
on k in [20, 200], because the turning point carries a log(k) correction.
"""
import numpy as np

from iwatsuka.field import PowerTail
from iwatsuka.sweep import loglog_fit, sweep

ks = np.geomspace(20.0, 200.0, 9)
for M in (1, 2):
    table = sweep(PowerTail(0.5, 1.0, M=M, c=1.0), ks, 2)
    for n in (1, 2):
        fit = loglog_fit(ks, table.column("gap", n))
        print(f"M={M} n={n}: slope {fit.slope:.4f}")
