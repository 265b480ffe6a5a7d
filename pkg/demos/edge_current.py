"""Scaling of the edge-current slope E_n'(k(delta)) as delta -> 0.

A flat contact gives delta sqrt|log delta|; a power tail gives delta^(1 + 1/M).
"""
import numpy as np

from iwatsuka.field import FlatContact, PowerTail
from iwatsuka.transport import current_scaling, scaling_fit

flat = scaling_fit(current_scaling(FlatContact(0.5, 1.0, p=1, c=1.0), 1, np.geomspace(1e-8, 1e-4, 9)), "flat")
print(f"flat contact: exponent {flat.exponent:.4f} (expected 1)")
for M in (1, 2):
    rows = current_scaling(PowerTail(0.5, 1.0, M=M, c=1.0), 1, np.geomspace(1e-5, 1e-2, 7))
    fit = scaling_fit(rows, "power")
    print(f"power tail M={M}: exponent {fit.exponent:.4f} (expected {1 + 1 / M:g})")
