"""Band gaps below b+ Lambda_n for a field that reaches b+ at a finite point.

The solver's gap is compared with the closed-form leading term and with b+ mu_n,
the first-order perturbation integral. Both ratios approach 1 as k grows.
"""
import numpy as np

from iwatsuka.asymptotics import mu_n
from iwatsuka.field import FlatContact
from iwatsuka.sweep import sweep

profile = FlatContact(0.5, 1.0, p=1, c=1.0, x_inf=0.0)
table = sweep(profile, np.arange(2.0, 4.51, 0.25), 1)

print(f"{'k':>6} {'gap':>12} {'gap/leading':>12} {'gap/(b+ mu)':>12}")
for r in table.band(1):
    if r.ratio is None:
        continue
    chain = r.gap / (profile.b_plus * mu_n(profile, r.k, 1))
    print(f"{r.k:6.2f} {r.gap:12.4e} {r.ratio:12.4f} {chain:12.4f}")
