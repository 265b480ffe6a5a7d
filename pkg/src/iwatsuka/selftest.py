"""
Oracle suite behind ``iwatsuka selftest``.

Each check compares a production route with an independent one.  ``rtol``
is the bisection tolerance handed to the eigensolver; raising it is the
fault-injection hook used to prove that the suite can fail.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .asymptotics import N_HERMITE_MAX, hermite_basis, hermite_function
from .fiber import assemble, band_point, band_value, choose_window, Grid
from .field import Constant, FlatContact, InfiniteContact, PiecewiseConstant, PowerTail
from .tridiag import bisect_eigenvalues, dense_eigenvalues

__all__ = ["CheckResult", "run_selftest", "CHECKS"]

DEFAULT_RTOL = 1e-14
FAULT_RTOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _sample_profiles():
    return [
        FlatContact(0.5, 1.0, p=1),
        FlatContact(0.5, 1.0, p=2, c=2.0),
        PowerTail(0.5, 1.0, M=2.0),
        InfiniteContact(0.5, 1.0, c=1.0),
        PiecewiseConstant(1.0, 2.0),
    ]


def check_dense_oracle(rtol):
    rng = np.random.default_rng(11)
    profiles = _sample_profiles()
    worst = 0.0
    for i in range(10):
        prof = profiles[i % len(profiles)]
        k = float(rng.uniform(-3, 3))
        N = int(rng.integers(64, 201))
        grid = Grid(-6.0 + k, 6.0 + k, N)
        d, e = assemble(prof, k, grid)
        m = 4
        fast = bisect_eigenvalues(d, e, m, rtol=rtol)
        dense = dense_eigenvalues(d, e)[:m]
        worst = max(worst, float(np.max(np.abs(fast - dense))))
    return worst <= 1e-10, f"max |bisection - dense| = {worst:.2e} (tol 1e-10)"


def check_hermite(rtol):
    t = np.linspace(-6, 6, 241)
    nodes, weights = np.polynomial.hermite.hermgauss(40)
    worst_eig = worst_gram = worst_eval = 0.0
    gram = np.empty((N_HERMITE_MAX, N_HERMITE_MAX))
    polys = []
    for n in range(1, N_HERMITE_MAX + 1):
        c = np.array(hermite_basis(n).coeffs)
        polys.append(c)
        # -Psi'' + t^2 Psi = (2n-1) Psi  <=>  -P'' + 2 t P' + P = (2n-1) P
        lhs = -P.polyval(t, P.polyder(c, 2)) + 2 * t * P.polyval(t, P.polyder(c)) + P.polyval(t, c)
        resid = (lhs - (2 * n - 1) * P.polyval(t, c)) * np.exp(-0.5 * t * t)
        worst_eig = max(worst_eig, float(np.abs(resid).max()))
        direct = P.polyval(t, c) * np.exp(-0.5 * t * t)
        worst_eval = max(worst_eval, float(np.abs(direct - hermite_function(n, t)).max()))
    for i, ci in enumerate(polys):
        for j, cj in enumerate(polys):
            gram[i, j] = np.sum(weights * P.polyval(nodes, ci) * P.polyval(nodes, cj))
    worst_gram = float(np.abs(gram - np.eye(N_HERMITE_MAX)).max())
    ok = worst_eig <= 1e-9 and worst_gram <= 1e-12 and worst_eval <= 1e-12
    return ok, (f"eigen-relation {worst_eig:.1e}, orthonormality {worst_gram:.1e}, "
                f"recurrence vs coefficients {worst_eval:.1e}")


def check_constant_field(rtol):
    worst = 0.0
    for b0 in (0.5, 1.0, 2.0):
        prof = Constant(b0=b0)
        for k in (-10.0, 0.0, 7.0):
            for n in (1, 3):
                worst = max(worst, abs(band_value(prof, k, n, rtol=rtol).value - b0 * (2 * n - 1)))
    return worst <= 1e-8, f"max |E_n - b0 Lambda_n| = {worst:.2e} (tol 1e-8)"


def check_feynman_hellmann(rtol):
    cases = [
        (FlatContact(0.5, 1.0, p=1), 1, -0.8),
        (FlatContact(0.5, 1.0, p=2, c=2.0), 2, 1.1),
        (PowerTail(0.5, 1.0, M=2.0), 1, 0.3),
        (InfiniteContact(0.5, 1.0, c=1.0), 3, 1.75),
    ]
    delta = 1e-4
    worst = 0.0
    for prof, n, k in cases:
        grid = choose_window(prof, k, n)
        fd = (band_value(prof, k + delta, n, grid=grid, rtol=rtol).value
              - band_value(prof, k - delta, n, grid=grid, rtol=rtol).value) / (2 * delta)
        fh = band_point(prof, k, n, grid=grid, rtol=rtol).E_prime
        worst = max(worst, abs(fh - fd) / abs(fh))
    return worst <= 1e-6, f"max relative |FH - FD| = {worst:.2e} (tol 1e-6)"


CHECKS = (
    ("dense-vs-tridiagonal", check_dense_oracle),
    ("hermite-identities", check_hermite),
    ("constant-field-exactness", check_constant_field),
    ("feynman-hellmann-vs-fd", check_feynman_hellmann),
)


def run_selftest(inject_fault=False):
    """Run every check; returns a list of :class:`CheckResult`."""
    rtol = FAULT_RTOL if inject_fault else DEFAULT_RTOL
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rtol)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
