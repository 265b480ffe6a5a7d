"""
Energy windows below a threshold, inverse band functions and current bounds.

For a state spectrally localized in band n and energy window
I = (b_plus Lambda_n - delta_2, b_plus Lambda_n - delta_1), the normalized
current lies between the inf and sup of E_n' over E_n^{-1}(I).  This module
computes those two numbers and the delta-scaling of E_n'(k(delta)).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import AccuracyError, DomainError, UnsupportedProfileError
from .fiber import band_point
from .field import Constant, landau_level, thresholds
from .sweep import format_float, worker_count

__all__ = [
    "TRANSPORT_CSV_HEADER",
    "EnergyWindow",
    "CurrentBounds",
    "KDeltaPoint",
    "ScalingPoint",
    "ScalingFit",
    "k_of_energy",
    "k_delta_asymptotic_check",
    "current_bounds",
    "current_scaling",
    "scaling_fit",
    "validate_deltas",
    "scaling_csv",
]

TRANSPORT_CSV_HEADER = ("delta", "k_delta", "slope", "model_regressor")
ENERGY_TOL = 1e-10


@dataclass(frozen=True)
class EnergyWindow:
    """I = (lower, upper) = (b_plus Lambda_n - delta_2, b_plus Lambda_n - delta_1)."""

    n: int
    delta_1: float
    delta_2: float
    lower: float
    upper: float

    @classmethod
    def build(cls, profile, n, delta_1, delta_2):
        lam = landau_level(n)
        if not 0 < delta_1 < delta_2:
            raise DomainError(f"need 0 < delta_1 < delta_2, got {delta_1}, {delta_2}")
        top = profile.b_plus * lam
        lower, upper = top - delta_2, top - delta_1
        if not lower > profile.b_minus * lam:
            raise DomainError(
                f"window ({lower}, {upper}) leaves the band range "
                f"({profile.b_minus * lam}, {top})"
            )
        inside = [e for e in thresholds(profile, n + 1) if lower <= e <= upper]
        if inside:
            raise DomainError(f"window ({lower}, {upper}) contains thresholds {inside}")
        return cls(int(n), float(delta_1), float(delta_2), lower, upper)


@dataclass(frozen=True)
class CurrentBounds:
    window: EnergyWindow
    inf_slope: float
    sup_slope: float
    k_low: float
    k_high: float
    samples: int


@dataclass(frozen=True)
class KDeltaPoint:
    delta: float
    k: float
    ratio: float


@dataclass(frozen=True)
class ScalingPoint:
    delta: float
    k_delta: float
    slope: float
    model_regressor: float


@dataclass(frozen=True)
class ScalingFit:
    model: str
    exponent: float
    intercept: float
    residual: float


def _gap(profile, n, k):
    return band_point(profile, k, n).gap


def _bracket(f, k0, step):
    """(lo, hi) with f(lo) < 0 <= f(hi), by geometric expansion from k0."""
    f0 = f(k0)
    if f0 == 0:
        return k0, k0
    direction = 1.0 if f0 < 0 else -1.0
    prev, fprev = k0, f0
    for _ in range(80):
        k = prev + direction * step
        fk = f(k)
        if (fk < 0) != (fprev < 0) or fk == 0:
            return (prev, k) if direction > 0 else (k, prev)
        prev, fprev = k, fk
        step *= 2.0
    raise AccuracyError("could not bracket the preimage of the energy")


def k_of_energy(profile, n, energy, tol=ENERGY_TOL):
    """Unique k with E_n(k) = energy, for energy strictly inside the band range."""
    lam = landau_level(n)
    lo_e, hi_e = profile.b_minus * lam, profile.b_plus * lam
    if isinstance(profile, Constant) or not lo_e < energy < hi_e:
        raise DomainError(f"energy {energy} outside the band range ({lo_e}, {hi_e})")
    target = energy - hi_e  # the gap to hit, negative
    f = lambda k: _gap(profile, n, k) - target
    k0 = profile.a_inf if profile.is_flat else 0.0
    lo, hi = _bracket(f, k0, max(1.0, math.sqrt(profile.b_plus)))
    if lo == hi:
        return lo
    k = brentq(f, lo, hi, xtol=1e-13 * max(1.0, abs(lo)), rtol=4 * np.finfo(float).eps,
               maxiter=200)
    miss = abs(f(k))
    if miss > tol:
        raise AccuracyError(f"|E_n(k) - energy| = {miss:.2e} at k={k} exceeds {tol:.0e}")
    return float(k)


def k_delta_asymptotic_check(profile, n, deltas):
    """(k(delta) - a_inf) / sqrt(b_plus |log delta|) for each delta."""
    if not profile.is_flat:
        raise UnsupportedProfileError(f"k(delta) law needs a flat-type profile, not {profile.kind}")
    top = profile.b_plus * landau_level(n)
    out = []
    for d in deltas:
        k = k_of_energy(profile, n, top - d)
        ratio = (k - profile.a_inf) / math.sqrt(profile.b_plus * abs(math.log(d)))
        out.append(KDeltaPoint(float(d), k, ratio))
    return out


def _slopes(profile, n, ks, workers):
    if workers == 1 or len(ks) < 2:
        return [band_point(profile, k, n).E_prime for k in ks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: band_point(profile, k, n).E_prime, ks))


def current_bounds(profile, window, rel_tol=0.01, max_levels=6, workers=None):
    """inf/sup of E_n' over E_n^{-1}(I), refined until both settle to ``rel_tol``.

    Starts from 5 equispaced samples of [k_low, k_high] and halves the
    spacing until min and max change by less than ``rel_tol``.
    """
    workers = worker_count() if workers is None else max(1, int(workers))
    n = window.n
    k_low = k_of_energy(profile, n, window.lower)
    k_high = k_of_energy(profile, n, window.upper)
    ks = list(np.linspace(k_low, k_high, 5))
    slopes = _slopes(profile, n, ks, workers)
    lo, hi = min(slopes), max(slopes)
    for _ in range(max_levels):
        mids = [0.5 * (a + b) for a, b in zip(ks, ks[1:])]
        new = _slopes(profile, n, mids, workers)
        merged = sorted(zip(ks + mids, slopes + new))
        ks = [k for k, _ in merged]
        slopes = [s for _, s in merged]
        new_lo, new_hi = min(slopes), max(slopes)
        settled = (abs(new_lo - lo) <= rel_tol * abs(new_lo)
                   and abs(new_hi - hi) <= rel_tol * abs(new_hi))
        lo, hi = new_lo, new_hi
        if settled:
            break
    return CurrentBounds(window, float(lo), float(hi), k_low, k_high, len(ks))


def _model_for(profile):
    return "flat" if profile.is_flat else "power"


def _regressor(model, delta):
    if model == "flat":
        return delta * math.sqrt(abs(math.log(delta)))
    return delta


def current_scaling(profile, n, deltas, model=None):
    """(delta, k(delta), E_n'(k(delta)), regressor) rows, sorted by delta."""
    if isinstance(profile, Constant):
        raise UnsupportedProfileError("a constant field has no band range to invert")
    model = model or _model_for(profile)
    if model not in ("flat", "power"):
        raise DomainError(f"unknown scaling model {model!r}")
    top = profile.b_plus * landau_level(n)
    rows = []
    for d in sorted(float(x) for x in deltas):
        k = k_of_energy(profile, n, top - d)
        slope = band_point(profile, k, n).E_prime
        rows.append(ScalingPoint(d, k, slope, _regressor(model, d)))
    return rows


def validate_deltas(deltas):
    """Raise :class:`DomainError` unless deltas suit a scaling fit.

    Needs >= 4 values in (0, 1) spanning >= 3 decades.
    """
    deltas = np.asarray(list(deltas), dtype=float)
    if deltas.size < 4:
        raise DomainError(f"scaling fit needs at least 4 deltas, got {deltas.size}")
    if np.any(deltas <= 0) or np.any(deltas >= 1):
        raise DomainError("deltas must lie in (0, 1)")
    if math.log10(deltas.max() / deltas.min()) < 3 - 1e-9:
        raise DomainError("deltas must span at least 3 decades")
    return deltas


def scaling_fit(points, model):
    """Least-squares exponent of slope against the model regressor.

    ``points`` are (delta, slope) pairs or :class:`ScalingPoint` rows.  The
    regressor is delta sqrt|log delta| for ``model='flat'`` and delta for
    ``model='power'``.  Needs >= 4 points spanning >= 3 decades in delta.
    """
    if model not in ("flat", "power"):
        raise DomainError(f"unknown scaling model {model!r}")
    pairs = [(p.delta, p.slope) if isinstance(p, ScalingPoint) else (float(p[0]), float(p[1]))
             for p in points]
    deltas = validate_deltas([d for d, _ in pairs])
    slopes = np.array([s for _, s in pairs])
    if np.any(slopes <= 0):
        raise DomainError("slopes must be positive for a log fit")
    x = np.log([_regressor(model, d) for d in deltas])
    y = np.log(slopes)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return ScalingFit(model, float(coef[0]), float(coef[1]), float(np.linalg.norm(A @ coef - y)))


def scaling_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRANSPORT_CSV_HEADER)
    for r in rows:
        writer.writerow([format_float(r.delta), format_float(r.k_delta),
                         format_float(r.slope), format_float(r.model_regressor)])
    return buf.getvalue()
