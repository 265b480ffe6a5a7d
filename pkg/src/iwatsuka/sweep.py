"""
Band tables over a k-grid, with monotonicity/limit checks and CSV output.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .asymptotics import predict
from .errors import AccuracyError, DomainError, IwatsukaError
from .fiber import WINDOW_MARGIN, band_points
from .field import format_profile, landau_level

__all__ = [
    "BAND_CSV_HEADER",
    "UNRESOLVED_GAP",
    "N_MAX_SWEEP",
    "BandRow",
    "BandTable",
    "LimitCheck",
    "worker_count",
    "format_float",
    "sweep",
    "check_monotone",
    "limits_check",
    "default_k_grid",
    "loglog_fit",
]

BAND_CSV_HEADER = ("n", "k", "E", "E_prime", "gap", "predicted_gap", "ratio", "err_est", "flags")
UNRESOLVED_GAP = 1e-10
N_MAX_SWEEP = 8


def worker_count():
    """Thread count: ``IWATSUKA_THREADS`` if set, else the CPU count."""
    env = os.environ.get("IWATSUKA_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"IWATSUKA_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"IWATSUKA_THREADS must be a positive integer, got {env!r}")
        return value
    return os.cpu_count() or 1


def format_float(x):
    """Shortest round-trip decimal; empty for None."""
    if x is None:
        return ""
    return repr(float(x))


@dataclass(frozen=True)
class BandRow:
    n: int
    k: float
    E: float
    E_prime: float
    gap: float
    predicted_gap: float | None
    ratio: float | None
    err_est: float
    flags: tuple = ()

    def csv_fields(self):
        return [
            str(self.n), format_float(self.k), format_float(self.E), format_float(self.E_prime),
            format_float(self.gap), format_float(self.predicted_gap), format_float(self.ratio),
            format_float(self.err_est), ";".join(self.flags),
        ]


@dataclass
class BandTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def band(self, n):
        return [r for r in self.rows if r.n == n]

    def column(self, name, n=None):
        rows = self.rows if n is None else self.band(n)
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BAND_CSV_HEADER)
        for r in self.rows:
            writer.writerow(r.csv_fields())
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _rows_at(profile, k, n_max):
    try:
        points = band_points(profile, k, n_max)
    except AccuracyError:
        nan = float("nan")
        return [BandRow(n, float(k), nan, nan, nan, None, None, nan, ("acc_warn",))
                for n in range(1, n_max + 1)]
    rows = []
    for pt in points:
        flags = []
        resolved = abs(pt.gap) >= UNRESOLVED_GAP
        if not resolved:
            flags.append("unresolved")
        if pt.acc_warn:
            flags.append("acc_warn")
        try:
            pred = predict(profile, k, pt.n)
        except IwatsukaError:
            pred = None
        predicted = None if pred is None else pred.predicted_gap
        ratio = None
        if predicted is not None and predicted != 0.0 and resolved:
            ratio = pt.gap / predicted
        rows.append(BandRow(pt.n, pt.k, pt.E, pt.E_prime, pt.gap, predicted, ratio,
                            pt.err_est, tuple(flags)))
    return rows


def sweep(profile, k_values, n_max, workers=None):
    """Bands 1..n_max on every k; one solve per k, rows sorted by (n, k)."""
    k_values = [float(k) for k in k_values]
    if any(b < a for a, b in zip(k_values, k_values[1:])):
        raise DomainError("k_values must be sorted")
    if len(set(k_values)) != len(k_values):
        raise DomainError("k_values must be distinct")
    landau_level(n_max)
    if n_max > N_MAX_SWEEP:
        raise DomainError(f"n_max must be <= {N_MAX_SWEEP}, got {n_max}")
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(k_values) < 2:
        per_k = [_rows_at(profile, k, n_max) for k in k_values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_k = list(pool.map(lambda k: _rows_at(profile, k, n_max), k_values))
    rows = sorted((r for rs in per_k for r in rs), key=lambda r: (r.n, r.k))
    meta = {
        "profile": format_profile(profile),
        "grid_policy": f"Richardson 2h/h/h2, Dirichlet window margin {WINDOW_MARGIN:g}",
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return BandTable(rows, meta)


def check_monotone(table):
    """(n, k_i, k_j) for consecutive rows where E_n drops by more than 2x the errors."""
    out = []
    for n in sorted({r.n for r in table.rows}):
        band = table.band(n)
        for r0, r1 in zip(band, band[1:]):
            if not (math.isfinite(r0.E) and math.isfinite(r1.E)):
                continue
            tol = 2.0 * (r0.err_est + r1.err_est) + 4 * np.finfo(float).eps * abs(r0.E)
            if r1.E < r0.E - tol:
                out.append((n, r0.k, r1.k))
    return out


@dataclass(frozen=True)
class LimitCheck:
    n: int
    side: str
    k: float
    E: float
    limit: float
    deviation: float
    passed: bool


def limits_check(table, tol, profile=None):
    """Compare the extreme-k rows of every band with b_minus/b_plus Lambda_n.

    ``tol`` is relative to the threshold.  ``profile`` supplies the
    thresholds and is required.
    """
    if profile is None:
        raise DomainError("limits_check needs the profile for the thresholds")
    report = []
    for n in sorted({r.n for r in table.rows}):
        band = table.band(n)
        lam = landau_level(n)
        for side, row, b in (("+", band[-1], profile.b_plus), ("-", band[0], profile.b_minus)):
            target = b * lam
            dev = abs(row.E - target)
            report.append(LimitCheck(n, side, row.k, row.E, target, dev, bool(dev <= tol * target)))
    return report


def default_k_grid(profile, count=21):
    """Geometric in k - a_inf for flat-type fields, linear on [-10, 10] otherwise."""
    if profile.is_flat:
        offsets = math.sqrt(profile.b_plus) * np.geomspace(1.0, 6.0, count)
        return (profile.a_inf + offsets).tolist()
    return np.linspace(-10.0, 10.0, count).tolist()


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    residual: float


def loglog_fit(x, y):
    """Least-squares line through (log x, log |y|)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    if lx.size < 2:
        raise DomainError("need at least two points for a fit")
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.linalg.norm(A @ coef - ly))
    return LogLogFit(float(coef[0]), float(coef[1]), resid)
