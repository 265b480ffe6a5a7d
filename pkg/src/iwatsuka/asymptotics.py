"""
Hermite quasi-modes and closed-form threshold asymptotics.

Quantities here live in the rescaled variable t = sqrt(b_plus) (x - x_k),
where the fiber operator becomes b_plus (-d^2/dt^2 + t^2 + d_k(t)).  For
flat-type fields d_k vanishes for t >= t_k, so the first-order shift of the
n-th level is b_plus mu_n(k) with mu_n(k) = int Psi_n^2 d_k.  Because
mu_n carries the factor exp(-t_k^2), every exponentially small quantity is
also returned as a log-magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import AccuracyError, DomainError, UnsupportedProfileError
from .field import (
    Constant,
    kink_points,
    FlatContact,
    InfiniteContact,
    PiecewiseConstant,
    PowerTail,
    Tabulated,
    d_k,
    field_deriv_at_contact,
    inverse_a,
    landau_level,
    t_of_k,
)

__all__ = [
    "N_HERMITE_MAX",
    "HermiteBasisElement",
    "AsymptoticPrediction",
    "InfiniteContactDiagnostic",
    "hermite_basis",
    "hermite_polynomial",
    "hermite_function",
    "gamma_n",
    "mu_n",
    "mu_n_leading",
    "dk_p1_at_tk",
    "C_constant",
    "predicted_gap_flat",
    "predicted_gap_power",
    "predicted_gap_infinite",
    "heuristic_gap",
    "predict",
]

N_HERMITE_MAX = 12
# scaled integrands below this are dropped (1e-18 relative to an O(1) peak)
_LOG_CUTOFF = math.log(1e-18)


@dataclass(frozen=True)
class HermiteBasisElement:
    """Psi_n(t) = P_n(t) exp(-t^2/2); ``coeffs`` in increasing powers of t."""

    n: int
    coeffs: tuple
    gamma: float

    def polynomial(self, t):
        return hermite_polynomial(self.n, t)

    def __call__(self, t):
        return hermite_function(self.n, t)


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Predicted signed gap E_n(k) - b_plus Lambda_n.

    ``log_abs_gap`` is log |predicted_gap| and stays finite when the value
    underflows.  ``window`` is the k-range where the formula applies.
    """

    n: int
    k: float
    model: str
    predicted_gap: float
    log_abs_gap: float
    leading_constant: float
    window: tuple


@dataclass(frozen=True)
class InfiniteContactDiagnostic:
    n: int
    k: float
    q: float
    scaled_gap: float | None
    refined_gap: float
    log_abs_refined_gap: float


def _check_index(n):
    if int(n) != n or not 1 <= n <= N_HERMITE_MAX:
        raise DomainError(f"Hermite index must be in 1..{N_HERMITE_MAX}, got {n}")
    return int(n)


def gamma_n(n):
    """Leading coefficient (2^(n-1) / ((n-1)! sqrt(pi)))^(1/2) of P_n."""
    n = _check_index(n)
    return math.sqrt(2.0 ** (n - 1) / (math.factorial(n - 1) * math.sqrt(math.pi)))


@lru_cache(maxsize=None)
def _coeff_table():
    # P_1 = pi^(-1/4); P_{m+1} = sqrt(2/m) t P_m - sqrt((m-1)/m) P_{m-1}
    table = [np.array([math.pi ** -0.25])]
    prev = np.zeros(1)
    for m in range(1, N_HERMITE_MAX):
        cur = table[-1]
        nxt = np.zeros(m + 1)
        nxt[1:] = math.sqrt(2.0 / m) * cur
        nxt[: prev.size] -= math.sqrt((m - 1) / m) * prev
        prev = cur
        table.append(nxt)
    return tuple(tuple(c.tolist()) for c in table)


def hermite_basis(n):
    n = _check_index(n)
    coeffs = _coeff_table()[n - 1]
    return HermiteBasisElement(n, coeffs, coeffs[-1])


def _recurrence(n, t, weight):
    p_prev = np.zeros_like(t)
    p = np.full_like(t, math.pi ** -0.25) * weight
    for m in range(1, n):
        p, p_prev = math.sqrt(2.0 / m) * t * p - math.sqrt((m - 1) / m) * p_prev, p
    return p


def hermite_polynomial(n, t):
    """P_n(t), the polynomial part of the normalized Hermite function."""
    n = _check_index(n)
    t_arr = np.asarray(t, dtype=float)
    out = _recurrence(n, t_arr, 1.0)
    return float(out) if out.ndim == 0 else out


def hermite_function(n, t):
    """Normalized Hermite function Psi_n(t), n = 1, 2, ... (three-term recurrence)."""
    n = _check_index(n)
    t_arr = np.asarray(t, dtype=float)
    out = _recurrence(n, t_arr, np.exp(-0.5 * t_arr * t_arr))
    return float(out) if out.ndim == 0 else out


def _require_flat(profile, what):
    if isinstance(profile, (PowerTail,)) or not profile.is_flat:
        raise UnsupportedProfileError(f"{what} needs a flat-type profile, not {profile.kind}")


def _scaled_integral(profile, k, n, weight):
    """int_{-inf}^{t_k} weight(t) exp(t_k^2 - t^2) d_k(t) dt and t_k."""
    tk = float(t_of_k(profile, k))
    if tk >= 0:
        raise DomainError(f"k={k} must exceed a_inf={profile.a_inf}")
    sq = math.sqrt(profile.b_plus)
    ratio = profile.b_plus / profile.b_minus
    xk = inverse_a(profile, k)

    def log_bound(t):
        # |d_k| <= 4 (b+/b-)^2 t^2
        return (math.log(max(weight(t), 1e-300)) + 2 * math.log(2 * ratio * abs(t))
                + tk * tk - t * t)

    t_low = tk - 1.0
    while log_bound(t_low) > _LOG_CUTOFF:
        t_low -= 0.5

    def f(t):
        return weight(t) * math.exp(tk * tk - t * t) * d_k(profile, k, t)

    pts = sorted({sq * (x - xk) for x in kink_points(profile)} | {tk})
    pts = [t for t in pts if t_low < t < tk]
    edges = [t_low, *pts, tk]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=400)
        if not np.isfinite(val) or err > 1e-7 * abs(val) + 1e-300:
            raise AccuracyError(f"quadrature of mu_n failed on [{lo}, {hi}] (err {err:.2e})")
        total += val
    return total, tk


def _mu(profile, k, n, weight):
    if isinstance(profile, Constant):
        return 0.0, -math.inf
    _require_flat(profile, "mu_n")
    scaled, tk = _scaled_integral(profile, k, n, weight)
    if scaled == 0.0:
        return 0.0, -math.inf
    log_abs = math.log(abs(scaled)) - tk * tk
    return math.copysign(math.exp(log_abs), scaled), log_abs


def mu_n(profile, k, n, with_log=False):
    """mu_n(k) = int Psi_n(t)^2 d_k(t) dt (zero contribution from t >= t_k).

    With ``with_log=True`` returns ``(mu, log|mu|)``.
    """
    n = _check_index(n)
    out = _mu(profile, k, n, lambda t: hermite_polynomial(n, t) ** 2)
    return out if with_log else out[0]


def mu_n_leading(profile, k, n, with_log=False):
    """gamma_n^2 int_{-inf}^{t_k} t^(2n-2) exp(-t^2) d_k(t) dt."""
    n = _check_index(n)
    g2 = gamma_n(n) ** 2
    out = _mu(profile, k, n, lambda t: g2 * t ** (2 * n - 2))
    return out if with_log else out[0]


def dk_p1_at_tk(profile, k):
    """(p+1)-th t-derivative of d_k at t_k^-: -2 (k - a_inf) b_plus^(-(p+3)/2) b^(p)(x_inf^-)."""
    bp_deriv = field_deriv_at_contact(profile)
    p = profile.p
    return float(-2.0 * (k - profile.a_inf) * profile.b_plus ** (-(p + 3) / 2) * bp_deriv)


def C_constant(n, p, b_plus):
    """(-1)^p 2^(n-p-2) / (sqrt(pi) (n-1)! b_plus^(n-3/2))."""
    landau_level(n)
    if int(p) != p or p < 1:
        raise DomainError(f"contact order must be a positive integer, got {p}")
    return ((-1) ** int(p) * 2.0 ** (n - p - 2)
            / (math.sqrt(math.pi) * math.factorial(n - 1) * b_plus ** (n - 1.5)))


def predicted_gap_flat(profile, k, n):
    """C(n,p,b_plus) b^(p)(x_inf^-) k^(2n-p-3) exp(-t_k^2) for a FlatContact field."""
    if not isinstance(profile, FlatContact):
        raise UnsupportedProfileError(f"flat-contact prediction needs FlatContact, not {profile.kind}")
    landau_level(n)
    k = float(k)
    if k <= max(profile.a_inf, 0.0):
        raise DomainError(f"prediction needs k > max(a_inf, 0), got k={k}")
    p = profile.p
    lead = C_constant(n, p, profile.b_plus) * field_deriv_at_contact(profile)
    tk = float(t_of_k(profile, k))
    log_abs = math.log(abs(lead)) + (2 * n - p - 3) * math.log(k) - tk * tk
    value = math.copysign(math.exp(log_abs), lead)
    return AsymptoticPrediction(n, k, f"FlatContact(p={p})", value, log_abs, lead,
                                (profile.a_inf, math.inf))


def predicted_gap_power(n, k, M, b_plus, c=1.0):
    """-c Lambda_n b_plus^M / k^M."""
    lam = landau_level(n)
    if not k > 0:
        raise DomainError(f"power-law prediction needs k > 0, got {k}")
    if not M > 0:
        raise DomainError(f"M must be positive, got {M}")
    return -c * lam * b_plus**M / k**M


def predicted_gap_infinite(profile, k, n, gap=None, q=0.0):
    """Diagnostics for an infinite-order contact.

    ``scaled_gap`` is exp(t_k^2) gap k^q (None without a solver gap) and
    ``refined_gap`` is the first-order prediction b_plus mu_n(k).
    """
    k = float(k)
    if isinstance(profile, Constant):
        scaled = None if gap is None else 0.0
        return InfiniteContactDiagnostic(n, k, q, scaled, 0.0, -math.inf)
    if not isinstance(profile, InfiniteContact):
        raise UnsupportedProfileError(f"infinite-contact diagnostic needs InfiniteContact, not {profile.kind}")
    mu, log_mu = mu_n(profile, k, n, with_log=True)
    scaled = None
    if gap is not None:
        tk = float(t_of_k(profile, k))
        scaled = gap * math.exp(tk * tk) * k**q
    bp = profile.b_plus
    return InfiniteContactDiagnostic(n, k, q, scaled, bp * mu, log_mu + math.log(bp))


def heuristic_gap(profile, k, n):
    """Lambda_n (b(x_k) - b_plus): local Landau level at the guiding centre."""
    lam = landau_level(n)
    return float(lam * (profile.b(inverse_a(profile, k)) - profile.b_plus))


def predict(profile, k, n):
    """The applicable prediction for ``profile`` at (n, k), or None.

    FlatContact uses the finite-contact theorem, PowerTail the power law,
    InfiniteContact the refined first-order gap b_plus mu_n(k).
    """
    k = float(k)
    if isinstance(profile, FlatContact):
        if k <= max(profile.a_inf, 0.0):
            return None
        return predicted_gap_flat(profile, k, n)
    if isinstance(profile, PowerTail):
        if k <= 0:
            return None
        lead = -profile.c * landau_level(n) * profile.b_plus**profile.M
        value = predicted_gap_power(n, k, profile.M, profile.b_plus, profile.c)
        return AsymptoticPrediction(n, k, f"PowerTail(M={profile.M:g})", value,
                                    math.log(abs(value)), lead, (0.0, math.inf))
    if isinstance(profile, InfiniteContact):
        if k <= profile.a_inf:
            return None
        diag = predicted_gap_infinite(profile, k, n)
        return AsymptoticPrediction(n, k, "InfiniteContact", diag.refined_gap,
                                    diag.log_abs_refined_gap, profile.b_plus,
                                    (profile.a_inf, math.inf))
    return None
