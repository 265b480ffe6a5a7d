"""
Magnetic field profiles b(x) of Iwatsuka type and their flux quantities.

Every profile is increasing with limits ``b_minus`` at -inf and ``b_plus``
at +inf.  Besides b itself each profile provides an antiderivative ``H`` of
the field deficit ``b_plus - b``; the flux potential is then

    a(x) = b_plus * x - (H(x) - H(0)),

and every flux difference that the fiber operator needs is written through
``H`` so that it is *exactly* zero where the field equals ``b_plus``.
For profiles that reach ``b_plus`` at a finite contact point ``x_inf`` the
antiderivative is anchored there (``H = 0`` on ``[x_inf, inf)``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import expi, hyp2f1

from .errors import DomainError, ProfileError, UnsupportedProfileError

__all__ = [
    "FieldProfile",
    "Constant",
    "PowerTail",
    "FlatContact",
    "InfiniteContact",
    "PiecewiseConstant",
    "Tabulated",
    "RescaledPotentialPoint",
    "eval_b",
    "eval_a",
    "inverse_a",
    "t_of_k",
    "d_k",
    "rescaled_potential",
    "landau_level",
    "thresholds",
    "field_deriv_at_contact",
    "parse_profile",
    "load_profile",
    "format_profile",
    "PROFILE_KEYS",
]


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _ret(x, value):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(x) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class FieldProfile:
    """Base class; concrete kinds override ``_b`` and ``_H``."""

    b_minus: float
    b_plus: float

    kind = "FieldProfile"

    def __post_init__(self):
        if not (math.isfinite(self.b_minus) and math.isfinite(self.b_plus)):
            raise ProfileError("b_minus and b_plus must be finite")
        if self.b_minus <= 0:
            raise ProfileError(f"b_minus must be positive, got {self.b_minus}")
        if self.b_minus >= self.b_plus:
            raise ProfileError(
                f"need b_minus < b_plus, got b_minus={self.b_minus}, b_plus={self.b_plus}"
            )

    # -- kind-specific pieces -------------------------------------------
    def _b(self, x):
        raise NotImplementedError

    def _H(self, x):
        raise NotImplementedError

    # -- public API -------------------------------------------------------
    @property
    def contact_point(self):
        """Smallest x with b = b_plus on [x, inf); None if never reached."""
        return None

    @property
    def is_flat(self):
        return self.contact_point is not None

    @property
    def a_inf(self):
        """Flux a(x_inf) at the contact point."""
        x_inf = self.contact_point
        if x_inf is None:
            raise UnsupportedProfileError(f"{self.kind} profile has no contact point")
        return self._a_inf

    def b(self, x):
        x = _as_float_array(x)
        return _ret(x, self._b(x))

    def deficit_antiderivative(self, x):
        """H(x) with H' = b_plus - b (anchoring is kind-specific)."""
        x = _as_float_array(x)
        return _ret(x, self._H(x))

    def flux_deficit(self, x1, x2):
        """Integral of (b_plus - b) over [x1, x2] (signed)."""
        x1 = _as_float_array(x1)
        x2 = _as_float_array(x2)
        val = self._H(x2) - self._H(x1)
        return float(val) if np.ndim(val) == 0 else val

    def a(self, x):
        x = _as_float_array(x)
        return _ret(x, self.b_plus * x - (self._H(x) - self._H0))

    def params(self):
        """Key/value pairs of the profile text format (without ``kind``)."""
        return {"b_minus": self.b_minus, "b_plus": self.b_plus}

    def _cache(self, **values):
        for key, value in values.items():
            object.__setattr__(self, key, value)

    def _finish(self):
        self._cache(_H0=float(self._H(np.float64(0.0))))
        if self.contact_point is not None:
            self._cache(_a_inf=float(self.b_plus * self.contact_point + self._H0))


@dataclass(frozen=True)
class Constant(FieldProfile):
    """Uniform field b0; both limits coincide."""

    b_minus: float = field(init=False, repr=False)
    b_plus: float = field(init=False, repr=False)
    b0: float = 1.0

    kind = "Constant"

    def __post_init__(self):
        if not (math.isfinite(self.b0) and self.b0 > 0):
            raise ProfileError(f"b0 must be positive, got {self.b0}")
        self._cache(b_minus=float(self.b0), b_plus=float(self.b0))
        self._finish()

    def _b(self, x):
        return np.full(np.shape(x), self.b0)

    def _H(self, x):
        return np.zeros(np.shape(x))

    def params(self):
        return {"b0": self.b0}


@dataclass(frozen=True)
class PowerTail(FieldProfile):
    """b = b_plus - c <x>^(-M) for x >= x0, constant b_minus further left.

    The left part is clamped: the tail formula is used on ``[x_c, inf)``
    with ``x_c = max(x0, clamp point)`` where the clamp point solves
    ``b_plus - c <x>^(-M) = b_minus``.  ``<x> = sqrt(1 + x^2)``.
    """

    M: float = 2.0
    c: float = 1.0
    x0: float = 0.0

    kind = "PowerTail"

    def __post_init__(self):
        super().__post_init__()
        if not self.M > 0:
            raise ProfileError(f"M must be positive, got {self.M}")
        if not self.c > 0:
            raise ProfileError(f"c must be positive, got {self.c}")
        if not self.x0 >= 0:
            raise ProfileError(f"x0 must be >= 0 for a monotone tail, got {self.x0}")
        # <x>^M = c / (b_plus - b_minus)
        bracket = (self.c / (self.b_plus - self.b_minus)) ** (2.0 / self.M)
        x_clamp = math.sqrt(bracket - 1.0) if bracket > 1.0 else 0.0
        x_c = max(self.x0, x_clamp)
        self._cache(x_c=x_c, _S_c=float(self._S(np.float64(x_c))))
        self._finish()

    def _S(self, x):
        # integral of <s>^(-M) over [0, x]
        if self.M == 1.0:
            return np.arcsinh(x)
        if self.M == 2.0:
            return np.arctan(x)
        return x * hyp2f1(0.5, 0.5 * self.M, 1.5, -x * x)

    def _b(self, x):
        tail = self.b_plus - self.c * (1.0 + x * x) ** (-0.5 * self.M)
        return np.where(x >= self.x_c, tail, self.b_minus)

    def _H(self, x):
        xr = np.maximum(x, self.x_c)
        right = self.c * (self._S(xr) - self._S_c)
        left = -(self.b_plus - self.b_minus) * (self.x_c - x)
        return np.where(x >= self.x_c, right, left)

    def params(self):
        return {**super().params(), "M": self.M, "c": self.c, "x0": self.x0}


@dataclass(frozen=True)
class FlatContact(FieldProfile):
    """b = b_plus for x >= x_inf, max(b_minus, b_plus - c (x_inf - x)^p) below.

    The contact at ``x_inf`` has order ``p``: the first p-1 left derivatives
    vanish and the p-th equals ``(-1)^(p+1) c p!``.
    """

    p: int = 1
    c: float = 1.0
    x_inf: float = 0.0

    kind = "FlatContact"

    def __post_init__(self):
        super().__post_init__()
        if isinstance(self.p, float) and self.p.is_integer():
            object.__setattr__(self, "p", int(self.p))
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise ProfileError(f"p must be a positive integer, got {self.p!r}")
        if not self.c > 0:
            raise ProfileError(f"c must be positive, got {self.c}")
        s_c = ((self.b_plus - self.b_minus) / self.c) ** (1.0 / self.p)
        self._cache(s_c=s_c)
        self._finish()

    @property
    def contact_point(self):
        return float(self.x_inf)

    def _b(self, x):
        s = np.maximum(self.x_inf - x, 0.0)
        return np.maximum(self.b_minus, self.b_plus - self.c * s**self.p)

    def _H(self, x):
        p = self.p
        s = np.maximum(self.x_inf - x, 0.0)
        sc = np.minimum(s, self.s_c)
        return -(self.c * sc ** (p + 1) / (p + 1) + (self.b_plus - self.b_minus) * (s - sc))

    def params(self):
        return {**super().params(), "p": self.p, "c": self.c, "x_inf": self.x_inf}


@dataclass(frozen=True)
class InfiniteContact(FieldProfile):
    """b = b_plus - c exp(1/(x - x_inf)) left of x_inf, clamped at b_minus.

    All left derivatives vanish at ``x_inf`` (contact of infinite order).
    Requires ``c >= b_plus - b_minus`` so that the clamp is reached.
    """

    c: float = 1.0
    x_inf: float = 0.0

    kind = "InfiniteContact"

    def __post_init__(self):
        super().__post_init__()
        jump = self.b_plus - self.b_minus
        if not self.c > 0:
            raise ProfileError(f"c must be positive, got {self.c}")
        if self.c < jump:
            raise ProfileError(
                f"c={self.c} < b_plus - b_minus={jump}: the field would never reach b_minus"
            )
        u_c = 1.0 / math.log(jump / self.c) if self.c > jump else -math.inf
        self._cache(u_c=u_c)
        if math.isfinite(u_c):
            self._cache(_H_c=float(self._H_tail(np.float64(u_c))))
        self._finish()

    @property
    def contact_point(self):
        return float(self.x_inf)

    def _H_tail(self, u):
        # -int_u^0 c exp(1/s) ds for u < 0
        with np.errstate(over="ignore", under="ignore"):
            return self.c * (u * np.exp(1.0 / u) - expi(1.0 / u))

    def _b(self, x):
        u = np.minimum(x - self.x_inf, -1e-300)
        with np.errstate(under="ignore"):
            tail = self.b_plus - self.c * np.exp(1.0 / u)
        out = np.where(x >= self.x_inf, self.b_plus, tail)
        return np.maximum(out, self.b_minus)

    def _H(self, x):
        u = x - self.x_inf
        uu = np.clip(u, self.u_c if math.isfinite(self.u_c) else -np.inf, -1e-300)
        mid = self._H_tail(uu)
        out = np.where(u >= 0, 0.0, mid)
        if math.isfinite(self.u_c):
            left = self._H_c - (self.b_plus - self.b_minus) * (self.u_c - u)
            out = np.where(u < self.u_c, left, out)
        return out

    def params(self):
        return {**super().params(), "c": self.c, "x_inf": self.x_inf}


@dataclass(frozen=True)
class PiecewiseConstant(FieldProfile):
    """Single jump from b_minus to b_plus at ``x_jump``."""

    x_jump: float = 0.0

    kind = "PiecewiseConstant"

    def __post_init__(self):
        super().__post_init__()
        self._finish()

    @property
    def contact_point(self):
        return float(self.x_jump)

    def _b(self, x):
        return np.where(x >= self.x_jump, self.b_plus, self.b_minus)

    def _H(self, x):
        return -(self.b_plus - self.b_minus) * np.maximum(self.x_jump - x, 0.0)

    def params(self):
        return {**super().params(), "x_jump": self.x_jump}


@dataclass(frozen=True, eq=False)
class Tabulated(FieldProfile):
    """Piecewise-linear interpolation of sorted samples, constant outside."""

    b_minus: float = field(init=False)
    b_plus: float = field(init=False)
    xs: tuple = ()
    bs: tuple = ()
    table_path: str | None = None

    kind = "Tabulated"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        bs = np.asarray(self.bs, dtype=float)
        if xs.ndim != 1 or xs.shape != bs.shape or xs.size < 2:
            raise ProfileError("table needs at least two (x, b) samples")
        if np.any(np.diff(xs) <= 0):
            raise ProfileError("table x values must be strictly increasing")
        if np.any(np.diff(bs) < 0):
            raise ProfileError("table b values must be non-decreasing")
        self._cache(xs=tuple(xs.tolist()), bs=tuple(bs.tolist()),
                    b_minus=float(bs[0]), b_plus=float(bs[-1]))
        super().__post_init__()
        # exact integrals of the linear interpolant of (b_plus - b), right to left
        gap = self.b_plus - bs
        pieces = 0.5 * (gap[:-1] + gap[1:]) * np.diff(xs)
        tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        first_flat = int(np.nonzero(bs < self.b_plus)[0][-1]) + 1
        self._cache(_x=xs, _b_arr=bs, _tail=tail, _x_inf=float(xs[first_flat]))
        self._finish()

    @property
    def contact_point(self):
        return self._x_inf

    def _b(self, x):
        return np.interp(x, self._x, self._b_arr)

    def _H(self, x):
        xs, tail = self._x, self._tail
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        bx = np.interp(x, xs, self._b_arr)
        inside = tail[i + 1] + (xs[i + 1] - x) * (self.b_plus - 0.5 * (bx + self._b_arr[i + 1]))
        left = tail[0] + (self.b_plus - self.b_minus) * (xs[0] - x)
        out = np.where(x < xs[0], left, inside)
        return -np.where(x >= xs[-1], 0.0, out)

    def params(self):
        return {"table_path": self.table_path or ""}


# --------------------------------------------------------------------------
# Operations on profiles
# --------------------------------------------------------------------------

def eval_b(profile, x):
    """Field value b(x)."""
    return profile.b(x)


def eval_a(profile, x):
    """Flux potential a(x) = int_0^x b."""
    return profile.a(x)


def inverse_a(profile, k):
    """Guiding centre x_k with a(x_k) = k.

    Exact on the flat side of a contact point; Brent's method elsewhere,
    bracketed by ``a(x)/x`` lying in ``[b_minus, b_plus]``.
    """
    if np.ndim(k) != 0:
        return np.array([inverse_a(profile, kk) for kk in np.ravel(k)]).reshape(np.shape(k))
    k = float(k)
    if k == 0.0:
        return 0.0
    x_inf = profile.contact_point
    if isinstance(profile, Constant):
        return k / profile.b0
    if x_inf is not None and k >= profile.a_inf:
        return x_inf + (k - profile.a_inf) / profile.b_plus
    lo, hi = sorted((k / profile.b_plus, k / profile.b_minus))
    scale = max(1.0, abs(k))
    f = lambda x: profile.a(x) - k
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        # bounds are exact up to rounding; widen by a hair
        pad = 1e-9 * scale
        lo, hi = lo - pad, hi + pad
    try:
        x = brentq(f, lo, hi, xtol=1e-14 * scale, rtol=4 * np.finfo(float).eps, maxiter=200)
    except ValueError as exc:  # pragma: no cover - bracket is guaranteed
        raise ArithmeticError(f"could not bracket a^-1({k})") from exc
    return float(x)


def t_of_k(profile, k):
    """Rescaled contact coordinate t_k = (a_inf - k) / sqrt(b_plus)."""
    if not profile.is_flat:
        raise UnsupportedProfileError(f"t_k needs a contact point; {profile.kind} has none")
    k = _as_float_array(k)
    return _ret(k, (profile.a_inf - k) / math.sqrt(profile.b_plus))


def d_k(profile, k, t):
    """Perturbation d_k(t) = W(t, k) - t^2 of the rescaled fiber potential.

    With u = x_k + t / sqrt(b_plus) and D = int_u^{x_k} (b_plus - b),

        d_k(t) = D (2 sqrt(b_plus) t + D) / b_plus,

    which is the product of the two flux integrals over [u, x_k] divided by
    b_plus.  D vanishes identically where b = b_plus, so d_k is exactly zero
    on the flat side of a contact point.
    """
    t = _as_float_array(t)
    bp = profile.b_plus
    sq = math.sqrt(bp)
    xk = inverse_a(profile, k)
    u = xk + t / sq
    D = profile.flux_deficit(u, np.float64(xk))
    return _ret(t, D * (2.0 * sq * t + D) / bp)


@dataclass(frozen=True)
class RescaledPotentialPoint:
    t: float
    k: float
    W: float
    d_k: float


def rescaled_potential(profile, k, t):
    """W(t, k) = t^2 + d_k(t) as a list of points (or a single point)."""
    d = d_k(profile, k, t)
    if np.ndim(t) == 0:
        return RescaledPotentialPoint(float(t), float(k), float(t) ** 2 + d, d)
    return [
        RescaledPotentialPoint(float(tt), float(k), float(tt) ** 2 + float(dd), float(dd))
        for tt, dd in zip(np.ravel(t), np.ravel(d))
    ]


def kink_points(profile):
    """Points where b is not smooth (jumps, contact points, table nodes)."""
    if isinstance(profile, PowerTail):
        return [profile.x_c]
    if isinstance(profile, FlatContact):
        return [profile.x_inf, profile.x_inf - profile.s_c]
    if isinstance(profile, InfiniteContact):
        pts = [profile.x_inf]
        if math.isfinite(profile.u_c):
            pts.append(profile.x_inf + profile.u_c)
        return pts
    if isinstance(profile, PiecewiseConstant):
        return [profile.x_jump]
    if isinstance(profile, Tabulated):
        return list(profile.xs)
    return []


def landau_level(n):
    """Lambda_n = 2n - 1."""
    if int(n) != n or n < 1:
        raise DomainError(f"band index must be an integer >= 1, got {n}")
    return 2 * int(n) - 1


def thresholds(profile, n_max):
    """Sorted, de-duplicated {b_minus Lambda_n} U {b_plus Lambda_n}, n <= n_max."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    vals = {profile.b_minus * landau_level(n) for n in range(1, n_max + 1)}
    vals |= {profile.b_plus * landau_level(n) for n in range(1, n_max + 1)}
    return sorted(vals)


def field_deriv_at_contact(profile):
    """Left p-th derivative b^(p)(x_inf^-) of a FlatContact profile."""
    if not isinstance(profile, FlatContact):
        raise UnsupportedProfileError(
            f"contact derivative is defined for FlatContact, not {profile.kind}"
        )
    p = profile.p
    return float((-1) ** (p + 1) * profile.c * math.factorial(p))


# --------------------------------------------------------------------------
# Text format
# --------------------------------------------------------------------------

PROFILE_KEYS = ("b_minus", "b_plus", "b0", "c", "M", "p", "x0", "x_inf", "x_jump", "table_path")

_KINDS = {
    "constant": (Constant, {"b0"}, set()),
    "powertail": (PowerTail, {"b_minus", "b_plus", "M"}, {"c", "x0"}),
    "flatcontact": (FlatContact, {"b_minus", "b_plus", "p"}, {"c", "x_inf"}),
    "infinitecontact": (InfiniteContact, {"b_minus", "b_plus"}, {"c", "x_inf"}),
    "piecewiseconstant": (PiecewiseConstant, {"b_minus", "b_plus"}, {"x_jump"}),
    "tabulated": (Tabulated, {"table_path"}, set()),
}


def _parse_number(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ProfileError(f"key '{key}': cannot parse number from {text!r}") from None
    if key == "p":
        if not value.is_integer():
            raise ProfileError(f"key 'p': contact order must be an integer, got {text!r}")
        return int(value)
    return value


def parse_profile(entries, base_dir=None):
    """Build a profile from ``{key: string}`` entries (``kind`` included).

    ``entries`` may also be the raw text of a profile description.
    """
    if isinstance(entries, str):
        entries = _parse_lines(entries)
    entries = dict(entries)
    if "kind" not in entries:
        raise ProfileError("missing key 'kind'")
    kind_name = entries.pop("kind").strip()
    try:
        cls, required, optional = _KINDS[kind_name.lower()]
    except KeyError:
        raise ProfileError(f"unknown kind {kind_name!r}") from None
    for key in entries:
        if key not in PROFILE_KEYS:
            raise ProfileError(f"unknown key '{key}'")
        if key not in required | optional:
            raise ProfileError(f"key '{key}' does not apply to kind {cls.kind}")
    for key in sorted(required):
        if key not in entries:
            raise ProfileError(f"missing key '{key}' for kind {cls.kind}")
    if cls is Tabulated:
        path = Path(entries["table_path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return _read_table(path)
    kwargs = {key: _parse_number(key, value) for key, value in entries.items()}
    return cls(**kwargs)


def _read_table(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if header != ["x", "b"]:
                raise ProfileError(f"{path}: header must be 'x,b', got {','.join(header)!r}")
            rows = [r for r in reader if r and any(s.strip() for s in r)]
    except OSError as exc:
        raise ProfileError(f"cannot read table {path}: {exc.strerror}") from None
    try:
        xs = [float(r[0]) for r in rows]
        bs = [float(r[1]) for r in rows]
    except (ValueError, IndexError):
        raise ProfileError(f"{path}: malformed row") from None
    return Tabulated(xs=xs, bs=bs, table_path=str(path))


def _parse_lines(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProfileError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ProfileError(f"line {lineno}: duplicate key '{key}'")
        entries[key] = value
    return entries


def load_profile(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProfileError(f"cannot read profile {path}: {exc.strerror}") from None
    return parse_profile(text, base_dir=path.parent)


def format_profile(profile):
    lines = [f"kind = {profile.kind}"]
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}"
              for k, v in profile.params().items()]
    return "\n".join(lines) + "\n"
