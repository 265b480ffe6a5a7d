import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from iwatsuka.errors import DomainError, ProfileError, UnsupportedProfileError
from iwatsuka.field import (
    Constant,
    FlatContact,
    InfiniteContact,
    PiecewiseConstant,
    PowerTail,
    Tabulated,
    d_k,
    eval_a,
    eval_b,
    field_deriv_at_contact,
    format_profile,
    inverse_a,
    landau_level,
    load_profile,
    parse_profile,
    rescaled_potential,
    t_of_k,
    thresholds,
)

PROFILES = [
    Constant(b0=1.3),
    PowerTail(0.5, 1.0, M=2.0),
    PowerTail(0.3, 2.0, M=1.0, c=1.5, x0=1.0),
    PowerTail(0.5, 1.0, M=1.5, c=0.4),
    FlatContact(0.5, 1.0, p=1),
    FlatContact(0.5, 1.0, p=2, c=2.0, x_inf=-1.0),
    FlatContact(1.0, 3.0, p=3, c=0.7, x_inf=0.5),
    InfiniteContact(0.5, 1.0, c=1.0),
    InfiniteContact(0.2, 1.5, c=2.0, x_inf=0.3),
    PiecewiseConstant(0.5, 1.0),
    Tabulated(xs=[-2.0, -1.0, 0.0, 1.5], bs=[0.4, 0.5, 0.9, 1.2]),
]
FLAT = [p for p in PROFILES if p.is_flat and not isinstance(p, Constant)]


def ids(p):
    return f"{p.kind}"


def kinks(prof):
    """Points where b is not smooth."""
    if isinstance(prof, FlatContact):
        return [prof.x_inf, prof.x_inf - prof.s_c]
    if isinstance(prof, InfiniteContact):
        return [prof.x_inf, prof.x_inf + prof.u_c]
    if isinstance(prof, PowerTail):
        return [prof.x_c]
    if isinstance(prof, PiecewiseConstant):
        return [prof.x_jump]
    if isinstance(prof, Tabulated):
        return list(prof.xs)
    return []


# -- operation examples ------------------------------------------------------

def test_eval_b_examples():
    assert eval_b(Constant(b0=1), 5.0) == 1
    assert eval_b(FlatContact(0.5, 1.0, p=1, c=1, x_inf=0), 2.0) == 1
    assert eval_b(FlatContact(0.5, 1.0, p=1, c=1, x_inf=0), -0.25) == pytest.approx(0.75, abs=1e-15)


def test_eval_a_examples():
    assert eval_a(Constant(b0=2), 3.0) == pytest.approx(6.0, abs=1e-14)
    for prof in PROFILES:
        assert eval_a(prof, 0.0) == 0.0
    fc = FlatContact(0.5, 1.0, p=1)
    assert eval_a(fc, 4.0) == pytest.approx(fc.a_inf + 4.0, abs=1e-14)


def test_inverse_a_examples():
    assert inverse_a(Constant(b0=2), 6.0) == pytest.approx(3.0, abs=1e-15)
    fc = FlatContact(0.5, 1.0, p=1)
    assert inverse_a(fc, fc.a_inf + 5) == pytest.approx(5.0, abs=1e-14)
    for prof in PROFILES:
        assert inverse_a(prof, 0.0) == 0.0


def test_t_of_k_examples():
    fc = FlatContact(0.5, 1.0, p=1)
    assert fc.a_inf == 0.0
    assert t_of_k(fc, 3.0) == -3.0
    assert t_of_k(fc, fc.a_inf) == 0.0
    # b_plus = 4 with the contact point placed so that a_inf = 1
    x_inf = brentq(lambda x: FlatContact(2.0, 4.0, p=1, x_inf=x).a_inf - 1.0, 0.0, 1.0, xtol=1e-15)
    prof = FlatContact(2.0, 4.0, p=1, x_inf=x_inf)
    assert prof.a_inf == pytest.approx(1.0, abs=1e-14)
    assert t_of_k(prof, 5.0) == pytest.approx(-2.0, abs=1e-14)
    with pytest.raises(UnsupportedProfileError):
        t_of_k(PowerTail(0.5, 1.0), 3.0)


def test_d_k_examples():
    fc = FlatContact(0.5, 1.0, p=1)
    k = 3.0
    tk = t_of_k(fc, k)
    assert np.all(d_k(fc, k, np.linspace(tk, tk + 10, 50)) == 0.0)
    assert np.all(d_k(Constant(b0=1.0), 2.0, np.linspace(-5, 5, 11)) == 0.0)


@pytest.mark.parametrize("prof", [FlatContact(0.5, 1.0, p=1), FlatContact(0.5, 2.0, p=2, c=3.0),
                                  InfiniteContact(0.5, 1.0), PowerTail(0.5, 1.0, M=2.0)], ids=ids)
def test_d_k_matches_two_integral_quadrature(prof):
    # d_k = (int_{x_k}^u (b + b_plus)) (int_{x_k}^u (b - b_plus)) / b_plus, by quad
    k = 3.0
    xk = inverse_a(prof, k)
    bp = prof.b_plus
    for t in (t_of_k(prof, k) - 1.0 if prof.is_flat else -2.0, -0.7, -4.0):
        u = xk + t / math.sqrt(bp)
        pts = [x for x in kinks(prof) if min(u, xk) < x < max(u, xk)] or None
        i1 = quad(lambda s: prof.b(s) + bp, xk, u, points=pts, epsabs=1e-14, epsrel=1e-13)[0]
        i2 = quad(lambda s: prof.b(s) - bp, xk, u, points=pts, epsabs=1e-14, epsrel=1e-13)[0]
        assert d_k(prof, k, t) == pytest.approx(i1 * i2 / bp, rel=1e-10, abs=1e-14)


def test_rescaled_potential_identity():
    fc = FlatContact(0.5, 1.0, p=2, c=2.0)
    pts = rescaled_potential(fc, 2.5, np.linspace(-6, 3, 37))
    for pt in pts:
        assert pt.W == pytest.approx(pt.t**2 + pt.d_k, abs=1e-15)


def test_landau_level_examples():
    assert [landau_level(n) for n in (1, 2, 5)] == [1, 3, 9]
    with pytest.raises(DomainError):
        landau_level(0)


def test_thresholds_examples():
    assert thresholds(FlatContact(1.0, 2.0, p=1), 2) == [1.0, 2.0, 3.0, 6.0]
    assert thresholds(Constant(b0=1.0), 2) == [1.0, 3.0]
    assert thresholds(PowerTail(0.5, 1.0), 1) == [0.5, 1.0]


def test_field_deriv_at_contact_examples():
    assert field_deriv_at_contact(FlatContact(0.5, 1.0, p=1, c=1)) == 1
    assert field_deriv_at_contact(FlatContact(0.5, 1.0, p=2, c=1)) == -2
    assert field_deriv_at_contact(FlatContact(0.5, 1.0, p=1, c=0.5)) == 0.5
    with pytest.raises(UnsupportedProfileError):
        field_deriv_at_contact(InfiniteContact(0.5, 1.0))


@pytest.mark.parametrize("p,c", [(1, 1.0), (2, 1.0), (3, 0.5), (4, 2.0)])
def test_contact_order_by_one_sided_differences(p, c):
    prof = FlatContact(0.1, 1.0, p=p, c=c, x_inf=0.0)
    h = 1e-2
    # backward differences of order j at x_inf: sum_i (-1)^i C(j,i) b(x_inf - i h) / h^j
    for j in range(1, p + 1):
        diff = sum((-1) ** i * math.comb(j, i) * prof.b(-i * h) for i in range(j + 1)) / h**j
        if j < p:
            assert abs(diff) <= c * 2**j * j**p * h ** (p - j)
        else:
            assert diff == pytest.approx(field_deriv_at_contact(prof), rel=0.05)


# -- construction and text format --------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(b_minus=1.0, b_plus=1.0), dict(b_minus=2.0, b_plus=1.0), dict(b_minus=0.0, b_plus=1.0),
])
def test_invalid_limits_rejected(kwargs):
    with pytest.raises(ProfileError):
        FlatContact(p=1, **kwargs)


def test_invalid_family_parameters_rejected():
    with pytest.raises(ProfileError):
        FlatContact(0.5, 1.0, p=0)
    with pytest.raises(ProfileError):
        FlatContact(0.5, 1.0, p=1, c=0.0)
    with pytest.raises(ProfileError):
        PowerTail(0.5, 1.0, M=0.0)
    with pytest.raises(ProfileError):
        PowerTail(0.5, 1.0, M=2.0, c=-1.0)
    with pytest.raises(ProfileError):
        InfiniteContact(0.5, 1.0, c=0.1)
    with pytest.raises(ProfileError):
        Constant(b0=-1.0)


def test_parse_profile_round_trip():
    text = "kind = FlatContact  # comment\nb_minus = 0.5\nb_plus = 1\np = 2\nc = 1.5\n"
    prof = parse_profile(text)
    assert prof == FlatContact(0.5, 1.0, p=2, c=1.5)
    assert parse_profile(format_profile(prof)) == prof


@pytest.mark.parametrize("text,key", [
    ("kind = FlatContact\nb_minus = 0.5\np = 1\n", "b_plus"),
    ("kind = PowerTail\nb_minus = 0.5\nb_plus = 1\nM = 2\nbogus = 1\n", "bogus"),
    ("kind = Constant\nb0 = 1\nb0 = 2\n", "b0"),
    ("kind = Constant\nb0 = x\n", "b0"),
    ("kind = Constant\np = 1\nb0 = 1\n", "p"),
    ("b0 = 1\n", "kind"),
])
def test_parse_profile_errors_name_the_key(text, key):
    with pytest.raises(ProfileError, match=key):
        parse_profile(text)


def test_tabulated_from_file(tmp_path):
    (tmp_path / "field.csv").write_text("x,b\n-1,0.5\n0,0.8\n1,1.0\n")
    (tmp_path / "prof.txt").write_text("kind = tabulated\ntable_path = field.csv\n")
    prof = load_profile(tmp_path / "prof.txt")
    assert isinstance(prof, Tabulated)
    assert (prof.b_minus, prof.b_plus, prof.contact_point) == (0.5, 1.0, 1.0)
    assert prof.b(-0.5) == pytest.approx(0.65)
    assert prof.a(1.0) == pytest.approx(0.9, abs=1e-15)
    (tmp_path / "bad.csv").write_text("position,field\n0,1\n1,2\n")
    with pytest.raises(ProfileError, match="header"):
        parse_profile({"kind": "Tabulated", "table_path": str(tmp_path / "bad.csv")})


def test_flat_profiles_equal_b_plus_right_of_contact():
    for prof in FLAT:
        x = prof.contact_point + np.linspace(0, 20, 101)
        assert np.all(prof.b(x) == prof.b_plus)


# -- properties --------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.sampled_from(PROFILES), st.lists(st.floats(-60, 60), min_size=2, max_size=200))
def test_b_monotone_and_bounded(prof, xs):
    xs = np.sort(np.array(xs))
    b = prof.b(xs)
    assert np.all(np.diff(b) >= 0)
    assert np.all(b >= prof.b_minus) and np.all(b <= prof.b_plus)


def test_b_monotone_ten_thousand_pairs():
    rng = np.random.default_rng(3)
    for prof in PROFILES:
        x1 = rng.uniform(-30, 30, 10_000)
        x2 = x1 + rng.exponential(1.0, 10_000)
        assert np.all(prof.b(x1) <= prof.b(x2))


@pytest.mark.parametrize("prof", PROFILES, ids=ids)
def test_flux_derivative_matches_field(prof):
    x = np.linspace(-8, 8, 401)
    for xc in kinks(prof):
        x = x[np.abs(x - xc) > 1e-3]
    h = 1e-5
    deriv = (prof.a(x + h) - prof.a(x - h)) / (2 * h)
    assert np.max(np.abs(deriv - prof.b(x))) <= 1e-6


@pytest.mark.parametrize("prof", PROFILES, ids=ids)
def test_flux_matches_quadrature(prof):
    for x in (-7.5, -1.2, 0.4, 3.0, 12.0):
        pts = [xc for xc in kinks(prof) if min(0, x) < xc < max(0, x)] or None
        ref = quad(prof.b, 0.0, x, points=pts, limit=200, epsabs=1e-13, epsrel=1e-13)[0]
        assert prof.a(x) == pytest.approx(ref, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(PROFILES), st.floats(-50, 50))
def test_inverse_a_round_trip(prof, x):
    assert inverse_a(prof, prof.a(x)) == pytest.approx(x, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(PROFILES), st.floats(-200, 200))
def test_inverse_a_residual(prof, k):
    xk = inverse_a(prof, k)
    assert abs(prof.a(xk) - k) <= 1e-11 * max(1.0, abs(k))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([p for p in PROFILES if not isinstance(p, Constant)]),
       st.floats(-10, 10), st.floats(-12, 12))
def test_d_k_bound_and_sign(prof, k, t):
    d = d_k(prof, k, t)
    assert abs(d) <= 4 * (prof.b_plus / prof.b_minus) ** 2 * t * t + 1e-12
    if t < 0:
        assert d <= 1e-15
