import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iwatsuka.errors import AccuracyError
from iwatsuka.tridiag import (
    bisect_eigenvalues,
    dense_eigenvalues,
    inverse_iteration,
    lowest_eigenpairs,
    residual_norm,
    sturm_count,
)


def random_tridiagonal(rng, n):
    return rng.normal(size=n) * 3, rng.normal(size=n - 1)


def test_two_by_two():
    vals, vecs, res = lowest_eigenpairs([2.0, 2.0], [-1.0], 2)
    assert vals == pytest.approx([1.0, 3.0], rel=2e-14)
    assert np.all(res <= 1e-10)
    assert vecs[0, 0] > 0 and vecs[0, 1] > 0


def test_discrete_oscillator_tends_to_odd_integers():
    errs = []
    for h in (0.04, 0.02):
        x = np.arange(-10 + h, 10 - h / 2, h)
        d = 2 / h**2 + x**2
        e = np.full(x.size - 1, -1 / h**2)
        vals = bisect_eigenvalues(d, e, 3)
        errs.append(np.abs(vals - [1, 3, 5]))
    assert np.all(errs[1] < 1e-3)
    assert np.all(errs[1] < errs[0] / 3.5)


@pytest.mark.parametrize("seed", range(20))
def test_matches_dense_solver(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 201))
    d, e = random_tridiagonal(rng, n)
    m = min(n, 6)
    assert np.max(np.abs(bisect_eigenvalues(d, e, m) - dense_eigenvalues(d, e)[:m])) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1), st.floats(-10, 10))
def test_sturm_count_matches_dense(n, seed, sigma):
    d, e = random_tridiagonal(np.random.default_rng(seed), n)
    dense = dense_eigenvalues(d, e)
    if np.min(np.abs(dense - sigma)) < 1e-9:
        return
    assert sturm_count(d, e, sigma) == int(np.sum(dense < sigma))


def test_eigenvectors_orthonormal_with_small_residual():
    rng = np.random.default_rng(5)
    d, e = random_tridiagonal(rng, 150)
    vals, vecs, res = lowest_eigenpairs(d, e, 8)
    assert np.max(np.abs(vecs.T @ vecs - np.eye(8))) <= 1e-8
    for j in range(8):
        assert residual_norm(d, e, vals[j], vecs[:, j]) <= 1e-10
        assert res[j] <= 1e-10


def test_sign_convention_first_significant_component_positive():
    rng = np.random.default_rng(9)
    d, e = random_tridiagonal(rng, 40)
    _, vecs, _ = lowest_eigenpairs(d, e, 5)
    for j in range(5):
        v = vecs[:, j]
        first = np.argmax(np.abs(v) > 1e-8 * np.abs(v).max())
        assert v[first] > 0


def test_stagnation_raises_with_best_residual():
    d, e = random_tridiagonal(np.random.default_rng(2), 30)
    lam = bisect_eigenvalues(d, e, 1)[0]
    with pytest.raises(AccuracyError) as info:
        inverse_iteration(d, e, lam + 1e-3, res_tol=1e-12)
    assert info.value.best is not None and info.value.best > 1e-12


def test_m_out_of_range():
    with pytest.raises(ValueError):
        bisect_eigenvalues([1.0, 2.0], [0.5], 3)
