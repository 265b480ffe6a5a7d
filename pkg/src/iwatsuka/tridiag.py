"""
Lowest eigenpairs of real symmetric tridiagonal matrices.

Eigenvalues come from bisection on Sturm counts (the number of negative
pivots of ``T - sigma I``), eigenvectors from inverse iteration with a
pivoted tridiagonal LU factorization.  The matrix is given by its diagonal
``d`` (length n) and off-diagonal ``e`` (length n-1).
"""
import numpy as np
from numba import njit
from scipy.linalg.lapack import dgttrf, dgttrs

from .errors import AccuracyError

__all__ = [
    "sturm_count",
    "bisect_eigenvalues",
    "inverse_iteration",
    "lowest_eigenpairs",
    "residual_norm",
    "default_residual_tolerance",
    "dense_eigenvalues",
]

_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps


@njit(cache=True, nogil=True)
def _sturm_count(d, e2, sigma, pivmin):
    n = d.shape[0]
    count = 0
    q = d[0] - sigma
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = d[i] - sigma - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def _bisect(d, e, m, rtol, atol):
    n = d.shape[0]
    e2 = e * e
    lo = d[0]
    hi = d[0]
    emax2 = 1.0
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
            if e2[i] > emax2:
                emax2 = e2[i]
        if d[i] - r < lo:
            lo = d[i] - r
        if d[i] + r > hi:
            hi = d[i] + r
    pivmin = 2.2250738585072014e-308 * emax2
    span = max(abs(lo), abs(hi))
    lo -= 2.0 * 2.220446049250313e-16 * span + pivmin
    hi += 2.0 * 2.220446049250313e-16 * span + pivmin
    out = np.empty(m)
    left = lo
    for j in range(m):
        a = left
        b = hi
        while True:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if b - a <= max(rtol * max(abs(a), abs(b)), atol):
                break
            if _sturm_count(d, e2, mid, pivmin) > j:
                b = mid
            else:
                a = mid
        out[j] = 0.5 * (a + b)
        left = a
    return out


def sturm_count(d, e, sigma):
    """Number of eigenvalues strictly below ``sigma``."""
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    e2 = e * e
    pivmin = _TINY * max(1.0, float(e2.max(initial=0.0)))
    return int(_sturm_count(d, e2, float(sigma), pivmin))


def bisect_eigenvalues(d, e, m, rtol=1e-14, atol=0.0):
    """The ``m`` smallest eigenvalues, ascending.

    Bisection stops once the bracket is narrower than
    ``max(rtol * |lambda|, atol)`` or cannot be split any further.
    """
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    if not 1 <= m <= d.size:
        raise ValueError(f"need 1 <= m <= {d.size}, got m={m}")
    return _bisect(d, e, int(m), float(rtol), float(atol))


def residual_norm(d, e, lam, v):
    """Euclidean norm of ``T v - lam v``."""
    r = (d - lam) * v
    r[:-1] += e * v[1:]
    r[1:] += e * v[:-1]
    return float(np.linalg.norm(r))


def _fix_sign(v):
    # first significant component positive
    big = np.abs(v) > 1e-8 * np.abs(v).max()
    if v[np.argmax(big)] < 0:
        v = -v
    return v


def default_residual_tolerance(d, e):
    """1e-10, raised to 16 eps ||T|| where rounding makes 1e-10 unreachable."""
    scale = float(np.abs(d).max() + 2.0 * np.abs(e).max(initial=0.0))
    return max(1e-10, 16 * _EPS * scale)


def inverse_iteration(d, e, lam, start=None, against=(), max_iter=8, res_tol=None):
    """Eigenvector for the (accurate) eigenvalue ``lam``.

    Returns ``(v, residual)``.  ``against`` lists already-computed unit
    vectors to project out at every step.  Raises :class:`AccuracyError`
    with the best residual when ``res_tol`` (default
    :func:`default_residual_tolerance`) is not reached.
    """
    n = d.size
    scale = float(np.abs(d).max() + 2.0 * np.abs(e).max(initial=0.0))
    if res_tol is None:
        res_tol = default_residual_tolerance(d, e)
    shift = lam
    if n < 3:
        # the LAPACK wrapper rejects n = 2; a dense solve is exact enough here
        T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
        T -= (shift + 4 * _EPS * max(scale, 1.0)) * np.eye(n)
        solve = lambda rhs: np.linalg.solve(T, rhs)
    else:
        for _ in range(4):
            dl, dd, du, du2, ipiv, info = dgttrf(e, d - shift, e)
            if info == 0:
                break
            shift += 4 * _EPS * max(scale, 1.0)
        else:  # pragma: no cover
            raise AccuracyError("singular shift in inverse iteration")

        def solve(rhs):
            x, _ = dgttrs(dl, dd, du, du2, ipiv, rhs)
            return x[:, 0] if x.ndim == 2 else x
    if start is None:
        start = np.random.default_rng(20240611).standard_normal(n)
    v = np.array(start, dtype=float)
    best = np.inf
    best_v = None
    for it in range(max_iter):
        for w in against:
            v -= (w @ v) * w
        v /= np.linalg.norm(v)
        v = solve(v)
        for w in against:
            v -= (w @ v) * w
        v /= np.linalg.norm(v)
        res = residual_norm(d, e, lam, v)
        if res < best:
            best, best_v = res, v.copy()
        if it >= 1 and res <= res_tol:
            break
    if best > res_tol:
        raise AccuracyError(
            f"inverse iteration stalled at residual {best:.3e} (tolerance {res_tol:.1e})",
            best=best,
        )
    return _fix_sign(best_v), best


def lowest_eigenpairs(d, e, m, rtol=1e-14, res_tol=None, vectors=True):
    """The ``m`` smallest eigenpairs of a symmetric tridiagonal matrix.

    Returns ``(values, vecs, residuals)``; ``vecs[:, j]`` is the unit
    eigenvector for ``values[j]``.  With ``vectors=False`` only the values
    are computed and ``vecs``/``residuals`` are ``None``.
    """
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    values = bisect_eigenvalues(d, e, m, rtol=rtol)
    if not vectors:
        return values, None, None
    vecs = np.empty((d.size, m))
    residuals = np.empty(m)
    done = []
    for j, lam in enumerate(values):
        v, res = inverse_iteration(d, e, lam, against=done, res_tol=res_tol)
        vecs[:, j] = v
        residuals[j] = res
        done.append(v)
    return values, vecs, residuals


def dense_eigenvalues(d, e):
    """All eigenvalues via a dense symmetric solver (reference only)."""
    n = len(d)
    T = np.diag(np.asarray(d, dtype=float))
    idx = np.arange(n - 1)
    T[idx, idx + 1] = e
    T[idx + 1, idx] = e
    return np.linalg.eigvalsh(T)
