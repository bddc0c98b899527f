"""Log-domain regularized incomplete gamma functions.

Shapes ``a > 0`` are scalars; arguments ``x >= 0`` may be scalars or arrays.
Below ``x = a + 1`` the power series for the lower function is summed; above
it a modified Lentz continued fraction gives the upper function. Each piece is
carried in logs, so results stay meaningful long after ``Q(a, x)`` underflows.

Scalar arguments take a plain-Python path, which is several times faster than
one-element numpy arrays inside root finders.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 2000


# -- scalar kernels -----------------------------------------------------------


def _series_sum(a: float, x: float) -> float:
    ap = a
    term = total = 1.0 / a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total
    raise ArithmeticError("incomplete gamma series did not converge")


def _cf_scalar(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.log(h)
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def _log_pq_scalar(a: float, x: float) -> tuple[float, float]:
    if x == 0.0:
        return -math.inf, 0.0
    if math.isinf(x):
        return 0.0, -math.inf
    pre = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        lp = pre + math.log(_series_sum(a, x))
        return lp, math.log1p(-math.exp(lp))
    lq = pre + _cf_scalar(a, x)
    return math.log1p(-math.exp(lq)), lq


# -- array kernels -------------------------------------------------------------


def _log_prefactor(a: float, x: np.ndarray) -> np.ndarray:
    # log(x^a e^{-x} / Gamma(a))
    with np.errstate(divide="ignore"):
        return a * np.log(x) - x - math.lgamma(a)


def _log_series(a: float, x: np.ndarray) -> np.ndarray:
    """log P(a, x) by the power series; intended for x < a + 1."""
    total = np.full_like(x, 1.0 / a)
    term = total.copy()
    ap = a
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term = np.where(active, term * x / ap, term)
        total = np.where(active, total + term, total)
        active &= np.abs(term) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:
        raise ArithmeticError("incomplete gamma series did not converge")
    with np.errstate(divide="ignore"):
        return _log_prefactor(a, x) + np.log(total)


def _cf_array(a: float, x: np.ndarray) -> np.ndarray:
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise ArithmeticError("incomplete gamma continued fraction did not converge")
    return np.log(h)


def _log_pq_array(a: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = x.ravel()
    lp = np.empty_like(flat)
    lq = np.empty_like(flat)
    small = flat < a + 1.0
    if small.any():
        p = _log_series(a, flat[small])
        lp[small] = p
        lq[small] = np.log1p(-np.exp(p))
    big = ~small
    if big.any():
        xs = flat[big]
        inf = np.isinf(xs)
        safe = np.where(inf, a + 1.0, xs)
        q = np.where(inf, -np.inf, _log_prefactor(a, safe) + _cf_array(a, safe))
        lq[big] = q
        lp[big] = np.log1p(-np.exp(q))
    return lp.reshape(x.shape), lq.reshape(x.shape)


# -- public API ------------------------------------------------------------------


def log_pq(a: float, x):
    """``(log P(a, x), log Q(a, x))`` from a single evaluation."""
    a = float(a)
    if not a > 0:
        raise ValueError("shape a must be positive")
    if isinstance(x, (int, float)) or (isinstance(x, np.ndarray) and x.ndim == 0) or np.isscalar(x):
        xf = float(x)
        if not xf >= 0:
            raise ValueError("x must be nonnegative")
        return _log_pq_scalar(a, xf)
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0)):
        raise ValueError("x must be nonnegative")
    return _log_pq_array(a, arr)


def log_gammaincc(a: float, x):
    """log Q(a, x), the regularized upper incomplete gamma function."""
    return log_pq(a, x)[1]


def log_gammainc(a: float, x):
    """log P(a, x), the regularized lower incomplete gamma function."""
    return log_pq(a, x)[0]


def log_upper_gamma(a: float, x):
    """log Gamma(a, x), the unregularized upper incomplete gamma function."""
    return log_gammaincc(a, x) + math.lgamma(a)


def log_cf_factor(a: float, x):
    """log h where Gamma(a, x) = x^a e^{-x} h; converges quickly for x >= a + 1."""
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return _cf_scalar(float(a), float(x))
    return _cf_array(float(a), np.asarray(x, dtype=float))
