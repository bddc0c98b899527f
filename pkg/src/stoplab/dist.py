"""The exponential-decay location family ``f(x) = C0 * exp(-|x - theta|^alpha)``.

Every tail quantity is derived from log-domain incomplete gamma values so that
ratios of tails stay accurate deep into the right tail. Functions take a
:class:`DistSpec` and accept scalar or array arguments; scalars come back as
plain floats.

The private ``_name(alpha, theta, s)`` helpers broadcast over ``theta`` too,
which the threshold solver uses to handle many location estimates at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import log_cf_factor, log_pq, log_upper_gamma

_LOG_HALF = math.log(0.5)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0.5:
        raise ValueError("alpha must be >= 0.5")
    return alpha


@dataclass(frozen=True)
class DistSpec:
    """Shape ``alpha`` and location ``theta`` of one family member."""

    alpha: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", float(self.theta))

    def shifted(self, delta: float) -> DistSpec:
        return DistSpec(self.alpha, self.theta + delta)


@dataclass(frozen=True)
class TailBracket:
    lower: float
    upper: float

    def contains(self, p: float, rtol: float = 0.0) -> bool:
        return self.lower * (1 - rtol) <= p <= self.upper * (1 + rtol)


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def normalizing_constant(alpha: float) -> float:
    """C0 = 1 / (2 Gamma(1 + 1/alpha))."""
    alpha = _check_alpha(alpha)
    return math.exp(-math.log(2.0) - math.lgamma(1.0 + 1.0 / alpha))


def _log_c0(alpha: float) -> float:
    return -math.log(2.0) - math.lgamma(1.0 + 1.0 / alpha)


def variance(alpha: float) -> float:
    """Gamma(3/alpha) / Gamma(1/alpha); independent of theta."""
    alpha = _check_alpha(alpha)
    return math.exp(math.lgamma(3.0 / alpha) - math.lgamma(1.0 / alpha))


# -- kernels ------------------------------------------------------------------
# Each kernel has a plain-float path (used inside scalar root finding) and an
# array path that broadcasts over both theta and s.


def _scalar(*xs) -> bool:
    return all(np.ndim(x) == 0 for x in xs)


def _log_pdf(alpha, theta, x):
    if _scalar(theta, x):
        return _log_c0(alpha) - abs(float(x) - theta) ** alpha
    return _log_c0(alpha) - np.abs(np.asarray(x, dtype=float) - theta) ** alpha


def _log_tail(alpha, theta, s):
    a = 1.0 / alpha
    if _scalar(theta, s):
        t = float(s) - float(theta)
        lp, lq = log_pq(a, abs(t) ** alpha)
        # left of theta: 1 - Q/2 = (1 + P)/2
        return _LOG_HALF + (lq if t >= 0 else math.log1p(math.exp(lp)))
    t = np.asarray(s, dtype=float) - theta
    lp, lq = log_pq(a, np.abs(t) ** alpha)
    return _LOG_HALF + np.where(t >= 0, lq, np.log1p(np.exp(lp)))


def _log_excess_over_theta(alpha, theta, s, log_tail=None):
    """log(mu(s) - theta); the odd part of x f(x) makes this exact for any s."""
    if log_tail is None:
        log_tail = _log_tail(alpha, theta, s)
    if _scalar(theta, s):
        u = abs(float(s) - float(theta)) ** alpha
    else:
        u = np.abs(np.asarray(s, dtype=float) - theta) ** alpha
    return _log_c0(alpha) - math.log(alpha) + log_upper_gamma(2.0 / alpha, u) - log_tail


def _mean_excess(alpha, theta, s, log_tail=None):
    """mu(s) - s.

    Far to the right the ratio of upper gammas is T * h(2/a) / h(1/a) with h
    the continued-fraction factor, so T can be subtracted without cancelling
    the shared prefactor.
    """
    b1, b2 = 1.0 / alpha, 2.0 / alpha
    if _scalar(theta, s):
        t = float(s) - float(theta)
        u = abs(t) ** alpha
        if t > 0 and u >= b2 + 1.0:
            return t * math.expm1(log_cf_factor(b2, u) - log_cf_factor(b1, u))
        return math.exp(_log_excess_over_theta(alpha, theta, s, log_tail)) - t
    t = np.asarray(s, dtype=float) - theta
    out = np.exp(_log_excess_over_theta(alpha, theta, s, log_tail)) - t
    u = np.abs(t) ** alpha
    far = (t > 0) & (u >= b2 + 1.0)
    if np.any(far):
        tf, uf = t[far], u[far]
        out = np.array(out, dtype=float, copy=True)
        out[far] = tf * np.expm1(log_cf_factor(b2, uf) - log_cf_factor(b1, uf))
    return out


def _log_integrated_tail(alpha, theta, s):
    lt = _log_tail(alpha, theta, s)
    if _scalar(theta, s):
        return lt + math.log(_mean_excess(alpha, theta, s, lt))
    return lt + np.log(_mean_excess(alpha, theta, s, lt))


# -- public API -------------------------------------------------------------


def log_pdf(dist: DistSpec, x):
    return _out(_log_pdf(dist.alpha, dist.theta, x))


def pdf(dist: DistSpec, x):
    return _out(np.exp(_log_pdf(dist.alpha, dist.theta, x)))


def log_tail(dist: DistSpec, s):
    """log P(X > s)."""
    return _out(_log_tail(dist.alpha, dist.theta, s))


def tail(dist: DistSpec, s):
    return _out(np.exp(_log_tail(dist.alpha, dist.theta, s)))


def cdf(dist: DistSpec, x):
    return _out(-np.expm1(_log_tail(dist.alpha, dist.theta, x)))


def conditional_mean(dist: DistSpec, s):
    """E[X | X > s]."""
    return _out(dist.theta + np.exp(_log_excess_over_theta(dist.alpha, dist.theta, s)))


def mean_excess(dist: DistSpec, s):
    """E[X - s | X > s]."""
    return _out(_mean_excess(dist.alpha, dist.theta, s))


def hazard(dist: DistSpec, s):
    return _out(np.exp(_log_pdf(dist.alpha, dist.theta, s) - _log_tail(dist.alpha, dist.theta, s)))


def g_value(dist: DistSpec, s):
    """Reciprocal mean excess, equal to tail / integrated tail."""
    return _out(1.0 / _mean_excess(dist.alpha, dist.theta, s))


def log_integrated_tail(dist: DistSpec, s):
    """log of the integral of the tail from s to infinity."""
    return _out(_log_integrated_tail(dist.alpha, dist.theta, s))


def integrated_tail(dist: DistSpec, s):
    return _out(np.exp(_log_integrated_tail(dist.alpha, dist.theta, s)))


def tail_log_ratio(dist: DistSpec, s, delta):
    """log P(s) - log P(s + delta)."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be nonnegative")
    return _out(_log_tail(dist.alpha, dist.theta, s) - _log_tail(dist.alpha, dist.theta, np.asarray(s) + delta))


def tail_bracket(dist: DistSpec, s: float) -> TailBracket:
    """Closed-form lower and upper bounds on the tail, valid for s > theta + 1."""
    t = float(s) - dist.theta
    if not t > 1.0:
        raise ValueError("tail bracket requires s > theta + 1")
    a = dist.alpha
    c0 = normalizing_constant(a)
    decay = math.exp(-(t**a))
    lead = 1.0 / (a * t ** (a - 1.0))
    corr = abs(a - 1.0) / (a * a * t ** (2.0 * a - 1.0))
    if a >= 1.0:
        lo, hi = lead - corr, lead
    else:
        lo, hi = lead, lead + corr
    return TailBracket(max(c0 * lo * decay, 0.0), min(c0 * hi * decay, 1.0))


def log_tail_curvature_bound(dist: DistSpec, s: float) -> float:
    """Bound on |d^2/ds^2 log P(s)| for s well to the right of theta."""
    t = float(s) - dist.theta
    if not t > 1.0:
        raise ValueError("curvature bound requires s > theta + 1")
    a = dist.alpha
    if a >= 1.0:
        return a**3 * (a - 1.0) * t ** (3 * a - 2) / (a * t**a - (a - 1.0)) ** 2
    return a * (1.0 - a) * t ** (a - 2.0)


def sample(dist: DistSpec, rng: np.random.Generator, size=None):
    """Draw theta + B * G^(1/alpha) with B a fair sign and G ~ Gamma(1/alpha)."""
    g = rng.standard_gamma(1.0 / dist.alpha, size=size)
    sign = np.where(rng.random(size=size) < 0.5, -1.0, 1.0)
    return _out(dist.theta + sign * g ** (1.0 / dist.alpha))
