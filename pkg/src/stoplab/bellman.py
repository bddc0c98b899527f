"""Bellman threshold for discounted stopping with i.i.d. offers.

The optimal stationary rule stops at the first draw at or above the unique
root ``S*`` of

    gamma * IT(S) - (1 - gamma) * S = 0,

where ``IT(S)`` is the integrated tail. The left side is strictly decreasing,
so bisection is always safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import DistSpec, _check_alpha, _log_integrated_tail, _log_tail


@dataclass(frozen=True)
class Discount:
    """Per-period discount factor in the open unit interval."""

    gamma: float

    def __post_init__(self) -> None:
        g = float(self.gamma)
        if not 0.0 < g < 1.0:
            raise ValueError("gamma must lie strictly between 0 and 1")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def from_horizon(cls, horizon: float) -> Discount:
        if not horizon > 1.0:
            raise ValueError("effective horizon must exceed 1")
        return cls(1.0 - 1.0 / horizon)

    @property
    def effective_horizon(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def log_horizon(self) -> float:
        """L = log(1 / (1 - gamma))."""
        return -math.log1p(-self.gamma)


@dataclass(frozen=True)
class Threshold:
    value: float
    residual: float
    iterations: int


class ThresholdConvergenceError(ArithmeticError):
    """The root finder could not certify a threshold."""


_MAX_DOUBLINGS = 60
_MAX_BISECTIONS = 400


def _residual(alpha, theta, gamma, s):
    """gamma * IT(s) - (1 - gamma) * s; strictly decreasing in s."""
    if np.ndim(s) == 0 and np.ndim(theta) == 0:
        return gamma * math.exp(_log_integrated_tail(alpha, theta, s)) - (1.0 - gamma) * s
    return gamma * np.exp(_log_integrated_tail(alpha, theta, s)) - (1.0 - gamma) * s


def _initial_upper(alpha, theta, gamma):
    big_l = -math.log1p(-gamma)
    return np.maximum(theta, 0.0) + (2.0 * big_l + 10.0) ** (1.0 / alpha) + 1.0


def _newton_step(alpha, theta, gamma, s):
    """One Newton step on the residual, written without cancellation.

    With slope -(gamma P + 1 - gamma) the step ``s - f / f'`` simplifies to
    gamma (s P + IT) / ((1 - gamma) + gamma P), which stays positive even when
    the root is far below the bisection resolution.
    """
    if np.ndim(s) == 0 and np.ndim(theta) == 0:
        p = math.exp(_log_tail(alpha, theta, s))
        it = math.exp(_log_integrated_tail(alpha, theta, s))
    else:
        p = np.exp(_log_tail(alpha, theta, s))
        it = np.exp(_log_integrated_tail(alpha, theta, s))
    return gamma * (s * p + it) / ((1.0 - gamma) + gamma * p)


def _solve_scalar(alpha: float, theta: float, gamma: float, tol: float):
    lo, hi = 0.0, float(_initial_upper(alpha, theta, gamma))
    iters = 0
    for _ in range(_MAX_DOUBLINGS):
        if _residual(alpha, theta, gamma, hi) <= 0:
            break
        lo, hi = hi, 2.0 * hi
        iters += 1
    else:
        raise ThresholdConvergenceError(
            f"no sign change after {_MAX_DOUBLINGS} doublings (alpha={alpha}, gamma={gamma})"
        )
    # the residual at 0 is gamma * IT(0) > 0, so [lo, hi] brackets the root
    for _ in range(_MAX_BISECTIONS):
        if hi - lo <= 0.5 * tol * max(1.0, lo):
            break
        mid = 0.5 * (lo + hi)
        if _residual(alpha, theta, gamma, mid) > 0:
            lo = mid
        else:
            hi = mid
        iters += 1
    else:
        raise ThresholdConvergenceError("bisection did not reach the requested width")
    s = 0.5 * (lo + hi)
    f = _residual(alpha, theta, gamma, s)
    polished = min(max(_newton_step(alpha, theta, gamma, s), lo), hi)
    f_pol = _residual(alpha, theta, gamma, polished)
    if abs(f_pol) <= abs(f):
        s, f = polished, f_pol
    return s, abs(f), iters + 1


def _solve(alpha: float, theta, gamma: float, tol: float):
    """Vectorized form of ``_solve_scalar`` over an array of locations."""
    theta = np.asarray(theta, dtype=float)
    lo = np.zeros_like(theta)
    hi = np.broadcast_to(_initial_upper(alpha, theta, gamma), theta.shape).astype(float)
    iters = 0

    f_hi = _residual(alpha, theta, gamma, hi)
    for _ in range(_MAX_DOUBLINGS):
        grow = f_hi > 0
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
        f_hi = np.where(grow, _residual(alpha, theta, gamma, hi), f_hi)
        iters += 1
    else:
        raise ThresholdConvergenceError(
            f"no sign change after {_MAX_DOUBLINGS} doublings (alpha={alpha}, gamma={gamma})"
        )

    for _ in range(_MAX_BISECTIONS):
        open_ = (hi - lo) > 0.5 * tol * np.maximum(1.0, lo)
        if not open_.any():
            break
        # only unfinished entries are refined, matching the scalar stopping rule
        mid = 0.5 * (lo + hi)
        pos = _residual(alpha, theta, gamma, mid) > 0
        lo = np.where(open_ & pos, mid, lo)
        hi = np.where(open_ & ~pos, mid, hi)
        iters += 1
    else:
        raise ThresholdConvergenceError("bisection did not reach the requested width")

    s = 0.5 * (lo + hi)
    f = _residual(alpha, theta, gamma, s)
    polished = np.clip(_newton_step(alpha, theta, gamma, s), lo, hi)
    f_pol = _residual(alpha, theta, gamma, polished)
    better = np.abs(f_pol) <= np.abs(f)
    s = np.where(better, polished, s)
    f = np.where(better, f_pol, f)
    return s, np.abs(f), iters + 1


def solve_threshold(dist: DistSpec, disc: Discount, tol: float = 1e-10) -> Threshold:
    """Optimal stopping threshold ``S*`` for ``dist`` under discount ``disc``.

    ``S*`` is positive; it is returned as 0.0 only when it lies below the
    smallest positive double, as happens deep in the left of the family.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    s, res, iters = _solve_scalar(dist.alpha, dist.theta, disc.gamma, tol)
    if not (s >= 0 and res <= tol * max(1.0, s)):
        raise ThresholdConvergenceError(
            f"threshold residual {res:.3e} exceeds tolerance at S={s!r} "
            f"(alpha={dist.alpha}, theta={dist.theta}, gamma={disc.gamma})"
        )
    return Threshold(s, res, iters)


def solve_thresholds(alpha: float, thetas, disc: Discount, tol: float = 1e-10) -> np.ndarray:
    """``S*`` for many locations sharing one shape and discount."""
    alpha = _check_alpha(alpha)
    thetas = np.asarray(thetas, dtype=float)
    if not np.all(np.isfinite(thetas)):
        raise ValueError("theta values must be finite")
    if thetas.size == 0:
        return np.empty_like(thetas)
    s, res, _ = _solve(alpha, thetas, disc.gamma, tol)
    bad = ~(res <= tol * np.maximum(1.0, s))
    if np.any(bad):
        raise ThresholdConvergenceError(f"{int(bad.sum())} thresholds failed the residual check")
    return s


# -- value iteration ---------------------------------------------------------

_LITERAL_STEPS = 4096
# each jump closes all but this fraction of the gap to the tangent's fixed point
_JUMP_RESIDUAL = 1e-4


def _certified_upper(alpha: float, theta: float, gamma: float) -> float:
    """Smallest float found with ``phi(U) <= U``; every A_j is at most U."""
    lo, hi = 0.0, float(_initial_upper(alpha, theta, gamma))
    for _ in range(_MAX_DOUBLINGS):
        if _residual(alpha, theta, gamma, hi) <= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ThresholdConvergenceError("could not bound the fixed point from above")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _residual(alpha, theta, gamma, mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def value_iteration_bounds(dist: DistSpec, disc: Discount, k: int) -> tuple[float, float]:
    """Certified enclosure ``lo <= A_k <= hi`` of the finite-horizon recursion.

    ``A_0 = 0`` and ``A_j = phi(A_{j-1})`` with ``phi(A) = gamma * (A + IT(A))``.
    Short recursions are iterated literally. For long ones, ``phi`` being
    increasing gives ``A_j <= U`` for any ``U`` with ``phi(U) <= U``, and
    ``phi`` being convex puts its tangent at a lower bound below it. The
    tangent map is affine, so many steps of it are taken in closed form.
    """
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    a, th, g = dist.alpha, dist.theta, disc.gamma

    def phi(x: float) -> float:
        return g * (x + math.exp(_log_integrated_tail(a, th, x)))

    if k <= _LITERAL_STEPS:
        x = 0.0
        for _ in range(k):
            x = phi(x)
        return x, x

    upper = _certified_upper(a, th, g)
    lo = 0.0
    done = 0
    log_eta = math.log(_JUMP_RESIDUAL)
    while done < k:
        # tangent at lo has slope s = gamma * (1 - P(lo)); 1 - s is formed directly
        one_minus_s = min((1.0 - g) + g * math.exp(_log_tail(a, th, lo)), 1.0)
        step = _residual(a, th, g, lo) / one_minus_s
        if one_minus_s < 1.0:
            log_s = math.log1p(-one_minus_s)
            m = min(k - done, max(1, math.ceil(log_eta / log_s)))
            lo_new = lo + step * -math.expm1(m * log_s)
        else:
            # flat tangent: one step lands on its fixed point
            m, lo_new = 1, lo + step
        lo = min(max(lo, lo_new), upper)
        done += m
        if upper - lo <= 2.0 * np.spacing(upper):
            break
    return lo, upper


def value_iteration(dist: DistSpec, disc: Discount, k: int) -> float:
    """A_k of the backward recursion ``A_j = gamma * E[max(X, A_{j-1})]``."""
    lo, hi = value_iteration_bounds(dist, disc, k)
    return 0.5 * (lo + hi)


# -- closed forms and asymptotics --------------------------------------------


def asymptotic_threshold(dist: DistSpec, disc: Discount) -> float:
    """Leading-order threshold ``theta + L^(1/alpha)``."""
    return dist.theta + disc.log_horizon ** (1.0 / dist.alpha)


def threshold_sensitivity(dist: DistSpec, disc: Discount, s_star: float | None = None) -> float:
    """dS*/dtheta = P(S*) / (P(S*) + (1 - gamma)/gamma)."""
    if s_star is None:
        s_star = solve_threshold(dist, disc).value
    p = float(np.exp(_log_tail(dist.alpha, dist.theta, s_star)))
    g = disc.gamma
    return p / (p + (1.0 - g) / g)


def _log_log_horizon(disc: Discount) -> float:
    big_l = disc.log_horizon
    ll = math.log(big_l)
    if not ll > 0:
        raise ValueError("critical scalings need gamma > 1 - exp(-1)")
    return ll


def critical_sample_size(alpha: float, disc: Discount) -> float:
    """(L^(1 - 1/alpha) / log L)^2, the exploration length scaling for alpha > 1."""
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ValueError("critical sample size requires alpha > 1")
    ll = _log_log_horizon(disc)
    return (disc.log_horizon ** (1.0 - 1.0 / alpha) / ll) ** 2


def critical_perturbation(alpha: float, disc: Discount) -> float:
    """log L / (alpha L^(1 - 1/alpha)), the overestimation scale."""
    alpha = _check_alpha(alpha)
    ll = _log_log_horizon(disc)
    return ll / (alpha * disc.log_horizon ** (1.0 - 1.0 / alpha))
