"""Stopping rules and their exact or Rao-Blackwellized values.

A threshold rule started at ``n = 1`` stops at the first draw ``X_n >= S`` and
earns ``gamma^n X_n``. Its value is

    V(S) = gamma * mu(S) * P(S) / ((1 - gamma) + gamma * P(S)),

which carries the leading ``gamma`` of the first draw, so ``V(S*) = S*``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import dist as _dist
from .bellman import Discount, solve_threshold, solve_thresholds
from .dist import DistSpec, _log_excess_over_theta, _log_tail
from .inference import child_seed, mle_location_rows
from .quadrature import integrate

_KINDS = ("oracle", "perturbed", "plugin")


@dataclass(frozen=True)
class PolicySpec:
    """Which threshold rule to run: ``oracle``, ``perturbed`` or ``plugin``."""

    kind: str
    epsilon: float = 0.0
    n: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "plugin":
            if int(self.n) != self.n or self.n < 1:
                raise ValueError("plug-in policy needs n >= 1")
            object.__setattr__(self, "n", int(self.n))
        if not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")

    @classmethod
    def oracle(cls) -> PolicySpec:
        return cls("oracle")

    @classmethod
    def perturbed(cls, epsilon: float) -> PolicySpec:
        return cls("perturbed", epsilon=float(epsilon))

    @classmethod
    def plugin(cls, n: int) -> PolicySpec:
        return cls("plugin", n=n)

    @property
    def label(self) -> str:
        if self.kind == "perturbed":
            return f"perturbed(eps={self.epsilon:.6g})"
        if self.kind == "plugin":
            return f"plugin(N={self.n})"
        return "oracle"

    @property
    def parameter(self) -> float:
        """The epsilon or N this rule is indexed by (0 for the oracle)."""
        return float(self.n) if self.kind == "plugin" else self.epsilon


@dataclass(frozen=True)
class RegretReport:
    v_star: float
    v_policy: float
    relative_regret: float
    ci_halfwidth: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _values(alpha: float, theta: float, gamma: float, s):
    """``(V, log P, mu)`` at thresholds ``s`` under truth (alpha, theta)."""
    s = np.asarray(s, dtype=float)
    lt = _log_tail(alpha, theta, s)
    mu = theta + np.exp(_log_excess_over_theta(alpha, theta, s, lt))
    p = np.exp(lt)
    v = gamma * mu * p / ((1.0 - gamma) + gamma * p)
    return v, lt, mu


def _regret_against(truth: DistSpec, disc: Discount, s_star: float, s) -> np.ndarray:
    """Relative regret of thresholds ``s`` against the optimum ``s_star``.

    The tail ratio is taken as a difference of logs so that overshooting
    thresholds keep full relative accuracy.
    """
    g = disc.gamma
    _, lt_star, mu_star = _values(truth.alpha, truth.theta, g, s_star)
    _, lt, mu = _values(truth.alpha, truth.theta, g, s)
    log_ratio = (
        np.log(mu / mu_star)
        + (lt - lt_star)
        + np.log((1.0 - g) + g * np.exp(lt_star))
        - np.log((1.0 - g) + g * np.exp(lt))
    )
    return -np.expm1(log_ratio)


def policy_value(truth: DistSpec, disc: Discount, s):
    """Expected discounted reward of the threshold rule at ``s``."""
    return _dist._out(_values(truth.alpha, truth.theta, disc.gamma, s)[0])


def oracle_value(truth: DistSpec, disc: Discount) -> float:
    return float(policy_value(truth, disc, solve_threshold(truth, disc).value))


def expected_stop_time(truth: DistSpec, s):
    """Mean of the geometric stopping index, 1 / P(s)."""
    return _dist._out(np.exp(-_log_tail(truth.alpha, truth.theta, s)))


def policy_threshold(truth: DistSpec, disc: Discount, epsilon: float = 0.0) -> float:
    """Threshold the rule computes when it believes the location is theta + epsilon."""
    return solve_threshold(truth.shifted(epsilon), disc).value


def perturbed_regret(truth: DistSpec, disc: Discount, epsilon: float) -> RegretReport:
    """Exact regret of running the optimal rule for ``theta + epsilon``."""
    s_star = solve_threshold(truth, disc).value
    s_eps = policy_threshold(truth, disc, epsilon)
    v_star = float(policy_value(truth, disc, s_star))
    v_pol = float(policy_value(truth, disc, s_eps))
    r = float(_regret_against(truth, disc, s_star, s_eps)) + 0.0  # no negative zero
    return RegretReport(v_star, v_pol, r)


def _check_plugin(n: int, reps: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if int(reps) != reps or reps < 1:
        raise ValueError("reps must be a positive integer")


def plugin_draws(
    truth: DistSpec, disc: Discount, n: int, reps: int, seed=0, parallelism: int = 1, block: int = 4096
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-replication ``(theta_hat, threshold, regret)`` of the post-exploration rule.

    Replication ``i`` draws from its own stream keyed by ``(seed, i)``, so the
    output does not depend on ``parallelism`` or ``block``.
    """
    _check_plugin(n, reps)
    s_star = solve_threshold(truth, disc).value

    def run(start: int):
        stop = min(start + block, reps)
        rows = np.stack(
            [
                np.atleast_1d(_dist.sample(truth, np.random.default_rng(child_seed(seed, i)), n))
                for i in range(start, stop)
            ]
        )
        est = mle_location_rows(rows, truth.alpha)
        thr = solve_thresholds(truth.alpha, est, disc)
        return est, thr, _regret_against(truth, disc, s_star, thr)

    starts = range(0, reps, block)
    if parallelism > 1 and reps > block:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return tuple(np.concatenate([p[j] for p in parts]) for j in range(3))


def plugin_regret(
    truth: DistSpec, disc: Discount, n: int, reps: int, seed=0, parallelism: int = 1
) -> RegretReport:
    """Explore ``n`` draws, plug in the MLE, commit to its threshold.

    The commit phase is valued exactly for each replicated estimate and the
    ``gamma^n`` cost of exploring is applied in closed form.
    """
    _, _, inner = plugin_draws(truth, disc, n, reps, seed, parallelism)
    return plugin_report(truth, disc, n, inner)


def plugin_report(truth: DistSpec, disc: Discount, n: int, inner: np.ndarray) -> RegretReport:
    """Combine per-replication commit-phase regrets with the exploration discount."""
    inner = np.asarray(inner, dtype=float)
    v_star = oracle_value(truth, disc)
    disc_n = disc.gamma**n
    r = 1.0 - disc_n * (1.0 - float(inner.mean()))
    ci = 1.96 * disc_n * float(inner.std(ddof=1)) / math.sqrt(inner.size) if inner.size > 1 else None
    return RegretReport(v_star, v_star * (1.0 - r), r, ci)


def _quadrature_map(alpha: float):
    """Map from a smooth variable u >= 0 to the offset t = x - theta >= 0.

    For alpha < 1 the density has a cusp at theta; t = u^(1/alpha) removes it.
    Returns ``(t_of_u, jacobian, u_max)``.
    """
    t_max = 5.0 * 60.0 ** (1.0 / alpha)
    if alpha < 1.0:
        p = 1.0 / alpha
        return (lambda u: u**p), (lambda u: p * u ** (p - 1.0)), t_max**alpha
    return (lambda u: u), (lambda u: np.ones_like(u)), t_max


def expected_inner_regret(truth: DistSpec, disc: Discount, epsabs: float = 1e-7) -> tuple[float, float]:
    """E[regret of the rule for theta + (X - theta)] over one draw X, by quadrature."""
    a, c0 = truth.alpha, _dist.normalizing_constant(truth.alpha)
    s_star = solve_threshold(truth, disc).value
    t_of, jac, u_max = _quadrature_map(a)

    def integrand(u):
        t = t_of(u)
        both = np.concatenate([truth.theta + t, truth.theta - t])
        thr = solve_thresholds(a, both, disc)
        reg = _regret_against(truth, disc, s_star, thr)
        return c0 * np.exp(-(t**a)) * jac(u) * (reg[: t.size] + reg[t.size :])

    edges = np.concatenate([[0.0], np.geomspace(1e-4 * u_max, u_max, 25)])
    return integrate(integrand, edges, epsabs=epsabs)


def plugin_regret_quadrature(truth: DistSpec, disc: Discount) -> RegretReport:
    """Deterministic plug-in regret for a single exploratory draw."""
    inner, _ = expected_inner_regret(truth, disc)
    v_star = oracle_value(truth, disc)
    r = 1.0 - disc.gamma * (1.0 - inner)
    return RegretReport(v_star, v_star * (1.0 - r), r)
