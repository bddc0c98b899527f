"""Seeded Monte Carlo episodes and the experiment sweeps built on them.

Random streams are addressed by integer keys under the master seed: episode
block ``b`` of grid cell ``c`` always sees the same stream, so tables do not
depend on how work is spread across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .bellman import (
    Discount,
    critical_perturbation,
    critical_sample_size,
    solve_threshold,
    solve_thresholds,
)
from .dist import DistSpec, _log_tail, sample, variance
from .inference import child_seed, mle_location_rows
from .policy import (
    PolicySpec,
    RegretReport,
    expected_stop_time,
    perturbed_regret,
    plugin_draws,
    plugin_regret,
    plugin_report,
)

RESULT_COLUMNS = (
    "alpha",
    "theta",
    "gamma",
    "effective_horizon",
    "policy",
    "epsilon_or_N",
    "v_star",
    "v_policy",
    "relative_regret",
    "ci_halfwidth",
    "mean_tau",
    "truncated_fraction",
    "error",
)

PHASE_COLUMNS = (
    "section",
    "alpha",
    "theta",
    "gamma",
    "effective_horizon",
    "multiplier",
    "critical_value",
    "epsilon_or_N",
    "relative_regret",
    "ci_halfwidth",
    "scaled_stop_time",
    "error",
)

_BLOCK = 4096
_MAX_CHUNK_CELLS = 1 << 20


@dataclass(frozen=True)
class SimConfig:
    """``horizon_cap=None`` means 100 effective horizons, rounded up."""

    master_seed: int = 0
    reps: int = 10_000
    horizon_cap: int | None = None
    parallelism: int = 1

    def __post_init__(self) -> None:
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.horizon_cap is not None and (int(self.horizon_cap) != self.horizon_cap or self.horizon_cap < 1):
            raise ValueError("horizon_cap must be >= 1")
        if int(self.parallelism) != self.parallelism or self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def cap_for(self, disc: Discount) -> int:
        if self.horizon_cap is not None:
            return int(self.horizon_cap)
        return 100 * math.ceil(disc.effective_horizon - 1e-9)


@dataclass(frozen=True)
class PlugInRule:
    """Plug-in policy whose exploration length depends on the cell.

    ``rule`` is ``"log_horizon_squared"`` for ceil(L^2) or ``"critical"`` for
    ceil(multiplier * critical sample size).
    """

    rule: str
    multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.rule not in ("log_horizon_squared", "critical"):
            raise ValueError(f"unknown exploration rule {self.rule!r}")
        if not self.multiplier > 0:
            raise ValueError("multiplier must be positive")

    @property
    def label(self) -> str:
        if self.rule == "log_horizon_squared":
            return "plugin(N=ceil(L^2))"
        return f"plugin(N=ceil({self.multiplier:g}*Ncrit))"

    def resolve(self, alpha: float, disc: Discount) -> PolicySpec:
        if self.rule == "log_horizon_squared":
            n = math.ceil(disc.log_horizon**2 - 1e-12)
        else:
            n = math.ceil(self.multiplier * critical_sample_size(alpha, disc) - 1e-12)
        return PolicySpec.plugin(max(n, 1))


@dataclass(frozen=True)
class ExperimentGrid:
    alphas: Sequence[float]
    thetas: Sequence[float]
    gammas: Sequence[float]
    policy_specs: Sequence[PolicySpec | PlugInRule] = ()
    perturbation_multipliers: Sequence[float] = ()

    def __post_init__(self) -> None:
        for name in ("alphas", "thetas", "gammas"):
            if not len(getattr(self, name)):
                raise ValueError(f"{name} must be nonempty")
        for a in self.alphas:
            DistSpec(a, 0.0)
        for th in self.thetas:
            DistSpec(1.0, th)
        for g in self.gammas:
            Discount(g)

    def cells(self) -> list[tuple[float, float, float, PolicySpec | PlugInRule | float]]:
        """Cells in table order; a bare float stands for a z multiplier."""
        policies: list = list(self.policy_specs) + [float(z) for z in self.perturbation_multipliers]
        return [(a, th, g, p) for a in self.alphas for th in self.thetas for g in self.gammas for p in policies]


class Episode(NamedTuple):
    tau: int
    reward: float
    truncated: bool


@dataclass(frozen=True)
class EpisodeStats:
    n: int
    mean_reward: float
    reward_se: float
    mean_tau: float
    tau_se: float
    truncated_fraction: float
    taus: np.ndarray = field(repr=False, compare=False)
    rewards: np.ndarray = field(repr=False, compare=False)


def _threshold_for(truth: DistSpec, policy: PolicySpec, disc: Discount) -> float:
    return solve_threshold(truth.shifted(policy.epsilon if policy.kind == "perturbed" else 0.0), disc).value


def run_episode(
    truth: DistSpec, policy: PolicySpec, disc: Discount, config: SimConfig, rng: np.random.Generator
) -> Episode:
    """One literal episode, drawing one observation at a time."""
    cap = config.cap_for(disc)
    n = 0
    if policy.kind == "plugin":
        explore = np.array([sample(truth, rng) for _ in range(policy.n)])
        n = policy.n
        s = solve_threshold(DistSpec(truth.alpha, float(mle_location_rows(explore[None, :], truth.alpha)[0])), disc).value
    else:
        s = _threshold_for(truth, policy, disc)
    while n < cap:
        n += 1
        x = sample(truth, rng)
        if x >= s:
            return Episode(n, disc.gamma**n * x, False)
    return Episode(cap, 0.0, True)


def _stop_phase(truth, thresholds, disc, rng, start, cap):
    """Vectorized first-passage above per-episode thresholds after ``start`` draws."""
    m = thresholds.size
    taus = np.full(m, cap, dtype=np.int64)
    rewards = np.zeros(m)
    truncated = np.ones(m, dtype=bool)
    active = np.arange(m)
    t0 = start
    chunk = 8
    log_g = math.log(disc.gamma)
    while active.size and t0 < cap:
        width = int(min(chunk, cap - t0, max(1, _MAX_CHUNK_CELLS // active.size)))
        draws = np.asarray(sample(truth, rng, (active.size, width)))
        hit = draws >= thresholds[active][:, None]
        found = hit.any(axis=1)
        first = hit.argmax(axis=1)
        idx = active[found]
        tau = t0 + first[found] + 1
        taus[idx] = tau
        rewards[idx] = np.exp(tau * log_g) * draws[found, first[found]]
        truncated[idx] = False
        active = active[~found]
        t0 += width
        chunk *= 2
    return taus, rewards, truncated


def _simulate_block(truth, policy, disc, cap, size, seed_seq, base_threshold):
    rng = np.random.default_rng(seed_seq)
    if policy.kind == "plugin":
        explore = np.asarray(sample(truth, rng, (size, policy.n))).reshape(size, policy.n)
        thr = solve_thresholds(truth.alpha, mle_location_rows(explore, truth.alpha), disc)
        start = policy.n
    else:
        thr = np.full(size, base_threshold)
        start = 0
    if start >= cap:
        return np.full(size, cap, dtype=np.int64), np.zeros(size), np.ones(size, dtype=bool)
    return _stop_phase(truth, thr, disc, rng, start, cap)


def simulate_episodes(
    truth: DistSpec,
    policy: PolicySpec,
    disc: Discount,
    config: SimConfig,
    stream: tuple[int, ...] = (0,),
    episodes: int | None = None,
) -> EpisodeStats:
    """``episodes`` (default ``config.reps``) seeded episodes in fixed-size blocks."""
    n = config.reps if episodes is None else int(episodes)
    if n < 1:
        raise ValueError("episodes must be >= 1")
    cap = config.cap_for(disc)
    base = None if policy.kind == "plugin" else _threshold_for(truth, policy, disc)
    blocks = [(b, min(_BLOCK, n - b * _BLOCK)) for b in range(math.ceil(n / _BLOCK))]

    def run(item):
        b, size = item
        return _simulate_block(truth, policy, disc, cap, size, child_seed(config.master_seed, *stream, b), base)

    if config.parallelism > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(item) for item in blocks]
    taus = np.concatenate([p[0] for p in parts])
    rewards = np.concatenate([p[1] for p in parts])
    trunc = np.concatenate([p[2] for p in parts])
    se = (lambda v: float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan)
    return EpisodeStats(
        n=n,
        mean_reward=float(rewards.mean()),
        reward_se=se(rewards),
        mean_tau=float(taus.mean()),
        tau_se=se(taus.astype(float)),
        truncated_fraction=float(trunc.mean()),
        taus=taus,
        rewards=rewards,
    )


# -- experiment tables ---------------------------------------------------------


def _resolve_policy(spec, alpha: float, disc: Discount) -> tuple[PolicySpec, str]:
    if isinstance(spec, PlugInRule):
        return spec.resolve(alpha, disc), spec.label
    if isinstance(spec, float):
        return PolicySpec.perturbed(spec * math.sqrt(variance(alpha))), _describe(spec)
    return spec, spec.label


def _describe(spec) -> str:
    if isinstance(spec, float):
        return f"perturbed(z={spec:g})"
    return spec.label


def _blank_row(alpha, theta, gamma) -> dict:
    row = dict.fromkeys(RESULT_COLUMNS, math.nan)
    row.update(alpha=alpha, theta=theta, gamma=gamma, effective_horizon=1.0 / (1.0 - gamma), error="")
    row["ci_halfwidth"] = None
    return row


def _run_cell(index: int, cell, config: SimConfig) -> dict:
    alpha, theta, gamma, spec = cell
    row = _blank_row(float(alpha), float(theta), float(gamma))
    row["policy"] = _describe(spec)
    try:
        truth, disc = DistSpec(alpha, theta), Discount(gamma)
        policy, label = _resolve_policy(spec, truth.alpha, disc)
        row["policy"] = label
        row["epsilon_or_N"] = policy.parameter
        if policy.kind == "plugin":
            rep: RegretReport = plugin_regret(
                truth, disc, policy.n, config.reps, seed=child_seed(config.master_seed, index, 0)
            )
        else:
            rep = perturbed_regret(truth, disc, policy.epsilon)
        row.update(
            v_star=rep.v_star, v_policy=rep.v_policy, relative_regret=rep.relative_regret, ci_halfwidth=rep.ci_halfwidth
        )
        stats = simulate_episodes(truth, policy, disc, config, stream=(index, 1))
        row.update(mean_tau=stats.mean_tau, truncated_fraction=stats.truncated_fraction)
    except (ArithmeticError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_experiment(grid: ExperimentGrid, config: SimConfig) -> list[dict]:
    """One row per grid cell, in ``grid.cells()`` order."""
    cells = grid.cells()
    if config.parallelism > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            return list(pool.map(lambda ic: _run_cell(ic[0], ic[1], config), enumerate(cells)))
    return [_run_cell(i, c, config) for i, c in enumerate(cells)]


def _phase_row(section, alpha, theta, gamma, m) -> dict:
    row = dict.fromkeys(PHASE_COLUMNS, math.nan)
    row.update(
        section=section, alpha=alpha, theta=theta, gamma=gamma, effective_horizon=1.0 / (1.0 - gamma), multiplier=m
    )
    row["ci_halfwidth"] = None
    row["error"] = ""
    return row


def phase_report(
    alpha: float, theta: float, gammas: Sequence[float], multipliers: Sequence[float], config: SimConfig
) -> list[dict]:
    """Regret and scaled stopping time around the critical scalings.

    For every discount and multiplier ``m`` there is a ``perturbation`` row at
    ``epsilon = m * eps_critical`` (exact) and a ``sample_size`` row at
    ``N = ceil(m * N_critical)`` (Rao-Blackwellized Monte Carlo). The scaled
    stopping time is ``(1 - gamma) * E[tau]``.
    """
    truth = DistSpec(alpha, theta)
    discs = [Discount(g) for g in gammas]
    rows = []
    index = 0
    for disc in discs:
        for m in multipliers:
            row = _phase_row("perturbation", truth.alpha, truth.theta, disc.gamma, float(m))
            try:
                eps_c = critical_perturbation(truth.alpha, disc)
                eps = m * eps_c
                rep = perturbed_regret(truth, disc, eps)
                s_eps = solve_threshold(truth.shifted(eps), disc).value
                row.update(
                    critical_value=eps_c,
                    epsilon_or_N=eps,
                    relative_regret=rep.relative_regret,
                    scaled_stop_time=(1.0 - disc.gamma) * float(expected_stop_time(truth, s_eps)),
                )
            except (ArithmeticError, ValueError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            index += 1
        for m in multipliers:
            row = _phase_row("sample_size", truth.alpha, truth.theta, disc.gamma, float(m))
            try:
                n_c = critical_sample_size(truth.alpha, disc)
                n = max(1, math.ceil(m * n_c - 1e-12))
                seed = child_seed(config.master_seed, index, 0)
                _, thr, inner = plugin_draws(truth, disc, n, config.reps, seed=seed)
                rep = plugin_report(truth, disc, n, inner)
                mean_tau = n + float(np.exp(-_log_tail(truth.alpha, truth.theta, thr)).mean())
                row.update(
                    critical_value=n_c,
                    epsilon_or_N=float(n),
                    relative_regret=rep.relative_regret,
                    ci_halfwidth=rep.ci_halfwidth,
                    scaled_stop_time=(1.0 - disc.gamma) * mean_tau,
                )
            except (ArithmeticError, ValueError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            index += 1
    return rows
