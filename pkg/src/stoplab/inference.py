"""Maximum-likelihood location estimates with the shape held known."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import DistSpec, _check_alpha, sample


@dataclass(frozen=True)
class SampleBatch:
    values: tuple[float, ...]
    alpha: float

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(self.values, dtype=float)))
        if not vals:
            raise ValueError("sample batch must be nonempty")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    def __len__(self) -> int:
        return len(self.values)


def log_likelihood(values, alpha: float, theta) -> np.ndarray:
    """Sum of -|x - theta|^alpha, constants dropped; ``theta`` may be an array."""
    x = np.asarray(values, dtype=float).ravel()
    th = np.asarray(theta, dtype=float)
    out = -(np.abs(x - th[..., None]) ** alpha).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _score_bisection_rows(x: np.ndarray, alpha: float, tol: float) -> np.ndarray:
    """Row-wise root of the score sum sign(x - t)|x - t|^(alpha - 1).

    For alpha > 1 the score is strictly decreasing, so bisection resolves the
    maximizer to ``tol``; comparing objective values (golden section) stalls
    near sqrt(machine epsilon) because the peak is flat.
    """
    lo = x.min(axis=1)
    hi = x.max(axis=1)
    # each row stops on its own width, so a row's answer ignores its batch mates
    open_ = np.flatnonzero(hi - lo > tol)
    while open_.size:
        a, b = lo[open_], hi[open_]
        mid = 0.5 * (a + b)
        # stop a row once floating point cannot split its bracket further
        moving = (mid > a) & (mid < b)
        open_, a, b, mid = open_[moving], a[moving], b[moving], mid[moving]
        d = x[open_] - mid[:, None]
        score = (np.sign(d) * np.abs(d) ** (alpha - 1.0)).sum(axis=1)
        up = score > 0
        lo[open_[up]] = mid[up]
        hi[open_[~up]] = mid[~up]
        open_ = open_[hi[open_] - lo[open_] > tol]
    return 0.5 * (lo + hi)


def _best_sample_point_rows(x: np.ndarray, alpha: float) -> np.ndarray:
    """For alpha <= 1 the objective is convex between order statistics, so
    its maximum sits on a sample point; ties go to the smallest."""
    xs = np.sort(x, axis=1)
    obj = -(np.abs(xs[:, None, :] - xs[:, :, None]) ** alpha).sum(axis=2)
    idx = np.argmax(obj, axis=1)
    return xs[np.arange(xs.shape[0]), idx]


def mle_location_rows(values, alpha: float, tol: float = 1e-10) -> np.ndarray:
    """MLE of theta for each row of a ``(reps, n)`` matrix."""
    alpha = _check_alpha(alpha)
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("expected a (reps, n) matrix with n >= 1")
    n = x.shape[1]
    if n == 1:
        return x[:, 0].copy()
    if alpha == 2.0:
        return x.mean(axis=1)
    if alpha == 1.0:
        return np.sort(x, axis=1)[:, (n - 1) // 2]
    if alpha > 1.0:
        return _score_bisection_rows(x, alpha, tol)
    return _best_sample_point_rows(x, alpha)


def mle_location(batch: SampleBatch, tol: float = 1e-10) -> float:
    """theta maximizing the likelihood of ``batch`` under its known shape."""
    return float(mle_location_rows(np.asarray(batch.values)[None, :], batch.alpha, tol)[0])


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Seed sequence for the stream addressed by ``key`` under ``seed``.

    Unlike ``SeedSequence.spawn`` this is stateless: the same (seed, key)
    always yields the same stream.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return np.random.SeedSequence(seed, spawn_key=key)


def replication_streams(seed, reps: int, start: int = 0) -> list[np.random.Generator]:
    """One independent generator per replication, keyed by (seed, index)."""
    return [np.random.default_rng(child_seed(seed, i)) for i in range(start, start + reps)]


def draw_batches(dist: DistSpec, n: int, reps: int, seed) -> np.ndarray:
    """``(reps, n)`` matrix; row ``i`` uses the stream of replication ``i``."""
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be positive")
    return np.stack([np.atleast_1d(sample(dist, rng, n)) for rng in replication_streams(seed, reps)])


def estimator_dispersion(dist: DistSpec, n: int, reps: int, seed=0) -> float:
    """Sample standard deviation of the MLE error over ``reps`` batches of size ``n``."""
    if reps < 2:
        raise ValueError("reps must be at least 2")
    est = mle_location_rows(draw_batches(dist, n, reps, seed), dist.alpha)
    return float(np.std(est - dist.theta, ddof=1))
