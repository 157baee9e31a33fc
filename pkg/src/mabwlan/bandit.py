"""Gaussian Thompson sampling, time-windowed reward aggregation and regret."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np


@dataclass(frozen=True)
class ArmPosterior:
    mu_hat: float = 0.0
    n: int = 0

    @property
    def sigma2(self) -> float:
        return 1.0 / (self.n + 1)


def update_posterior(p: ArmPosterior, r: float) -> ArmPosterior:
    """One Thompson-sampling update: ``mu <- (mu*n + r)/(n + 2)``, ``n <- n + 1``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reward must lie in [0, 1], got {r}")
    return ArmPosterior((p.mu_hat * p.n + r) / (p.n + 2), p.n + 1)


def posterior_mean_closed_form(rewards: Sequence[float]) -> float:
    """Mean produced by ``len(rewards)`` successive :func:`update_posterior` calls.

    Unrolling the recurrence gives ``sum(k * r_k) / (n * (n + 1))``: a
    recency-weighted average shrunk by one half.
    """
    n = len(rewards)
    if n == 0:
        return 0.0
    return sum(k * r for k, r in enumerate(rewards, start=1)) / (n * (n + 1))


def select_arm(posteriors: Sequence[ArmPosterior], rng: np.random.Generator) -> int:
    """Draw one sample per arm from its posterior and return the argmax (lowest index on ties)."""
    k = len(posteriors)
    if k == 0:
        raise ValueError("no arms to select from")
    if k == 1:
        return 0
    mu = np.fromiter((p.mu_hat for p in posteriors), float, k)
    sd = np.fromiter((math.sqrt(p.sigma2) for p in posteriors), float, k)
    draws = mu + sd * rng.standard_normal(k)
    return int(np.argmax(draws))


@dataclass
class RewardHistory:
    """Piecewise-constant reward signal of one agent.

    Each sample holds its value from its timestamp until the next sample (of
    any arm) or until :meth:`close` marks the signal as unobserved. Samples are
    attributed to the arm in use when they were recorded.
    """

    window: float = 540.0
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)  # None marks a gap
    arms: list = field(default_factory=list)

    def _append(self, t: float, value, arm) -> None:
        if self.times and t < self.times[-1]:
            raise ValueError(f"timestamp {t} precedes last sample at {self.times[-1]}")
        self.times.append(t)
        self.values.append(value)
        self.arms.append(arm)

    def close(self, t: float) -> None:
        self._append(t, None, None)

    def prune(self, before: float) -> None:
        """Drop samples that ended before ``before``."""
        k = bisect.bisect_right(self.times, before) - 1
        if k > 0:
            del self.times[:k], self.values[:k], self.arms[:k]


def record_sample(h: RewardHistory, arm: Hashable, t: float, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"reward sample must lie in [0, 1], got {value}")
    h._append(t, value, arm)


def windowed_reward(h: RewardHistory, arm: Hashable, now: float, window: float | None = None) -> float | None:
    """Time-weighted mean of ``arm``'s signal over ``[now - window, now]``."""
    window = h.window if window is None else window
    lo = now - window
    num = 0.0
    den = 0.0
    times = h.times
    start = max(bisect.bisect_right(times, lo) - 1, 0)
    for k in range(start, len(times)):
        t0 = times[k]
        if t0 >= now:
            break
        t1 = times[k + 1] if k + 1 < len(times) else now
        if h.values[k] is None or h.arms[k] != arm:
            continue
        a, b = max(t0, lo), min(t1, now)
        if b > a:
            num += h.values[k] * (b - a)
            den += b - a
    if den > 0:
        return num / den
    # zero-width window: the value current at ``now``
    if window == 0 and times:
        k = bisect.bisect_right(times, now) - 1
        if k >= 0 and h.values[k] is not None and h.arms[k] == arm:
            return h.values[k]
    return None


@dataclass
class RegretLedger:
    cumulative_regret: float = 0.0
    rounds: int = 0


def regret_update(ledger: RegretLedger, r_star: float, r: float) -> RegretLedger:
    return RegretLedger(ledger.cumulative_regret + (r_star - r), ledger.rounds + 1)
