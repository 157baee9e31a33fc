"""On/off Markovian downlink traffic, one independent stream per station."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrafficParams:
    t_on_mean: float = 1.0
    t_off_mean: float = 3.0
    demand_min: float = 1e6
    demand_max: float = 5e6

    def __post_init__(self):
        if self.t_on_mean <= 0 or self.t_off_mean <= 0:
            raise ValueError("on/off means must be positive")
        if not 0 <= self.demand_min <= self.demand_max:
            raise ValueError("need 0 <= demand_min <= demand_max")

    @property
    def mean_offered_load(self) -> float:
        """Average required throughput per station (bits/s)."""
        mean_demand = 0.5 * (self.demand_min + self.demand_max)
        return mean_demand * self.t_on_mean / (self.t_on_mean + self.t_off_mean)


def next_on_duration(rng: np.random.Generator, p: TrafficParams = TrafficParams()) -> float:
    return float(rng.exponential(p.t_on_mean))


def next_off_duration(rng: np.random.Generator, p: TrafficParams = TrafficParams()) -> float:
    return float(rng.exponential(p.t_off_mean))


def sample_demand(rng: np.random.Generator, p: TrafficParams = TrafficParams()) -> float:
    if p.demand_min == p.demand_max:
        return float(p.demand_min)
    return float(rng.uniform(p.demand_min, p.demand_max))


class TrafficSource:
    """Generates a station's flows in blocks.

    Flow ``k`` starts after an off period and lasts an on period; its demand is
    redrawn at every start. Stations begin in the off state at ``t = 0``.
    Off periods, on periods and demands come from separate child streams, so
    the realisation does not depend on the block size.
    """

    def __init__(self, rng: np.random.Generator, params: TrafficParams):
        self.rng = rng
        self._off, self._on, self._demand = rng.spawn(3)
        self.params = params
        self.cursor = 0.0  # end of the last generated flow

    def block(self, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = self.params
        off = self._off.exponential(p.t_off_mean, size)
        on = self._on.exponential(p.t_on_mean, size)
        if p.demand_min == p.demand_max:
            demand = np.full(size, float(p.demand_min))
        else:
            demand = self._demand.uniform(p.demand_min, p.demand_max, size)
        # cumulative sums keep the timeline exactly consistent between blocks
        steps = np.empty(2 * size)
        steps[0::2] = off
        steps[1::2] = on
        edges = self.cursor + np.cumsum(steps)
        starts = edges[0::2]
        ends = edges[1::2]
        self.cursor = float(ends[-1])
        return starts, ends, demand
