"""CSMA/CA airtime abstraction and the load-derived metrics.

Airtime is expressed in seconds of channel time per second (s/s). An AP's
effective load is its own flows' airtime plus the own airtime of every
co-channel AP it senses above CCA; it can exceed 1, in which case every flow in
that load domain is scaled by the same satisfaction factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phy import McsEntry, PhyConstants, successful_tx_time


@dataclass(frozen=True)
class AirtimeParams:
    p_e: float = 0.1
    cw_min: int = 16
    expected_backoff: float | None = None

    def __post_init__(self):
        if not 0 <= self.p_e < 1:
            raise ValueError(f"packet error probability must be in [0, 1), got {self.p_e}")
        if self.expected_backoff is None:
            object.__setattr__(self, "expected_backoff", (self.cw_min - 1) / 2)
        if self.expected_backoff < 0:
            raise ValueError("expected backoff must be non-negative")

    @property
    def retry_factor(self) -> float:
        return 1.0 / (1.0 - self.p_e)


@dataclass(frozen=True)
class LoadMap:
    """Per-AP loads at one instant."""

    timestamp: float
    own_load: np.ndarray
    effective_load: np.ndarray

    @property
    def reward(self) -> np.ndarray:
        return np.maximum(0.0, 1.0 - self.effective_load)

    @property
    def satisfaction(self) -> np.ndarray:
        return satisfaction_array(self.effective_load)


def per_packet_time(t_s: float, p: AirtimeParams, c: PhyConstants) -> float:
    """Mean backoff plus one successful exchange."""
    return p.expected_backoff * c.t_e + t_s


def packets_per_second(demand: float, l_d: int) -> int:
    return math.ceil(demand / l_d)


def airtime_requirement(demand: float, l_d: int, mcs: McsEntry, p: AirtimeParams = AirtimeParams(),
                        c: PhyConstants = PhyConstants()) -> float:
    if demand < 0:
        raise ValueError("demand must be non-negative")
    t_s = successful_tx_time(mcs, c)
    return p.retry_factor * packets_per_second(demand, l_d) * per_packet_time(t_s, p, c)


def channel_reward(load: float) -> float:
    return max(0.0, 1.0 - load)


def satisfaction(load: float) -> float:
    if load < 0:
        raise ValueError("load must be non-negative")
    if load == 0:
        return 1.0
    return min(1.0, load) / load


def satisfaction_array(load: np.ndarray) -> np.ndarray:
    load = np.asarray(load, dtype=float)
    return np.where(load > 1.0, 1.0 / np.where(load > 1.0, load, 1.0), 1.0)


def station_throughput(demand: float, sat: float) -> float:
    return demand * sat


def allocated_airtime(airtime: float, sat: float) -> float:
    return airtime * sat


def neighbor_mask(channels: np.ndarray, sense: np.ndarray) -> np.ndarray:
    """Boolean (n, n) matrix: entry (j, k) is True when k is a co-channel neighbor of j.

    ``sense`` has shape (n_channels, n, n) and is indexed by the channel index
    stored in ``channels``.
    """
    channels = np.asarray(channels)
    n = len(channels)
    same = channels[:, None] == channels[None, :]
    sensed = sense[channels[:, None], np.arange(n)[:, None], np.arange(n)[None, :]]
    mask = same & sensed
    np.fill_diagonal(mask, False)
    return mask


def effective_loads(own_load: np.ndarray, channels: np.ndarray, sense: np.ndarray) -> np.ndarray:
    """From-scratch evaluation of the effective load of every AP."""
    own_load = np.asarray(own_load, dtype=float)
    return own_load + neighbor_mask(channels, sense) @ own_load


def effective_load(ap: int, own_load: np.ndarray, channels: np.ndarray, sense: np.ndarray) -> float:
    return float(effective_loads(own_load, channels, sense)[ap])
