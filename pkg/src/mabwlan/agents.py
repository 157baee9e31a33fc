"""Learning agents: channel selection at APs and AP selection at stations.

Both agents share the same activation cycle. On every activation the agent
scores the arm it has been playing over the trailing window, updates that
arm's posterior, draws a new arm by Thompson sampling and hands it back to the
engine. Deferral (an owner never reconfigures mid-transfer) is the engine's
job; :func:`defer_if_busy` states the rule for a known set of flows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bandit import ArmPosterior, select_arm, update_posterior

RewardFn = Callable[[object, float, float], Optional[float]]


@dataclass
class Agent:
    owner: int
    arms: tuple
    current: object
    period: float = 180.0
    window: float = 540.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    posteriors: list = field(default_factory=list)
    next_activation: float = 0.0
    activations: int = 0
    updates: int = 0

    kind = "agent"

    def __post_init__(self):
        self.arms = tuple(self.arms)
        if not self.arms:
            raise ValueError(f"{self.kind} agent {self.owner} has no arms")
        if len(set(self.arms)) != len(self.arms):
            raise ValueError(f"duplicate arms for {self.kind} agent {self.owner}")
        if self.period <= 0 or self.window < 0:
            raise ValueError("period must be positive and window non-negative")
        if self.current not in self.arms:
            raise ValueError(f"current action {self.current!r} is not an arm of {self.kind} agent {self.owner}")
        if not self.posteriors:
            self.posteriors = [ArmPosterior() for _ in self.arms]

    @property
    def learns(self) -> bool:
        return len(self.arms) > 1

    def posterior_of(self, arm) -> ArmPosterior:
        return self.posteriors[self.arms.index(arm)]


class DcaAgent(Agent):
    """Channel selection for one AP; arms are channel numbers."""

    kind = "dca"


class DapsAgent(Agent):
    """AP selection for one station; arms are AP ids."""

    kind = "daps"


def on_activation(agent: Agent, now: float, reward_fn: RewardFn) -> object:
    """Run one activation cycle and return the arm to play next.

    ``reward_fn(arm, lo, hi)`` returns the time-averaged reward of ``arm`` over
    ``[lo, hi]``, or ``None`` if nothing was observed. Without a sample the
    posteriors are left alone and the current arm is kept.
    """
    agent.activations += 1
    agent.next_activation = now + agent.period
    if not agent.learns:
        return agent.current
    r = reward_fn(agent.current, now - agent.window, now)
    if r is None:
        return agent.current
    k = agent.arms.index(agent.current)
    agent.posteriors[k] = update_posterior(agent.posteriors[k], min(1.0, max(0.0, r)))
    agent.updates += 1
    return agent.arms[select_arm(agent.posteriors, agent.rng)]


def defer_if_busy(now: float, flow_ends: Sequence[float]) -> float:
    """Activation time for a timer expiring at ``now`` given the owner's active flows."""
    pending = [t for t in flow_ends if t > now]
    return max(pending) if pending else now


def build_station_action_set(rssi_row: np.ndarray, rssi_th: float, cca: float) -> list[int]:
    """Candidate APs for one station from its per-AP RSSI (dBm)."""
    rssi_row = np.asarray(rssi_row, dtype=float)
    above = np.flatnonzero(rssi_row >= rssi_th)
    if above.size:
        return above.tolist()
    best = int(np.argmax(rssi_row)) if rssi_row.size else -1
    if best < 0 or rssi_row[best] < cca:
        raise ValueError("station senses no AP above the CCA threshold")
    return [best]


def ssf_associate(rssi_row: np.ndarray, candidates: Sequence[int]) -> int:
    """Strongest-signal-first choice among ``candidates`` (lowest id on ties)."""
    if len(candidates) == 0:
        raise ValueError("no candidate APs")
    cand = np.asarray(candidates)
    vals = np.asarray(rssi_row, dtype=float)[cand]
    best = vals.max()
    return int(cand[vals == best].min())


def apply_channel_switch(net, ap: int, channel: int, channels: Sequence[int]) -> bool:
    """Retune ``ap``; returns whether anything changed."""
    if channel not in channels:
        raise ValueError(f"channel {channel} is not in the shared channel set {tuple(channels)}")
    if net.channel_of(ap) == channel:
        return False
    net.set_channel(ap, channel)
    return True


def apply_reassociation(net, station: int, ap: int, action_set: Sequence[int]) -> bool:
    """Move ``station`` to ``ap``; returns whether anything changed."""
    if ap not in action_set:
        raise ValueError(f"AP {ap} is outside station {station}'s action set {tuple(action_set)}")
    if net.assoc_of(station) == ap:
        return False
    net.set_association(station, ap)
    return True
