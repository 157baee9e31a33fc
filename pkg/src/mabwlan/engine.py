"""Scenarios, the discrete-event control loop and batch drivers.

Flow arrivals and departures run inside the compiled kernel; everything that
happens on a coarser clock (agent activations, forced reconfigurations and
metric sampling) is ordered here in a small heap and interleaved with the
kernel by advancing it to each control event's time. Flow events at the same
instant are always handled first, matching the tie order
``flow end < flow start < forced < activation < sample`` (then node id).
"""

from __future__ import annotations

import dataclasses
import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels as K
from .agents import (DapsAgent, DcaAgent, apply_channel_switch, apply_reassociation,
                     build_station_action_set, defer_if_busy, on_activation, ssf_associate)
from .medium import AirtimeParams
from .network import LinkTables, Network
from .phy import PhyConstants, RadioConfig, default_mcs_table, mcs_table_from_rows, validate_mcs_table
from .report import RunResult
from .traffic import TrafficParams, TrafficSource

PRIO_FORCED = 2
PRIO_ACTIVATION = 3
PRIO_METRICS = 4

# stream tags mixed into seed sequences so that placement, traffic and
# learning draws never share entropy
_PLACEMENT = 0
_RUNTIME = 1

MODES = ("static", "adaptive")


@dataclass
class SimConfig:
    t_sim: float = 86400.0
    t_dca: float = 180.0
    t_daps: float = 180.0
    t_sw: float = 540.0
    p_th: float = 0.85
    cca_dbm: float = -80.0
    rssi_th_dbm: float = -75.0
    tx_power_dbm: float = 15.0
    p_e: float = 0.1
    cw_min: int = 16
    t_on: float = 1.0
    t_off: float = 3.0
    demand_min_mbps: float = 1.0
    demand_max_mbps: float = 5.0
    n_ss: int = 1
    walls: int = 4
    d_bp: float = 5.0
    agents_enabled: bool = True
    dca_enabled: bool = True
    daps_enabled: bool = True
    agent_enable_time: float = 0.0
    fixed_aps: tuple = ()  # APs whose channel agent stays off
    forced_reconfigs: tuple = ()  # (time, ap, channel)
    metrics_interval: float = 60.0
    run_seed: Optional[int] = None  # defaults to the scenario seed
    mcs_table: Optional[tuple] = None  # rows as in phy.mcs_table_to_rows

    def __post_init__(self):
        for name in ("t_sim", "t_dca", "t_daps", "metrics_interval", "t_on", "t_off"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_sw < 0:
            raise ValueError("t_sw must be non-negative")
        if not 0 < self.p_th < 1:
            raise ValueError("p_th must lie in (0, 1)")
        if self.agent_enable_time < 0:
            raise ValueError("agent_enable_time must be non-negative")
        self.fixed_aps = tuple(int(j) for j in self.fixed_aps)
        self.forced_reconfigs = tuple(
            (float(t), int(ap), int(ch)) for t, ap, ch in self.forced_reconfigs
        )
        for t, _, _ in self.forced_reconfigs:
            if not 0 <= t < self.t_sim:
                raise ValueError(f"forced reconfiguration at {t} s is outside [0, t_sim)")
        if self.mcs_table is not None:
            self.mcs_table = tuple(dict(r) for r in self.mcs_table)
        # fail early on bad radio or traffic settings
        self.radio()
        self.airtime()
        self.traffic()

    def radio(self) -> RadioConfig:
        if self.mcs_table is None:
            table = default_mcs_table(self.n_ss)
        else:
            table = mcs_table_from_rows(self.mcs_table, n_ss=self.n_ss)
        validate_mcs_table(table)
        return RadioConfig(PhyConstants(), self.d_bp, self.walls, self.tx_power_dbm, 0.0, 0.0, tuple(table))

    def airtime(self) -> AirtimeParams:
        return AirtimeParams(self.p_e, self.cw_min)

    def traffic(self) -> TrafficParams:
        return TrafficParams(self.t_on, self.t_off, self.demand_min_mbps * 1e6, self.demand_max_mbps * 1e6)


def schedule_forced_reconfig(config: SimConfig, time: float, ap: int, channel: int) -> SimConfig:
    """Copy of ``config`` with one more unconditional channel change."""
    if not time < config.t_sim:
        raise ValueError("forced reconfiguration must happen before t_sim")
    return dataclasses.replace(config, forced_reconfigs=config.forced_reconfigs + ((time, ap, channel),))


@dataclass
class Scenario:
    area: tuple
    ap_pos: np.ndarray
    sta_pos: np.ndarray
    channels: tuple
    ap_channels: tuple
    assoc: tuple
    seed: int = 0

    def __post_init__(self):
        self.area = tuple(float(a) for a in self.area)
        self.ap_pos = np.asarray(self.ap_pos, dtype=float).reshape(-1, 3)
        self.sta_pos = np.asarray(self.sta_pos, dtype=float).reshape(-1, 3)
        self.channels = tuple(int(c) for c in self.channels)
        self.ap_channels = tuple(int(c) for c in self.ap_channels)
        self.assoc = tuple(int(a) for a in self.assoc)
        if len(self.ap_channels) != self.n or len(self.assoc) != self.m:
            raise ValueError("scenario arrays disagree on the number of nodes")
        if not self.channels:
            raise ValueError("scenario needs at least one channel")
        for c in self.ap_channels:
            if c not in self.channels:
                raise ValueError(f"AP channel {c} not in {self.channels}")
        for a in self.assoc:
            if not 0 <= a < self.n:
                raise ValueError(f"association to unknown AP {a}")
        for pos in (self.ap_pos, self.sta_pos):
            if pos.size and (np.any(pos < 0) or np.any(pos > np.array(self.area))):
                raise ValueError("node positions must lie inside the area")

    @property
    def n(self) -> int:
        return len(self.ap_pos)

    @property
    def m(self) -> int:
        return len(self.sta_pos)

    def links(self, config: SimConfig) -> LinkTables:
        return LinkTables(self.ap_pos, self.sta_pos, self.channels, config.radio(), config.airtime(), config.cca_dbm)


def _covered(sta: np.ndarray, ap_pos: np.ndarray, channels, config: SimConfig) -> np.ndarray:
    """Stations hearing some AP above CCA with a usable MCS on every channel."""
    links = LinkTables(ap_pos, sta, channels, config.radio(), config.airtime(), config.cca_dbm)
    usable = (links.link_rssi >= config.cca_dbm) & np.all(np.isfinite(links.per_packet), axis=0)
    return usable.any(axis=1)


def _place_stations(rng, m, area, ap_pos, channels, config, max_tries):
    area = np.asarray(area, dtype=float)
    sta = rng.uniform(0.0, 1.0, (m, 3)) * area
    pending = np.flatnonzero(~_covered(sta, ap_pos, channels, config)) if m else np.zeros(0, int)
    tries = 0
    while pending.size:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could not place {pending.size} station(s) within CCA range of an AP "
                               f"after {max_tries} attempts")
        sta[pending] = rng.uniform(0.0, 1.0, (pending.size, 3)) * area
        pending = pending[~_covered(sta[pending], ap_pos, channels, config)]
    return sta


def _ssf(links: LinkTables, config: SimConfig) -> tuple:
    out = []
    for i in range(links.link_rssi.shape[0]):
        row = links.link_rssi[i]
        out.append(ssf_associate(row, build_station_action_set(row, config.rssi_th_dbm, config.cca_dbm)))
    return tuple(out)


def generate_scenario(n: int, m: int, area=(30.0, 30.0, 2.0), channels=(36, 40, 44), seed: int = 0,
                      config: SimConfig | None = None, max_tries: int = 10000) -> Scenario:
    """Uniform placement, random initial channels, strongest-signal association."""
    if n < 1 or m < 0:
        raise ValueError("need at least one AP and a non-negative station count")
    config = config or SimConfig()
    place_ss, chan_ss = np.random.SeedSequence([seed, _PLACEMENT]).spawn(2)
    place = np.random.default_rng(place_ss)
    ap_pos = place.uniform(0.0, 1.0, (n, 3)) * np.asarray(area, dtype=float)
    sta_pos = _place_stations(place, m, area, ap_pos, channels, config, max_tries)
    ap_channels = tuple(int(c) for c in np.random.default_rng(chan_ss).choice(np.asarray(channels), n))
    links = LinkTables(ap_pos, sta_pos, channels, config.radio(), config.airtime(), config.cca_dbm)
    return Scenario(area, ap_pos, sta_pos, channels, ap_channels, _ssf(links, config), seed)


TOY_AREA = (25.0, 25.0, 2.0)
TOY_SPACING = 7.0


def toy_scenario(seed: int = 0, m: int = 45, channels=(36, 40), initial_channel: int = 40,
                 spacing: float = TOY_SPACING, config: SimConfig | None = None) -> Scenario:
    """Three APs on a line; neighbours sense each other, the outer pair does not."""
    config = config or SimConfig()
    cx, cy, cz = (a / 2 for a in TOY_AREA)
    ap_pos = np.array([[cx - spacing, cy, cz], [cx, cy, cz], [cx + spacing, cy, cz]])
    place = np.random.default_rng(np.random.SeedSequence([seed, _PLACEMENT]))
    sta_pos = _place_stations(place, m, TOY_AREA, ap_pos, channels, config, 100000)
    links = LinkTables(ap_pos, sta_pos, channels, config.radio(), config.airtime(), config.cca_dbm)
    return Scenario(TOY_AREA, ap_pos, sta_pos, channels, (initial_channel,) * 3, _ssf(links, config), seed)


class Simulation:
    """One run of one scenario. ``mode`` is ``"static"`` or ``"adaptive"``."""

    def __init__(self, scenario: Scenario, config: SimConfig, mode: str = "adaptive"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.scenario = scenario
        self.config = config
        self.mode = mode
        n, m = scenario.n, scenario.m
        for t, ap, ch in config.forced_reconfigs:
            if not 0 <= ap < n:
                raise ValueError(f"forced reconfiguration names unknown AP {ap}")
            if ch not in scenario.channels:
                raise ValueError(f"forced reconfiguration to channel {ch} not in {scenario.channels}")
        for j in config.fixed_aps:
            if not 0 <= j < n:
                raise ValueError(f"fixed AP {j} does not exist")

        self.run_seed = scenario.seed if config.run_seed is None else config.run_seed
        traffic_ss, agent_ss = np.random.SeedSequence([self.run_seed, _RUNTIME]).spawn(2)
        tp = config.traffic()
        sources = [TrafficSource(np.random.default_rng(s), tp) for s in traffic_ss.spawn(m)]
        agent_rngs = [np.random.default_rng(s) for s in agent_ss.spawn(n + m)]

        self.links = scenario.links(config)
        keep = max(config.t_sw, 1.0) + 1.0
        self.net = Network(self.links, scenario.ap_channels, scenario.assoc, config.airtime(),
                           config.radio().phy.l_d, sources, keep)
        self.action_sets = [build_station_action_set(self.links.link_rssi[i], config.rssi_th_dbm, config.cca_dbm)
                            for i in range(m)]

        self.dca: dict[int, DcaAgent] = {}
        self.daps: dict[int, DapsAgent] = {}
        adaptive = mode == "adaptive" and config.agents_enabled
        if adaptive and config.dca_enabled:
            for j in range(n):
                if j in config.fixed_aps:
                    continue
                self.dca[j] = DcaAgent(j, scenario.channels, scenario.ap_channels[j], config.t_dca,
                                       config.t_sw, agent_rngs[j])
        if adaptive and config.daps_enabled:
            for i in range(m):
                arms = self.action_sets[i]
                if len(arms) < 2:
                    continue
                if scenario.assoc[i] not in arms:
                    arms = sorted(set(arms) | {scenario.assoc[i]})
                    self.action_sets[i] = arms
                self.daps[i] = DapsAgent(i, arms, scenario.assoc[i], config.t_daps, config.t_sw, agent_rngs[n + i])

        # channel epochs per AP: (start time, channel)
        self.epochs = [[(0.0, c)] for c in scenario.ap_channels]
        self.trace: list[tuple] = []
        self._heap: list = []
        self._seq = 0

    # -- control heap ------------------------------------------------------
    def _push(self, t: float, prio: int, node: int, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, prio, node, self._seq, payload))

    def _schedule_initial(self) -> None:
        cfg = self.config
        n = self.scenario.n
        # first activations are spread over one period so agents act asynchronously
        for j, a in self.dca.items():
            a.next_activation = cfg.agent_enable_time + a.rng.uniform(0.0, a.period)
            self._push(a.next_activation, PRIO_ACTIVATION, j, False)
        for i, a in self.daps.items():
            a.next_activation = cfg.agent_enable_time + a.rng.uniform(0.0, a.period)
            self._push(a.next_activation, PRIO_ACTIVATION, n + i, False)
        for t, ap, ch in cfg.forced_reconfigs:
            self._push(t, PRIO_FORCED, ap, ch)

    # -- rewards -----------------------------------------------------------
    def _ap_reward(self, j: int):
        epochs = self.epochs[j]

        def reward(arm, lo, hi):
            starts, ends = [], []
            for k, (t0, ch) in enumerate(epochs):
                t1 = epochs[k + 1][0] if k + 1 < len(epochs) else hi
                if ch != arm or t1 <= lo or t0 >= hi:
                    continue
                starts.append(max(t0, lo))
                ends.append(min(t1, hi))
            if not starts:
                return None
            return self.net.ap_window_reward(j, np.array(starts), np.array(ends))

        return reward

    def _sta_reward(self, i: int):
        def reward(arm, lo, hi):
            return self.net.station_window_reward(i, arm, lo, hi)

        return reward

    def _set_channel(self, j: int, channel: int, now: float) -> bool:
        changed = apply_channel_switch(self.net, j, channel, self.scenario.channels)
        if changed:
            ep = self.epochs[j]
            ep.append((now, channel))
            # older epochs can no longer fall inside a reward window
            while len(ep) > 2 and ep[1][0] < now - self.config.t_sw - 1.0:
                ep.pop(0)
        return changed

    # -- event handlers ----------------------------------------------------
    def _activate_ap(self, j: int, now: float, deferred: bool) -> None:
        agent = self.dca[j]
        if not deferred:
            when = defer_if_busy(now, self.net.ap_flow_ends(j))
            if when > now:
                self._push(when, PRIO_ACTIVATION, j, True)
                return
        old = agent.current
        new = on_activation(agent, now, self._ap_reward(j))
        if new != old:
            self._set_channel(j, new, now)
            agent.current = new
            self.trace.append((now, f"ap{j}", "dca", old, new))
        self._push(agent.next_activation, PRIO_ACTIVATION, j, False)

    def _activate_station(self, i: int, now: float, deferred: bool) -> None:
        agent = self.daps[i]
        n = self.scenario.n
        if not deferred and self.net.station_busy(i):
            self._push(defer_if_busy(now, [self.net.flow_end(i)]), PRIO_ACTIVATION, n + i, True)
            return
        old = agent.current
        new = on_activation(agent, now, self._sta_reward(i))
        if new != old:
            apply_reassociation(self.net, i, new, self.action_sets[i])
            agent.current = new
            self.trace.append((now, f"sta{i}", "daps", old, new))
        self._push(agent.next_activation, PRIO_ACTIVATION, n + i, False)

    def _force(self, j: int, channel: int, now: float) -> None:
        old = self.net.channel_of(j)
        self._set_channel(j, channel, now)
        if j in self.dca:
            self.dca[j].current = channel
        self.trace.append((now, f"ap{j}", "forced", old, channel))

    def _advance(self, t: float, audit) -> None:
        if audit is None:
            self.net.advance(t)
            return
        while self.net.advance(t, 1) == K.ST_MAX_EVENTS:
            audit(self.net)

    def run(self, audit=None) -> RunResult:
        """Simulate to ``t_sim``. ``audit(net)``, if given, is called after every
        flow event and every control action (slow; meant for tests)."""
        cfg = self.config
        n, m = self.scenario.n, self.scenario.m
        net = self.net
        grid = np.arange(1, int(math.floor(cfg.t_sim / cfg.metrics_interval + 1e-9)) + 1) * cfg.metrics_interval
        G = len(grid)
        sat = np.zeros((G, m))
        act = np.zeros((G, m))
        served = np.zeros((G, m))
        offered = np.zeros((G, m))
        load = np.zeros((G, n))
        chan = np.zeros((G, n), dtype=np.int64)
        assoc = np.zeros((G, m), dtype=np.int64)

        self._schedule_initial()
        for g, t in enumerate(grid):
            self._push(float(t), PRIO_METRICS, -1, g)

        last_cum = np.zeros(n)
        last_t = 0.0
        heap = self._heap
        while heap:
            t, prio, node, _, payload = heapq.heappop(heap)
            if t > cfg.t_sim:
                break
            self._advance(t, audit)
            if prio == PRIO_METRICS:
                g = payload
                acc = net.flush(t)
                sat[g], act[g], served[g], offered[g] = acc["sat"], acc["active"], acc["served"], acc["offered"]
                cum = net.cum_load
                load[g] = (cum - last_cum) / (t - last_t)
                last_cum, last_t = cum, t
                chan[g] = net.channels
                assoc[g] = net.sta_i[K.SI_ASSOC]
            elif prio == PRIO_FORCED:
                self._force(node, payload, t)
            elif node < n:
                self._activate_ap(node, t, payload)
            else:
                self._activate_station(node - n, t, payload)
            if audit is not None:
                audit(net)
        self._advance(cfg.t_sim, audit)

        return RunResult(
            mode=self.mode, scenario_seed=self.scenario.seed, run_seed=self.run_seed, t_sim=cfg.t_sim,
            interval=cfg.metrics_interval, p_th=cfg.p_th, window=cfg.t_sw, times=grid,
            sat_time=sat, active_time=act, served_bits=served, offered_bits=offered,
            ap_load=load, ap_channel=chan, assoc=assoc, trace=self.trace, events=net.events,
        )


def run(scenario: Scenario, config: SimConfig, mode: str = "adaptive") -> RunResult:
    return Simulation(scenario, config, mode).run()


@dataclass
class BatchResult:
    results: list = field(default_factory=list)  # summaries, ordered by (scenario, mode)

    def rows(self, mode: str | None = None) -> list[dict]:
        return [r for r in self.results if mode is None or r["mode"] == mode]

    def values(self, metric: str, mode: str) -> list:
        return [r[metric] for r in self.rows(mode)]


@dataclass(frozen=True)
class ScenarioParams:
    n_aps: int = 15
    n_stations: int = 225
    area_xyz: tuple = (30.0, 30.0, 2.0)
    channels: tuple = (36, 40, 44)
    seed: int = 0


def _batch_job(args):
    params, index, config, modes = args
    seed = params.seed + index
    scenario = generate_scenario(params.n_aps, params.n_stations, params.area_xyz, params.channels, seed, config)
    cfg = dataclasses.replace(config, run_seed=seed)
    return [Simulation(scenario, cfg, mode).run().summary() for mode in modes]


def run_batch(params: ScenarioParams, n_scenarios: int, config: SimConfig,
              modes: Sequence[str] = MODES, parallelism: int = 1) -> BatchResult:
    """Paired runs: every mode of scenario ``k`` uses seed ``params.seed + k`` for
    both placement and traffic, so modes differ only in whether agents act."""
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be at least 1")
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    jobs = [(params, k, config, tuple(modes)) for k in range(n_scenarios)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            chunks = list(pool.map(_batch_job, jobs))
    else:
        chunks = [_batch_job(j) for j in jobs]
    return BatchResult([s for chunk in chunks for s in chunk])
