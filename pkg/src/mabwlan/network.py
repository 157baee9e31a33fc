"""Mutable network snapshot: geometry-derived link tables plus flow-level state.

The arrays are laid out for :mod:`mabwlan.kernels`; this class is the only
place that calls into them.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels as K
from .medium import AirtimeParams, LoadMap, effective_loads
from .phy import RadioConfig, exchange_time_table, rssi_matrix, select_mcs_index
from .traffic import TrafficSource


def _ap_to_ap(ap_pos: np.ndarray, channel: int, radio: RadioConfig) -> np.ndarray:
    n = len(ap_pos)
    out = np.full((n, n), -np.inf)
    for j in range(n):
        others = np.r_[0:j, j + 1:n]
        if others.size:
            out[others, j] = rssi_matrix(ap_pos[j:j + 1], ap_pos[others], channel, radio)[:, 0]
    return out


class LinkTables:
    """Per-channel RSSI, MCS and per-packet airtime for every (station, AP) pair."""

    def __init__(self, ap_pos: np.ndarray, sta_pos: np.ndarray, channels: Sequence[int],
                 radio: RadioConfig, airtime: AirtimeParams, cca_dbm: float):
        self.channels = tuple(channels)
        k = len(self.channels)
        n, m = len(ap_pos), len(sta_pos)
        self.sta_rssi = np.empty((k, m, n))
        self.ap_rssi = np.empty((k, n, n))
        for c, ch in enumerate(self.channels):
            self.sta_rssi[c] = rssi_matrix(ap_pos, sta_pos, ch, radio) if m else np.empty((0, n))
            self.ap_rssi[c] = _ap_to_ap(ap_pos, ch, radio)
        # a link is only as good as its worst channel
        self.link_rssi = self.sta_rssi.min(axis=0) if k else np.empty((m, n))
        self.mcs_index = select_mcs_index(self.sta_rssi, radio.mcs_table)
        t_s = exchange_time_table(radio)
        per_packet = airtime.expected_backoff * radio.phy.t_e + t_s
        self.per_packet = np.where(self.mcs_index >= 0, per_packet[np.maximum(self.mcs_index, 0)], np.inf)
        sense = (self.ap_rssi >= cca_dbm) & (np.transpose(self.ap_rssi, (0, 2, 1)) >= cca_dbm)
        for c in range(k):
            np.fill_diagonal(sense[c], False)
        self.sense = np.ascontiguousarray(sense)

    def channel_index(self, channel: int) -> int:
        try:
            return self.channels.index(channel)
        except ValueError:
            raise ValueError(f"channel {channel} not in {self.channels}") from None


class Network:
    def __init__(self, links: LinkTables, ap_channels: Sequence[int], assoc: Sequence[int],
                 airtime: AirtimeParams, l_d: int, sources: Sequence[TrafficSource],
                 keep: float, block: int = 512, ring: int | None = None, history: int | None = None):
        self.links = links
        n = links.ap_rssi.shape[1]
        m = links.sta_rssi.shape[1]
        self.n, self.m = n, m
        self.sources = list(sources)
        if len(self.sources) != m:
            raise ValueError("need one traffic source per station")

        self.sta_f = np.zeros((K.N_SF, m))
        self.sta_i = np.zeros((K.N_SI, m), dtype=np.int64)
        self.ap_f = np.zeros((K.N_AF, n))
        self.ap_i = np.zeros((K.N_AI, n), dtype=np.int64)
        self.par = np.zeros(K.N_PAR)
        self.par[K.P_RETRY] = airtime.retry_factor
        self.par[K.P_LD] = l_d
        self.par[K.P_KEEP] = keep
        self.cnt = np.zeros(K.N_CNT, dtype=np.int64)
        self.out = np.zeros(1, dtype=np.int64)

        self.ap_i[K.AI_CHAN] = [links.channel_index(ch) for ch in ap_channels]
        self.sta_i[K.SI_ASSOC] = np.asarray(assoc, dtype=np.int64)
        for i, j in enumerate(assoc):
            self._check_link(i, j)

        self.tr = np.zeros((3, m, block))
        for i, src in enumerate(self.sources):
            self.tr[:, i, :] = src.block(block)
        order = np.lexsort((np.arange(m), self.tr[K.TR_START, :, 0])) if m else np.zeros(0, dtype=np.int64)
        self.hp_t = np.ascontiguousarray(self.tr[K.TR_START, order, 0])
        self.hp_key = (K.EV_START * m + order).astype(np.int64)

        # enough room for a full retention window of flows at twice the mean rate
        mean_cycle = min((s.params.t_on_mean + s.params.t_off_mean for s in self.sources), default=1.0)
        if ring is None:
            ring = int(2 * keep / mean_cycle) + 16
        self.fr = np.zeros((4, m, ring))
        if history is None:
            rate = 2.0 * m / mean_cycle if m else 0.0
            history = int(2 * rate * keep) + 1024
        self.h_t = np.zeros(history)
        self.h_cum = np.zeros((history, 2 * n))
        K.append_history(self.h_t, self.h_cum, self.cnt, self.ap_f, 0.0)

    # -- state views -----------------------------------------------------
    @property
    def clock(self) -> float:
        return float(self.par[K.P_CLOCK])

    @property
    def channels(self) -> np.ndarray:
        return np.array(self.links.channels)[self.ap_i[K.AI_CHAN]]

    @property
    def channel_indices(self) -> np.ndarray:
        return self.ap_i[K.AI_CHAN].copy()

    @property
    def assoc(self) -> np.ndarray:
        return self.sta_i[K.SI_ASSOC].copy()

    @property
    def active(self) -> np.ndarray:
        return self.sta_i[K.SI_ACTIVE] != 0

    @property
    def own_load(self) -> np.ndarray:
        return self.ap_f[K.AF_OWN].copy()

    @property
    def eff_load(self) -> np.ndarray:
        return self.ap_f[K.AF_EFF].copy()

    @property
    def events(self) -> int:
        return int(self.cnt[K.C_EVENTS])

    def ap_busy(self, j: int) -> bool:
        return self.ap_i[K.AI_NACT, j] > 0

    def station_busy(self, i: int) -> bool:
        return self.sta_i[K.SI_ACTIVE, i] != 0

    def flow_end(self, i: int) -> float:
        return float(self.sta_f[K.SF_T1, i])

    def ap_flow_ends(self, j: int) -> np.ndarray:
        mask = (self.sta_i[K.SI_ASSOC] == j) & (self.sta_i[K.SI_ACTIVE] != 0)
        return self.sta_f[K.SF_T1, mask]

    def channel_of(self, j: int) -> int:
        return self.links.channels[self.ap_i[K.AI_CHAN, j]]

    def assoc_of(self, i: int) -> int:
        return int(self.sta_i[K.SI_ASSOC, i])

    def flow_airtime_scratch(self) -> np.ndarray:
        """Airtime of each active flow recomputed from the link tables."""
        air = np.zeros(self.m)
        chan = self.ap_i[K.AI_CHAN]
        for i in np.flatnonzero(self.active):
            j = self.sta_i[K.SI_ASSOC, i]
            demand = self.sta_f[K.SF_DEMAND, i]
            air[i] = self.par[K.P_RETRY] * math.ceil(demand / self.par[K.P_LD]) * self.links.per_packet[chan[j], i, j]
        return air

    def scratch_effective_loads(self) -> np.ndarray:
        """Effective loads evaluated from the current flow set, independent of the incremental state."""
        air = self.flow_airtime_scratch()
        own = np.bincount(self.sta_i[K.SI_ASSOC], weights=air, minlength=self.n) if self.m else np.zeros(self.n)
        return effective_loads(own, self.ap_i[K.AI_CHAN], self.links.sense)

    def load_map(self) -> LoadMap:
        return LoadMap(self.clock, self.own_load, self.eff_load)

    # -- dynamics ----------------------------------------------------------
    def advance(self, t_until: float, max_events: int = -1) -> int:
        """Run flow events up to ``t_until``; returns ``ST_DONE`` or ``ST_MAX_EVENTS``."""
        while True:
            st = K.advance(t_until, max_events, self.sta_f, self.sta_i, self.ap_f, self.ap_i,
                           self.links.sense, self.links.per_packet, self.par, self.cnt,
                           self.hp_t, self.hp_key, self.tr, self.h_t, self.h_cum, self.fr, self.out)
            if st == K.ST_NEED_TRAFFIC:
                self._refill(int(self.out[0]))
            elif st == K.ST_GROW_HIST:
                self._grow_history()
            elif st == K.ST_GROW_RING:
                self._grow_ring()
            else:
                return int(st)

    def _refill(self, i: int) -> None:
        cur = self.sta_i[K.SI_NEXT, i]
        self.tr[:, i, 0] = self.tr[:, i, cur]
        size = self.tr.shape[2] - 1
        self.tr[:, i, 1:] = self.sources[i].block(size)
        self.sta_i[K.SI_NEXT, i] = 0

    def _grow_history(self) -> None:
        size = 2 * len(self.h_t)
        h_t = np.zeros(size)
        h_cum = np.zeros((size, self.h_cum.shape[1]))
        k = self.cnt[K.C_HLEN]
        h_t[:k] = self.h_t[:k]
        h_cum[:k] = self.h_cum[:k]
        self.h_t, self.h_cum = h_t, h_cum

    def _grow_ring(self) -> None:
        F = self.fr.shape[2]
        fr = np.zeros((4, self.m, 2 * F))
        for i in range(self.m):
            count = self.sta_i[K.SI_FR_COUNT, i]
            head = self.sta_i[K.SI_FR_HEAD, i]
            idx = (head - count + np.arange(count)) % F
            fr[:, i, :count] = self.fr[:, i, idx]
            self.sta_i[K.SI_FR_HEAD, i] = count
        self.fr = fr

    def _check_link(self, i: int, j: int) -> None:
        if not np.all(np.isfinite(self.links.per_packet[:, i, j])):
            raise ValueError(f"station {i} has no usable link to AP {j}")

    def set_channel(self, j: int, channel: int) -> None:
        c = self.links.channel_index(channel)
        if c == self.ap_i[K.AI_CHAN, j]:
            return
        if self.cnt[K.C_HLEN] >= len(self.h_t):
            self._grow_history()
        K.set_channel(j, c, self.clock, self.sta_f, self.sta_i, self.ap_f, self.ap_i, self.links.sense,
                      self.links.per_packet, self.par, self.cnt, self.h_t, self.h_cum)

    def set_association(self, i: int, j: int) -> None:
        if j == self.sta_i[K.SI_ASSOC, i]:
            return
        self._check_link(i, j)
        if self.cnt[K.C_HLEN] >= len(self.h_t):
            self._grow_history()
        self._ensure_ring_room(i)
        K.set_assoc(i, j, self.clock, self.sta_f, self.sta_i, self.ap_f, self.ap_i, self.links.sense,
                    self.links.per_packet, self.par, self.cnt, self.h_t, self.h_cum, self.fr)

    def _ensure_ring_room(self, i: int) -> None:
        if self.sta_i[K.SI_FR_COUNT, i] == self.fr.shape[2]:
            self._grow_ring()

    def flush(self, t: float) -> dict[str, np.ndarray]:
        """Per-station metric accumulators since the previous flush."""
        K.flush(t, self.sta_f, self.sta_i, self.ap_f, self.par)
        rows = {
            "sat": K.SF_ACC_SAT,
            "active": K.SF_ACC_ACT,
            "served": K.SF_ACC_SERVED,
            "offered": K.SF_ACC_OFFERED,
        }
        acc = {name: self.sta_f[r].copy() for name, r in rows.items()}
        for r in rows.values():
            self.sta_f[r] = 0.0
        return acc

    @property
    def cum_load(self) -> np.ndarray:
        return self.ap_f[K.AF_CUM_L].copy()

    def ap_window_reward(self, j: int, starts: np.ndarray, ends: np.ndarray) -> float | None:
        v = K.ap_window(j, starts, ends, self.ap_f, self.cnt, self.h_t, self.h_cum)
        return None if math.isnan(v) else float(v)

    def station_window_reward(self, i: int, ap: int, lo: float, hi: float) -> float | None:
        v = K.station_window(i, ap, lo, hi, self.sta_f, self.sta_i, self.ap_f, self.cnt,
                             self.h_t, self.h_cum, self.fr)
        return None if math.isnan(v) else float(v)
