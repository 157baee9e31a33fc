"""Radio-level model: path loss, link budget, MCS selection and frame timing.

All durations are in seconds, powers in dBm, gains/losses in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


class NoLinkError(ValueError):
    """RSSI is below the lowest MCS sensitivity; the link cannot carry data."""


@dataclass(frozen=True)
class PhyConstants:
    t_e: float = 9e-6
    t_sifs: float = 16e-6
    t_difs: float = 34e-6
    t_phy_legacy: float = 20e-6
    t_phy_he_su: float = 164e-6
    legacy_symbol: float = 4e-6
    he_symbol: float = 16e-6
    l_sf: int = 16
    l_rts: int = 160
    l_cts: int = 112
    l_mh: int = 320
    l_ack: int = 112
    l_tb: int = 18
    l_d: int = 12000
    l_dbps_legacy: int = 24

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"PhyConstants.{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class PathLossParams:
    f_c: float = 5.18
    d_bp: float = 5.0
    walls: int = 4
    tx_power: float = 15.0
    g_tx: float = 0.0
    g_rx: float = 0.0

    def __post_init__(self):
        if self.f_c <= 0:
            raise ValueError("f_c must be positive")
        if self.d_bp <= 0:
            raise ValueError("d_bp must be positive")
        if self.walls < 0:
            raise ValueError("walls must be non-negative")


@dataclass(frozen=True)
class McsEntry:
    index: int
    bits_per_symbol: int
    coding_rate: Fraction
    min_rssi: float
    n_sc: int = 234
    n_ss: int = 1

    @property
    def l_dbps(self) -> int:
        value = self.n_sc * self.bits_per_symbol * self.coding_rate * self.n_ss
        if value.denominator != 1:
            # fractional bits per symbol round down, as in the standard tables
            return int(math.floor(value))
        return int(value)


# 802.11ax, 20 MHz, 1 spatial stream. (N_m, N_c) ladder and receiver
# minimum sensitivities from the standard; not taken from the model itself.
_AX_LADDER = [
    (1, Fraction(1, 2), -82.0),
    (2, Fraction(1, 2), -79.0),
    (2, Fraction(3, 4), -77.0),
    (4, Fraction(1, 2), -74.0),
    (4, Fraction(3, 4), -70.0),
    (6, Fraction(2, 3), -66.0),
    (6, Fraction(3, 4), -65.0),
    (6, Fraction(5, 6), -64.0),
    (8, Fraction(3, 4), -59.0),
    (8, Fraction(5, 6), -57.0),
    (10, Fraction(3, 4), -54.0),
    (10, Fraction(5, 6), -52.0),
]

CHANNEL_FREQUENCIES_GHZ = {36: 5.18, 40: 5.20, 44: 5.22, 48: 5.24}


def default_mcs_table(n_ss: int = 1, n_sc: int = 234) -> list[McsEntry]:
    return [
        McsEntry(i, n_m, n_c, rssi, n_sc=n_sc, n_ss=n_ss)
        for i, (n_m, n_c, rssi) in enumerate(_AX_LADDER)
    ]


def mcs_table_from_rows(rows: Sequence[dict], n_ss: int = 1, n_sc: int = 234) -> list[McsEntry]:
    """Build a table from config rows ``{index, n_m, n_c_num, n_c_den, min_rssi}``."""
    table = [
        McsEntry(
            int(r["index"]),
            int(r["n_m"]),
            Fraction(int(r["n_c_num"]), int(r["n_c_den"])),
            float(r["min_rssi"]),
            n_sc=int(r.get("n_sc", n_sc)),
            n_ss=int(r.get("n_ss", n_ss)),
        )
        for r in rows
    ]
    validate_mcs_table(table)
    return table


def mcs_table_to_rows(table: Sequence[McsEntry]) -> list[dict]:
    return [
        {
            "index": e.index,
            "n_m": e.bits_per_symbol,
            "n_c_num": e.coding_rate.numerator,
            "n_c_den": e.coding_rate.denominator,
            "min_rssi": e.min_rssi,
            "n_sc": e.n_sc,
            "n_ss": e.n_ss,
        }
        for e in table
    ]


def validate_mcs_table(table: Sequence[McsEntry]) -> None:
    if not table:
        raise ValueError("MCS table is empty")
    rssi = [e.min_rssi for e in table]
    if any(b <= a for a, b in zip(rssi, rssi[1:])):
        raise ValueError("MCS min_rssi must be strictly increasing with index")
    if any(e.l_dbps <= 0 for e in table):
        raise ValueError("every MCS entry needs L_DBPS > 0")


def channel_frequency(channel: int) -> float:
    """Center frequency in GHz of a 20 MHz 5 GHz channel."""
    if channel in CHANNEL_FREQUENCIES_GHZ:
        return CHANNEL_FREQUENCIES_GHZ[channel]
    return 5.0 + 0.005 * channel


def path_loss(d, p: PathLossParams = PathLossParams()):
    """Enterprise (TGax) path loss in dB for distance ``d`` meters.

    Accepts scalars or numpy arrays.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise ValueError("distance must be positive")
    near = np.minimum(d_arr, p.d_bp)
    far = np.where(d_arr > p.d_bp, 35.0 * np.log10(np.maximum(d_arr, p.d_bp) / p.d_bp), 0.0)
    pl = 40.05 + 20.0 * math.log10(p.f_c / 2.4) + 20.0 * np.log10(near) + far + 7.0 * p.walls
    return float(pl) if pl.ndim == 0 else pl


def received_power(tx: float, g_tx: float, g_rx: float, pl):
    return tx + g_tx + g_rx - pl


def select_mcs(rssi: float, table: Sequence[McsEntry]) -> McsEntry:
    if not table:
        raise ValueError("MCS table is empty")
    best = None
    for entry in table:
        if entry.min_rssi <= rssi:
            best = entry
        else:
            break
    if best is None:
        raise NoLinkError(f"RSSI {rssi:.2f} dBm below lowest MCS sensitivity {table[0].min_rssi} dBm")
    return best


def select_mcs_index(rssi, table: Sequence[McsEntry]) -> np.ndarray:
    """Vectorized :func:`select_mcs`; returns -1 where there is no link."""
    thresholds = np.array([e.min_rssi for e in table])
    return np.searchsorted(thresholds, np.asarray(rssi, dtype=float), side="right") - 1


@dataclass(frozen=True)
class FrameDurations:
    t_rts: float
    t_cts: float
    t_ack: float
    t_data: float


def _symbols(bits: int, l_dbps: int) -> int:
    return -(-bits // l_dbps)


def frame_durations(mcs: McsEntry, c: PhyConstants = PhyConstants()) -> FrameDurations:
    leg = c.l_dbps_legacy
    t_rts = c.t_phy_legacy + _symbols(c.l_sf + c.l_rts + c.l_tb, leg) * c.legacy_symbol
    t_cts = c.t_phy_legacy + _symbols(c.l_sf + c.l_cts + c.l_tb, leg) * c.legacy_symbol
    t_ack = c.t_phy_legacy + _symbols(c.l_sf + c.l_ack + c.l_tb, leg) * c.legacy_symbol
    t_data = c.t_phy_he_su + _symbols(c.l_sf + c.l_mh + c.l_d + c.l_tb, mcs.l_dbps) * c.he_symbol
    return FrameDurations(t_rts, t_cts, t_ack, t_data)


def successful_tx_time(mcs: McsEntry, c: PhyConstants = PhyConstants()) -> float:
    """Duration of one RTS/CTS/DATA/ACK exchange including inter-frame spaces."""
    f = frame_durations(mcs, c)
    return f.t_rts + 3 * c.t_sifs + f.t_cts + f.t_data + f.t_ack + c.t_difs + c.t_e


@dataclass(frozen=True)
class RadioConfig:
    """Everything needed to turn geometry into link budgets and exchange times."""

    phy: PhyConstants = field(default_factory=PhyConstants)
    d_bp: float = 5.0
    walls: int = 4
    tx_power: float = 15.0
    g_tx: float = 0.0
    g_rx: float = 0.0
    mcs_table: tuple = field(default_factory=lambda: tuple(default_mcs_table()))

    def path_loss_params(self, channel: int) -> PathLossParams:
        return PathLossParams(channel_frequency(channel), self.d_bp, self.walls, self.tx_power, self.g_tx, self.g_rx)


def distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))


def rssi_matrix(tx_pos: np.ndarray, rx_pos: np.ndarray, channel: int, radio: RadioConfig) -> np.ndarray:
    """Received power (dBm) at each ``rx`` from each ``tx``; shape (n_rx, n_tx)."""
    p = radio.path_loss_params(channel)
    d = distance_matrix(rx_pos, tx_pos)
    return received_power(p.tx_power, p.g_tx, p.g_rx, path_loss(d, p))


def exchange_time_table(radio: RadioConfig) -> np.ndarray:
    """t_s for every MCS index of the configured table."""
    return np.array([successful_tx_time(e, radio.phy) for e in radio.mcs_table])
