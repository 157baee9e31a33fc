"""Run metrics, convergence detection, box/CDF statistics and file output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

BATCH_COLUMNS = (
    "scenario_seed",
    "mode",
    "mean_satisfaction",
    "agg_throughput_mbps",
    "drop_ratio",
    "convergence_time_s",
)
TRACE_COLUMNS = ("time", "agent", "kind", "old", "new")


@dataclass
class RunResult:
    """Everything one run produces, on a regular sampling grid.

    Cell ``g`` of every per-station array covers ``(times[g] - interval, times[g]]``.
    """

    mode: str
    scenario_seed: int
    run_seed: int
    t_sim: float
    interval: float
    p_th: float
    window: float
    times: np.ndarray  # grid end points
    sat_time: np.ndarray  # (G, m) integral of satisfaction over active time
    active_time: np.ndarray  # (G, m)
    served_bits: np.ndarray  # (G, m)
    offered_bits: np.ndarray  # (G, m)
    ap_load: np.ndarray  # (G, n) mean effective load in the cell
    ap_channel: np.ndarray  # (G, n) channel at the grid point
    assoc: np.ndarray  # (G, m) serving AP at the grid point
    trace: list = field(default_factory=list)
    events: int = 0

    @property
    def n_aps(self) -> int:
        return self.ap_load.shape[1]

    @property
    def n_stations(self) -> int:
        return self.sat_time.shape[1]

    def mean_satisfaction(self, t_from: float = 0.0, t_to: float | None = None) -> float:
        return mean_satisfaction(self, t_from, t_to)

    @property
    def drop_ratio(self) -> float:
        return drop_ratio(float(self.offered_bits.sum()), float(self.served_bits.sum()))

    @property
    def aggregate_throughput(self) -> float:
        """Served bits per second over the whole run."""
        return float(self.served_bits.sum()) / self.t_sim if self.t_sim > 0 else 0.0

    def trailing_satisfaction(self, window: float | None = None) -> np.ndarray:
        return trailing_satisfaction(self, self.window if window is None else window)

    def median_satisfaction(self, window: float | None = None) -> np.ndarray:
        return median_series(self.trailing_satisfaction(window))

    def convergence_time(self) -> Optional[float]:
        return convergence_time(self.trailing_satisfaction(), self.p_th, self.times)

    def summary(self) -> dict:
        conv = self.convergence_time()
        return {
            "scenario_seed": int(self.scenario_seed),
            "run_seed": int(self.run_seed),
            "mode": self.mode,
            "t_sim": self.t_sim,
            "n_aps": self.n_aps,
            "n_stations": self.n_stations,
            "mean_satisfaction": _round(self.mean_satisfaction()),
            "agg_throughput_mbps": _round(self.aggregate_throughput / 1e6),
            "drop_ratio": _round(self.drop_ratio),
            "convergence_time_s": conv,
            "flow_events": int(self.events),
            "reconfigurations": sum(1 for row in self.trace if row[2] != "forced"),
        }


def _round(x: float) -> float:
    # fixed precision keeps text output stable across platforms
    return float(f"{x:.10g}") if math.isfinite(x) else x


def _cells(result: RunResult, t_from: float, t_to: float | None) -> slice:
    t_to = result.t_sim if t_to is None else t_to
    lo = int(np.searchsorted(result.times, t_from, side="right"))
    hi = int(np.searchsorted(result.times, t_to, side="right"))
    return slice(lo, hi)


def mean_satisfaction(result: RunResult, t_from: float = 0.0, t_to: float | None = None) -> float:
    """Mean over stations of each station's time-averaged satisfaction while active.

    Stations without traffic in the span are left out; 1.0 if nobody had traffic.
    """
    cells = _cells(result, t_from, t_to)
    sat = result.sat_time[cells].sum(axis=0)
    act = result.active_time[cells].sum(axis=0)
    busy = act > 0
    if not busy.any():
        return 1.0
    return float(np.mean(sat[busy] / act[busy]))


def drop_ratio(offered: float, served: float) -> float:
    if offered < 0 or served < 0:
        raise ValueError("offered and served traffic must be non-negative")
    if offered == 0:
        return 0.0
    return min(1.0, max(0.0, (offered - served) / offered))


def trailing_satisfaction(result: RunResult, window: float) -> np.ndarray:
    """Per-station mean satisfaction over the trailing ``window`` at each grid point.

    NaN where the station had no traffic in the window.
    """
    w = max(1, int(round(window / result.interval)))
    sat = np.cumsum(result.sat_time, axis=0)
    act = np.cumsum(result.active_time, axis=0)
    sat[w:] = sat[w:] - sat[:-w].copy()
    act[w:] = act[w:] - act[:-w].copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(act > 1e-12, sat / np.where(act > 1e-12, act, 1.0), np.nan)
    return np.minimum(out, 1.0)


def median_series(per_station: np.ndarray) -> np.ndarray:
    """Across-station median at each grid point, ignoring stations without data."""
    per_station = np.asarray(per_station, dtype=float)
    if per_station.ndim == 1:
        return per_station.copy()
    out = np.full(per_station.shape[0], np.nan)
    has = ~np.all(np.isnan(per_station), axis=1)
    if has.any():
        out[has] = np.nanmedian(per_station[has], axis=1)
    return out


def convergence_time(series: np.ndarray, p_th: float, grid, persistence: float = 3600.0) -> Optional[float]:
    """Earliest grid time from which the median satisfaction stays above ``p_th``.

    ``series`` is either per-station (G, m) or already a (G,) median series;
    ``grid`` is the array of grid times or a scalar spacing starting at 0. The
    crossing must hold for ``persistence`` seconds, or until the end of the
    series if less time remains. Grid points without data count as below.
    """
    med = median_series(series)
    G = med.shape[0]
    if G == 0:
        return None
    times = np.arange(G) * float(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    above = np.nan_to_num(med, nan=-np.inf) > p_th
    # index of the next point that is not above, scanning backwards
    next_below = np.empty(G, dtype=np.int64)
    nxt = G
    for g in range(G - 1, -1, -1):
        if not above[g]:
            nxt = g
        next_below[g] = nxt
    for g in range(G):
        if not above[g]:
            continue
        end = next_below[g]
        if end == G or times[end] - times[g] >= persistence:
            return float(times[g])
    return None


def recovery_time(series: np.ndarray, p_th: float, grid, t_change: float,
                  persistence: float = 3600.0) -> Optional[float]:
    """Time from ``t_change`` until the median satisfaction settles above ``p_th`` again.

    Counting starts at the first dip below ``p_th`` after the change; returns
    0.0 if there is no dip and ``None`` if it never recovers.
    """
    med = median_series(series)
    times = np.arange(med.shape[0]) * float(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    after = times > t_change
    below = after & ~(np.nan_to_num(med, nan=-np.inf) > p_th)
    if not below.any():
        return 0.0
    first = int(np.argmax(below))
    t = convergence_time(med[first:], p_th, times[first:], persistence)
    return None if t is None else t - t_change


def dropped_below(series: np.ndarray, p_th: float, grid, t_change: float) -> bool:
    med = median_series(series)
    times = np.arange(med.shape[0]) * float(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    after = times > t_change
    return bool(np.any(np.nan_to_num(med[after], nan=-np.inf) <= p_th))


@dataclass(frozen=True)
class BoxStats:
    median: float
    q25: float
    q75: float
    whisker_low: float
    whisker_high: float
    outliers: tuple = ()

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25


def box_stats(values: Iterable[float]) -> BoxStats:
    """Quartiles by linear interpolation between ranks; whiskers by the 1.5 IQR rule."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise ValueError("box_stats needs at least one value")
    q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = tuple(float(x) for x in v[(v < lo_fence) | (v > hi_fence)])
    return BoxStats(float(med), float(q25), float(q75), float(inside.min()), float(inside.max()), outliers)


def empirical_cdf(times: Sequence[Optional[float]]) -> list[tuple[float, float]]:
    """Fraction of scenarios converged by each observed time; ``None`` never converges."""
    total = len(times)
    done = sorted(t for t in times if t is not None)
    out = []
    for k, t in enumerate(done, start=1):
        if out and out[-1][0] == t:
            out[-1] = (t, k / total)
        else:
            out.append((t, k / total))
    return out


# -- file output ----------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(_round(x))
    return str(x)


def _open(path: Path, mode: str = "w"):
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_time_series(result: RunResult, path: Path) -> None:
    """Long-format table: one row per (grid time, node, metric)."""
    sat = result.trailing_satisfaction()
    with np.errstate(invalid="ignore", divide="ignore"):
        cell_sat = np.where(result.active_time > 0, result.sat_time / np.where(result.active_time > 0, result.active_time, 1), np.nan)
    thr = result.served_bits / result.interval
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time", "node", "metric", "value"))
        for g, t in enumerate(result.times):
            tt = _fmt(float(t))
            for j in range(result.n_aps):
                node = f"ap{j}"
                w.writerow((tt, node, "effective_load", _fmt(result.ap_load[g, j])))
                w.writerow((tt, node, "channel", int(result.ap_channel[g, j])))
            for i in range(result.n_stations):
                node = f"sta{i}"
                w.writerow((tt, node, "satisfaction", _fmt(cell_sat[g, i])))
                w.writerow((tt, node, "trailing_satisfaction", _fmt(sat[g, i])))
                w.writerow((tt, node, "throughput_bps", _fmt(thr[g, i])))
                w.writerow((tt, node, "ap", int(result.assoc[g, i])))


def write_trace(trace: Sequence[tuple], path: Path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow(tuple(_fmt(x) for x in row))


def write_summary(summaries: Sequence[dict], path: Path) -> None:
    with _open(path) as fh:
        json.dump(list(summaries), fh, indent=2, sort_keys=True)
        fh.write("\n")


def batch_row(summary: dict) -> tuple:
    return tuple(summary[c] for c in BATCH_COLUMNS)


def write_batch_summary(rows: Sequence[dict], path: Path) -> None:
    """One row per scenario per mode, columns in :data:`BATCH_COLUMNS` order."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BATCH_COLUMNS)
        for s in rows:
            w.writerow(tuple(_fmt(x) for x in batch_row(s)))


def read_batch_summary(path: Path) -> list[dict]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        rows = []
        for r in csv.DictReader(fh):
            rows.append({
                "scenario_seed": int(r["scenario_seed"]),
                "mode": r["mode"],
                "mean_satisfaction": float(r["mean_satisfaction"]),
                "agg_throughput_mbps": float(r["agg_throughput_mbps"]),
                "drop_ratio": float(r["drop_ratio"]),
                "convergence_time_s": float(r["convergence_time_s"]) if r["convergence_time_s"] else None,
            })
        return rows


def emit(results: Sequence[RunResult], out_dir, time_series: bool = True) -> list[Path]:
    """Write run outputs. A single run goes to ``out_dir``; several go to ``out_dir/<mode>_<seed>``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        target = out if len(results) == 1 else out / f"{res.mode}_{res.scenario_seed}"
        target.mkdir(parents=True, exist_ok=True)
        if time_series:
            write_time_series(res, target / "time_series.csv")
            written.append(target / "time_series.csv")
        write_trace(res.trace, target / "agent_trace.csv")
        write_summary([res.summary()], target / "summary.json")
        written += [target / "agent_trace.csv", target / "summary.json"]
    write_batch_summary([r.summary() for r in results], out / "batch_summary.csv")
    written.append(out / "batch_summary.csv")
    return written


def aggregate(rows: Sequence[dict]) -> dict:
    """Box statistics per mode and metric plus the convergence-time CDF per mode."""
    modes = sorted({r["mode"] for r in rows})
    out = {}
    for mode in modes:
        sub = [r for r in rows if r["mode"] == mode]
        entry = {}
        for metric in ("mean_satisfaction", "agg_throughput_mbps", "drop_ratio"):
            b = box_stats(r[metric] for r in sub)
            entry[metric] = {
                "median": b.median, "q25": b.q25, "q75": b.q75,
                "whisker_low": b.whisker_low, "whisker_high": b.whisker_high,
                "outliers": list(b.outliers),
            }
        entry["convergence_cdf"] = [list(p) for p in empirical_cdf([r["convergence_time_s"] for r in sub])]
        entry["n"] = len(sub)
        out[mode] = entry
    return out


def write_report(rows: Sequence[dict], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agg = aggregate(rows)
    with _open(out / "box_stats.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mode", "metric", "median", "q25", "q75", "whisker_low", "whisker_high", "n_outliers"))
        for mode, entry in agg.items():
            for metric in ("mean_satisfaction", "agg_throughput_mbps", "drop_ratio"):
                b = entry[metric]
                w.writerow((mode, metric, *(_fmt(b[k]) for k in ("median", "q25", "q75", "whisker_low", "whisker_high")),
                            len(b["outliers"])))
    with _open(out / "convergence_cdf.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mode", "time_s", "fraction"))
        for mode, entry in agg.items():
            for t, f in entry["convergence_cdf"]:
                w.writerow((mode, _fmt(t), _fmt(f)))
    return [out / "box_stats.csv", out / "convergence_cdf.csv"]
