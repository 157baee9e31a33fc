import csv
import json

import numpy as np
import pytest

from mabwlan.engine import SimConfig, generate_scenario, run
from mabwlan.report import (
    BATCH_COLUMNS,
    RunResult,
    aggregate,
    box_stats,
    convergence_time,
    drop_ratio,
    dropped_below,
    emit,
    empirical_cdf,
    read_batch_summary,
    recovery_time,
    trailing_satisfaction,
    write_batch_summary,
    write_report,
)

HOUR = 3600.0
GRID = np.arange(1, 24 * 60 + 1) * 60.0


def brute_convergence(med, p_th, times, persistence=HOUR):
    for g in range(len(med)):
        later = [h for h in range(g, len(med)) if times[h] - times[g] < persistence]
        ok = all(med[h] > p_th for h in later)
        if ok and med[g] > p_th:
            return times[g]
    return None


def test_drop_ratio():
    assert drop_ratio(10.0, 10.0) == 0.0
    assert drop_ratio(0.0, 0.0) == 0.0
    # one flow at constant effective load 1.3 for 100 s at 2 Mb/s
    offered = 2e6 * 100
    served = 2e6 * (1 / 1.3) * 100
    assert drop_ratio(offered, served) == pytest.approx(0.2308, abs=1e-4)
    with pytest.raises(ValueError):
        drop_ratio(-1.0, 0.0)


def test_convergence_trivial():
    assert convergence_time(np.ones(100), 0.85, GRID[:100]) == GRID[0]
    assert convergence_time(np.full(100, 0.5), 0.85, GRID[:100]) is None
    assert convergence_time(np.zeros(0), 0.85, 60.0) is None


def test_convergence_persistence():
    med = np.where(GRID >= 5 * HOUR, 0.95, 0.5)
    dip = (GRID > 5.5 * HOUR) & (GRID <= 5.5 * HOUR + 600)
    med[dip] = 0.6
    got = convergence_time(med, 0.85, GRID)
    assert got == brute_convergence(med, 0.85, GRID)
    assert got == GRID[np.flatnonzero(dip)[-1] + 1]


def test_convergence_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(30):
        med = np.clip(np.cumsum(rng.normal(0.002, 0.03, 300)) + 0.7, 0, 1)
        grid = np.arange(1, 301) * 60.0
        assert convergence_time(med, 0.85, grid) == brute_convergence(med, 0.85, grid)


def test_convergence_uses_station_median():
    per_station = np.array([[0.9, 0.9, 0.1], [0.9, 0.1, 0.1]] * 5)
    med = convergence_time(per_station, 0.85, np.arange(10) * 60.0, persistence=120.0)
    assert med is None
    per_station[:, 1] = 0.9
    assert convergence_time(per_station, 0.85, np.arange(10) * 60.0) == 0.0


def test_recovery():
    med = np.full(len(GRID), 0.95)
    med[(GRID > 12 * HOUR) & (GRID < 14 * HOUR)] = 0.5
    assert dropped_below(med, 0.85, GRID, 12 * HOUR)
    assert recovery_time(med, 0.85, GRID, 12 * HOUR) == pytest.approx(2 * HOUR)
    steady = np.full(len(GRID), 0.95)
    assert not dropped_below(steady, 0.85, GRID, 12 * HOUR)
    assert recovery_time(steady, 0.85, GRID, 12 * HOUR) == 0.0
    med[GRID > 12 * HOUR] = 0.5
    assert recovery_time(med, 0.85, GRID, 12 * HOUR) is None


def test_box_stats_examples():
    b = box_stats([1, 2, 3, 4, 5])
    assert (b.median, b.q25, b.q75) == (3, 2, 4)
    assert (b.whisker_low, b.whisker_high, b.outliers) == (1, 5, ())
    s = box_stats([7.5])
    assert s.median == s.q25 == s.q75 == s.whisker_low == s.whisker_high == 7.5
    c = box_stats([2.0] * 6)
    assert c.iqr == 0 and c.outliers == ()
    with pytest.raises(ValueError):
        box_stats([])


def test_box_stats_outliers_against_reference():
    v = [1, 2, 3, 4, 5, 6, 7, 8, 100]
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    b = box_stats(v)
    assert (b.q25, b.median, b.q75) == (q25, q50, q75)
    assert b.outliers == (100.0,) and b.whisker_high == 8


def test_empirical_cdf():
    assert empirical_cdf([HOUR, 2 * HOUR, 3 * HOUR]) == [(HOUR, 1 / 3), (2 * HOUR, 2 / 3), (3 * HOUR, 1.0)]
    assert empirical_cdf([HOUR, None, 2 * HOUR])[-1] == (2 * HOUR, 2 / 3)
    assert empirical_cdf([]) == []
    assert empirical_cdf([5.0, 5.0]) == [(5.0, 1.0)]


def fake_result(sat, act, served=None, offered=None):
    sat, act = np.asarray(sat, float), np.asarray(act, float)
    G, m = sat.shape
    served = act * 1e6 if served is None else served
    offered = act * 1e6 if offered is None else offered
    return RunResult("adaptive", 0, 0, G * 60.0, 60.0, 0.85, 540.0, np.arange(1, G + 1) * 60.0,
                     sat, act, served, offered, np.zeros((G, 1)), np.full((G, 1), 36), np.zeros((G, m), int))


def test_trailing_satisfaction_window():
    act = np.full((12, 1), 10.0)
    sat = np.r_[np.full(6, 10.0), np.full(6, 5.0)][:, None]
    tr = trailing_satisfaction(fake_result(sat, act), 180.0)
    np.testing.assert_allclose(tr[:6, 0], 1.0)
    np.testing.assert_allclose(tr[6:9, 0], [25 / 30, 20 / 30, 15 / 30])


def test_trailing_satisfaction_gaps():
    act = np.zeros((5, 2))
    act[0, 0] = 1.0
    tr = trailing_satisfaction(fake_result(act.copy(), act), 120.0)
    assert tr[0, 0] == 1.0 and tr[1, 0] == 1.0 and np.isnan(tr[2, 0])
    assert np.all(np.isnan(tr[:, 1]))


def test_mean_satisfaction_skips_idle():
    act = np.array([[10.0, 0.0], [10.0, 0.0]])
    sat = np.array([[5.0, 0.0], [10.0, 0.0]])
    r = fake_result(sat, act)
    assert r.mean_satisfaction() == pytest.approx(0.75)
    assert r.mean_satisfaction(60.0) == pytest.approx(1.0)


def small_run(seed=3):
    cfg = SimConfig(t_sim=1800.0)
    return run(generate_scenario(3, 10, seed=seed, config=cfg), cfg)


def test_emit_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    emit([small_run()], a)
    emit([small_run()], b)
    names = sorted(p.name for p in a.iterdir())
    assert names == ["agent_trace.csv", "batch_summary.csv", "summary.json", "time_series.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "time_series.csv").read_text().splitlines()[0]
    assert header == "time,node,metric,value"
    assert json.loads((a / "summary.json").read_text())[0]["mode"] == "adaptive"


def test_emit_many_runs_in_subdirectories(tmp_path):
    emit([small_run(1), small_run(2)], tmp_path, time_series=False)
    assert (tmp_path / "adaptive_1" / "summary.json").exists()
    rows = read_batch_summary(tmp_path / "batch_summary.csv")
    assert [r["scenario_seed"] for r in rows] == [1, 2]


def test_batch_summary_schema_and_empty(tmp_path):
    write_batch_summary([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == ",".join(BATCH_COLUMNS) + "\n"
    assert BATCH_COLUMNS == ("scenario_seed", "mode", "mean_satisfaction", "agg_throughput_mbps",
                             "drop_ratio", "convergence_time_s")
    s = small_run().summary()
    write_batch_summary([s, dict(s, mode="static", convergence_time_s=None)], tmp_path / "b.csv")
    back = read_batch_summary(tmp_path / "b.csv")
    assert back[0]["mean_satisfaction"] == s["mean_satisfaction"]
    assert back[1]["convergence_time_s"] is None


def test_emit_reports_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_batch_summary([], blocker / "out.csv")


def test_report_tables(tmp_path):
    rows = [{"scenario_seed": k, "mode": m, "mean_satisfaction": v, "agg_throughput_mbps": 10.0 + k,
             "drop_ratio": 0.1, "convergence_time_s": (None if k == 2 else 3600.0 * (k + 1))}
            for k, v in enumerate([0.6, 0.7, 0.8]) for m in ("static", "adaptive")]
    agg = aggregate(rows)
    assert agg["static"]["mean_satisfaction"]["median"] == pytest.approx(0.7)
    assert agg["adaptive"]["convergence_cdf"][-1] == [7200.0, 2 / 3]
    paths = write_report(rows, tmp_path)
    with open(paths[0]) as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 6 and {r["mode"] for r in table} == {"static", "adaptive"}
