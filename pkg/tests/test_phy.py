import math
from fractions import Fraction

import numpy as np
import pytest

from mabwlan.phy import (
    McsEntry,
    NoLinkError,
    PathLossParams,
    PhyConstants,
    default_mcs_table,
    frame_durations,
    mcs_table_from_rows,
    mcs_table_to_rows,
    path_loss,
    received_power,
    select_mcs,
    select_mcs_index,
    successful_tx_time,
    validate_mcs_table,
)

US = 1e-6
TOP = default_mcs_table()[-1]


def hand_path_loss(d, f_c=5.18, d_bp=5.0, walls=4):
    pl = 40.05 + 20 * math.log10(f_c / 2.4) + 20 * math.log10(min(d, d_bp)) + 7 * walls
    if d > d_bp:
        pl += 35 * math.log10(d / d_bp)
    return pl


@pytest.mark.parametrize("d, expected", [(5.0, 88.71), (10.0, 99.25)])
def test_path_loss_golden(d, expected):
    assert hand_path_loss(d) == pytest.approx(expected, abs=0.01)
    assert path_loss(d) == pytest.approx(expected, abs=0.01)
    assert path_loss(d) == pytest.approx(hand_path_loss(d), abs=1e-12)


def test_path_loss_at_breakpoint_has_no_far_term():
    p = PathLossParams(d_bp=5.0)
    assert path_loss(5.0, p) == pytest.approx(40.05 + 20 * math.log10(5.18 / 2.4) + 20 * math.log10(5.0) + 28)
    # continuity at the breakpoint
    assert path_loss(5.0 + 1e-9, p) == pytest.approx(path_loss(5.0, p), abs=1e-6)


def test_path_loss_vectorized_and_rejects_zero():
    d = np.array([1.0, 5.0, 10.0])
    np.testing.assert_allclose(path_loss(d), [hand_path_loss(x) for x in d])
    with pytest.raises(ValueError):
        path_loss(0.0)
    with pytest.raises(ValueError):
        path_loss(np.array([1.0, -2.0]))


def test_received_power_golden():
    assert received_power(15, 0, 0, 88.71) == pytest.approx(-73.71)
    assert received_power(15, 0, 0, 0.0) == 15
    assert received_power(15, 0, 0, 99.25) == pytest.approx(-84.25)
    assert received_power(15, 0, 0, path_loss(10.0)) < -80


def test_default_table_shape():
    table = default_mcs_table()
    validate_mcs_table(table)
    assert [e.index for e in table] == list(range(12))
    assert TOP.l_dbps == 1950
    assert table[0].l_dbps == 117
    assert default_mcs_table(n_ss=2)[-1].l_dbps == 3900


def test_select_mcs_boundaries():
    table = default_mcs_table()
    assert select_mcs(table[0].min_rssi, table).index == 0
    assert select_mcs(10.0, table).index == 11
    with pytest.raises(NoLinkError):
        select_mcs(table[0].min_rssi - 0.01, table)


def test_select_mcs_matches_linear_scan():
    table = default_mcs_table()
    rng = np.random.default_rng(3)
    for rssi in rng.uniform(-81.9, -40, 200):
        expected = max(e.index for e in table if e.min_rssi <= rssi)
        assert select_mcs(rssi, table).index == expected
        assert select_mcs_index(rssi, table) == expected
    assert select_mcs_index(-90.0, table) == -1


def test_frame_durations_golden():
    f = frame_durations(TOP)
    assert round(f.t_rts / US) == 56
    assert round(f.t_cts / US) == 48
    assert round(f.t_ack / US) == 48
    assert round(f.t_data / US) == 276
    assert math.isclose(f.t_rts, 20 * US + math.ceil(194 / 24) * 4 * US)
    assert math.isclose(f.t_data, 164 * US + 7 * 16 * US)


def test_control_frames_independent_of_mcs():
    for e in default_mcs_table():
        f = frame_durations(e)
        assert (round(f.t_rts / US), round(f.t_cts / US), round(f.t_ack / US)) == (56, 48, 48)


def test_successful_tx_time_golden():
    assert successful_tx_time(TOP) == pytest.approx(519 * US, abs=1e-12)
    assert round(successful_tx_time(TOP) / US, 6) == 519


def test_successful_tx_time_legacy_rate_data():
    slow = McsEntry(0, 1, Fraction(1), -100.0, n_sc=24)
    assert slow.l_dbps == 24
    t_data = 164 * US + math.ceil(12354 / 24) * 16 * US
    assert frame_durations(slow).t_data == pytest.approx(t_data)
    assert successful_tx_time(slow) == pytest.approx(56 * US + 48 * US + 48 * US + t_data + 48 * US + 34 * US + 9 * US)


def test_degenerate_constants():
    tiny = 1e-30
    c = PhyConstants(t_e=1.0, t_sifs=tiny, t_difs=tiny, t_phy_legacy=tiny, t_phy_he_su=tiny,
                     legacy_symbol=tiny, he_symbol=tiny)
    assert successful_tx_time(TOP, c) == pytest.approx(1.0)


def test_phy_constants_reject_non_positive():
    with pytest.raises(ValueError):
        PhyConstants(t_e=0)


def test_mcs_rows_round_trip():
    table = default_mcs_table(n_ss=2)
    assert mcs_table_from_rows(mcs_table_to_rows(table)) == table


def test_mcs_table_validation():
    rows = mcs_table_to_rows(default_mcs_table())
    rows[3]["min_rssi"] = rows[2]["min_rssi"]
    with pytest.raises(ValueError):
        mcs_table_from_rows(rows)
    with pytest.raises(ValueError):
        validate_mcs_table([])
