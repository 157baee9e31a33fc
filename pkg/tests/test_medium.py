import numpy as np
import pytest

from mabwlan.medium import (
    AirtimeParams,
    LoadMap,
    airtime_requirement,
    allocated_airtime,
    channel_reward,
    effective_load,
    effective_loads,
    neighbor_mask,
    packets_per_second,
    satisfaction,
    satisfaction_array,
    station_throughput,
)
from mabwlan.phy import PhyConstants, default_mcs_table

TOP = default_mcs_table()[-1]


def two_aps_sensing():
    sense = np.zeros((1, 2, 2), dtype=bool)
    sense[0, 0, 1] = sense[0, 1, 0] = True
    return sense


def test_expected_backoff_default():
    assert AirtimeParams().expected_backoff == 7.5
    assert AirtimeParams(cw_min=32).expected_backoff == 15.5


def test_airtime_params_validation():
    with pytest.raises(ValueError):
        AirtimeParams(p_e=1.0)
    with pytest.raises(ValueError):
        AirtimeParams(expected_backoff=-1.0)


def test_airtime_golden():
    # hand oracle: (1/0.9) * ceil(1e6/12000) * (7.5*9 us + 519 us)
    oracle = (1 / 0.9) * 84 * (7.5 * 9e-6 + 519e-6)
    assert oracle == pytest.approx(0.05474, abs=1e-5)
    assert airtime_requirement(1e6, 12000, TOP) == pytest.approx(oracle, rel=1e-12)
    assert packets_per_second(1e6, 12000) == 84


def test_airtime_zero_demand_and_retry_ratio():
    assert airtime_requirement(0.0, 12000, TOP) == 0.0
    lossless = airtime_requirement(3e6, 12000, TOP, AirtimeParams(p_e=0.0))
    lossy = airtime_requirement(3e6, 12000, TOP, AirtimeParams(p_e=0.1))
    assert lossless / lossy == pytest.approx(0.9, abs=1e-15)
    with pytest.raises(ValueError):
        airtime_requirement(-1.0, 12000, TOP)


def test_airtime_grows_with_lower_mcs():
    u = [airtime_requirement(2e6, PhyConstants().l_d, e) for e in default_mcs_table()]
    assert all(a >= b for a, b in zip(u, u[1:]))


def test_effective_load_isolated():
    sense = np.zeros((1, 1, 1), dtype=bool)
    assert effective_load(0, np.array([0.4]), np.array([0]), sense) == pytest.approx(0.4)


@pytest.mark.parametrize("loads, total", [((0.4, 0.3), 0.7), ((0.4, 0.9), 1.3)])
def test_effective_load_co_channel_pair(loads, total):
    eff = effective_loads(np.array(loads), np.array([0, 0]), two_aps_sensing())
    np.testing.assert_allclose(eff, [total, total])


def test_effective_load_other_channel_ignored():
    sense = np.ones((2, 2, 2), dtype=bool)
    eff = effective_loads(np.array([0.4, 0.9]), np.array([0, 1]), sense)
    np.testing.assert_allclose(eff, [0.4, 0.9])


def test_neighbor_mask_uses_sensing_of_own_channel():
    sense = np.zeros((2, 3, 3), dtype=bool)
    sense[1, 0, 1] = sense[1, 1, 0] = True
    sense[0, 1, 2] = sense[0, 2, 1] = True
    np.testing.assert_array_equal(
        neighbor_mask(np.array([1, 1, 1]), sense),
        [[False, True, False], [True, False, False], [False, False, False]],
    )


def test_worked_example():
    load = 0.4 + 0.9
    sat = satisfaction(load)
    assert sat == pytest.approx(0.7692, abs=1e-4)
    assert allocated_airtime(0.4, sat) == pytest.approx(0.4 / 1.3, abs=1e-15)
    assert allocated_airtime(0.9, sat) == pytest.approx(0.9 / 1.3, abs=1e-15)
    # the published shares were computed from the satisfaction rounded to 0.769
    assert allocated_airtime(0.4, round(sat, 3)) == pytest.approx(0.3076, abs=1e-4)
    assert allocated_airtime(0.9, round(sat, 3)) == pytest.approx(0.6921, abs=1e-4)
    assert allocated_airtime(0.4, sat) + allocated_airtime(0.9, sat) == pytest.approx(1.0)


def test_channel_reward_values():
    assert channel_reward(0.7) == pytest.approx(0.3)
    assert channel_reward(1.3) == 0.0
    assert channel_reward(0.0) == 1.0


def test_satisfaction_values():
    assert satisfaction(0.7) == 1.0
    assert satisfaction(0.0) == 1.0
    assert satisfaction(2.0) == 0.5
    with pytest.raises(ValueError):
        satisfaction(-0.1)
    np.testing.assert_allclose(satisfaction_array([0.0, 0.7, 1.3, 2.0]), [1, 1, 1 / 1.3, 0.5])


def test_throughput_products():
    assert station_throughput(1e6, 0.769) == pytest.approx(0.769e6)
    assert station_throughput(3e6, 1.0) == 3e6
    assert station_throughput(5e6, 0.5) == 2.5e6
    assert allocated_airtime(0.3, 1.0) == 0.3


def test_load_map_derived_views():
    lm = LoadMap(0.0, np.array([0.4, 0.9]), np.array([1.3, 0.5]))
    np.testing.assert_allclose(lm.reward, [0.0, 0.5])
    np.testing.assert_allclose(lm.satisfaction, [1 / 1.3, 1.0])
