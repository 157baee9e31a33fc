import numpy as np
import pytest

from mabwlan.agents import (
    DapsAgent,
    DcaAgent,
    apply_channel_switch,
    apply_reassociation,
    build_station_action_set,
    defer_if_busy,
    on_activation,
    ssf_associate,
)
from mabwlan.bandit import ArmPosterior
from mabwlan.engine import Scenario, SimConfig, Simulation


def test_action_set_threshold():
    assert build_station_action_set(np.array([-60, -70, -78]), -75, -80) == [0, 1]


def test_action_set_fallback_to_strongest():
    assert build_station_action_set(np.array([-78, -79]), -75, -80) == [0]
    assert build_station_action_set(np.array([-79.5, -78.2, -90]), -75, -80) == [1]


def test_action_set_nothing_audible():
    with pytest.raises(ValueError):
        build_station_action_set(np.array([-81, -85]), -75, -80)


def test_ssf():
    rssi = np.array([-60.0, -70.0, -60.0])
    assert ssf_associate(rssi, [0, 1]) == 0
    assert ssf_associate(rssi, [2, 0]) == 0
    assert ssf_associate(rssi, [1]) == 1
    with pytest.raises(ValueError):
        ssf_associate(rssi, [])


def test_defer_if_busy():
    assert defer_if_busy(180.0, [200.0]) == 200.0
    assert defer_if_busy(180.0, []) == 180.0
    assert defer_if_busy(180.0, [200.0, 250.0]) == 250.0
    assert defer_if_busy(180.0, [150.0]) == 180.0


def test_agent_validation():
    with pytest.raises(ValueError):
        DcaAgent(0, (), 36)
    with pytest.raises(ValueError):
        DcaAgent(0, (36, 36), 36)
    with pytest.raises(ValueError):
        DcaAgent(0, (36, 40), 44)
    with pytest.raises(ValueError):
        DapsAgent(0, (1, 2), 1, period=0)


def test_activation_updates_current_arm_once():
    a = DcaAgent(0, (36, 40, 44), 40, rng=np.random.default_rng(0))
    seen = []

    def reward(arm, lo, hi):
        seen.append((arm, lo, hi))
        return 0.3

    on_activation(a, 1000.0, reward)
    assert seen == [(40, 460.0, 1000.0)]
    assert a.posterior_of(40) == ArmPosterior(0.15, 1)
    assert a.posterior_of(36) == ArmPosterior() == a.posterior_of(44)
    assert a.next_activation == 1180.0
    assert (a.activations, a.updates) == (1, 1)


def test_activation_without_samples_keeps_arm():
    a = DapsAgent(3, (0, 1), 1, rng=np.random.default_rng(0))
    for k in range(20):
        assert on_activation(a, 180.0 * (k + 1), lambda *_: None) == 1
    assert all(p == ArmPosterior() for p in a.posteriors)
    assert a.updates == 0 and a.next_activation == 180.0 * 21


def test_single_arm_agent_never_moves():
    a = DapsAgent(0, (2,), 2)
    assert not a.learns
    assert on_activation(a, 10.0, lambda *_: pytest.fail("single-arm agent must not score")) == 2


def test_activation_clamps_reward():
    a = DcaAgent(0, (36, 40), 36)
    on_activation(a, 10.0, lambda *_: 1.0000000001)
    assert a.posterior_of(36).mu_hat == 0.5


def test_activation_prefers_better_arm_eventually():
    rng = np.random.default_rng(7)
    a = DcaAgent(0, (36, 40), 36, rng=rng)
    means = {36: 0.9, 40: 0.2}
    for k in range(300):
        a.current = on_activation(a, 180.0 * k, lambda arm, lo, hi: means[arm])
    assert a.posterior_of(36).n > 5 * a.posterior_of(40).n


# -- applying decisions to a live network ----------------------------------

def line_scenario():
    # two APs 6 m apart (mutual CCA), one more far away; stations beside each AP
    ap = np.array([[2.0, 10.0, 1.0], [8.0, 10.0, 1.0], [28.0, 10.0, 1.0]])
    sta = np.array([[2.0, 11.0, 1.0], [8.0, 11.0, 1.0], [5.0, 10.5, 1.0], [28.0, 11.0, 1.0]])
    return Scenario((30.0, 20.0, 2.0), ap, sta, (36, 40, 44), (36, 40, 36), (0, 1, 0, 2), seed=1)


def live_net(t=500.0):
    cfg = SimConfig(t_sim=3600.0, demand_min_mbps=20.0, demand_max_mbps=20.0, t_on=1e4, t_off=1e-3)
    sim = Simulation(line_scenario(), cfg, "static")
    sim.net.advance(t)
    return sim.net


def test_fixture_geometry():
    links = line_scenario().links(SimConfig())
    assert links.sense[:, 0, 1].all() and links.sense[:, 1, 0].all()
    assert not links.sense[:, 0, 2].any() and not links.sense[:, 1, 2].any()


def test_switch_onto_neighbour_channel_merges_loads():
    net = live_net()
    own = net.own_load
    assert np.all(own > 0)
    np.testing.assert_allclose(net.eff_load, own)
    assert apply_channel_switch(net, 1, 36, (36, 40, 44))
    np.testing.assert_allclose(net.eff_load, [own[0] + own[1], own[0] + own[1], own[2]])
    np.testing.assert_allclose(net.eff_load, net.scratch_effective_loads(), atol=1e-12)


def test_switch_to_unused_channel_isolates():
    net = live_net()
    net.set_channel(1, 36)
    assert apply_channel_switch(net, 0, 44, (36, 40, 44))
    np.testing.assert_allclose(net.eff_load, net.own_load)


def test_switch_to_current_channel_is_noop():
    net = live_net()
    before = (net.eff_load, net.channels, net.events)
    assert not apply_channel_switch(net, 0, 36, (36, 40, 44))
    np.testing.assert_array_equal(before[0], net.eff_load)
    np.testing.assert_array_equal(before[1], net.channels)
    with pytest.raises(ValueError):
        apply_channel_switch(net, 0, 48, (36, 40, 44))


def test_reassociation_to_farther_ap_costs_airtime():
    net = live_net()
    assert net.station_busy(1)
    u_before = net.flow_airtime_scratch()[1]
    assert apply_reassociation(net, 1, 0, [0, 1])
    u_after = net.flow_airtime_scratch()[1]
    assert u_after > u_before
    np.testing.assert_allclose(net.eff_load, net.scratch_effective_loads(), atol=1e-12)


def test_idle_reassociation_changes_no_load():
    cfg = SimConfig(t_sim=3600.0)
    sim = Simulation(line_scenario(), cfg, "static")
    net = sim.net
    # advance to a moment when station 2 is idle
    t = 0.0
    while True:
        t += 0.25
        net.advance(t)
        if not net.station_busy(2):
            break
    before = net.eff_load
    assert apply_reassociation(net, 2, 1, [0, 1])
    np.testing.assert_array_equal(net.eff_load, before)


def test_reassociation_contract():
    net = live_net()
    assert not apply_reassociation(net, 0, 0, [0, 1])
    with pytest.raises(ValueError):
        apply_reassociation(net, 0, 2, [0, 1])
