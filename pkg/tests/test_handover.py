"""Handover signaling counts: decision rule, message taxonomy, energy.

The trace comparison runs both procedures over the same mobility trace
and checks the structural claims (same targets, 1 vs 2 uplink messages
per executed handover, lower mean device energy) rather than absolute
figures.
"""

import pytest

from mscsim.engine import RunSeed
from mscsim.handover import (
    DEFAULT_HYSTERESIS_DB,
    HandoverEvent,
    MeasurementReport,
    RadioLinkFailure,
    baseline_handover,
    ho_energy,
    ul_rs_handover,
)
from mscsim.topology import Node, NodeKind, PathLoss, step_mobility

PL = PathLoss()


def _mch(x=0.0, y=0.0, node_id=0):
    return Node(node_id, NodeKind.UE, (x, y))


def _bs(node_id, x, y):
    return Node(node_id, NodeKind.BASE_STATION, (x, y))


class TestUlRs:
    def test_serving_strongest_no_handover(self):
        ev = ul_rs_handover(_mch(), _bs(1, 50, 0), [_bs(2, 100, 0)], PL)
        assert ev.target_bs == ev.serving_bs == 1
        assert not ev.executed
        assert ev.ue_tx_messages == 1
        assert ev.ue_rx_messages == 0

    def test_strong_neighbor_triggers_handover(self):
        # 50 m vs 100 m is a 10.5 dB gap, far past the 3 dB margin
        ev = ul_rs_handover(_mch(), _bs(1, 100, 0), [_bs(2, 50, 0)], PL)
        assert ev.executed
        assert ev.target_bs == 2
        assert ev.ue_tx_messages == 1
        assert ev.ue_rx_messages == 1

    def test_within_margin_no_handover(self):
        # 95 m vs 100 m is about 0.8 dB, inside the margin
        ev = ul_rs_handover(_mch(), _bs(1, 100, 0), [_bs(2, 95, 0)], PL)
        assert not ev.executed
        assert ev.target_bs == 1

    def test_network_messages_counts_stations_in_range(self):
        neighbors = [_bs(2, 80, 0), _bs(3, 0, 90), _bs(4, 5000, 0)]
        ev = ul_rs_handover(_mch(), _bs(1, 60, 0), neighbors, PL)
        assert ev.network_messages == 3  # the 5 km station never hears the UL RS
        assert {r.bs_id for r in ev.reports} == {1, 2, 3}

    def test_serving_out_of_range_forces_handover(self):
        ev = ul_rs_handover(_mch(), _bs(1, 5000, 0), [_bs(2, 100, 0)], PL)
        assert ev.executed
        assert ev.target_bs == 2

    def test_no_station_in_range_is_radio_link_failure(self):
        with pytest.raises(RadioLinkFailure) as exc:
            ul_rs_handover(_mch(node_id=9), _bs(1, 5000, 0), [_bs(2, 0, 7000)], PL, time=4.0)
        assert exc.value.entity_id == 9
        assert exc.value.time == 4.0

    def test_equidistant_neighbors_prefer_lowest_id(self):
        ev = ul_rs_handover(_mch(), _bs(1, 5000, 0), [_bs(7, 100, 0), _bs(3, 0, 100)], PL)
        assert ev.target_bs == 3

    def test_controller_override(self):
        def keep_serving(reports, serving_id, margin):
            return serving_id

        ev = ul_rs_handover(_mch(), _bs(1, 100, 0), [_bs(2, 50, 0)], PL,
                            controller=keep_serving)
        assert not ev.executed


class TestBaseline:
    def test_no_handover_report_only(self):
        ev = baseline_handover(_mch(), _bs(1, 50, 0), [_bs(2, 100, 0)], PL)
        assert not ev.executed
        assert ev.ue_tx_messages == 1
        assert ev.ue_rx_messages == 2  # downlink RS from both stations

    def test_executed_handover_message_counts(self):
        ev = baseline_handover(_mch(), _bs(1, 100, 0), [_bs(2, 50, 0)], PL)
        assert ev.executed
        assert ev.ue_tx_messages == 2
        assert ev.ue_rx_messages >= 2

    def test_same_target_as_ul_rs(self):
        serving = _bs(1, 100, 0)
        neighbors = [_bs(2, 50, 0), _bs(3, 40, 40), _bs(4, 200, 0)]
        a = ul_rs_handover(_mch(), serving, neighbors, PL)
        b = baseline_handover(_mch(), serving, neighbors, PL)
        assert a.target_bs == b.target_bs

    def test_no_station_in_range_is_radio_link_failure(self):
        with pytest.raises(RadioLinkFailure):
            baseline_handover(_mch(), _bs(1, 5000, 0), [], PL)


class TestEnergy:
    def test_zero_messages_zero_energy(self):
        ev = HandoverEvent(0, 1, 1, 0, 0, 0, 0.0)
        assert ho_energy(ev) == 0.0

    def test_ul_rs_event_energy(self):
        ev = HandoverEvent(0, 1, 2, 1, 1, 2, 0.0)
        assert ho_energy(ev, e_tx=1.0, e_rx=0.1) == pytest.approx(1.1)

    def test_energy_matches_count_arithmetic(self):
        ev = baseline_handover(_mch(), _bs(1, 100, 0), [_bs(2, 50, 0), _bs(3, 0, 70)], PL)
        expected = ev.ue_tx_messages * 2.0 + ev.ue_rx_messages * 0.25
        assert ho_energy(ev, e_tx=2.0, e_rx=0.25) == pytest.approx(expected)


def test_ping_pong_suppression_static_positions():
    # A stronger neighbor wins once; afterwards the old serving station
    # would need to beat the new one by the margin, which it cannot.
    mch = _mch()
    stations = {1: _bs(1, 100, 0), 2: _bs(2, 80, 0)}
    serving = 1
    executed = 0
    for epoch in range(10):
        neighbors = [s for sid, s in stations.items() if sid != serving]
        ev = ul_rs_handover(mch, stations[serving], neighbors, PL, time=float(epoch))
        if ev.executed:
            executed += 1
            serving = ev.target_bs
    assert executed == 1
    assert serving == 2


def test_trace_comparison_ul_rs_dominates_baseline():
    """Both procedures over one 1000-epoch random-waypoint trace."""
    rng = RunSeed(7).mobility()
    stations = {
        1: _bs(1, 50.0, 50.0),
        2: _bs(2, 250.0, 50.0),
        3: _bs(3, 150.0, 250.0),
    }
    ue = Node(0, NodeKind.UE, (150.0, 150.0), speed=4.0, waypoint=(40.0, 40.0))
    nodes = [ue, *stations.values()]
    serving = 1
    ul_events: list[HandoverEvent] = []
    base_events: list[HandoverEvent] = []
    for epoch in range(1000):
        step_mobility(nodes, 1.0, rng, arena=(300.0, 300.0), speed_range=(2.0, 8.0))
        neighbors = [s for sid, s in stations.items() if sid != serving]
        ul = ul_rs_handover(ue, stations[serving], neighbors, PL, time=float(epoch))
        base = baseline_handover(ue, stations[serving], neighbors, PL, time=float(epoch))
        assert ul.target_bs == base.target_bs  # identical radio snapshot
        ul_events.append(ul)
        base_events.append(base)
        serving = ul.target_bs

    executed = [i for i, ev in enumerate(ul_events) if ev.executed]
    assert executed, "trace produced no handovers; scenario is too easy"
    for i in executed:
        assert ul_events[i].ue_tx_messages == 1
        assert base_events[i].ue_tx_messages == 2
        assert ul_events[i].ue_tx_messages < base_events[i].ue_tx_messages

    total_ul_tx = sum(ev.ue_tx_messages for ev in ul_events)
    total_base_tx = sum(ev.ue_tx_messages for ev in base_events)
    assert total_ul_tx <= total_base_tx

    mean_ul = sum(ho_energy(ev) for ev in ul_events) / len(ul_events)
    mean_base = sum(ho_energy(ev) for ev in base_events) / len(base_events)
    assert mean_ul < mean_base
