"""Handover signaling accounting.

Two procedures over the same radio snapshot:

* uplink-reference-signal: the moving cell head broadcasts one UL
  reference signal; every base station in range measures it and reports
  to a central controller, which picks the target. The device transmits
  once and receives at most one handover command.
* baseline: the device itself measures downlink reference signals from
  every base station in range, reports them uplink, and on a handover
  executes a random access toward the target.

Both use the same argmax-with-hysteresis decision rule, so they differ
only in who signals, never in where the device ends up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .topology import Node, PathLoss


class RadioLinkFailure(Exception):
    """No base station in range of the moving entity."""

    def __init__(self, entity_id: int, time: float):
        super().__init__(f"radio link failure for node {entity_id} at t={time}")
        self.entity_id = entity_id
        self.time = time


@dataclass(frozen=True)
class MeasurementReport:
    bs_id: int
    rx_power_dbm: float
    time: float


@dataclass
class HandoverEvent:
    entity_id: int
    serving_bs: int
    target_bs: int
    ue_tx_messages: int
    ue_rx_messages: int
    network_messages: int
    decision_time: float
    procedure: str = "ul_rs"
    reports: list[MeasurementReport] = field(default_factory=list)

    @property
    def executed(self) -> bool:
        return self.target_bs != self.serving_bs


DEFAULT_HYSTERESIS_DB = 3.0


def _measure(mch: Node, stations: Sequence[Node], pathloss: PathLoss,
             max_range: float, time: float) -> list[MeasurementReport]:
    reports = []
    for stn in sorted(stations, key=lambda s: s.id):
        if mch.distance_to(stn) <= max_range:
            power = pathloss.received_power_dbm(mch.tx_power_dbm, mch.distance_to(stn))
            reports.append(MeasurementReport(stn.id, power, time))
    return reports


def _decide(reports: Sequence[MeasurementReport], serving_id: int,
            hysteresis_db: float) -> int:
    """Target selection: strongest station, but a challenger must beat
    the serving station by the hysteresis margin."""
    by_id = {r.bs_id: r.rx_power_dbm for r in reports}
    best = min(by_id, key=lambda b: (-by_id[b], b))
    if serving_id in by_id and best != serving_id:
        if by_id[best] <= by_id[serving_id] + hysteresis_db:
            return serving_id
    return best


Controller = Callable[[Sequence[MeasurementReport], int, float], int]


def ul_rs_handover(mch: Node, serving_bs: Node, neighbor_bss: Sequence[Node],
                   pathloss: PathLoss, controller: Optional[Controller] = None,
                   max_range: float = 1000.0,
                   hysteresis_db: float = DEFAULT_HYSTERESIS_DB,
                   time: float = 0.0) -> HandoverEvent:
    """One decision epoch of the uplink-reference-signal procedure.

    ``controller`` replaces the default target-selection rule; it gets the
    reports, the serving id and the margin and returns the target id.
    """
    stations = [serving_bs, *neighbor_bss]
    reports = _measure(mch, stations, pathloss, max_range, time)
    if not reports:
        raise RadioLinkFailure(mch.id, time)
    decide = controller if controller is not None else _decide
    target = decide(reports, serving_bs.id, hysteresis_db)
    executed = target != serving_bs.id
    return HandoverEvent(
        entity_id=mch.id,
        serving_bs=serving_bs.id,
        target_bs=target,
        ue_tx_messages=1,                      # the UL RS broadcast itself
        ue_rx_messages=1 if executed else 0,   # handover command downlink
        network_messages=len(reports),         # per-BS reports to the controller
        decision_time=time,
        procedure="ul_rs",
        reports=reports,
    )


def baseline_handover(mch: Node, serving_bs: Node, neighbor_bss: Sequence[Node],
                      pathloss: PathLoss, max_range: float = 1000.0,
                      hysteresis_db: float = DEFAULT_HYSTERESIS_DB,
                      time: float = 0.0) -> HandoverEvent:
    """Device-measured downlink procedure used as the comparison point.

    The device receives a reference signal from every station in range,
    transmits one measurement report, and on an executed handover also
    receives the command and transmits the random access to the target.
    """
    stations = [serving_bs, *neighbor_bss]
    reports = _measure(mch, stations, pathloss, max_range, time)
    if not reports:
        raise RadioLinkFailure(mch.id, time)
    target = _decide(reports, serving_bs.id, hysteresis_db)
    executed = target != serving_bs.id
    return HandoverEvent(
        entity_id=mch.id,
        serving_bs=serving_bs.id,
        target_bs=target,
        ue_tx_messages=2 if executed else 1,
        ue_rx_messages=len(reports) + (1 if executed else 0),
        # report forwarded to the controller, plus target preparation on HO
        network_messages=1 + (1 if executed else 0),
        decision_time=time,
        procedure="baseline",
        reports=reports,
    )


def ho_energy(event: HandoverEvent, e_tx: float = 1.0, e_rx: float = 0.1) -> float:
    """Device-side signaling energy of one handover event."""
    return event.ue_tx_messages * e_tx + event.ue_rx_messages * e_rx
