"""Topology layer: nodes, mobility, small-cell formation and headship.

A mobile small cell (MSC) is a set of user devices grouped around an
elected cell head; the head carries the gateway association to the best
fixed base station. Election scores weigh battery, mean link quality to
the other candidates, and neighbor degree; a hysteresis margin keeps an
incumbent head from flapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence


class TopologyError(Exception):
    pass


class NodeKind(Enum):
    BASE_STATION = "bs"
    UE = "ue"


class Role(Enum):
    MCH = "mch"
    MEMBER = "member"
    IDLE = "idle"
    GATEWAY = "gateway"


class ReselectionTrigger(Enum):
    BATTERY_BELOW_THRESHOLD = "battery_below_threshold"
    NEW_CAPABLE_NODE_IN_RANGE = "new_capable_node_in_range"
    QOS_REQUEST = "qos_request"
    HEAD_LEFT_COVERAGE = "head_left_coverage"


@dataclass
class Node:
    id: int
    kind: NodeKind
    position: tuple[float, float]
    battery: float = 1.0
    role: Role = Role.IDLE
    velocity: tuple[float, float] = (0.0, 0.0)
    speed: float = 0.0
    waypoint: Optional[tuple[float, float]] = None
    tx_power_dbm: float = 23.0

    def __post_init__(self):
        if not 0.0 <= self.battery <= 1.0:
            raise TopologyError(f"battery must be in [0, 1], got {self.battery}")

    def distance_to(self, other: "Node") -> float:
        return math.hypot(self.position[0] - other.position[0],
                          self.position[1] - other.position[1])


@dataclass
class MobileSmallCell:
    id: int
    head: Optional[int]                  # node id of the MCH, None if dissolved
    members: set[int] = field(default_factory=set)
    coverage_radius: float = 50.0
    gateway_bs: Optional[int] = None

    @property
    def dissolved(self) -> bool:
        return self.head is None

    def validate(self, nodes: dict[int, Node]) -> None:
        if self.dissolved:
            return
        if self.head not in self.members:
            raise TopologyError("cell head must be a member of its own cell")
        head = nodes[self.head]
        for mid in self.members:
            if nodes[mid].distance_to(head) > self.coverage_radius + 1e-9:
                raise TopologyError(f"member {mid} outside coverage of head {self.head}")


@dataclass(frozen=True)
class PathLoss:
    """Log-distance pathloss: PL(d) = pl0 + 10 * exponent * log10(d / d0)."""

    pl0_db: float = 40.0
    exponent: float = 3.5
    ref_distance: float = 1.0

    def loss_db(self, distance: float) -> float:
        d = max(distance, self.ref_distance)
        return self.pl0_db + 10.0 * self.exponent * math.log10(d / self.ref_distance)

    def received_power_dbm(self, tx_power_dbm: float, distance: float) -> float:
        return tx_power_dbm - self.loss_db(distance)


@dataclass(frozen=True)
class ElectionPolicy:
    """Weighted score over battery, mean link quality, and degree."""

    w_battery: float = 0.5
    w_link: float = 0.3
    w_degree: float = 0.2
    hysteresis: float = 0.05
    battery_depleted: float = 0.1

    def __post_init__(self):
        weights = (self.w_battery, self.w_link, self.w_degree)
        if any(w < 0 for w in weights):
            raise TopologyError("election weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise TopologyError("election weights must sum to 1")

    def score(self, candidate: Node, peers: Sequence[Node], radius: float) -> float:
        others = [p for p in peers if p.id != candidate.id]
        if not others:
            return self.w_battery * candidate.battery + self.w_link + self.w_degree
        dists = [candidate.distance_to(o) for o in others]
        in_range = [d for d in dists if d <= radius]
        # link quality decays linearly with distance inside the radius
        quality = sum(max(0.0, 1.0 - d / radius) for d in dists) / len(others)
        degree = len(in_range) / len(others)
        return (self.w_battery * candidate.battery
                + self.w_link * quality
                + self.w_degree * degree)


def _elect(candidates: Sequence[Node], policy: ElectionPolicy, radius: float) -> tuple[int, dict[int, float]]:
    scores = {c.id: policy.score(c, candidates, radius) for c in candidates}
    # argmax with lowest-id tie break
    best = min(scores, key=lambda nid: (-scores[nid], nid))
    return best, scores


def form_msc(candidates: Iterable[Node], policy: ElectionPolicy, radius: float,
             cell_id: int = 0) -> MobileSmallCell:
    """Elect a head among candidates and attach those within its radius.

    Candidates are expected to be mutually within twice the radius; the
    returned cell contains the head plus every candidate it covers.
    """
    cand = sorted(candidates, key=lambda n: n.id)
    if not cand:
        raise TopologyError("cannot form a cell from an empty candidate set")
    ids = [n.id for n in cand]
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate node ids among candidates")
    head_id, _ = _elect(cand, policy, radius)
    head = next(n for n in cand if n.id == head_id)
    members = {n.id for n in cand if n.distance_to(head) <= radius}
    for n in cand:
        if n.id == head_id:
            n.role = Role.MCH
        elif n.id in members:
            n.role = Role.MEMBER
    return MobileSmallCell(cell_id, head_id, members, radius)


def reselect_mch(msc: MobileSmallCell, trigger: ReselectionTrigger,
                 policy: ElectionPolicy, nodes: dict[int, Node]) -> MobileSmallCell:
    """Re-run the election over current members.

    The incumbent is retained unless a challenger beats its score by the
    hysteresis margin; a battery-depleted or departed incumbent never
    retains headship. With no eligible member the cell dissolves.
    """
    member_nodes = [nodes[mid] for mid in sorted(msc.members) if mid in nodes]
    incumbent = nodes.get(msc.head) if msc.head is not None else None

    def eligible(n: Node) -> bool:
        if n.battery <= policy.battery_depleted:
            return False
        if incumbent is not None and trigger is ReselectionTrigger.HEAD_LEFT_COVERAGE:
            if n.id == msc.head:
                return False
        return True

    pool = [n for n in member_nodes if eligible(n)]
    if not pool:
        for n in member_nodes:
            n.role = Role.IDLE
        return MobileSmallCell(msc.id, None, set(), msc.coverage_radius)

    winner_id, scores = _elect(pool, policy, msc.coverage_radius)
    keep_incumbent = (
        incumbent is not None
        and any(n.id == incumbent.id for n in pool)
        and trigger is not ReselectionTrigger.BATTERY_BELOW_THRESHOLD
        and scores[winner_id] <= scores.get(incumbent.id, -math.inf) + policy.hysteresis
    )
    head_id = incumbent.id if keep_incumbent else winner_id
    head = nodes[head_id]
    members = {n.id for n in member_nodes if n.distance_to(head) <= msc.coverage_radius}
    members.add(head_id)
    for n in member_nodes:
        n.role = Role.MCH if n.id == head_id else (Role.MEMBER if n.id in members else Role.IDLE)
    return MobileSmallCell(msc.id, head_id, members, msc.coverage_radius, msc.gateway_bs)


def step_mobility(nodes: Iterable[Node], dt: float, rng,
                  arena: tuple[float, float], speed_range: tuple[float, float] = (1.0, 5.0)) -> None:
    """Random-waypoint step: advance each UE toward its waypoint.

    On arrival a fresh waypoint is drawn uniformly in the arena and a
    fresh speed from the configured range. Base stations never move.
    """
    if dt <= 0:
        raise TopologyError("dt must be positive")
    width, height = arena
    for node in nodes:
        if node.kind is NodeKind.BASE_STATION:
            continue
        remaining = node.speed * dt
        while remaining > 1e-12:
            if node.waypoint is None:
                node.waypoint = (float(rng.uniform(0, width)), float(rng.uniform(0, height)))
                if node.speed <= 0:
                    break
            dx = node.waypoint[0] - node.position[0]
            dy = node.waypoint[1] - node.position[1]
            dist = math.hypot(dx, dy)
            if dist <= remaining:
                node.position = node.waypoint
                node.waypoint = None
                remaining -= dist
                node.speed = float(rng.uniform(*speed_range))
            else:
                frac = remaining / dist
                node.position = (node.position[0] + dx * frac, node.position[1] + dy * frac)
                node.velocity = (dx / dist * node.speed, dy / dist * node.speed)
                remaining = 0.0


def associate_gateway(msc: MobileSmallCell, base_stations: Sequence[Node],
                      pathloss: PathLoss, nodes: dict[int, Node]) -> MobileSmallCell:
    """Point the cell's gateway link at the base station heard loudest
    by the head (lowest id on ties)."""
    if msc.dissolved:
        raise TopologyError("cannot associate a dissolved cell")
    if not base_stations:
        raise TopologyError("no base stations available")
    head = nodes[msc.head]
    best = min(
        base_stations,
        key=lambda bs: (-pathloss.received_power_dbm(bs.tx_power_dbm, head.distance_to(bs)), bs.id),
    )
    msc.gateway_bs = best.id
    return msc


def topology_snapshot(time: float, nodes: Iterable[Node],
                      cells: Sequence[MobileSmallCell] = ()) -> list[dict]:
    """One plain-dict record per node for the run's output stream."""
    cell_of = {}
    for cell in cells:
        for member in cell.members:
            cell_of[member] = cell.id
    out = []
    for node in sorted(nodes, key=lambda n: n.id):
        out.append({
            "time": time,
            "node": node.id,
            "kind": node.kind.value,
            "x": round(node.position[0], 3),
            "y": round(node.position[1], 3),
            "role": node.role.value,
            "msc": cell_of.get(node.id),
            "battery": round(node.battery, 4),
        })
    return out
