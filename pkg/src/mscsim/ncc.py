"""Two-phase network-coded cooperation protocol.

Phase one distributes coded packets from the base station over the
cellular link, round-robin unicast, one packet per slot, no
retransmissions (the redundancy factor covers losses). Phase two is a
short-range TDMA rotation where each member recodes what it holds and
multicasts one packet per slot to the rest of the cloud, until everyone
has decoded everything or the slot budget runs out. The two phases run
back to back or interleaved one slot each.

A plain multi-unicast session over the cellular link with
retransmit-until-delivered is included as the comparison point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .engine import (
    DEFAULT_CELLULAR,
    DEFAULT_SHORT_RANGE,
    DeliveryStatus,
    EnergyWindow,
    LinkModel,
    RunSeed,
    Simulator,
)
from .rlnc import CodedPacket, DecoderState, Generation, draw_coeffs, encode


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Endpoint:
    """Minimal radio endpoint; topology nodes substitute structurally."""

    id: int
    position: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class CooperativeCloud:
    """Orderly cloud of UEs: member ids ascending, index = list position."""

    members: tuple[int, ...]
    head_id: int
    short_range: LinkModel = DEFAULT_SHORT_RANGE

    def __post_init__(self):
        if not self.members:
            raise ProtocolError("cloud needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ProtocolError("duplicate member ids")
        if list(self.members) != sorted(self.members):
            raise ProtocolError("members must be in ascending id order")

    @property
    def size(self) -> int:
        return len(self.members)

    def index_of(self, member_id: int) -> int:
        return self.members.index(member_id)


def assign_indices(member_ids: Sequence[int], head_id: int,
                   short_range: LinkModel = DEFAULT_SHORT_RANGE) -> CooperativeCloud:
    """Index the cloud 0..n-1 in ascending node-id order."""
    ids = list(member_ids)
    if not ids:
        raise ProtocolError("cannot form a cloud from no members")
    if len(set(ids)) != len(ids):
        raise ProtocolError(f"duplicate member ids: {sorted(ids)}")
    return CooperativeCloud(tuple(sorted(ids)), head_id, short_range)


@dataclass(frozen=True)
class SessionConfig:
    content: tuple[Generation, ...]
    redundancy: float = 1.0
    phase_mode: str = "sequential"
    slot_budget: Optional[int] = None       # cooperative-phase cap
    cellular_loss: float = 0.0
    short_range_loss: float = 0.0
    cellular: LinkModel = DEFAULT_CELLULAR

    def __post_init__(self):
        object.__setattr__(self, "content", tuple(self.content))
        if not self.content:
            raise ProtocolError("session needs at least one generation")
        if self.redundancy < 1.0:
            raise ProtocolError(f"redundancy must be >= 1, got {self.redundancy}")
        if self.phase_mode not in ("sequential", "parallel"):
            raise ProtocolError(f"unknown phase mode {self.phase_mode!r}")
        for p in (self.cellular_loss, self.short_range_loss):
            if not 0.0 <= p < 1.0:
                raise ProtocolError(f"loss probability {p} outside [0, 1)")
        if self.slot_budget is not None and self.slot_budget < self.source_packet_total:
            raise ProtocolError(
                f"slot budget {self.slot_budget} below content size {self.source_packet_total}")

    def coded_count(self, gen: Generation) -> int:
        return math.ceil(self.redundancy * gen.size)

    @property
    def source_packet_total(self) -> int:
        return sum(gen.size for gen in self.content)

    @property
    def total_coded(self) -> int:
        return sum(self.coded_count(gen) for gen in self.content)

    @property
    def effective_budget(self) -> int:
        if self.slot_budget is not None:
            return self.slot_budget
        return 4 * self.total_coded


@dataclass
class SessionMetrics:
    cellular_tx_count: int
    short_range_tx_count: int
    cellular_utilization: float
    decoding_ratio: float
    total_energy: float
    completion_time: int                 # slots, both phases, skips included
    truncated: bool = False              # a phase hit its slot budget
    records: tuple = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class SlotRecord:
    """One TDMA slot: who sent what to whom, and what it was worth."""

    slot: int
    phase: str                      # "cellular" | "cooperative"
    time: float
    sender: int
    generation_id: int              # -1 on a skipped slot
    receivers: tuple[int, ...]
    delivered: tuple[bool, ...]
    innovative: tuple[bool, ...]
    skipped: bool = False


class SessionCodec:
    """Decoder state per (member, generation) for one session."""

    def __init__(self, cloud: CooperativeCloud, content: Sequence[Generation]):
        self.cloud = cloud
        self.content = tuple(content)
        self._dec: dict[int, dict[int, DecoderState]] = {
            m: {gen.id: DecoderState(gen.id, gen.size, gen.payload_len)
                for gen in self.content}
            for m in cloud.members
        }

    def decoder(self, member_id: int, gen_id: int) -> DecoderState:
        return self._dec[member_id][gen_id]

    def ingest(self, member_id: int, pkt: CodedPacket) -> bool:
        return self._dec[member_id][pkt.generation_id].ingest(pkt)

    def decoded(self, member_id: int, gen_id: int) -> bool:
        return self._dec[member_id][gen_id].decodable

    def gen_decoded_by_all(self, gen_id: int) -> bool:
        return all(self._dec[m][gen_id].decodable for m in self.cloud.members)

    def all_decoded(self) -> bool:
        return all(self.gen_decoded_by_all(gen.id) for gen in self.content)

    def decoded_pairs(self) -> int:
        return sum(1 for m in self.cloud.members for gen in self.content
                   if self._dec[m][gen.id].decodable)

    def decoding_ratio(self) -> float:
        return self.decoded_pairs() / (self.cloud.size * len(self.content))


@dataclass
class PhaseLog:
    records: list[SlotRecord]
    slots_used: int
    truncated: bool = False


def _default_nodes(cloud: CooperativeCloud, bs_id: int) -> dict[int, Endpoint]:
    """Co-located endpoints: range never limits a desk-scale session."""
    nodes = {m: Endpoint(m) for m in cloud.members}
    nodes[bs_id] = Endpoint(bs_id)
    return nodes


def _cellular_plan(config: SessionConfig, coding_rng) -> list[tuple[Generation, int, np.ndarray]]:
    """Draw the coded packets for the whole distribution up front.

    Coefficient vectors are redrawn while zero or already used within
    the generation, so every transmission carries a distinct nonzero
    combination.
    """
    plan = []
    for gen in config.content:
        seen: set[bytes] = set()
        for k in range(config.coded_count(gen)):
            coeffs = draw_coeffs(coding_rng, gen.size)
            while not coeffs.any() or coeffs.tobytes() in seen:
                coeffs = draw_coeffs(coding_rng, gen.size)
            seen.add(coeffs.tobytes())
            plan.append((gen, k, coeffs))
    return plan


def _cellular_slot(cloud, codec, sim, link, nodes, bs_node, channel_rng,
                   gen, k, coeffs, slot) -> SlotRecord:
    member = cloud.members[k % cloud.size]
    pkt = encode(gen, coeffs)
    deliveries = sim.transmit(link, bs_node, [nodes[member]], channel_rng,
                              label=f"cell:g{gen.id}:k{k}")
    sim.advance(link.slot_duration)
    ok = deliveries[0].status is DeliveryStatus.DELIVERED
    innovative = codec.ingest(member, pkt) if ok else False
    return SlotRecord(slot, "cellular", sim.now(), bs_node.id, gen.id,
                      (member,), (ok,), (innovative,))


def _pick_generation(codec: SessionCodec, member_id: int) -> Optional[int]:
    """Lowest generation the sender can still help with: not yet decoded
    by the whole cloud and nonzero rank at the sender."""
    for gen in codec.content:
        if codec.gen_decoded_by_all(gen.id):
            continue
        if codec.decoder(member_id, gen.id).rank > 0:
            return gen.id
    return None


def _cooperative_slot(cloud, codec, sim, link, nodes, channel_rng, coding_rng,
                      sender_index, slot) -> SlotRecord:
    sender = cloud.members[sender_index]
    gen_id = _pick_generation(codec, sender)
    if gen_id is None:
        sim.advance(link.slot_duration)
        return SlotRecord(slot, "cooperative", sim.now(), sender, -1, (), (), (),
                          skipped=True)
    pkt = codec.decoder(sender, gen_id).recode(coding_rng)
    others = [m for m in cloud.members if m != sender]
    deliveries = sim.transmit(link, nodes[sender], [nodes[m] for m in others],
                              channel_rng, label=f"coop:g{gen_id}")
    sim.advance(link.slot_duration)
    ok = tuple(d.status is DeliveryStatus.DELIVERED for d in deliveries)
    innovative = tuple(codec.ingest(m, pkt) if got else False
                       for m, got in zip(others, ok))
    return SlotRecord(slot, "cooperative", sim.now(), sender, gen_id,
                      tuple(others), ok, innovative)


def cellular_phase(cloud: CooperativeCloud, config: SessionConfig,
                   codec: SessionCodec, sim: Simulator, *,
                   channel_rng, coding_rng, nodes=None, bs=None,
                   start_slot: int = 0) -> PhaseLog:
    """Round-robin unicast of the coded content; no retransmissions."""
    bs_node = bs if bs is not None else Endpoint(-1)
    if nodes is None:
        nodes = _default_nodes(cloud, bs_node.id)
    link = replace(config.cellular, p_loss=config.cellular_loss)
    plan = _cellular_plan(config, coding_rng)
    records = []
    truncated = False
    budget = config.effective_budget
    for i, (gen, k, coeffs) in enumerate(plan):
        if i >= budget:
            truncated = True
            break
        records.append(_cellular_slot(cloud, codec, sim, link, nodes, bs_node,
                                      channel_rng, gen, k, coeffs, start_slot + i))
    return PhaseLog(records, len(records), truncated)


def cooperative_phase(cloud: CooperativeCloud, config: SessionConfig,
                      codec: SessionCodec, sim: Simulator, *,
                      channel_rng, coding_rng, nodes=None,
                      start_slot: int = 0) -> PhaseLog:
    """Short-range TDMA rotation until all decode or the budget is gone."""
    if nodes is None:
        nodes = _default_nodes(cloud, -1)
    if cloud.size == 1:
        # nobody to multicast to; the phase is a no-op, not a truncation
        return PhaseLog([], 0)
    link = replace(cloud.short_range, p_loss=config.short_range_loss)
    records = []
    sender_index = 0
    budget = config.effective_budget
    while not codec.all_decoded():
        if len(records) >= budget:
            return PhaseLog(records, len(records), truncated=True)
        records.append(_cooperative_slot(cloud, codec, sim, link, nodes,
                                         channel_rng, coding_rng, sender_index,
                                         start_slot + len(records)))
        sender_index = (sender_index + 1) % cloud.size
    return PhaseLog(records, len(records))


def _resolve_rngs(seed, channel_rng, coding_rng):
    if channel_rng is not None and coding_rng is not None:
        return channel_rng, coding_rng
    rs = seed if isinstance(seed, RunSeed) else RunSeed(seed if seed is not None else 0)
    return (channel_rng if channel_rng is not None else rs.channel(),
            coding_rng if coding_rng is not None else rs.coding())


def run_session(cloud: CooperativeCloud, config: SessionConfig, *,
                sim: Optional[Simulator] = None, seed=None,
                channel_rng=None, coding_rng=None,
                nodes=None, bs=None) -> SessionMetrics:
    """Both phases plus the offloading metrics for one content item."""
    channel_rng, coding_rng = _resolve_rngs(seed, channel_rng, coding_rng)
    bs_node = bs if bs is not None else Endpoint(-1)
    if nodes is None:
        nodes = _default_nodes(cloud, bs_node.id)
    cell_link = replace(config.cellular, p_loss=config.cellular_loss)
    sr_link = replace(cloud.short_range, p_loss=config.short_range_loss)
    if sim is None:
        sim = Simulator({cell_link.kind: cell_link, sr_link.kind: sr_link})
    codec = SessionCodec(cloud, config.content)
    window = EnergyWindow(sim)

    records: list[SlotRecord] = []
    truncated = False
    if config.phase_mode == "sequential":
        cell = cellular_phase(cloud, config, codec, sim, channel_rng=channel_rng,
                              coding_rng=coding_rng, nodes=nodes, bs=bs_node)
        coop = cooperative_phase(cloud, config, codec, sim,
                                 channel_rng=channel_rng, coding_rng=coding_rng,
                                 nodes=nodes, start_slot=cell.slots_used)
        records = cell.records + coop.records
        truncated = cell.truncated or coop.truncated
    else:
        records, truncated = _parallel_session(cloud, config, codec, sim,
                                               channel_rng, coding_rng,
                                               nodes, bs_node)

    cell_tx = sum(1 for r in records if r.phase == "cellular")
    sr_tx = sum(1 for r in records if r.phase == "cooperative" and not r.skipped)
    return SessionMetrics(
        cellular_tx_count=cell_tx,
        short_range_tx_count=sr_tx,
        cellular_utilization=cell_tx / (cloud.size * config.source_packet_total),
        decoding_ratio=codec.decoding_ratio(),
        total_energy=window.energy(),
        completion_time=len(records),
        truncated=truncated,
        records=tuple(records),
    )


def _parallel_session(cloud, config, codec, sim, channel_rng, coding_rng,
                      nodes, bs_node):
    """One cellular slot, one cooperative slot, repeated; cooperative
    rotation continues alone once the distribution plan is exhausted."""
    cell_link = replace(config.cellular, p_loss=config.cellular_loss)
    sr_link = replace(cloud.short_range, p_loss=config.short_range_loss)
    plan = _cellular_plan(config, coding_rng)
    records: list[SlotRecord] = []
    budget = config.effective_budget
    coop_used = 0
    sender_index = 0
    solo = cloud.size == 1

    def coop_open():
        return not solo and coop_used < budget and not codec.all_decoded()

    for gen, k, coeffs in plan:
        records.append(_cellular_slot(cloud, codec, sim, cell_link, nodes,
                                      bs_node, channel_rng, gen, k, coeffs,
                                      len(records)))
        if coop_open():
            records.append(_cooperative_slot(cloud, codec, sim, sr_link, nodes,
                                             channel_rng, coding_rng,
                                             sender_index, len(records)))
            coop_used += 1
            sender_index = (sender_index + 1) % cloud.size
    while coop_open():
        records.append(_cooperative_slot(cloud, codec, sim, sr_link, nodes,
                                         channel_rng, coding_rng, sender_index,
                                         len(records)))
        coop_used += 1
        sender_index = (sender_index + 1) % cloud.size
    truncated = not solo and not codec.all_decoded()
    return records, truncated


def baseline_unicast_session(cloud: CooperativeCloud, config: SessionConfig, *,
                             sim: Optional[Simulator] = None, seed=None,
                             channel_rng=None, coding_rng=None,
                             nodes=None, bs=None) -> SessionMetrics:
    """Per-user unicast of every source packet, retransmit until delivered.

    The comparison denominator: no coding, no cooperation, cellular only.
    """
    channel_rng, _ = _resolve_rngs(seed, channel_rng, coding_rng)
    bs_node = bs if bs is not None else Endpoint(-1)
    if nodes is None:
        nodes = _default_nodes(cloud, bs_node.id)
    link = replace(config.cellular, p_loss=config.cellular_loss)
    if sim is None:
        sim = Simulator({link.kind: link})
    codec = SessionCodec(cloud, config.content)
    window = EnergyWindow(sim)
    records: list[SlotRecord] = []

    for member in cloud.members:
        for gen in config.content:
            for k in range(gen.size):
                unit = np.zeros(gen.size, dtype=np.uint8)
                unit[k] = 1
                pkt = encode(gen, unit)
                while True:
                    deliveries = sim.transmit(link, bs_node, [nodes[member]],
                                              channel_rng,
                                              label=f"unicast:g{gen.id}:k{k}")
                    sim.advance(link.slot_duration)
                    ok = deliveries[0].status is DeliveryStatus.DELIVERED
                    innovative = codec.ingest(member, pkt) if ok else False
                    records.append(SlotRecord(len(records), "cellular", sim.now(),
                                              bs_node.id, gen.id, (member,),
                                              (ok,), (innovative,)))
                    if ok:
                        break

    cell_tx = len(records)
    return SessionMetrics(
        cellular_tx_count=cell_tx,
        short_range_tx_count=0,
        cellular_utilization=cell_tx / (cloud.size * config.source_packet_total),
        decoding_ratio=codec.decoding_ratio(),
        total_energy=window.energy(),
        completion_time=cell_tx,
        records=tuple(records),
    )
