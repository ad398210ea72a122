"""Distributed trusted-third-party service over the shareholder roster.

Every operation that needs the master key runs as a t-of-n quorum:
credential requests are threshold-signed, and share issuance for a
joining node is computed as a blinded sum of Lagrange-weighted share
contributions, so the joining node learns exactly f(x_new) and nothing
about any server's own share. The roster is the single replicated
record of who holds which index; joining nodes are appended to it, so
the shareholder set grows with the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .credentials import (
    CredentialError,
    ProxyCredential,
    Warrant,
    credential_body,
    verify_credential,
)
from .groups import GroupParams, rand_below
from .shamir import KMConfig, KeyShare, lagrange_weight, setup
from .threshold import SigningSession, combine_partials, verify


class ServiceUnavailable(Exception):
    pass


class RosterError(Exception):
    pass


@dataclass
class Shareholder:
    node_id: int
    share: KeyShare
    reachable: bool = True


@dataclass(frozen=True)
class TranscriptEntry:
    kind: str                        # bootstrap | credential | share-issue
    time: float
    requester: object
    participants: tuple[int, ...]    # node ids of the serving quorum
    outcome: str                     # "ok" or a failure reason
    audit: dict = field(default_factory=dict, hash=False, compare=False)


class KMService:
    """Shared-roster view of the distributed authority.

    Holds only the master PUBLIC key; the private key exists nowhere
    after bootstrap, it is implied by the shares in the roster.
    """

    def __init__(self, params: GroupParams, master_public: int, threshold: int, rng):
        self.params = params
        self.master_public = master_public
        self.threshold = threshold
        self.rng = rng
        self.roster: dict[int, Shareholder] = {}
        self.transcript: list[TranscriptEntry] = []
        self._next_index = 1

    @classmethod
    def bootstrap(cls, config: KMConfig, params: GroupParams, rng,
                  node_ids: Sequence[int]) -> "KMService":
        """Initial dealing; the dealt private key goes out of scope here."""
        node_ids = list(node_ids)
        if len(node_ids) != config.n:
            raise RosterError(f"need {config.n} node ids, got {len(node_ids)}")
        if len(set(node_ids)) != len(node_ids):
            raise RosterError("duplicate node ids")
        master, shares = setup(config, params, rng)
        service = cls(params, master.public, config.t, rng)
        for node_id, share in zip(node_ids, shares):
            service.roster[node_id] = Shareholder(node_id, share)
        service._next_index = config.n + 1
        service.transcript.append(TranscriptEntry(
            "bootstrap", 0.0, None, tuple(sorted(node_ids)), "ok",
            {"n": config.n, "t": config.t}))
        return service

    # --- roster ------------------------------------------------------

    def reachable_servers(self) -> list[Shareholder]:
        return [h for _, h in sorted(self.roster.items()) if h.reachable]

    def set_reachable(self, node_id: int, flag: bool) -> None:
        self.roster[node_id].reachable = flag

    def is_shareholder(self, node_id: int) -> bool:
        return node_id in self.roster

    def _quorum(self) -> list[Shareholder]:
        """Uniformly random t-subset of the reachable servers."""
        servers = self.reachable_servers()
        if len(servers) < self.threshold:
            raise ServiceUnavailable(
                f"{len(servers)} reachable servers, threshold {self.threshold}")
        picks = self.rng.choice(len(servers), size=self.threshold, replace=False)
        return [servers[i] for i in sorted(picks)]

    # --- credential issuance ------------------------------------------

    def request_credential(self, requester_id, requester_public: int,
                           warrant: Warrant, now: float = 0.0) -> ProxyCredential:
        try:
            quorum = self._quorum()
        except ServiceUnavailable:
            self.transcript.append(TranscriptEntry(
                "credential", now, requester_id, (), "unavailable"))
            raise
        body = credential_body(requester_id, requester_public, warrant)
        session = SigningSession(self.params, self.master_public, body,
                                 [h.share for h in quorum], self.threshold, self.rng)
        sig = combine_partials(session.partials(), self.threshold, self.params)
        cred = ProxyCredential(requester_id, requester_public, warrant, sig)
        if not verify(self.params, self.master_public, body, sig):
            self.transcript.append(TranscriptEntry(
                "credential", now, requester_id,
                tuple(h.node_id for h in quorum), "signature-failure"))
            raise CredentialError("quorum produced an invalid signature")
        self.transcript.append(TranscriptEntry(
            "credential", now, requester_id,
            tuple(h.node_id for h in quorum), "ok"))
        return cred

    # --- share issuance -------------------------------------------------

    def issue_share(self, joining_id: int, credential: ProxyCredential,
                    now: float = 0.0) -> KeyShare:
        """Blinded quorum evaluation of the sharing polynomial at a fresh
        index; the joining node becomes a shareholder."""
        if joining_id in self.roster:
            raise RosterError(f"node {joining_id} already holds a share")
        if credential.holder_id != joining_id:
            raise RosterError("credential names a different node")
        if not verify_credential(credential, self.master_public, self.params):
            raise RosterError("invalid credential")
        x_new = self._next_index
        if x_new >= self.params.q:
            raise RosterError("share index space exhausted for this group")
        try:
            quorum = self._quorum()
        except ServiceUnavailable:
            self.transcript.append(TranscriptEntry(
                "share-issue", now, joining_id, (), "unavailable"))
            raise

        q = self.params.q
        indices = [h.share.index for h in quorum]
        raw = {h.node_id: lagrange_weight(indices, h.share.index, x_new, q)
               * h.share.value % q for h in quorum}
        # pairwise zero-sum blinds: (a adds r, b subtracts r) per pair
        blinds = {}
        masked = dict(raw)
        ids = [h.node_id for h in quorum]
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                r = rand_below(self.rng, q)
                blinds[(a, b)] = r
                masked[a] = (masked[a] + r) % q
                masked[b] = (masked[b] - r) % q
        value = sum(masked.values()) % q

        share = KeyShare(x_new, value)
        self.roster[joining_id] = Shareholder(joining_id, share)
        self._next_index += 1
        self.transcript.append(TranscriptEntry(
            "share-issue", now, joining_id, tuple(ids), "ok",
            {"index": x_new, "blinded_contributions": masked, "blinds": blinds}))
        return share

    # --- audit ---------------------------------------------------------

    def fairness_audit(self) -> dict:
        """Service counts per shareholder plus a dispersion statistic."""
        counts = {node_id: 0 for node_id in self.roster}
        for entry in self.transcript:
            if entry.kind in ("credential", "share-issue") and entry.outcome == "ok":
                for node_id in entry.participants:
                    if node_id in counts:
                        counts[node_id] += 1
        values = list(counts.values())
        mean = sum(values) / len(values) if values else 0.0
        ratio = max(values) / mean if mean > 0 else 1.0
        return {
            "counts": counts,
            "mean": mean,
            "max_mean_ratio": ratio,
            "never_served": sorted(n for n, c in counts.items() if c == 0),
        }
