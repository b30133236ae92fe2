"""Per-vehicle protocol state: beaconing, neighbor table, key exchange.

Each node periodically broadcasts a beacon carrying its identifier, its
position and its public key-agreement value. Hearing a beacon serves two
purposes at once: the receiver refreshes (or creates) its neighbor-table
entry for the sender, and completes the responder side of the key
exchange, answering with a unicast ACK that carries its own public value
so the sender can finish the initiator side. The whole handshake is
those two messages.

Entries that stay silent past ``expiry_multiplier`` effective beacon
intervals are dropped. Forwarding decisions use the greedy geographic
rule over the live table: pick the neighbor strictly closest to the
destination, or give up at a local maximum.

Two key-agreement deployments are supported:

* ``DhMode.GLOBAL_PARAMS`` - every node shares one (p, w) group; beacons
  are version 1 and carry only the sender's public value.
* ``DhMode.PER_NODE_PARAMS`` - each node generates its own group at
  start-up; beacons are version 2 and carry (p, w, public) so that the
  responder can compute inside the initiator's group. ACKs always carry
  a bare public value (the responder's, in the initiator's group).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .codec import (
    VERSION_PARAM_TRIPLE,
    VERSION_SINGLE,
    BeaconPacket,
    PacketType,
    Position,
    decode_param_triple,
    encode_param_triple,
    int_to_magnitude,
    magnitude_to_int,
    quantize_position,
)
from .dh import (
    DhError,
    DhKeyPair,
    DhParams,
    compute_shared_secret,
    derive_symmetric_key,
    generate_dh_params,
    generate_keypair,
)


class HandshakeState(Enum):
    NONE = "none"            # no usable exchange yet
    PENDING = "pending"      # our beacon is out, awaiting the peer's ack
    ESTABLISHED = "established"  # shared key derived


class DhMode(Enum):
    GLOBAL_PARAMS = "global"
    PER_NODE_PARAMS = "per_node"


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass
class NeighborEntry:
    node_id: int
    position: Position
    last_seen: float
    state: HandshakeState = HandshakeState.NONE
    key: bytes | None = None
    peer_public: int | None = None
    # Group the current key (or last attempt) was computed in; needed to
    # tell whether a fresh public value actually changes the exchange.
    peer_params: DhParams | None = None


@dataclass(frozen=True)
class NodeConfig:
    """Timing knobs for beaconing and expiry.

    With ``adaptive`` enabled the interval stretches with local density:
    ``B * (1 + adapt_gain * (degree - target_degree) / target_degree)``,
    clamped to ``[interval_min, interval_max]``. Sparse neighborhoods
    thus beacon at least as often as the base rate, crowded ones back
    off. Expiry timeout is ``expiry_multiplier`` effective intervals,
    which tolerates a run of lost beacons before declaring a neighbor
    gone.
    """

    beacon_interval: float = 1.0
    expiry_multiplier: float = 4.5
    adaptive: bool = False
    target_degree: int = 8
    adapt_gain: float = 0.5
    interval_min: float = 0.1
    interval_max: float = 10.0

    def __post_init__(self) -> None:
        if self.beacon_interval <= 0:
            raise ValueError("beacon_interval must be positive")
        if self.expiry_multiplier <= 1:
            raise ValueError("expiry_multiplier must be > 1")
        if self.target_degree < 1:
            raise ValueError("target_degree must be >= 1")
        if self.adapt_gain < 0:
            raise ValueError("adapt_gain must be non-negative")
        if not 0 < self.interval_min <= self.beacon_interval <= self.interval_max:
            raise ValueError(
                "need 0 < interval_min <= beacon_interval <= interval_max")


@dataclass
class NodeState:
    """Everything one vehicle knows: identity, position, keys, neighbors."""

    node_id: int
    own_position: Position
    config: NodeConfig
    dh_mode: DhMode
    dh_params: DhParams
    keypair: DhKeyPair
    rng: random.Random
    neighbors: dict[int, NeighborEntry] = field(default_factory=dict)
    next_beacon_at: float = 0.0
    # Responder key pairs generated inside initiators' groups (per-node
    # mode). Kept outside the table so a re-appearing neighbor re-derives
    # the same key; keyed by peer id.
    _responder_keys: dict[int, tuple[DhParams, DhKeyPair]] = field(
        default_factory=dict, repr=False)

    # ------------------------------------------------------------------
    # beaconing

    def effective_beacon_interval(self) -> float:
        cfg = self.config
        if not cfg.adaptive:
            return cfg.beacon_interval
        degree = len(self.neighbors)
        factor = 1.0 + cfg.adapt_gain * (degree - cfg.target_degree) / cfg.target_degree
        interval = cfg.beacon_interval * factor
        return min(max(interval, cfg.interval_min), cfg.interval_max)

    def build_beacon(self) -> BeaconPacket:
        if self.dh_mode is DhMode.PER_NODE_PARAMS:
            version = VERSION_PARAM_TRIPLE
            payload = encode_param_triple(
                self.dh_params.p, self.dh_params.w, self.keypair.public_value)
        else:
            version = VERSION_SINGLE
            payload = int_to_magnitude(self.keypair.public_value)
        return BeaconPacket(
            identifiant=self.node_id,
            version=version,
            ptype=PacketType.BEACON,
            src_pos=quantize_position(self.own_position),
            public_value=payload,
        )

    def on_timer_beacon(self, now: float) -> list[BeaconPacket]:
        """Periodic timer: expire stale neighbors, emit one beacon.

        Advances ``next_beacon_at`` by the effective interval and marks
        untouched entries PENDING, since our public value is now out and
        an ack may come back for them.
        """
        self.expire_neighbors(now)
        beacon = self.build_beacon()
        self.next_beacon_at = now + self.effective_beacon_interval()
        for entry in self.neighbors.values():
            if entry.state is HandshakeState.NONE:
                entry.state = HandshakeState.PENDING
        return [beacon]

    # ------------------------------------------------------------------
    # receive paths

    def on_receive_beacon(self, pkt: BeaconPacket, now: float) -> BeaconPacket | None:
        """Responder side: refresh the sender's entry, key up, ACK back.

        The returned ACK is addressed to the beacon's sender (unicast;
        addressing is a delivery-layer concern, the wire only names the
        ACK's own sender). A beacon whose public value is unusable still
        refreshes position and freshness, but the entry drops to NONE
        with no key; the ACK is suppressed only when the sender's group
        parameters themselves are unusable, because then there is no
        group to answer in.
        """
        if pkt.identifiant == self.node_id:
            return None

        params, peer_public = self._parse_exchange(pkt)
        entry = self._refresh_entry(pkt.identifiant, pkt.src_pos, now)

        if params is None:
            self._mark_failed(entry, peer_public)
            return None

        if self.dh_mode is DhMode.PER_NODE_PARAMS and pkt.version == VERSION_PARAM_TRIPLE:
            responder = self._responder_keypair(pkt.identifiant, params)
        else:
            responder = self.keypair
        self._try_establish(entry, params, responder.private_exponent, peer_public)

        return BeaconPacket(
            identifiant=self.node_id,
            version=VERSION_SINGLE,
            ptype=PacketType.ACK,
            src_pos=quantize_position(self.own_position),
            public_value=int_to_magnitude(responder.public_value),
        )

    def on_receive_ack(self, pkt: BeaconPacket, now: float) -> None:
        """Initiator side: the peer answered our beacon; derive the key.

        The exchange is exactly two messages, so nothing is sent back.
        Acks from senders we never heard of still create an entry - our
        beacon may simply have predated their table.
        """
        if pkt.identifiant == self.node_id:
            return
        entry = self._refresh_entry(pkt.identifiant, pkt.src_pos, now)
        try:
            peer_public = magnitude_to_int(pkt.public_value)
        except ValueError:
            self._mark_failed(entry, None)
            return
        # The ack answers in our own group.
        self._try_establish(entry, self.dh_params,
                            self.keypair.private_exponent, peer_public)

    # ------------------------------------------------------------------
    # table maintenance and forwarding

    def expire_neighbors(self, now: float) -> list[int]:
        """Drop entries silent for more than the expiry timeout."""
        timeout = self.config.expiry_multiplier * self.effective_beacon_interval()
        expired = sorted(
            node_id for node_id, entry in self.neighbors.items()
            if now - entry.last_seen > timeout
        )
        for node_id in expired:
            del self.neighbors[node_id]
        return expired

    def greedy_next_hop(self, dest: Position, keyed_only: bool = False) -> int | None:
        """Neighbor closest to ``dest``, if strictly closer than we are.

        Returns None at a local maximum (no neighbor makes progress).
        Ties break toward the smallest node id. With ``keyed_only`` the
        candidate set shrinks to neighbors holding an established key.
        """
        best_id: int | None = None
        best_dist = distance(self.own_position, dest)
        for node_id in sorted(self.neighbors):
            entry = self.neighbors[node_id]
            if keyed_only and entry.state is not HandshakeState.ESTABLISHED:
                continue
            d = distance(entry.position, dest)
            if d < best_dist:
                best_id = node_id
                best_dist = d
        return best_id

    # ------------------------------------------------------------------
    # internals

    def _parse_exchange(self, pkt: BeaconPacket) -> tuple[DhParams | None, int | None]:
        """Extract the governing group and the sender's public value.

        Version-2 beacons name their own group; anything else is read
        against our group. Returns (None, public) when the advertised
        group is unusable.
        """
        if pkt.version == VERSION_PARAM_TRIPLE and pkt.ptype is PacketType.BEACON:
            try:
                p, w, public = decode_param_triple(pkt.public_value)
                return DhParams(p=p, w=w), public
            except ValueError:
                return None, None
        try:
            return self.dh_params, magnitude_to_int(pkt.public_value)
        except ValueError:
            return None, None

    def _refresh_entry(self, node_id: int, position: Position, now: float) -> NeighborEntry:
        entry = self.neighbors.get(node_id)
        if entry is None:
            entry = NeighborEntry(node_id=node_id, position=position, last_seen=now)
            self.neighbors[node_id] = entry
        else:
            entry.position = position
            entry.last_seen = now
        return entry

    def _responder_keypair(self, peer_id: int, params: DhParams) -> DhKeyPair:
        """Key pair we use inside ``peer_id``'s group; cached per peer."""
        cached = self._responder_keys.get(peer_id)
        if cached is not None and cached[0] == params:
            return cached[1]
        keypair = generate_keypair(params, self.rng)
        self._responder_keys[peer_id] = (params, keypair)
        return keypair

    def _try_establish(self, entry: NeighborEntry, params: DhParams,
                       own_private: int, peer_public: int | None) -> None:
        if peer_public is None:
            self._mark_failed(entry, None)
            return
        if (entry.key is not None and entry.peer_public == peer_public
                and entry.peer_params == params):
            # Same exchange as last time; nothing to recompute.
            return
        entry.peer_public = peer_public
        entry.peer_params = params
        try:
            secret = compute_shared_secret(params, own_private, peer_public)
        except DhError:
            entry.state = HandshakeState.NONE
            entry.key = None
            return
        entry.key = derive_symmetric_key(secret)
        entry.state = HandshakeState.ESTABLISHED

    @staticmethod
    def _mark_failed(entry: NeighborEntry, peer_public: int | None) -> None:
        entry.peer_public = peer_public
        entry.peer_params = None
        entry.state = HandshakeState.NONE
        entry.key = None


def make_node(node_id: int, position: Position, config: NodeConfig,
              dh_mode: DhMode, rng: random.Random,
              shared_params: DhParams | None = None,
              dh_bits: int | None = None) -> NodeState:
    """Stand up a node: group parameters (own or shared) plus a key pair."""
    if dh_mode is DhMode.GLOBAL_PARAMS:
        if shared_params is None:
            raise ValueError("global mode requires shared_params")
        params = shared_params
    else:
        if dh_bits is None:
            raise ValueError("per-node mode requires dh_bits")
        params = generate_dh_params(dh_bits, rng)
    keypair = generate_keypair(params, rng)
    return NodeState(
        node_id=node_id,
        own_position=position,
        config=config,
        dh_mode=dh_mode,
        dh_params=params,
        keypair=keypair,
        rng=rng,
    )
