"""Deterministic discrete-event simulation of beaconing vehicles.

N vehicles move on a bounded plane and run the beaconing/key-exchange
protocol over a unit-disk radio: a transmission reaches exactly the
nodes within ``radio_range`` (closed disk - distance equal to the range
still delivers), each candidate independently subject to the configured
loss probability. Propagation adds a fixed delay so that send and
receive instants are distinct and ordering is well defined.

Everything is driven by one event heap ordered by
``(time, kind, node, insertion sequence)``, and every random draw comes
from named ``random.Random`` streams derived from the config seed, so a
config maps to exactly one trace, byte for byte.

Optional simulated crypto costs decouple handshake timing from host
speed: when enabled, a node's first beacon is deferred by the parameter
generation cost, and each side's shared-secret computation shifts its
externally visible effects (key establishment, the ACK) by the
configured amount. The default constants model a 512-bit exchange on
2006-era hardware, where parameter generation dominates at ~3.5 s and
the whole two-message handshake lands around 3.6 s.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Mapping

from .codec import BeaconPacket, PacketType, Position, decode_packet, encode_packet
from .dh import generate_dh_params
from .metrics import Metrics, compute_metrics
from .protocol import DhMode, NodeConfig, NodeState, distance, make_node
from .trace import (
    EV_ACK_RX,
    EV_ACK_TX,
    EV_BEACON_RX,
    EV_BEACON_TX,
    EV_KEY_ESTABLISHED,
    EV_NEIGHBOR_EXPIRED,
    EV_ROUTE_HOP,
    EV_ROUTE_LOCAL_MAX,
    Trace,
    TraceRecord,
)

MOBILITY_TICK_INTERVAL = 0.1


class ConfigError(ValueError):
    """Simulation configuration rejected before any event runs."""


class Mobility(Enum):
    CONSTANT_VELOCITY = "constant_velocity"
    RANDOM_WAYPOINT = "random_waypoint"


class EventKind(IntEnum):
    # Numeric order is the tie-break order for simultaneous events.
    BEACON_TIMER = 0
    PACKET_DELIVERY = 1
    MOBILITY_TICK = 2
    ROUTE_PROBE = 3
    END = 4


@dataclass(frozen=True)
class CryptoCosts:
    """Simulated durations (seconds) charged to key-agreement steps.

    Defaults reproduce the reference 512-bit measurements: 3509800629 ns
    to generate parameters and the public value, 49069788 ns for the
    initiator's secret, 36127233 ns for the responder's.
    """

    param_gen: float = 3.509800629
    sender_secret: float = 0.049069788
    receiver_secret: float = 0.036127233


@dataclass(frozen=True)
class RouteProbe:
    """Ask at time ``at``: where would greedy forwarding from ``src`` go?"""

    at: float
    src: int
    dest: Position


class RouteOutcome(Enum):
    REACHED = "reached"        # stopped at a node no other node beats
    LOCAL_MAX = "local_max"    # stuck: someone closer exists, unreachable greedily
    HOP_LIMIT = "hop_limit"    # loop guard tripped


@dataclass(frozen=True)
class RouteResult:
    outcome: RouteOutcome
    hops: tuple[int, ...]

    @property
    def final_node(self) -> int:
        return self.hops[-1]


@dataclass(frozen=True)
class SimConfig:
    n_vehicles: int
    area: tuple[float, float] = (1000.0, 1000.0)
    radio_range: float = 250.0
    speed_range: tuple[float, float] = (0.0, 0.0)
    mobility: Mobility = Mobility.CONSTANT_VELOCITY
    duration: float = 10.0
    loss_rate: float = 0.0
    prop_delay: float = 0.001
    seed: int = 1
    node_config: NodeConfig = field(default_factory=NodeConfig)
    dh_bits: int = 512
    dh_mode: DhMode = DhMode.GLOBAL_PARAMS
    crypto_costs: CryptoCosts | None = None
    # Explicit initial positions (length n_vehicles) instead of uniform
    # random placement; node ids are 1-based and map to list order.
    placements: tuple[tuple[float, float], ...] | None = None
    # (node_id, time): the node falls silent and deaf from that instant.
    halts: tuple[tuple[int, float], ...] = ()
    probes: tuple[RouteProbe, ...] = ()

    def validate(self) -> None:
        if self.n_vehicles < 1:
            raise ConfigError("n_vehicles must be >= 1")
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ConfigError("area dimensions must be positive")
        if self.radio_range <= 0:
            raise ConfigError("radio_range must be positive")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ConfigError("loss_rate must be in [0, 1]")
        if self.prop_delay < 0:
            raise ConfigError("prop_delay must be non-negative")
        if not 0.0 <= self.speed_range[0] <= self.speed_range[1]:
            raise ConfigError("speed_range must satisfy 0 <= min <= max")
        if self.placements is not None and len(self.placements) != self.n_vehicles:
            raise ConfigError(
                f"placements has {len(self.placements)} entries for "
                f"{self.n_vehicles} vehicles")
        ids = range(1, self.n_vehicles + 1)
        for node_id, at in self.halts:
            if node_id not in ids:
                raise ConfigError(f"halt names unknown node {node_id}")
            if not 0 <= at <= self.duration:
                raise ConfigError(f"halt time {at} outside the run")
        for probe in self.probes:
            if probe.src not in ids:
                raise ConfigError(f"probe names unknown node {probe.src}")
            if not 0 <= probe.at <= self.duration:
                raise ConfigError(f"probe time {probe.at} outside the run")


@dataclass
class Vehicle:
    node_id: int
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    speed: float = 0.0
    waypoint: tuple[float, float] | None = None

    @property
    def position(self) -> Position:
        return Position(self.x, self.y)


# ----------------------------------------------------------------------
# radio, mobility and oracle primitives


def deliver_in_range(positions: Mapping[int, Position], sender: int,
                     ptype: PacketType, dest: int | None, radio_range: float,
                     loss_rate: float, rng: random.Random) -> list[tuple[int, bool]]:
    """Candidate receivers of one transmission, with per-candidate loss.

    Beacons reach every node within the closed disk except the sender;
    ACKs reach only the addressed node, and only if it is in range.
    Candidates are drawn against the loss stream in node-id order so the
    drop pattern is a pure function of the rng state.
    """
    origin = positions[sender]
    if ptype is PacketType.BEACON:
        candidates = [
            node_id for node_id in sorted(positions)
            if node_id != sender and distance(origin, positions[node_id]) <= radio_range
        ]
    else:
        candidates = []
        if dest is not None and dest in positions and dest != sender:
            if distance(origin, positions[dest]) <= radio_range:
                candidates.append(dest)
    return [(node_id, rng.random() >= loss_rate) for node_id in candidates]


def mobility_update(vehicle: Vehicle, dt: float, area: tuple[float, float],
                    model: Mobility, speed_range: tuple[float, float],
                    rng: random.Random) -> None:
    """Advance one vehicle by ``dt`` seconds, staying inside the area.

    CONSTANT_VELOCITY reflects elastically at the borders: a step to
    x = width + e lands at width - e with the velocity component negated
    (and symmetrically at zero). RANDOM_WAYPOINT walks toward the
    current waypoint at the chosen speed; on arrival it stops there for
    the rest of the step and draws a fresh waypoint and speed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    width, height = area
    if model is Mobility.CONSTANT_VELOCITY:
        x = vehicle.x + vehicle.vx * dt
        y = vehicle.y + vehicle.vy * dt
        while not 0 <= x <= width:
            if x < 0:
                x = -x
            else:
                x = 2 * width - x
            vehicle.vx = -vehicle.vx
        while not 0 <= y <= height:
            if y < 0:
                y = -y
            else:
                y = 2 * height - y
            vehicle.vy = -vehicle.vy
        vehicle.x, vehicle.y = x, y
    else:
        if vehicle.waypoint is None:
            vehicle.waypoint = (rng.uniform(0, width), rng.uniform(0, height))
            vehicle.speed = rng.uniform(*speed_range)
        wx, wy = vehicle.waypoint
        remaining = math.hypot(wx - vehicle.x, wy - vehicle.y)
        step = vehicle.speed * dt
        if step >= remaining and remaining >= 0:
            vehicle.x, vehicle.y = wx, wy
            vehicle.waypoint = (rng.uniform(0, width), rng.uniform(0, height))
            vehicle.speed = rng.uniform(*speed_range)
        elif remaining > 0:
            vehicle.x += (wx - vehicle.x) / remaining * step
            vehicle.y += (wy - vehicle.y) / remaining * step


def ground_truth_neighbors(positions: Mapping[int, Position],
                           radio_range: float) -> dict[int, set[int]]:
    """Brute-force symmetric adjacency: the oracle the protocol chases."""
    adjacency: dict[int, set[int]] = {node_id: set() for node_id in positions}
    ids = sorted(positions)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if distance(positions[a], positions[b]) <= radio_range:
                adjacency[a].add(b)
                adjacency[b].add(a)
    return adjacency


def route_probe(nodes: Mapping[int, NodeState], src: int, dest: Position,
                max_hops: int) -> RouteResult:
    """Walk greedy forwarding from ``src`` over the nodes' live tables.

    Stops when no neighbor makes strict progress: that is REACHED when
    the stuck node is (one of) the globally closest nodes to the
    destination, LOCAL_MAX otherwise. A loop guard of ``max_hops`` hops
    bounds the walk.
    """
    hops = [src]
    current = src
    for _ in range(max_hops):
        nxt = nodes[current].greedy_next_hop(dest)
        if nxt is None:
            d_here = distance(nodes[current].own_position, dest)
            d_best = min(distance(n.own_position, dest) for n in nodes.values())
            outcome = RouteOutcome.REACHED if d_here <= d_best else RouteOutcome.LOCAL_MAX
            return RouteResult(outcome=outcome, hops=tuple(hops))
        hops.append(nxt)
        current = nxt
    return RouteResult(outcome=RouteOutcome.HOP_LIMIT, hops=tuple(hops))


# ----------------------------------------------------------------------
# the engine


class Simulation:
    """One simulation run; construct, call :meth:`run`, inspect state."""

    def __init__(self, config: SimConfig) -> None:
        config.validate()
        self.config = config
        self.nodes: dict[int, NodeState] = {}
        self.vehicles: dict[int, Vehicle] = {}
        self.probe_results: list[RouteResult] = []
        self._trace: list[TraceRecord] = []
        self._heap: list[tuple[float, int, int, int, object]] = []
        self._seq = 0
        self._halt_at = dict(config.halts)
        self._setup_done: set[int] = set()
        self._deferred_timer_origin: dict[int, float] = {}
        self._rng_loss = random.Random(f"{config.seed}/loss")
        self._rng_move = random.Random(f"{config.seed}/move")
        self._build_fleet()
        self._schedule_initial()

    # -- construction --------------------------------------------------

    def _build_fleet(self) -> None:
        cfg = self.config
        rng_place = random.Random(f"{cfg.seed}/place")
        width, height = cfg.area
        shared_params = None
        if cfg.dh_mode is DhMode.GLOBAL_PARAMS:
            shared_params = generate_dh_params(
                cfg.dh_bits, random.Random(f"{cfg.seed}/group"))
        for node_id in range(1, cfg.n_vehicles + 1):
            if cfg.placements is not None:
                x, y = cfg.placements[node_id - 1]
            else:
                x, y = rng_place.uniform(0, width), rng_place.uniform(0, height)
            vehicle = Vehicle(node_id=node_id, x=x, y=y)
            if cfg.mobility is Mobility.CONSTANT_VELOCITY:
                speed = rng_place.uniform(*cfg.speed_range)
                angle = rng_place.uniform(0, 2 * math.pi)
                vehicle.vx = speed * math.cos(angle)
                vehicle.vy = speed * math.sin(angle)
            self.vehicles[node_id] = vehicle
            self.nodes[node_id] = make_node(
                node_id=node_id,
                position=vehicle.position,
                config=cfg.node_config,
                dh_mode=cfg.dh_mode,
                rng=random.Random(f"{cfg.seed}/node/{node_id}"),
                shared_params=shared_params,
                dh_bits=cfg.dh_bits,
            )

    def _schedule_initial(self) -> None:
        cfg = self.config
        rng_timer = random.Random(f"{cfg.seed}/timer")
        for node_id in sorted(self.nodes):
            jitter = rng_timer.uniform(0, cfg.node_config.beacon_interval)
            self.nodes[node_id].next_beacon_at = jitter
            self._push(jitter, EventKind.BEACON_TIMER, node_id, None)
        if cfg.speed_range[1] > 0:
            self._push(MOBILITY_TICK_INTERVAL, EventKind.MOBILITY_TICK, 0, None)
        for index, probe in enumerate(cfg.probes):
            self._push(probe.at, EventKind.ROUTE_PROBE, probe.src, (index, probe))
        self._push(cfg.duration, EventKind.END, 0, None)

    def _push(self, at: float, kind: EventKind, node: int, payload: object) -> None:
        heapq.heappush(self._heap, (at, int(kind), node, self._seq, payload))
        self._seq += 1

    # -- trace helpers ---------------------------------------------------

    def _emit(self, t: float, ev: str, node: int, peer: int | None,
              extra: dict | None = None) -> None:
        if t > self.config.duration:
            return  # effect lands beyond the simulated horizon
        pos = self.vehicles[node].position
        self._trace.append(TraceRecord(
            t=t, ev=ev, node=node, peer=peer, pos=(pos.x, pos.y),
            extra=extra or {}))

    def _halted(self, node_id: int, now: float) -> bool:
        halt = self._halt_at.get(node_id)
        return halt is not None and now >= halt

    def _alive_positions(self, now: float) -> dict[int, Position]:
        return {
            node_id: vehicle.position
            for node_id, vehicle in self.vehicles.items()
            if not self._halted(node_id, now)
        }

    # -- event handlers --------------------------------------------------

    def _handle_beacon_timer(self, node_id: int, now: float) -> None:
        if self._halted(node_id, now):
            return
        cfg = self.config
        state = self.nodes[node_id]
        if cfg.crypto_costs is not None and node_id not in self._setup_done:
            # One-time key material setup charges the configured cost
            # before the first beacon can leave the node.
            self._setup_done.add(node_id)
            self._deferred_timer_origin[node_id] = now
            self._push(now + cfg.crypto_costs.param_gen,
                       EventKind.BEACON_TIMER, node_id, None)
            return
        timer_at = self._deferred_timer_origin.pop(node_id, now)
        for expired in state.expire_neighbors(now):
            self._emit(now, EV_NEIGHBOR_EXPIRED, node_id, expired)
        for beacon in state.on_timer_beacon(now):
            raw = encode_packet(beacon)
            self._emit(now, EV_BEACON_TX, node_id, None, {
                "len": len(raw), "timer_at": timer_at, "version": beacon.version})
            self._send(now, node_id, beacon.ptype, None, raw)
        self._push(state.next_beacon_at, EventKind.BEACON_TIMER, node_id, None)

    def _send(self, now: float, sender: int, ptype: PacketType,
              dest: int | None, raw: bytes) -> None:
        outcomes = deliver_in_range(
            self._alive_positions(now), sender, ptype, dest,
            self.config.radio_range, self.config.loss_rate, self._rng_loss)
        for recipient, delivered in outcomes:
            if delivered:
                self._push(now + self.config.prop_delay,
                           EventKind.PACKET_DELIVERY, recipient, (sender, raw))

    def _handle_delivery(self, node_id: int, now: float, payload: object) -> None:
        if self._halted(node_id, now):
            return
        sender, raw = payload
        pkt = decode_packet(raw)
        state = self.nodes[node_id]
        costs = self.config.crypto_costs
        prev_key = self._current_key(state, sender)
        if pkt.ptype is PacketType.BEACON:
            self._emit(now, EV_BEACON_RX, node_id, sender, {"len": len(raw)})
            ack = state.on_receive_beacon(pkt, now)
            done = now + (costs.receiver_secret if costs else 0.0)
            self._emit_key_change(state, sender, prev_key, done)
            if ack is not None:
                ack_raw = encode_packet(ack)
                self._emit(done, EV_ACK_TX, node_id, sender, {"len": len(ack_raw)})
                self._send(done, node_id, ack.ptype, sender, ack_raw)
        else:
            self._emit(now, EV_ACK_RX, node_id, sender, {"len": len(raw)})
            state.on_receive_ack(pkt, now)
            done = now + (costs.sender_secret if costs else 0.0)
            self._emit_key_change(state, sender, prev_key, done)

    @staticmethod
    def _current_key(state: NodeState, peer: int) -> bytes | None:
        entry = state.neighbors.get(peer)
        return entry.key if entry is not None else None

    def _emit_key_change(self, state: NodeState, peer: int,
                         prev_key: bytes | None, at: float) -> None:
        new_key = self._current_key(state, peer)
        if new_key is not None and new_key != prev_key:
            self._emit(at, EV_KEY_ESTABLISHED, state.node_id, peer,
                       {"key": new_key.hex()})

    def _handle_mobility_tick(self, now: float) -> None:
        cfg = self.config
        for node_id in sorted(self.vehicles):
            if self._halted(node_id, now):
                continue
            vehicle = self.vehicles[node_id]
            mobility_update(vehicle, MOBILITY_TICK_INTERVAL, cfg.area,
                            cfg.mobility, cfg.speed_range, self._rng_move)
            self.nodes[node_id].own_position = vehicle.position
        nxt = now + MOBILITY_TICK_INTERVAL
        if nxt <= cfg.duration:
            self._push(nxt, EventKind.MOBILITY_TICK, 0, None)

    def _handle_route_probe(self, now: float, payload: object) -> None:
        index, probe = payload
        result = route_probe(self.nodes, probe.src, probe.dest,
                             max_hops=self.config.n_vehicles)
        self.probe_results.append(result)
        for at_hop, nxt in zip(result.hops, result.hops[1:]):
            self._emit(now, EV_ROUTE_HOP, at_hop, nxt, {"probe": index})
        if result.outcome is RouteOutcome.LOCAL_MAX:
            self._emit(now, EV_ROUTE_LOCAL_MAX, result.final_node, None,
                       {"probe": index})

    # -- main loop -------------------------------------------------------

    def run(self) -> tuple[Trace, Metrics]:
        while self._heap:
            at, kind, node, _seq, payload = heapq.heappop(self._heap)
            if kind == EventKind.END:
                break
            if kind == EventKind.BEACON_TIMER:
                self._handle_beacon_timer(node, at)
            elif kind == EventKind.PACKET_DELIVERY:
                self._handle_delivery(node, at, payload)
            elif kind == EventKind.MOBILITY_TICK:
                self._handle_mobility_tick(at)
            elif kind == EventKind.ROUTE_PROBE:
                self._handle_route_probe(at, payload)
        # Cost-shifted effects are emitted out of order; re-sort stably.
        ordered = sorted(enumerate(self._trace), key=lambda p: (p[1].t, p[0]))
        trace = Trace([record for _, record in ordered])
        metrics = compute_metrics(
            trace, radio_range=self.config.radio_range,
            duration=self.config.duration)
        return trace, metrics


def run(config: SimConfig) -> tuple[Trace, Metrics]:
    """Simulate ``config`` to completion; pure function of the config."""
    return Simulation(config).run()


def two_node_config(separation: float, **overrides) -> SimConfig:
    """Convenience: two static vehicles ``separation`` meters apart."""
    base = SimConfig(
        n_vehicles=2,
        placements=((100.0, 100.0), (100.0 + separation, 100.0)),
        speed_range=(0.0, 0.0),
    )
    return replace(base, **overrides)
