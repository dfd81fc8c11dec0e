"""Event-driven simulation core.

Time is integer microseconds.  Nothing ticks slot by slot: a contending
station is armed for the instant its countdown would expire, and a medium
transition before that instant converts the elapsed whole slots into counter
decrements.  Busy/idle state per station is maintained incrementally from
precomputed pairwise arrival powers (single decodable arrival above the
frame-detect threshold, or linear power sum above the CCA threshold).
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

from . import mac
from .channel import (
    BinaryDisc,
    ChannelModel,
    LogDistance,
    Reception,
    SenseState,
    SenseThresholds,
    carrier_sense_state,
    count_obstacles,
    dbm_to_mw,
    received_power,
    reception_outcome,
)
from .mac import BackoffState, MacParams, Protocol
from .metrics import PerNodeStats
from .scenarios import Topology


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    protocol: Protocol
    duration_s: float = 25.0
    seed: int = 1
    mac: MacParams = field(default_factory=MacParams)
    thresholds: SenseThresholds = field(default_factory=SenseThresholds)
    channel: ChannelModel | None = None  # None: use the topology's model
    payload_bytes: int = 1470
    mac_header_bytes: int = 36
    ack_bytes: int = 14
    phy_rate_mbps: float = 72.2
    ack_rate_mbps: float = 24.0
    preamble_us: int = 44
    ack_preamble_us: int = 20
    strict_acks: bool = False

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigurationError("duration must be positive")
        if self.payload_bytes < 1 or self.mac_header_bytes < 0 or self.ack_bytes < 1:
            raise ConfigurationError("frame sizes must be positive")
        if self.phy_rate_mbps <= 0 or self.ack_rate_mbps <= 0:
            raise ConfigurationError("PHY rates must be positive")
        if self.preamble_us < 0 or self.ack_preamble_us < 0:
            raise ConfigurationError("preamble durations must be non-negative")


def frame_duration_us(config: SimConfig, n_payloads: int = 1) -> int:
    """Airtime of a data frame carrying n aggregated payloads."""
    if n_payloads < 1:
        raise ValueError("a frame carries at least one payload")
    bits = 8 * (config.mac_header_bytes + n_payloads * config.payload_bytes)
    return config.preamble_us + math.ceil(bits / config.phy_rate_mbps)


def ack_duration_us(config: SimConfig) -> int:
    bits = 8 * config.ack_bytes
    return config.ack_preamble_us + math.ceil(bits / config.ack_rate_mbps)


@dataclass
class FrameTransmission:
    tx_node: int
    dest: int
    start_us: int
    end_us: int
    channel: int
    power_dbm: float
    is_ack: bool = False
    n_payloads: int = 1
    overlaps: list = field(default_factory=list, repr=False)


@dataclass
class NodeResult:
    node_id: int
    name: str
    role: str
    wlan_id: int
    floor_id: int | None
    channel: int
    stats: PerNodeStats
    first_success_us: int | None = None
    last_failure_us: int | None = None


@dataclass
class RunResult:
    sim_seconds: float
    seed: int
    protocol: str
    nodes: list[NodeResult]
    counters: dict


def classify_slot(
    listener,
    slot_start_us,
    slot_end_us,
    transmissions,
    positions,
    model,
    thresholds,
    building=None,
):
    """True when any portion of the slot is sensed busy at the listener."""
    if slot_end_us <= slot_start_us:
        raise ValueError("empty slot interval")
    marks = {slot_start_us}
    for f in transmissions:
        if slot_start_us < f.start_us < slot_end_us:
            marks.add(f.start_us)
    for t in sorted(marks):
        active = [
            f
            for f in transmissions
            if f.start_us <= t < f.end_us and f.tx_node != listener
        ]
        state = carrier_sense_state(listener, active, positions, model, thresholds, building)
        if state is SenseState.BUSY:
            return True
    return False


# Event kinds, dispatched in the main loop.
_ARM, _TX_END, _ACK_START, _OUTCOME = 0, 1, 2, 3

_CONTEND, _TX, _WAIT = 0, 1, 2


class _Station:
    __slots__ = (
        "node",
        "sidx",
        "channel",
        "rng",
        "state",
        "mode",
        "blocked",
        "seg_start",
        "due",
        "merge_pending",
        "n_payloads",
        "result",
    )

    def __init__(self, node, sidx, channel, rng, state, result):
        self.node = node
        self.sidx = sidx
        self.channel = channel
        self.rng = rng
        self.state: BackoffState = state
        self.mode = _WAIT
        self.blocked = False
        self.seg_start = 0
        self.due = 0
        self.merge_pending = False
        self.n_payloads = 1
        self.result: NodeResult = result


class _Channel:
    __slots__ = ("number", "stations", "contenders", "active", "armed_time", "armed_gen")

    def __init__(self, number):
        self.number = number
        self.stations = []
        self.contenders = {}  # insertion-ordered set of _Station
        self.active = []  # transmissions currently on air
        self.armed_time = None
        self.armed_gen = 0


class _Sim:
    def __init__(self, topology: Topology, config: SimConfig):
        self.topology = topology
        self.config = config
        self.protocol = config.protocol
        self.params = config.protocol.effective_params(config.mac)
        self.model = config.channel if config.channel is not None else topology.channel_model
        self.model_capture = getattr(self.model, "capture_threshold_db", None)
        self.thresholds = config.thresholds
        self.building = topology.building
        self.positions = topology.positions()
        self.horizon_us = int(round(config.duration_s * 1e6))
        self.slot = self.params.slot_us
        self.difs = self.params.difs_us
        self.sifs = self.params.sifs_us
        self.ack_us = ack_duration_us(config)
        self._validate()

        self.heap = []
        self._seq = 0
        self.counters = {
            "data_frames": 0,
            "ack_frames": 0,
            "decoded": 0,
            "corrupted": 0,
            "undetected": 0,
            "drops": 0,
        }

        self.results = [
            NodeResult(
                n.node_id,
                n.name,
                n.role,
                n.wlan_id,
                n.floor_id,
                topology.channel_of(n),
                PerNodeStats(),
            )
            for n in topology.nodes
        ]

        stations = topology.stations()
        self.stations = []
        self.by_node = {}
        for sidx, n in enumerate(stations):
            rng = random.Random(f"{config.seed}:{n.name}")
            state = mac.initial_state(self.protocol, self.params, rng)
            sta = _Station(n, sidx, topology.channel_of(n), rng, state, self.results[n.node_id])
            self.stations.append(sta)
            self.by_node[n.node_id] = sta
        self.ack_pending_until = {ap.node_id: 0 for ap in topology.aps()}

        self._build_channels()
        self._build_arrivals()

    def _validate(self):
        seen = set()
        ap_ids = {n.node_id for n in self.topology.nodes if n.role == "ap"}
        for n in self.topology.nodes:
            key = (n.position.x, n.position.y, n.position.z)
            if key in seen:
                raise ConfigurationError(f"coincident node positions at {key}")
            seen.add(key)
            if n.role == "sta":
                if n.ap_id not in ap_ids:
                    raise ConfigurationError(f"station {n.name} has no valid AP")
            elif n.role == "ap":
                if n.node_id not in self.topology.channel_map:
                    raise ConfigurationError(f"AP {n.name} has no channel assignment")
            else:
                raise ConfigurationError(f"unknown role {n.role!r}")

    def _build_channels(self):
        self.channels: dict[int, _Channel] = {}
        for sta in self.stations:
            ch = self.channels.setdefault(sta.channel, _Channel(sta.channel))
            ch.stations.append(sta)

    def _build_arrivals(self):
        """Pairwise arrival structure: who holds whom busy, with what power."""
        n_sta = len(self.stations)
        self.detect_cnt = [0] * n_sta
        self.rx_sum_mw = [0.0] * n_sta
        self.busy = [False] * n_sta
        if isinstance(self.model, LogDistance):
            self.cca_mw = dbm_to_mw(self.thresholds.cca_energy_dbm)
        else:
            self.cca_mw = math.inf  # binary disc: busy is a range check only

        # tx node_id -> [(listener station, single-frame detect?, arrival mW)]
        self.air_rows = {}
        tx_power = self.thresholds.tx_power_dbm
        for tx in self.topology.nodes:
            tx_channel = self.topology.channel_of(tx)
            row = []
            for sta in self.stations:
                if sta.node.node_id == tx.node_id or sta.channel != tx_channel:
                    continue
                if isinstance(self.model, BinaryDisc):
                    d = tx.position.distance_to(sta.node.position)
                    if d <= self.model.cs_range_m:
                        row.append((sta, True, 0.0))
                else:
                    obstacles = count_obstacles(tx.position, sta.node.position, self.building)
                    p = received_power(tx_power, tx.position, sta.node.position, self.model, obstacles)
                    row.append((sta, p >= self.thresholds.frame_detect_dbm, dbm_to_mw(p)))
            self.air_rows[tx.node_id] = row
        self._grades = {}  # (tx node_id, rx node_id) -> decodable arrival power or None

    def _grade(self, tx_node, rx_node):
        """Cached: arrival power of tx at rx when decodable alone, else None."""
        key = (tx_node, rx_node)
        if key in self._grades:
            return self._grades[key]
        tx_pos, rx_pos = self.positions[tx_node], self.positions[rx_node]
        if isinstance(self.model, BinaryDisc):
            got = (
                self.thresholds.tx_power_dbm
                if tx_pos.distance_to(rx_pos) <= self.model.tx_range_m
                else None
            )
        else:
            obstacles = count_obstacles(tx_pos, rx_pos, self.building)
            p = received_power(self.thresholds.tx_power_dbm, tx_pos, rx_pos, self.model, obstacles)
            got = p if p >= self.thresholds.frame_detect_dbm else None
        self._grades[key] = got
        return got

    def _reception(self, frame, receiver):
        """Same classification as channel.reception_outcome, with cached grades."""
        if self.model_capture is not None:
            return reception_outcome(
                frame, receiver, frame.overlaps, self.positions,
                self.model, self.thresholds, self.building,
            )
        if self._grade(frame.tx_node, receiver) is None:
            return Reception.UNDETECTED
        for o in frame.overlaps:
            if o.tx_node == receiver:
                return Reception.CORRUPTED
        for o in frame.overlaps:
            if self._grade(o.tx_node, receiver) is not None:
                return Reception.CORRUPTED
        return Reception.DECODED

    # -- event plumbing -----------------------------------------------------

    def _push(self, t, kind, payload):
        heapq.heappush(self.heap, (t, self._seq, kind, payload))
        self._seq += 1

    def run(self):
        for sta in self.stations:
            self._enter_contention(sta, 0)
        heap = self.heap
        horizon = self.horizon_us
        while heap and heap[0][0] <= horizon:
            t, _, kind, payload = heapq.heappop(heap)
            if kind == _ARM:
                self._fire_arm(payload[0], payload[1], t)
            elif kind == _TX_END:
                self._fire_tx_end(payload, t)
            elif kind == _ACK_START:
                self._fire_ack_start(payload, t)
            else:
                self._fire_outcome(payload[0], payload[1], t)
        return RunResult(
            sim_seconds=self.config.duration_s,
            seed=self.config.seed,
            protocol=self.protocol.name,
            nodes=self.results,
            counters=dict(self.counters),
        )

    # -- contention bookkeeping ---------------------------------------------

    def _enter_contention(self, sta, t):
        sta.mode = _CONTEND
        ch = self.channels[sta.channel]
        ch.contenders[sta] = None
        if self.busy[sta.sidx]:
            sta.blocked = True
            sta.merge_pending = True
            mac.on_busy_freeze(sta.state)  # joined during an ongoing busy period
        else:
            sta.blocked = False
            sta.merge_pending = False
            self._set_due(sta, t)
        self._rearm(ch, t)

    def _set_due(self, sta, t):
        sta.seg_start = t + self.difs
        sta.due = sta.seg_start + sta.state.counter * self.slot

    def _block(self, sta, t):
        if sta.due == t and not sta.blocked:
            # Committed: its countdown expired exactly now, the pending arm
            # event fires it regardless of the transmission that just began.
            return
        elapsed = 0
        if t > sta.seg_start:
            elapsed = (t - sta.seg_start) // self.slot
        state = sta.state
        for _ in range(elapsed):
            mac.on_idle_slot(state)
        if elapsed > 0 or not sta.merge_pending:
            mac.on_busy_freeze(state)  # one observed slot per busy period
        sta.blocked = True
        sta.merge_pending = True

    def _unblock(self, sta, t):
        sta.blocked = False
        self._set_due(sta, t)
        # merge_pending stays set until a full idle slot completes

    def _rearm(self, ch, t):
        best = None
        for s in ch.contenders:
            if not s.blocked and (best is None or s.due < best):
                best = s.due
        if best is None:
            ch.armed_time = None
            return
        if ch.armed_time == best:
            return
        ch.armed_time = best
        ch.armed_gen += 1
        self._push(best, _ARM, (ch, ch.armed_gen))

    # -- air interface -------------------------------------------------------

    def _add_to_air(self, frame, t):
        """Put the frame on air; returns True when any listener's state flipped."""
        active = self.channels[frame.channel].active
        for other in active:
            other.overlaps.append(frame)
            frame.overlaps.append(other)
        active.append(frame)
        return self._apply_air(frame, 1, t)

    def _remove_from_air(self, frame, t):
        self.channels[frame.channel].active.remove(frame)
        return self._apply_air(frame, -1, t)

    def _apply_air(self, frame, sign, t):
        detect_cnt = self.detect_cnt
        rx_sum = self.rx_sum_mw
        busy = self.busy
        cca = self.cca_mw
        flipped = False
        for sta, detect, mw in self.air_rows[frame.tx_node]:
            si = sta.sidx
            if detect:
                detect_cnt[si] += sign
            if mw:
                rx_sum[si] += sign * mw
            fresh = detect_cnt[si] > 0 or rx_sum[si] >= cca
            if fresh != busy[si]:
                busy[si] = fresh
                flipped = True
                if sta.mode == _CONTEND:
                    if fresh:
                        self._block(sta, t)
                    else:
                        self._unblock(sta, t)
        return flipped

    # -- event handlers ------------------------------------------------------

    def _fire_arm(self, ch, gen, t):
        if gen != ch.armed_gen or ch.armed_time != t:
            return
        ch.armed_time = None
        due = [s for s in ch.contenders if not s.blocked and s.due == t]
        frames = [self._begin_tx(sta, t) for sta in due]
        for frame in frames:
            self._add_to_air(frame, t)
        self._rearm(ch, t)

    def _begin_tx(self, sta, t):
        state = sta.state
        for _ in range(state.counter):
            mac.on_idle_slot(state)  # the armed instant consumed these slots
        sta.mode = _TX
        del self.channels[sta.channel].contenders[sta]
        if self.protocol.fair_share:
            sta.n_payloads = mac.fair_share_count(state.stage)
        else:
            sta.n_payloads = 1
        sta.result.stats.attempts += 1
        self.counters["data_frames"] += 1
        end = t + frame_duration_us(self.config, sta.n_payloads)
        frame = FrameTransmission(
            tx_node=sta.node.node_id,
            dest=sta.node.ap_id,
            start_us=t,
            end_us=end,
            channel=sta.channel,
            power_dbm=self.thresholds.tx_power_dbm,
            n_payloads=sta.n_payloads,
        )
        self._push(end, _TX_END, frame)
        return frame

    def _fire_tx_end(self, frame, t):
        flipped = self._remove_from_air(frame, t)
        ch = self.channels[frame.channel]
        if flipped:
            self._rearm(ch, t)
        if frame.is_ack:
            sta = self.by_node[frame.dest]
            if self.config.strict_acks:
                got = self._reception(frame, frame.dest)
                self._fire_outcome(sta, got is Reception.DECODED, t)
            else:
                self._fire_outcome(sta, True, t)
            return

        outcome = self._reception(frame, frame.dest)
        self.counters[outcome.value] += 1
        sta = self.by_node[frame.tx_node]
        if outcome is Reception.DECODED and self.ack_pending_until[frame.dest] <= t + self.sifs:
            self.ack_pending_until[frame.dest] = t + self.sifs + self.ack_us
            self._push(t + self.sifs, _ACK_START, frame)
        else:
            # No (usable) acknowledgement: resolve after the timeout window.
            self._push(t + self.sifs + self.ack_us, _OUTCOME, (sta, False))

    def _fire_ack_start(self, data_frame, t):
        ack = FrameTransmission(
            tx_node=data_frame.dest,
            dest=data_frame.tx_node,
            start_us=t,
            end_us=t + self.ack_us,
            channel=data_frame.channel,
            power_dbm=self.thresholds.tx_power_dbm,
            is_ack=True,
        )
        self.counters["ack_frames"] += 1
        if self._add_to_air(ack, t):
            self._rearm(self.channels[ack.channel], t)
        self._push(ack.end_us, _TX_END, ack)

    def _fire_outcome(self, sta, ok, t):
        stats = sta.result.stats
        if ok:
            stats.successes += 1
            stats.delivered_bytes += sta.n_payloads * self.config.payload_bytes
            if sta.result.first_success_us is None:
                sta.result.first_success_us = t
            mac.after_success(sta.state, self.protocol, self.params, sta.rng)
            if mac.sr_due(sta.state):
                mac.sr_evaluate(sta.state, self.protocol, self.params)
        else:
            stats.failures += 1
            sta.result.last_failure_us = t
            _, dropped = mac.after_failure(sta.state, self.protocol, self.params, sta.rng)
            if dropped:
                stats.drops += 1
                self.counters["drops"] += 1
        self._enter_contention(sta, t)


def run(topology: Topology, config: SimConfig) -> RunResult:
    """Simulate the topology under the configuration; deterministic in the seed."""
    return _Sim(topology, config).run()
