"""Topology generators: single-cell, linear multi-AP arrays and a multi-floor building.

Node naming is stable ("ap3", "sta3.1") and every generator that places nodes
randomly derives its draws from a named sub-stream of the seed, so enlarging a
scenario never re-rolls existing nodes' neighbours.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .channel import BinaryDisc, ChannelModel, LogDistance, Position

DEFAULT_CHANNEL = 48
# 20 MHz channel numbers usable as orthogonal IDs; policies draw from the front.
CHANNEL_POOL = (
    36, 40, 44, 48, 52, 56, 60, 64,
    100, 104, 108, 112, 116, 120, 124, 128, 132, 136, 140, 144,
)
STATION_Z_M = 1.5


@dataclass(frozen=True)
class BuildingGeometry:
    floors: int = 5
    rooms_x: int = 10
    rooms_y: int = 2
    room_side_m: float = 10.0
    floor_height_m: float = 3.0

    def __post_init__(self):
        if min(self.floors, self.rooms_x, self.rooms_y) < 1:
            raise ValueError("building needs at least one floor and one room per axis")
        if self.room_side_m <= 0 or self.floor_height_m <= 0:
            raise ValueError("room side and floor height must be positive")

    @property
    def rooms_per_floor(self) -> int:
        return self.rooms_x * self.rooms_y


@dataclass(frozen=True)
class TopologyNode:
    node_id: int
    name: str
    role: str  # "ap" | "sta"
    position: Position
    wlan_id: int
    floor_id: int | None = None
    ap_id: int | None = None  # stations: node_id of their AP


@dataclass(frozen=True)
class Topology:
    nodes: tuple[TopologyNode, ...]
    channel_map: dict[int, int]  # AP node_id -> channel number
    channel_model: ChannelModel
    building: BuildingGeometry | None = None

    def stations(self):
        return [n for n in self.nodes if n.role == "sta"]

    def aps(self):
        return [n for n in self.nodes if n.role == "ap"]

    def channel_of(self, node: TopologyNode) -> int:
        ap = node.node_id if node.role == "ap" else node.ap_id
        return self.channel_map[ap]

    def positions(self):
        return {n.node_id: n.position for n in self.nodes}


class _Builder:
    def __init__(self):
        self.nodes = []
        self.taken = set()

    def add(self, name, role, pos, wlan, floor=None, ap=None):
        node = TopologyNode(len(self.nodes), name, role, pos, wlan, floor, ap)
        self.nodes.append(node)
        self.taken.add((pos.x, pos.y, pos.z))
        return node

    def fresh(self, draw):
        # Coincident placements are re-drawn; distinct positions are a
        # topology invariant (zero-distance pairs break the channel model).
        pos = draw()
        while (pos.x, pos.y, pos.z) in self.taken:
            pos = draw()
        return pos


def _circle_stations(b, ap, n_stations, radius_m, wlan, floor=None):
    for j in range(n_stations):
        theta = 2.0 * math.pi * j / n_stations
        pos = Position(
            ap.position.x + radius_m * math.cos(theta),
            ap.position.y + radius_m * math.sin(theta),
            ap.position.z,
        )
        b.add(f"sta{wlan}.{j}", "sta", pos, wlan, floor, ap.node_id)


def gen_single_ap(n_stations: int, radius_m: float = 5.0, ideal: bool = True) -> Topology:
    """One AP with stations evenly spread on a circle around it."""
    if n_stations < 1:
        raise ValueError("need at least one station")
    if radius_m <= 0:
        raise ValueError("radius must be positive")
    b = _Builder()
    ap = b.add("ap0", "ap", Position(0.0, 0.0, STATION_Z_M), 0)
    _circle_stations(b, ap, n_stations, radius_m, 0)
    if ideal:
        reach = 2.0 * radius_m + 1.0  # covers every pair, antipodes included
        model: ChannelModel = BinaryDisc(tx_range_m=reach, cs_range_m=reach)
    else:
        model = LogDistance()
    return Topology(tuple(b.nodes), {ap.node_id: DEFAULT_CHANNEL}, model)


def _linear_aps(b, n_aps, n_per_ap, spacing_m, radius_m):
    for i in range(n_aps):
        ap = b.add(f"ap{i}", "ap", Position(i * spacing_m, 0.0, STATION_Z_M), i)
        _circle_stations(b, ap, n_per_ap, radius_m, i)


def gen_scenario_a(
    n_aps: int = 3,
    n_per_ap: int = 4,
    spacing_m: float = 15.0,
    radius_m: float | None = None,
    control: bool = False,
) -> Topology:
    """Line of APs with ring-placed stations; station 0 of each cell faces the next AP."""
    if n_aps < 1 or n_per_ap < 1:
        raise ValueError("need at least one AP and one station per AP")
    if spacing_m <= 0:
        raise ValueError("AP spacing must be positive")
    if radius_m is None:
        radius_m = spacing_m / 3.0
    if radius_m <= 0:
        raise ValueError("cell radius must be positive")
    b = _Builder()
    _linear_aps(b, n_aps, n_per_ap, spacing_m, radius_m)
    if control:
        reach = 2.0 * radius_m
        model: ChannelModel = BinaryDisc(tx_range_m=reach, cs_range_m=reach)
    else:
        model = LogDistance()
    channels = {n.node_id: DEFAULT_CHANNEL for n in b.nodes if n.role == "ap"}
    return Topology(tuple(b.nodes), channels, model)


def gen_scenario_b(
    n_aps: int = 10,
    n_per_ap: int = 20,
    spacing_m: float = 15.0,
    half_box_m: float = 5.0,
    seed: int = 0,
) -> Topology:
    """Line of APs with stations dropped uniformly in a square box around each."""
    if n_aps < 1 or n_per_ap < 1:
        raise ValueError("need at least one AP and one station per AP")
    if spacing_m <= 0 or half_box_m <= 0:
        raise ValueError("spacing and box size must be positive")
    rng = random.Random(f"{seed}:scenario_b")
    b = _Builder()
    for i in range(n_aps):
        ap = b.add(f"ap{i}", "ap", Position(i * spacing_m, 0.0, STATION_Z_M), i)
        for j in range(n_per_ap):
            pos = b.fresh(
                lambda: Position(
                    ap.position.x + rng.uniform(-half_box_m, half_box_m),
                    ap.position.y + rng.uniform(-half_box_m, half_box_m),
                    STATION_Z_M,
                )
            )
            b.add(f"sta{i}.{j}", "sta", pos, i, ap=ap.node_id)
    channels = {n.node_id: DEFAULT_CHANNEL for n in b.nodes if n.role == "ap"}
    return Topology(tuple(b.nodes), channels, LogDistance())


def gen_hew_building(
    building: BuildingGeometry = BuildingGeometry(),
    n_per_ap: int = 10,
    seed: int = 0,
) -> Topology:
    """Residential building: one AP plus stations dropped uniformly in every room."""
    if n_per_ap < 1:
        raise ValueError("need at least one station per AP")
    rng = random.Random(f"{seed}:building")
    side = building.room_side_m
    b = _Builder()
    for f in range(building.floors):
        z = f * building.floor_height_m + STATION_Z_M
        for iy in range(building.rooms_y):
            for ix in range(building.rooms_x):
                wlan = f * building.rooms_per_floor + iy * building.rooms_x + ix

                def draw():
                    return Position(
                        rng.uniform(ix * side, (ix + 1) * side),
                        rng.uniform(iy * side, (iy + 1) * side),
                        z,
                    )

                ap = b.add(f"ap{wlan}", "ap", b.fresh(draw), wlan, floor=f)
                for j in range(n_per_ap):
                    b.add(f"sta{wlan}.{j}", "sta", b.fresh(draw), wlan, f, ap.node_id)
    channels = {n.node_id: DEFAULT_CHANNEL for n in b.nodes if n.role == "ap"}
    return Topology(tuple(b.nodes), channels, LogDistance(), building)


def _room_index(node, building):
    if node.floor_id is None:
        raise ValueError("channel policy needs a building topology")
    return node.wlan_id - node.floor_id * building.rooms_per_floor


def allocate_channels(topology: Topology, policy: str, seed: int = 0) -> Topology:
    """Return a copy of the topology with AP channels assigned by the named policy.

    Policies: "single", "eight_type_ab", "twenty_grid", "random:<C>",
    "file:<path>" (floor/room/channel triples, see load_channel_map).
    """
    policy = policy.strip().lower()
    building = topology.building
    new_map = {}
    if policy == "single":
        new_map = {ap.node_id: DEFAULT_CHANNEL for ap in topology.aps()}
    elif policy == "eight_type_ab":
        if building is None:
            raise ValueError("eight_type_ab needs a building topology")
        for ap in topology.aps():
            idx = _room_index(ap, building)
            shift = 0 if ap.floor_id % 2 == 0 else 4  # odd floors use the shifted pattern
            new_map[ap.node_id] = CHANNEL_POOL[(idx + shift) % 8]
    elif policy == "twenty_grid":
        if building is None:
            raise ValueError("twenty_grid needs a building topology")
        if building.rooms_per_floor > len(CHANNEL_POOL):
            raise ValueError("twenty_grid supports at most 20 rooms per floor")
        for ap in topology.aps():
            idx = _room_index(ap, building)
            # Distinct within a floor, staggered across floors so vertically
            # adjacent rooms never share a channel.
            new_map[ap.node_id] = CHANNEL_POOL[(idx + 7 * ap.floor_id) % len(CHANNEL_POOL)]
    elif policy.startswith("random:"):
        try:
            count = int(policy.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad random channel policy {policy!r}") from None
        if not 1 <= count <= len(CHANNEL_POOL):
            raise ValueError(f"random channel count must be in [1, {len(CHANNEL_POOL)}]")
        rng = random.Random(f"{seed}:channels")
        pool = CHANNEL_POOL[:count]
        for ap in topology.aps():
            new_map[ap.node_id] = rng.choice(pool)
    elif policy.startswith("file:"):
        if building is None:
            raise ValueError("a channel-map file needs a building topology")
        mapping = load_channel_map(policy.split(":", 1)[1])
        for ap in topology.aps():
            key = (ap.floor_id, _room_index(ap, building))
            if key not in mapping:
                raise ValueError(f"channel map has no entry for floor {key[0]} room {key[1]}")
            new_map[ap.node_id] = mapping[key]
    else:
        raise ValueError(f"unknown channel policy {policy!r}")
    return replace(topology, channel_map=new_map)


def load_channel_map(path) -> dict[tuple[int, int], int]:
    """Parse "floor room channel" integer triples; '#' comments and blanks allowed.

    Rooms are indexed row-major within their floor (index = iy * rooms_x + ix).
    """
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'floor room channel', got {raw!r}")
            try:
                floor, room, chan = (int(p) for p in parts)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field in {raw!r}") from None
            if (floor, room) in mapping:
                raise ValueError(f"{path}:{lineno}: duplicate entry for floor {floor} room {room}")
            mapping[(floor, room)] = chan
    return mapping
