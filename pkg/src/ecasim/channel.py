"""Radio channel models: propagation loss, carrier sensing and frame reception.

Two interchangeable models are provided.  BinaryDisc is the idealised
geometric model (decode inside the transmission range, hold-the-medium-busy
inside the carrier-sense range, nothing beyond).  LogDistance is a breakpoint
log-distance model for indoor deployments with per-wall and per-floor
penetration losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# Reference frequency and breakpoint of the log-distance model.
REFERENCE_FREQ_HZ = 5.0e9
BREAKPOINT_M = 5.0

# Arrival level reported for binary-disc transmitters inside the sense-only
# ring (tx_range, cs_range].  Such arrivals hold the medium busy but can never
# be decoded; binary-disc busy/decode decisions are range checks, so this
# value is only a distinguishable marker (kept below the default frame-detect
# threshold on purpose).
SENSE_ONLY_DBM = -86.0


class SenseState(Enum):
    IDLE = "idle"
    BUSY = "busy"


class Reception(Enum):
    DECODED = "decoded"
    CORRUPTED = "corrupted"
    UNDETECTED = "undetected"


@dataclass(frozen=True)
class Position:
    """Cartesian coordinates in metres; z is height above ground."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError("position coordinates must be finite")
        if self.z < 0:
            raise ValueError("z must be non-negative")

    def distance_to(self, other: "Position") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2
            + (self.y - other.y) ** 2
            + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class ObstacleCount:
    walls: int = 0
    floors: int = 0

    def __post_init__(self):
        if self.walls < 0 or self.floors < 0:
            raise ValueError("obstacle counts must be non-negative")


NO_OBSTACLES = ObstacleCount(0, 0)


@dataclass(frozen=True)
class PathLossParams:
    carrier_freq_hz: float = 5.24e9
    per_wall_db: float = 12.0
    per_floor_db: float = 17.0

    def __post_init__(self):
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency must be positive")


@dataclass(frozen=True)
class BinaryDisc:
    """Geometric on/off channel: decode within tx_range_m, sense within cs_range_m."""

    tx_range_m: float
    cs_range_m: float

    def __post_init__(self):
        if self.tx_range_m <= 0 or self.cs_range_m <= 0:
            raise ValueError("ranges must be positive")
        if self.cs_range_m < self.tx_range_m:
            raise ValueError("carrier-sense range must cover the transmission range")


@dataclass(frozen=True)
class LogDistance:
    """Breakpoint log-distance propagation with wall/floor penetration losses."""

    params: PathLossParams = field(default_factory=PathLossParams)
    noise_floor_dbm: float = -94.0
    # None disables capture: any detectable overlap corrupts.  A number enables
    # SINR capture at that threshold (dB).
    capture_threshold_db: float | None = None


ChannelModel = BinaryDisc | LogDistance


@dataclass(frozen=True)
class SenseThresholds:
    cca_energy_dbm: float = -62.0   # energy-sum busy threshold
    frame_detect_dbm: float = -82.0  # single decodable-frame busy threshold
    tx_power_dbm: float = 15.0


def path_loss(distance_m, params=PathLossParams(), obstacles=NO_OBSTACLES):
    """Propagation loss in dB over distance_m with the given obstacle counts."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    loss = 40.05 + 20.0 * math.log10(params.carrier_freq_hz / REFERENCE_FREQ_HZ)
    loss += 20.0 * math.log10(min(distance_m, BREAKPOINT_M))
    if distance_m > BREAKPOINT_M:
        loss += 35.0 * math.log10(distance_m / BREAKPOINT_M)
    loss += params.per_floor_db * obstacles.floors
    loss += params.per_wall_db * obstacles.walls
    return loss


def received_power(tx_power_dbm, tx_pos, rx_pos, model, obstacles=NO_OBSTACLES):
    """Arrival power in dBm at rx_pos, or None when out of reach.

    BinaryDisc reports full transmit power within the transmission range and
    SENSE_ONLY_DBM inside the sense-only ring.
    """
    d = tx_pos.distance_to(rx_pos)
    if d <= 0:
        raise ValueError("transmitter and receiver must be at distinct positions")
    if isinstance(model, LogDistance):
        return tx_power_dbm - path_loss(d, model.params, obstacles)
    if d <= model.tx_range_m:
        return tx_power_dbm
    if d <= model.cs_range_m:
        return SENSE_ONLY_DBM
    return None


def _axis_plane_crossings(a, b, spacing, n_interior):
    """Count interior grid planes (k*spacing, 1 <= k <= n_interior) strictly between a and b."""
    if n_interior <= 0 or a == b:
        return 0
    lo, hi = (a, b) if a < b else (b, a)
    first = math.floor(lo / spacing) + 1
    last = math.ceil(hi / spacing) - 1
    first = max(first, 1)
    last = min(last, n_interior)
    return max(0, last - first + 1)


def count_obstacles(tx_pos, rx_pos, building):
    """Walls and floors separating two positions inside a building (None -> none)."""
    if building is None:
        return NO_OBSTACLES
    floors = abs(
        int(tx_pos.z // building.floor_height_m) - int(rx_pos.z // building.floor_height_m)
    )
    walls = _axis_plane_crossings(
        tx_pos.x, rx_pos.x, building.room_side_m, building.rooms_x - 1
    )
    walls += _axis_plane_crossings(
        tx_pos.y, rx_pos.y, building.room_side_m, building.rooms_y - 1
    )
    return ObstacleCount(walls=walls, floors=floors)


def dbm_to_mw(dbm):
    return 10.0 ** (0.1 * dbm)


def mw_to_dbm(mw):
    if mw <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(mw)


def carrier_sense_state(
    listener, active, positions, model, thresholds, building=None
):
    """Medium state seen by `listener` given the active transmissions.

    `active` holds transmissions whose intervals cover the query instant and
    that share the listener's channel; the listener's own transmissions must
    not be included.
    """
    pos = positions[listener]
    if isinstance(model, BinaryDisc):
        for tx in active:
            if positions[tx.tx_node].distance_to(pos) <= model.cs_range_m:
                return SenseState.BUSY
        return SenseState.IDLE
    total_mw = 0.0
    for tx in active:
        obstacles = count_obstacles(positions[tx.tx_node], pos, building)
        p = received_power(tx.power_dbm, positions[tx.tx_node], pos, model, obstacles)
        if p >= thresholds.frame_detect_dbm:
            return SenseState.BUSY
        total_mw += dbm_to_mw(p)
    if total_mw > 0 and mw_to_dbm(total_mw) >= thresholds.cca_energy_dbm:
        return SenseState.BUSY
    return SenseState.IDLE


def _decodable_grade(frame, rx_pos, positions, model, thresholds, building):
    """Arrival power if the frame alone would be decodable at rx_pos, else None."""
    tx_pos = positions[frame.tx_node]
    obstacles = count_obstacles(tx_pos, rx_pos, building)
    p = received_power(frame.power_dbm, tx_pos, rx_pos, model, obstacles)
    if p is None:
        return None
    if isinstance(model, BinaryDisc):
        return p if tx_pos.distance_to(rx_pos) <= model.tx_range_m else None
    return p if p >= thresholds.frame_detect_dbm else None


def reception_outcome(
    frame, receiver, overlapping, positions, model, thresholds, building=None
):
    """Classify reception of `frame` at `receiver` against overlapping transmissions.

    `overlapping` lists every other same-channel transmission whose interval
    intersects the frame's, including any sent by the receiver itself (a radio
    cannot decode while transmitting).
    """
    rx_pos = positions[receiver]
    signal = _decodable_grade(frame, rx_pos, positions, model, thresholds, building)
    if signal is None:
        return Reception.UNDETECTED
    if any(tx.tx_node == receiver for tx in overlapping):
        return Reception.CORRUPTED

    capture = getattr(model, "capture_threshold_db", None)
    if capture is None:
        for tx in overlapping:
            if _decodable_grade(tx, rx_pos, positions, model, thresholds, building) is not None:
                return Reception.CORRUPTED
        return Reception.DECODED

    interference_mw = dbm_to_mw(model.noise_floor_dbm)
    for tx in overlapping:
        obstacles = count_obstacles(positions[tx.tx_node], rx_pos, building)
        p = received_power(tx.power_dbm, positions[tx.tx_node], rx_pos, model, obstacles)
        if p is not None:
            interference_mw += dbm_to_mw(p)
    sinr_db = signal - mw_to_dbm(interference_mw)
    return Reception.DECODED if sinr_db >= capture else Reception.CORRUPTED
