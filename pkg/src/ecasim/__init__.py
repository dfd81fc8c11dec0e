"""Seeded discrete-event simulation of WLAN channel contention.

The package models carrier-sense channel access with random (DCF-style)
and deterministic-after-success backoff, including hysteresis, fair-share
aggregation and schedule-reset variants, over single- and multi-AP
topologies with either an idealised disc channel or a log-distance
path-loss model.
"""

from .channel import (
    BinaryDisc,
    LogDistance,
    PathLossParams,
    Position,
    Reception,
    SenseState,
    SenseThresholds,
)
from .engine import RunResult, SimConfig, run
from .mac import MacParams, Protocol
from .metrics import aggregate, jfi, summarize
from .scenarios import (
    BuildingGeometry,
    Topology,
    allocate_channels,
    gen_hew_building,
    gen_scenario_a,
    gen_scenario_b,
    gen_single_ap,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryDisc",
    "BuildingGeometry",
    "LogDistance",
    "MacParams",
    "PathLossParams",
    "Position",
    "Protocol",
    "Reception",
    "RunResult",
    "SenseState",
    "SenseThresholds",
    "SimConfig",
    "Topology",
    "aggregate",
    "allocate_channels",
    "gen_hew_building",
    "gen_scenario_a",
    "gen_scenario_b",
    "gen_single_ap",
    "jfi",
    "run",
    "summarize",
    "__version__",
]
