"""Per-node counters and their aggregation into throughput, loss and fairness figures."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import mean, stdev


@dataclass
class PerNodeStats:
    successes: int = 0
    failures: int = 0
    drops: int = 0
    attempts: int = 0
    delivered_bytes: int = 0


GROUPINGS = ("station", "wlan", "floor", "overall")


@dataclass(frozen=True)
class GroupMetrics:
    group: str
    throughput_mbps: float
    failure_fraction: float
    attempts: int
    jfi: float


def throughput_mbps(stats: PerNodeStats, sim_seconds: float) -> float:
    """Delivered payload rate in megabits per second."""
    if sim_seconds <= 0:
        raise ValueError("simulated time must be positive")
    return stats.delivered_bytes * 8.0 / (sim_seconds * 1e6)


def failure_fraction(stats: PerNodeStats) -> float:
    """Failed share of transmission attempts; 0 when nothing was attempted."""
    if stats.attempts == 0:
        return 0.0
    return stats.failures / stats.attempts


def jfi(values) -> float:
    """Jain's fairness index of an allocation; 1.0 for an empty-rate (all-zero) share."""
    values = list(values)
    if not values:
        raise ValueError("fairness of an empty allocation is undefined")
    if any(v < 0 for v in values):
        raise ValueError("allocation shares must be non-negative")
    square_sum = sum(v * v for v in values)
    if square_sum == 0.0:
        return 1.0
    total = sum(values)
    return total * total / (len(values) * square_sum)


def _group_key(node, grouping):
    if grouping == "station":
        return node.name
    if grouping == "wlan":
        return f"wlan{node.wlan_id}"
    if grouping == "floor":
        if node.floor_id is None:
            raise ValueError("floor grouping on a topology without floors")
        return f"floor{node.floor_id}"
    if grouping == "overall":
        return "overall"
    raise ValueError(f"unknown grouping {grouping!r} (expected one of {GROUPINGS})")


def aggregate(run, grouping: str) -> list[GroupMetrics]:
    """Group station counters from one run and derive the summary figures.

    Only stations are pooled; access points carry no contention traffic of
    their own.  JFI within each group is computed over member throughputs.
    """
    groups: dict[str, list] = {}
    for node in run.nodes:
        if node.role != "sta":
            continue
        groups.setdefault(_group_key(node, grouping), []).append(node)
    out = []
    for key in sorted(groups):
        members = groups[key]
        rates = [throughput_mbps(n.stats, run.sim_seconds) for n in members]
        failures = sum(n.stats.failures for n in members)
        attempts = sum(n.stats.attempts for n in members)
        out.append(
            GroupMetrics(
                group=key,
                throughput_mbps=sum(rates),
                failure_fraction=failures / attempts if attempts else 0.0,
                attempts=attempts,
                jfi=jfi(rates),
            )
        )
    return out


@dataclass(frozen=True)
class GroupSummary:
    group: str
    iterations: int
    mean_throughput_mbps: float
    std_throughput_mbps: float
    mean_failure_fraction: float
    std_failure_fraction: float
    mean_attempts: float
    mean_jfi: float
    std_jfi: float


def summarize(per_iteration: list[list[GroupMetrics]]) -> list[GroupSummary]:
    """Mean and sample standard deviation across iterations, per group."""
    by_group: dict[str, list[GroupMetrics]] = {}
    for rows in per_iteration:
        for row in rows:
            by_group.setdefault(row.group, []).append(row)

    def spread(xs):
        return stdev(xs) if len(xs) > 1 else 0.0

    out = []
    for key in sorted(by_group):
        rows = by_group[key]
        tp = [r.throughput_mbps for r in rows]
        ff = [r.failure_fraction for r in rows]
        fair = [r.jfi for r in rows]
        out.append(
            GroupSummary(
                group=key,
                iterations=len(rows),
                mean_throughput_mbps=mean(tp),
                std_throughput_mbps=spread(tp),
                mean_failure_fraction=mean(ff),
                std_failure_fraction=spread(ff),
                mean_attempts=mean(r.attempts for r in rows),
                mean_jfi=mean(fair),
                std_jfi=spread(fair),
            )
        )
    return out
