"""Batch-run front end.

Parses a line-oriented "key = value" run specification (command-line flags
override file values), executes the seeded scenario x protocol x iteration
matrix, and writes CSV result tables, tab-separated plot series, a manifest
sufficient to reproduce the run, and rendered figures.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics, scenarios
from .channel import BinaryDisc, LogDistance, PathLossParams, SenseThresholds
from .engine import SimConfig, run
from .mac import MacParams, Protocol
from .scenarios import BuildingGeometry, Topology


class SpecError(ValueError):
    """Parse or validation failure; message names the key and its source."""


SCENARIOS = ("single_ap", "scenario_a", "scenario_b", "hew")

_CORE_KEYS = ("scenario", "protocols", "iterations", "seed", "duration_s", "out",
              "sweep_n", "workers")
_MAC_KEYS = ("cw_min", "cw_max", "retry_limit", "slot_us", "difs_us", "sifs_us",
             "stickiness")
_FRAME_KEYS = ("payload_bytes", "mac_header_bytes", "ack_bytes", "phy_rate_mbps",
               "ack_rate_mbps", "preamble_us", "ack_preamble_us", "strict_acks")
_RADIO_KEYS = ("tx_power_dbm", "cca_dbm", "detect_dbm", "carrier_freq_ghz",
               "noise_dbm", "capture_db", "wall_db", "floor_db")
_SCENARIO_KEYS = {
    "single_ap": ("n_stations", "radius_m", "ideal", "channels"),
    "scenario_a": ("n_aps", "n_per_ap", "spacing_m", "radius_m", "control", "channels"),
    "scenario_b": ("n_aps", "n_per_ap", "spacing_m", "half_box_m", "channels"),
    "hew": ("floors", "rooms_x", "rooms_y", "room_side_m", "floor_height_m",
            "n_per_ap", "channels"),
}

_INT_KEYS = frozenset({
    "iterations", "seed", "workers", "cw_min", "cw_max", "retry_limit", "slot_us",
    "difs_us", "sifs_us", "stickiness", "payload_bytes", "mac_header_bytes",
    "ack_bytes", "preamble_us", "ack_preamble_us", "n_stations", "n_aps",
    "n_per_ap", "floors", "rooms_x", "rooms_y",
})
_FLOAT_KEYS = frozenset({
    "duration_s", "phy_rate_mbps", "ack_rate_mbps", "tx_power_dbm", "cca_dbm",
    "detect_dbm", "carrier_freq_ghz", "noise_dbm", "capture_db", "wall_db",
    "floor_db", "radius_m", "spacing_m", "half_box_m", "room_side_m",
    "floor_height_m",
})
_BOOL_KEYS = frozenset({"strict_acks", "ideal", "control"})
_KNOWN_KEYS = (
    frozenset(_CORE_KEYS) | frozenset(_MAC_KEYS) | frozenset(_FRAME_KEYS)
    | frozenset(_RADIO_KEYS)
    | frozenset(k for keys in _SCENARIO_KEYS.values() for k in keys)
)


@dataclass(frozen=True)
class RunSpec:
    scenario: str = "single_ap"
    protocols: tuple[str, ...] = ("dcf",)
    iterations: int = 5
    base_seed: int = 1
    duration_s: float = 25.0
    output_dir: str = "results"
    sweep_n: tuple[int, ...] | None = None
    workers: int = 1
    overrides: dict = field(default_factory=dict)


def _parse_value(key, raw, where):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw.strip()
    except ValueError as e:
        raise SpecError(f"{where}: bad value for {key!r}: {e}") from None


def _read_spec_file(path):
    """Yield (key, raw_value, location) triples from a key = value file."""
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SpecError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        yield key.strip(), raw.strip(), f"{path}:{lineno}"


def parse_spec(path=None, flag_values=None) -> RunSpec:
    """Resolve a RunSpec from an optional file plus flag overrides.

    flag_values maps key -> raw string and wins over file entries.  Every
    value is validated here so that errors carry the offending key and line.
    """
    entries = {}
    if path is not None:
        for key, raw, where in _read_spec_file(path):
            if key not in _KNOWN_KEYS:
                raise SpecError(f"{where}: unknown key {key!r}")
            entries[key] = (raw, where)
    for key, raw in (flag_values or {}).items():
        if key not in _KNOWN_KEYS:
            raise SpecError(f"command line: unknown key {key!r}")
        entries[key] = (str(raw), "command line")

    values = {}
    for key, (raw, where) in entries.items():
        values[key] = _parse_value(key, raw, where)

    scenario = values.pop("scenario", "single_ap")
    if scenario not in SCENARIOS:
        raise SpecError(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")

    protocols_raw = values.pop("protocols", "dcf")
    protocols = tuple(p.strip() for p in protocols_raw.split(",") if p.strip())
    if not protocols:
        raise SpecError("protocols must list at least one protocol")
    for p in protocols:
        try:
            Protocol.from_name(p)
        except ValueError as e:
            raise SpecError(f"protocols: {e}") from None

    iterations = values.pop("iterations", 5)
    if iterations < 1:
        raise SpecError("iterations must be at least 1")
    base_seed = values.pop("seed", 1)
    duration_s = values.pop("duration_s", 25.0)
    if duration_s <= 0:
        raise SpecError("duration_s must be positive")
    output_dir = values.pop("out", "results")
    workers = values.pop("workers", 1)
    if workers < 1:
        raise SpecError("workers must be at least 1")

    sweep_n = None
    if "sweep_n" in values:
        raw = values.pop("sweep_n")
        try:
            sweep_n = tuple(int(tok) for tok in str(raw).split(",") if tok.strip())
        except ValueError:
            raise SpecError(f"sweep_n: expected comma-separated integers, got {raw!r}") from None
        if not sweep_n or any(n < 1 for n in sweep_n):
            raise SpecError("sweep_n entries must be positive integers")
        if scenario != "single_ap":
            raise SpecError("sweep_n only applies to the single_ap scenario")

    allowed = set(_MAC_KEYS) | set(_FRAME_KEYS) | set(_RADIO_KEYS) | set(_SCENARIO_KEYS[scenario])
    for key in values:
        if key not in allowed:
            raise SpecError(f"key {key!r} does not apply to scenario {scenario!r}")

    spec = RunSpec(
        scenario=scenario,
        protocols=protocols,
        iterations=iterations,
        base_seed=base_seed,
        duration_s=duration_s,
        output_dir=output_dir,
        sweep_n=sweep_n,
        workers=workers,
        overrides=dict(sorted(values.items())),
    )
    _resolve(spec)  # validate invariants eagerly (cw_min power of two, ...)
    return spec


def _mac_params(spec) -> MacParams:
    ov = spec.overrides
    kwargs = {}
    for key, name in (("cw_min", "cw_min"), ("cw_max", "cw_max"),
                      ("retry_limit", "retry_limit"), ("slot_us", "slot_us"),
                      ("difs_us", "difs_us"), ("sifs_us", "sifs_us"),
                      ("stickiness", "default_stickiness")):
        if key in ov:
            kwargs[name] = ov[key]
    try:
        return MacParams(**kwargs)
    except ValueError as e:
        raise SpecError(str(e)) from None


def _thresholds(spec) -> SenseThresholds:
    ov = spec.overrides
    kwargs = {}
    if "cca_dbm" in ov:
        kwargs["cca_energy_dbm"] = ov["cca_dbm"]
    if "detect_dbm" in ov:
        kwargs["frame_detect_dbm"] = ov["detect_dbm"]
    if "tx_power_dbm" in ov:
        kwargs["tx_power_dbm"] = ov["tx_power_dbm"]
    return SenseThresholds(**kwargs)


def _model_override(spec):
    """LogDistance replacement when any radio-model key is set, else None."""
    ov = spec.overrides
    model_keys = ("carrier_freq_ghz", "noise_dbm", "capture_db", "wall_db", "floor_db")
    if not any(k in ov for k in model_keys):
        return None
    pl_kwargs = {}
    if "carrier_freq_ghz" in ov:
        pl_kwargs["carrier_freq_hz"] = ov["carrier_freq_ghz"] * 1e9
    if "wall_db" in ov:
        pl_kwargs["per_wall_db"] = ov["wall_db"]
    if "floor_db" in ov:
        pl_kwargs["per_floor_db"] = ov["floor_db"]
    ld_kwargs = {"params": PathLossParams(**pl_kwargs)}
    if "noise_dbm" in ov:
        ld_kwargs["noise_floor_dbm"] = ov["noise_dbm"]
    if "capture_db" in ov:
        ld_kwargs["capture_threshold_db"] = ov["capture_db"]
    return LogDistance(**ld_kwargs)


@dataclass(frozen=True)
class _Resolved:
    mac: MacParams
    thresholds: SenseThresholds
    model_override: object


def _resolve(spec) -> _Resolved:
    resolved = _Resolved(_mac_params(spec), _thresholds(spec), _model_override(spec))
    try:
        _sim_config(spec, resolved, spec.protocols[0], spec.base_seed)
    except ValueError as e:
        raise SpecError(str(e)) from None
    _build_topology(spec, spec.base_seed, (spec.sweep_n or (None,))[0])
    return resolved


def _build_topology(spec, seed, n_override=None) -> Topology:
    ov = spec.overrides
    if spec.scenario == "single_ap":
        topo = scenarios.gen_single_ap(
            n_stations=n_override if n_override is not None else ov.get("n_stations", 10),
            radius_m=ov.get("radius_m", 5.0),
            ideal=ov.get("ideal", True),
        )
    elif spec.scenario == "scenario_a":
        topo = scenarios.gen_scenario_a(
            n_aps=ov.get("n_aps", 3),
            n_per_ap=ov.get("n_per_ap", 4),
            spacing_m=ov.get("spacing_m", 15.0),
            radius_m=ov.get("radius_m"),
            control=ov.get("control", False),
        )
    elif spec.scenario == "scenario_b":
        topo = scenarios.gen_scenario_b(
            n_aps=ov.get("n_aps", 10),
            n_per_ap=ov.get("n_per_ap", 20),
            spacing_m=ov.get("spacing_m", 15.0),
            half_box_m=ov.get("half_box_m", 5.0),
            seed=seed,
        )
    else:
        building = BuildingGeometry(
            floors=ov.get("floors", 5),
            rooms_x=ov.get("rooms_x", 10),
            rooms_y=ov.get("rooms_y", 2),
            room_side_m=ov.get("room_side_m", 10.0),
            floor_height_m=ov.get("floor_height_m", 3.0),
        )
        topo = scenarios.gen_hew_building(building, n_per_ap=ov.get("n_per_ap", 10), seed=seed)
    if "channels" in ov:
        try:
            topo = scenarios.allocate_channels(topo, ov["channels"], seed=seed)
        except ValueError as e:
            raise SpecError(f"channels: {e}") from None
    return topo


def _sim_config(spec, resolved, protocol_name, seed) -> SimConfig:
    ov = spec.overrides
    if resolved.model_override is not None and spec.scenario == "single_ap" and ov.get("ideal", True):
        raise SpecError("radio-model overrides need a log-distance scenario (set ideal = false)")
    if resolved.model_override is not None and spec.scenario == "scenario_a" and ov.get("control", False):
        raise SpecError("radio-model overrides conflict with the control (disc) channel")
    kwargs = {}
    for key in ("payload_bytes", "mac_header_bytes", "ack_bytes", "phy_rate_mbps",
                "ack_rate_mbps", "preamble_us", "ack_preamble_us", "strict_acks"):
        if key in ov:
            kwargs[key] = ov[key]
    return SimConfig(
        protocol=Protocol.from_name(protocol_name),
        duration_s=spec.duration_s,
        seed=seed,
        mac=resolved.mac,
        thresholds=resolved.thresholds,
        channel=resolved.model_override,
        **kwargs,
    )


# -- output files -------------------------------------------------------------


def _fmt(x) -> str:
    return f"{x:.6f}"


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _write_raw(path, result):
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["node_id", "name", "role", "wlan", "floor", "channel",
                    "successes_count", "failures_count", "drops_count",
                    "attempts_count", "delivered_bytes", "throughput_mbps"])
        for node in result.nodes:
            s = node.stats
            w.writerow([
                node.node_id, node.name, node.role, node.wlan_id,
                "" if node.floor_id is None else node.floor_id, node.channel,
                s.successes, s.failures, s.drops, s.attempts, s.delivered_bytes,
                _fmt(metrics.throughput_mbps(s, result.sim_seconds)),
            ])


def _write_aggregate(path, rows):
    """rows: list of (iteration, seed, GroupMetrics)."""
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["iteration", "seed", "group", "throughput_mbps",
                    "failure_fraction_ratio", "attempts_count", "jfi_ratio"])
        for iteration, seed, g in rows:
            w.writerow([iteration, seed, g.group, _fmt(g.throughput_mbps),
                        _fmt(g.failure_fraction), g.attempts, _fmt(g.jfi)])


def _write_summary(path, per_protocol):
    """per_protocol: list of (protocol_name, list[GroupSummary])."""
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["protocol", "group", "iterations_count",
                    "mean_throughput_mbps", "std_throughput_mbps",
                    "mean_failure_fraction_ratio", "std_failure_fraction_ratio",
                    "mean_attempts_count", "mean_jfi_ratio", "std_jfi_ratio"])
        for name, summaries in per_protocol:
            for s in summaries:
                std = [_fmt(s.std_throughput_mbps), _fmt(s.std_failure_fraction),
                       _fmt(s.std_jfi)]
                if s.iterations == 1:
                    std = ["", "", ""]  # a lone sample has no spread
                w.writerow([name, s.group, s.iterations,
                            _fmt(s.mean_throughput_mbps), std[0],
                            _fmt(s.mean_failure_fraction), std[1],
                            _fmt(s.mean_attempts), _fmt(s.mean_jfi), std[2]])


def _manifest_lines(spec, seeds, files, status):
    lines = ["# run manifest: re-execute with  ecasim --spec <this file>"]
    lines.append(f"scenario = {spec.scenario}")
    lines.append(f"protocols = {','.join(spec.protocols)}")
    lines.append(f"iterations = {spec.iterations}")
    lines.append(f"seed = {spec.base_seed}")
    lines.append(f"duration_s = {spec.duration_s!r}")
    lines.append(f"out = {spec.output_dir}")
    if spec.sweep_n is not None:
        lines.append(f"sweep_n = {','.join(str(n) for n in spec.sweep_n)}")
    if spec.workers != 1:
        lines.append(f"workers = {spec.workers}")
    for key, value in spec.overrides.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    lines.append(f"# status = {status}")
    lines.append(f"# iteration seeds = {','.join(str(s) for s in seeds)}")
    for f in files:
        lines.append(f"# wrote {f}")
    return lines


def emit_plotdata(out_dir, tag, protocol_summaries, sweep_series=None):
    """Write tab-separated plot series; returns the files written.

    protocol_summaries: {protocol: {grouping: list[GroupSummary]}}
    sweep_series: {protocol: list[(n, mean_mbps, std_mbps, mean_ff, std_ff)]}
    """
    out = Path(out_dir)
    written = []

    def tsv(name, header, rows):
        path = out / name
        with open(path, "w", newline="") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                fh.write("\t".join(str(c) for c in row) + "\n")
        written.append(path)

    for proto, series in (sweep_series or {}).items():
        tsv(f"{tag}_{proto}_throughput_vs_n.tsv",
            ["n_stations", "mean_throughput_mbps", "std_throughput_mbps"],
            [(n, _fmt(m), _fmt(s)) for n, m, s, _, _ in series])
        tsv(f"{tag}_{proto}_failures_vs_n.tsv",
            ["n_stations", "mean_failure_fraction_ratio", "std_failure_fraction_ratio"],
            [(n, _fmt(m), _fmt(s)) for n, _, _, m, s in series])

    jfi_rows = []
    for proto, groupings in protocol_summaries.items():
        if "station" in groupings:
            tsv(f"{tag}_{proto}_station_throughput.tsv",
                ["station", "mean_throughput_mbps", "std_throughput_mbps"],
                [(s.group, _fmt(s.mean_throughput_mbps), _fmt(s.std_throughput_mbps))
                 for s in groupings["station"]])
        if "floor" in groupings:
            tsv(f"{tag}_{proto}_floor_metrics.tsv",
                ["floor", "mean_throughput_mbps", "mean_failure_fraction_ratio",
                 "mean_attempts_count"],
                [(s.group, _fmt(s.mean_throughput_mbps), _fmt(s.mean_failure_fraction),
                  _fmt(s.mean_attempts)) for s in groupings["floor"]])
        overall = groupings.get("overall", [])
        if overall:
            jfi_rows.append((proto, _fmt(overall[0].mean_jfi), _fmt(overall[0].std_jfi)))
    if jfi_rows:
        tsv(f"{tag}_jfi.tsv", ["protocol", "mean_jfi_ratio", "std_jfi_ratio"], jfi_rows)
    return written


def _run_job(args):
    topology, config = args
    return run(topology, config)


def execute(spec: RunSpec, render: bool = True) -> int:
    """Run the full matrix and write every output file.  Returns an exit code."""
    resolved = _resolve(spec)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [spec.base_seed + i for i in range(spec.iterations)]
    sweep = spec.sweep_n if spec.sweep_n is not None else (None,)

    jobs = []
    order = []
    for n in sweep:
        topos = {it: _build_topology(spec, seeds[it], n) for it in range(spec.iterations)}
        for proto in spec.protocols:
            for it in range(spec.iterations):
                jobs.append((topos[it], _sim_config(spec, resolved, proto, seeds[it])))
                order.append((n, proto, it))

    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    by_key = {order[i]: results[i] for i in range(len(order))}

    files = []
    status = "complete"
    sweep_overall = {proto: [] for proto in spec.protocols}
    try:
        for n in sweep:
            tag = spec.scenario if n is None else f"{spec.scenario}_n{n}"
            has_floor = any(
                node.floor_id is not None for node in by_key[(n, spec.protocols[0], 0)].nodes
            )
            groupings = [g for g in metrics.GROUPINGS if g != "floor" or has_floor]
            summaries = {}
            for proto in spec.protocols:
                runs = [by_key[(n, proto, it)] for it in range(spec.iterations)]
                for it, result in enumerate(runs):
                    raw = out / f"raw_{tag}_{proto}_i{it}.csv"
                    _write_raw(raw, result)
                    files.append(raw)
                summaries[proto] = {}
                for grouping in groupings:
                    per_iter = [metrics.aggregate(r, grouping) for r in runs]
                    agg = out / f"agg_{tag}_{proto}_{grouping}.csv"
                    rows = [
                        (it, seeds[it], g)
                        for it in range(spec.iterations)
                        for g in per_iter[it]
                    ]
                    _write_aggregate(agg, rows)
                    files.append(agg)
                    summaries[proto][grouping] = metrics.summarize(per_iter)
            for grouping in groupings:
                path = out / f"summary_{tag}_{grouping}.csv"
                _write_summary(path, [(p, summaries[p][grouping]) for p in spec.protocols])
                files.append(path)
            if spec.sweep_n is None:
                files.extend(emit_plotdata(out, tag, summaries))
            else:
                for proto in spec.protocols:
                    s = summaries[proto]["overall"][0]
                    sweep_overall[proto].append(
                        (n, s.mean_throughput_mbps, s.std_throughput_mbps,
                         s.mean_failure_fraction, s.std_failure_fraction)
                    )
        if spec.sweep_n is not None:
            files.extend(emit_plotdata(out, spec.scenario, {}, sweep_overall))
    except OSError as e:
        status = f"partial: {e}"
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(_manifest_lines(spec, seeds, files, status)) + "\n")

    if status != "complete":
        print(f"error: {status}", file=sys.stderr)
        return 1
    if render:
        from . import plots

        figures = plots.render_all(out)
        files.extend(figures)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ecasim",
        description="Seeded WLAN contention simulation batch runner "
                    "(cw_max 255 in the literature is modeled as 256 to keep "
                    "the window lattice consistent; see the eca_hyst_sr_red protocol).",
    )
    parser.add_argument("--spec", help="run specification file (key = value lines)")
    parser.add_argument("--scenario", choices=SCENARIOS)
    parser.add_argument("--protocol", help="comma-separated protocol list")
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--duration", type=float, help="simulated seconds per run")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel worker processes")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any spec key (repeatable)")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    args = parser.parse_args(argv)

    flag_values = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        key, _, value = item.partition("=")
        flag_values[key.strip()] = value.strip()
    if args.scenario:
        flag_values["scenario"] = args.scenario
    if args.protocol:
        flag_values["protocols"] = args.protocol
    if args.iterations is not None:
        flag_values["iterations"] = args.iterations
    if args.seed is not None:
        flag_values["seed"] = args.seed
    if args.duration is not None:
        flag_values["duration_s"] = args.duration
    if args.out is not None:
        flag_values["out"] = args.out
    if args.workers is not None:
        flag_values["workers"] = args.workers

    try:
        spec = parse_spec(args.spec, flag_values)
    except (SpecError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return execute(spec, render=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
