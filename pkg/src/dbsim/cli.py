"""Command-line batch driver: sweeps, seeding and CSV/JSON output."""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from dbsim import __version__
from dbsim.config import ScenarioConfig, coerce, load_config_file, parse_dma, parse_scheduler, validate
from dbsim.engine import RunResult, run_many
from dbsim.errors import ConfigError
from dbsim.metrics import aggregate, empirical_cdf, geometry_statistics, kept_packets, summarize

SUMMARY_COLUMNS = ("dma", "speed", "accel", "users", "scheduler", "seed", "time_avg_se", "jain",
                   "mean_thp_bps", "p5_thp_bps", "completed_per_user", "tx_time_frac", "outside_frac")
_METRIC_FIELDS = {
    "time_avg_se": "time_avg_se",
    "jain": "jain",
    "mean_thp_bps": "mean_packet_throughput_bps",
    "p5_thp_bps": "p5_packet_throughput_bps",
    "completed_per_user": "completed_requests_per_user",
    "tx_time_frac": "transmission_time_fraction",
    "outside_frac": "outside_cell_fraction",
}
EMIT_CHOICES = ("summary", "ticks", "packets", "cdfs")
DEFAULT_EMIT = ("summary", "packets", "cdfs")
_AXES = ("dma", "speed", "accel", "users", "scheduler")


@dataclass(frozen=True)
class ExperimentPlan:
    """A base config, the sweep axes and the seeds every sweep cell runs with."""

    base: ScenarioConfig
    dma: tuple[str, ...]
    speed: tuple[float, ...]
    accel: tuple[float, ...]
    users: tuple[int, ...]
    scheduler: tuple[str, ...]
    seeds: tuple[int, ...]
    emit: tuple[str, ...] = DEFAULT_EMIT
    out: Path = field(default=Path("results"), compare=False)

    def cells(self) -> list[dict]:
        """Sweep cells in a fixed order: dma, speed, accel, users, scheduler."""
        return [dict(zip(_AXES, combo)) for combo in
                itertools.product(self.dma, self.speed, self.accel, self.users, self.scheduler)]

    def cell_config(self, cell: dict) -> ScenarioConfig:
        return self.base.replace(dma=cell["dma"], drone_speed=cell["speed"], max_accel=cell["accel"],
                                 users_per_cell=cell["users"], scheduler=cell["scheduler"])

    def to_dict(self) -> dict:
        return {"dma": list(self.dma), "speed": list(self.speed), "accel": list(self.accel),
                "users": list(self.users), "scheduler": list(self.scheduler),
                "seeds": list(self.seeds), "emit": list(self.emit)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dbsim", description="Simulate drone-cell networks and write metric tables.")
    p.add_argument("--config", type=Path, help="YAML/JSON config file, or a run.json from a previous run")
    p.add_argument("--dma", help="mobility algorithm(s), comma separated: HOV,SNR,SLR,GT,OPT")
    p.add_argument("--speed", help="drone speed(s) in m/s, comma separated")
    p.add_argument("--accel", help="max acceleration(s) in m/s^2, comma separated")
    p.add_argument("--users", help="users per cell, comma separated")
    p.add_argument("--scheduler", help="EqualShare and/or CQBased, comma separated")
    p.add_argument("--seeds", help="explicit seed list, comma separated")
    p.add_argument("--runs", type=int, help="number of seeds starting at the config seed")
    p.add_argument("--duration", type=float, help="simulated seconds per run")
    p.add_argument("--grid-side", type=int, help="cells per grid side (odd)")
    p.add_argument("--candidates", type=int, help="candidate turning angles per epoch (odd, >= 3)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; may be repeated")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--emit", help=f"outputs to write, comma separated from {','.join(EMIT_CHOICES)}")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _csv(text: str | None, cast) -> tuple | None:
    if text is None:
        return None
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise ConfigError([("cli", f"empty list {text!r}")])
    try:
        return tuple(cast(t) for t in items)
    except ValueError as exc:
        raise ConfigError([("cli", f"cannot parse {text!r}: {exc}")]) from None


def _as_tuple(value, cast) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return _csv(str(value), cast)


def _int(text) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"{text} is not an integer")
    return int(v)


def plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    file_cfg, file_plan = ({}, {})
    if args.config is not None:
        file_cfg, file_plan = load_config_file(args.config)
    raw = dict(file_cfg)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([("--set", f"expected KEY=VALUE, got {item!r}")])
        raw[key.strip()] = yaml.safe_load(value)
    if args.duration is not None:
        raw["duration_s"] = args.duration
    if args.grid_side is not None:
        raw["grid_side"] = args.grid_side
    if args.candidates is not None:
        raw["n_candidates"] = args.candidates
    base = validate(coerce(raw))

    def axis(cli_value, key, cast, default):
        if cli_value is not None:
            return _csv(cli_value, cast)
        if key in file_plan:
            return _as_tuple(file_plan[key], cast)
        return (default,)

    dmas = tuple(parse_dma(d).value for d in axis(args.dma, "dma", str, base.dma.value))
    scheds = tuple(parse_scheduler(s).value for s in axis(args.scheduler, "scheduler", str, base.scheduler.value))
    speeds = axis(args.speed, "speed", float, base.drone_speed)
    accels = axis(args.accel, "accel", float, base.max_accel)
    users = axis(args.users, "users", _int, base.users_per_cell)

    if args.seeds is not None:
        seeds = _csv(args.seeds, _int)
    elif args.runs is not None:
        if args.runs < 1:
            raise ConfigError([("--runs", "must be at least 1")])
        seeds = tuple(base.seed + i for i in range(args.runs))
    elif "seeds" in file_plan:
        seeds = _as_tuple(file_plan["seeds"], _int)
    else:
        seeds = (base.seed,)

    if args.emit is not None:
        emit = _csv(args.emit, str)
    elif "emit" in file_plan:
        emit = _as_tuple(file_plan["emit"], str)
    else:
        emit = DEFAULT_EMIT
    bad = [e for e in emit if e not in EMIT_CHOICES]
    if bad:
        raise ConfigError([("--emit", f"unknown output {b!r}") for b in bad])

    plan = ExperimentPlan(base, dmas, speeds, accels, users, scheds, seeds, tuple(emit), args.out)
    for cell in plan.cells():
        plan.cell_config(cell)
    return plan


def _effective(cfg: ScenarioConfig) -> ScenarioConfig:
    # hovering drones never use speed or acceleration, so those cells share runs
    if cfg.dma.value == "HOV":
        return cfg.replace(drone_speed=ScenarioConfig.drone_speed, max_accel=ScenarioConfig.max_accel)
    return cfg


def execute(plan: ExperimentPlan, workers: int = 1) -> list[tuple[dict, list[RunResult]]]:
    cells = plan.cells()
    configs = [_effective(plan.cell_config(c)) for c in cells]
    unique: list[ScenarioConfig] = []
    for cfg in configs:
        if cfg not in unique:
            unique.append(cfg)
    results = run_many(unique, list(plan.seeds), workers)
    return [(cell, results[unique.index(cfg)]) for cell, cfg in zip(cells, configs)]


def fmt(value) -> str:
    """Shortest round-trip text for numbers; plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(value)


def _cell_prefix(cell: dict) -> list[str]:
    return [fmt(cell[a]) for a in _AXES]


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def emit_outputs(outcomes: list[tuple[dict, list[RunResult]]], plan: ExperimentPlan) -> list[Path]:
    out = Path(plan.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summaries = {}
    for idx, (cell, results) in enumerate(outcomes):
        summaries[idx] = [summarize(r) for r in results]

    if "summary" in plan.emit:
        rows, agg_rows = [], []
        for idx, (cell, results) in enumerate(outcomes):
            sums = summaries[idx]
            for seed, s in zip(plan.seeds, sums):
                d = s.as_dict()
                rows.append(_cell_prefix(cell) + [fmt(seed)] + [fmt(d[_METRIC_FIELDS[k]]) for k in SUMMARY_COLUMNS[6:]])
            agg = aggregate(sums)
            rows.append(_cell_prefix(cell) + ["mean"] + [fmt(agg["mean"][_METRIC_FIELDS[k]]) for k in SUMMARY_COLUMNS[6:]])
            for stat in ("mean", "std"):
                agg_rows.append(_cell_prefix(cell) + [stat, fmt(len(sums))]
                                + [fmt(agg[stat][_METRIC_FIELDS[k]]) for k in SUMMARY_COLUMNS[6:]])
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, rows)
        _write_csv(out / "aggregates.csv", _AXES + ("stat", "runs") + SUMMARY_COLUMNS[6:], agg_rows)
        written += [out / "summary.csv", out / "aggregates.csv"]

    if "packets" in plan.emit:
        def packet_rows():
            for cell, results in outcomes:
                for seed, r in zip(plan.seeds, results):
                    for p in kept_packets(r):
                        yield _cell_prefix(cell) + [fmt(seed), fmt(p.user), fmt(p.start_s), fmt(p.end_s),
                                                    fmt(p.tau_s), fmt(p.bits), fmt(p.bits / p.tau_s)]
        _write_csv(out / "packets.csv", _AXES + ("seed", "user", "start_s", "end_s", "tau_s", "bits",
                                                 "throughput_bps"), packet_rows())
        written.append(out / "packets.csv")

    if "cdfs" in plan.emit:
        def cdf_rows():
            for cell, results in outcomes:
                pooled: dict[str, list[np.ndarray]] = {}
                for r in results:
                    for k, v in geometry_statistics(r).items():
                        pooled.setdefault(k, []).append(v)
                    pooled.setdefault("packet_throughput_bps", []).append(
                        np.array([p.bits / p.tau_s for p in kept_packets(r)]))
                for metric, parts in pooled.items():
                    sample = np.concatenate(parts)
                    if sample.size == 0:
                        continue
                    for x, F in zip(*empirical_cdf(sample)):
                        yield _cell_prefix(cell) + [metric, fmt(float(x)), fmt(float(F))]
        _write_csv(out / "cdfs.csv", _AXES + ("metric", "x", "F"), cdf_rows())
        written.append(out / "cdfs.csv")

    if "ticks" in plan.emit:
        def tick_rows():
            for cell, results in outcomes:
                for seed, r in zip(plan.seeds, results):
                    for t in range(r.n_ticks):
                        yield _cell_prefix(cell) + [fmt(seed), fmt(t), fmt(float(r.time_s[t])),
                                                    fmt(float(r.cell_se[t])), fmt(int(r.n_active[t])),
                                                    fmt(float(r.drone_xy[t, 0])), fmt(float(r.drone_xy[t, 1]))]
        _write_csv(out / "ticks.csv", _AXES + ("seed", "tick", "time_s", "cell_se", "n_active",
                                               "drone_x", "drone_y"), tick_rows())
        written.append(out / "ticks.csv")

    record = {"version": __version__, "config": plan.base.to_dict(), "plan": plan.to_dict()}
    with open(out / "run.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(out / "run.json")
    return written


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        plan = plan_from_args(args)
        if args.workers < 1:
            raise ConfigError([("--workers", "must be at least 1")])
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"dbsim: configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dbsim: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        outcomes = execute(plan, args.workers)
        emit_outputs(outcomes, plan)
    except Exception as exc:  # noqa: BLE001 - any failure during the runs is reported as exit 2
        print(f"dbsim: run failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
