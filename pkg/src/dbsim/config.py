"""Scenario parameters and their validation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from dbsim.errors import ConfigError


class Scheduler(str, enum.Enum):
    EQUAL_SHARE = "EqualShare"
    CQ_BASED = "CQBased"


class DMA(str, enum.Enum):
    HOV = "HOV"
    SNR = "SNR"
    SLR = "SLR"
    GT = "GT"
    OPT = "OPT"


class GTMode(str, enum.Enum):
    SYNCHRONOUS = "synchronous"
    SEQUENTIAL = "sequential"


_ALIASES = {
    "equal": Scheduler.EQUAL_SHARE,
    "equalshare": Scheduler.EQUAL_SHARE,
    "equal_share": Scheduler.EQUAL_SHARE,
    "cq": Scheduler.CQ_BASED,
    "cqbased": Scheduler.CQ_BASED,
    "cq_based": Scheduler.CQ_BASED,
}


def parse_scheduler(value) -> Scheduler:
    if isinstance(value, Scheduler):
        return value
    text = str(value)
    try:
        return Scheduler(text)
    except ValueError:
        try:
            return _ALIASES[text.lower()]
        except KeyError:
            raise ConfigError([("scheduler", f"unknown scheduler {text!r}")]) from None


def parse_dma(value) -> DMA:
    if isinstance(value, DMA):
        return value
    try:
        return DMA(str(value).upper())
    except ValueError:
        raise ConfigError([("dma", f"unknown mobility algorithm {value!r}")]) from None


@dataclass(frozen=True)
class ScenarioConfig:
    """Every model parameter of a run.

    Units are SI throughout (m, s, Hz, W, bits). ``packet_bits`` defaults to
    40 MByte. ``carrier_hz`` is informational: the carrier only enters the
    model through the reference path losses ``a_los_db``/``a_nlos_db``.
    """

    grid_side: int = 7
    cell_edge: float = 80.0
    users_per_cell: int = 5
    bandwidth_hz: float = 5e6
    carrier_hz: float = 2e9
    tx_power_watt: float = 0.2512
    drone_height: float = 10.0
    drone_speed: float = 2.0
    max_accel: float = 4.0
    direction_update_s: float = 1.0
    ras_s: float = 0.02
    interference_range: float = 200.0
    mean_reading_s: float = 40.0
    packet_bits: float = 3.2e8
    n_candidates: int = 21
    los_alpha: float = 9.61
    los_beta: float = 0.16
    a_los_db: float = 41.1
    a_nlos_db: float = 32.9
    gamma_los: float = 2.09
    gamma_nlos: float = 3.75
    ue_noise_figure_db: float = 9.0
    rwp_speed_range: tuple[float, float] = (1.0, 3.0)
    rwp_pause_range: tuple[float, float] = (0.0, 10.0)
    duration_s: float = 800.0
    warmup_discard_s: float = 0.0
    scheduler: Scheduler = Scheduler.EQUAL_SHARE
    dma: DMA = DMA.GT
    gt_max_sweeps: int = 50
    gt_mode: GTMode = GTMode.SYNCHRONOUS
    opt_max_profiles: int = 1_000_000
    path_samples: int = 5
    theta_cap_rad: float = math.pi
    seed: int = 0

    @property
    def n_cells(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s / self.ras_s))

    @property
    def ticks_per_epoch(self) -> int:
        return int(round(self.direction_update_s / self.ras_s))

    def replace(self, **changes) -> "ScenarioConfig":
        return validate(coerce(dict(self.to_dict(), **changes)))

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_FIELD_TYPES = {f.name: f for f in fields(ScenarioConfig)}
_INT_FIELDS = {"grid_side", "users_per_cell", "n_candidates", "gt_max_sweeps",
               "opt_max_profiles", "path_samples", "seed"}
_RANGE_FIELDS = {"rwp_speed_range", "rwp_pause_range"}
_POSITIVE_FIELDS = (
    "cell_edge", "bandwidth_hz", "carrier_hz", "tx_power_watt", "drone_height",
    "drone_speed", "max_accel", "direction_update_s", "ras_s", "interference_range",
    "mean_reading_s", "packet_bits", "los_alpha", "los_beta", "gamma_los",
    "gamma_nlos", "duration_s", "theta_cap_rad", "gt_max_sweeps",
    "opt_max_profiles", "path_samples", "users_per_cell", "grid_side",
)


def coerce(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Build a config from loosely typed key/value pairs (file or CLI)."""
    unknown = sorted(set(raw) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError([(k, "unknown configuration key") for k in unknown])
    kwargs: dict[str, Any] = {}
    problems = []
    for key, value in raw.items():
        try:
            if key in _INT_FIELDS:
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError("must be an integer")
                kwargs[key] = int(value)
            elif key in _RANGE_FIELDS:
                lo, hi = value
                kwargs[key] = (float(lo), float(hi))
            elif key == "scheduler":
                kwargs[key] = parse_scheduler(value)
            elif key == "dma":
                kwargs[key] = parse_dma(value)
            elif key == "gt_mode":
                kwargs[key] = GTMode(str(value).lower())
            else:
                kwargs[key] = float(value)
        except ConfigError as exc:
            problems.extend(exc.violations)
        except (TypeError, ValueError) as exc:
            problems.append((key, f"cannot interpret {value!r}: {exc}"))
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(**kwargs)


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if every invariant holds, else raise.

    All violations are collected before raising.
    """
    bad: list[tuple[str, str]] = []
    for name in _POSITIVE_FIELDS:
        value = getattr(config, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            bad.append((name, "must be strictly positive"))
    for name in ("a_los_db", "a_nlos_db", "ue_noise_figure_db", "warmup_discard_s"):
        if not math.isfinite(getattr(config, name)):
            bad.append((name, "must be finite"))
    if config.warmup_discard_s < 0 or config.warmup_discard_s >= config.duration_s:
        bad.append(("warmup_discard_s", "must lie in [0, duration_s)"))
    if config.grid_side % 2 != 1:
        bad.append(("grid_side", "grid_side must be odd"))
    if config.n_candidates < 3 or config.n_candidates % 2 != 1:
        bad.append(("n_candidates", "n_candidates must be odd and >= 3"))
    for name in _RANGE_FIELDS:
        lo, hi = getattr(config, name)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            bad.append((name, "range must satisfy low <= high"))
    lo, hi = config.rwp_speed_range
    if lo <= 0:
        bad.append(("rwp_speed_range", "speeds must be strictly positive"))
    if config.rwp_pause_range[0] < 0:
        bad.append(("rwp_pause_range", "pauses must be non-negative"))
    if config.ras_s > 0 and config.direction_update_s > 0:
        if not _divides(config.ras_s, config.direction_update_s):
            bad.append(("ras_s", "ras must divide t_m"))
        if config.duration_s > 0 and not _divides(config.ras_s, config.duration_s):
            bad.append(("duration_s", "duration must be a whole number of ras slots"))
    if not isinstance(config.scheduler, Scheduler):
        bad.append(("scheduler", "must be EqualShare or CQBased"))
    if not isinstance(config.dma, DMA):
        bad.append(("dma", "must be one of HOV, SNR, SLR, GT, OPT"))
    if not isinstance(config.gt_mode, GTMode):
        bad.append(("gt_mode", "must be synchronous or sequential"))
    if bad:
        raise ConfigError(bad)
    return config


def _divides(small: float, big: float) -> bool:
    ratio = big / small
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) and round(ratio) >= 1


def default_config(**overrides) -> ScenarioConfig:
    return validate(coerce(dict(ScenarioConfig().to_dict(), **overrides)))


def load_config_file(path: str | Path) -> tuple[dict[str, Any], dict[str, Any]]:
    """Read a YAML or JSON file.

    Returns ``(config_values, plan_values)``. A file written by the CLI as
    ``run.json`` nests the two under ``config`` and ``plan``; a plain file is
    taken as config values only.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError([("config", f"{path} does not hold a mapping")])
    if "config" in data and isinstance(data["config"], dict):
        return dict(data["config"]), dict(data.get("plan") or {})
    return data, {}
