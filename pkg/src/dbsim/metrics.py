"""Performance metrics computed from centre-cell run records."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from dbsim.errors import NoData
from dbsim.geometry import CellGrid
from dbsim.traffic import PacketRecord

CDF_POINTS = 101


@dataclass(frozen=True)
class MetricsSummary:
    time_avg_se: float
    jain: float
    mean_packet_throughput_bps: float
    p5_packet_throughput_bps: float
    completed_requests_per_user: float
    transmission_time_fraction: float
    outside_cell_fraction: float
    user_active_fraction: float
    mean_tau_s: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def time_avg_se(per_tick_se: Iterable[float | None]) -> float:
    """Mean per-slot SE over slots that carry a sample (NaN or None are skipped)."""
    vals = np.array([np.nan if v is None else v for v in per_tick_se], dtype=float)
    vals = vals[~np.isnan(vals)]
    if vals.size == 0:
        raise NoData("no slot with active users")
    return math.fsum(vals) / vals.size


def jain_index(rates: Sequence[float]) -> float:
    r = np.asarray(rates, dtype=float)
    if r.size == 0 or not np.any(r > 0):
        raise NoData("Jain index needs a nonzero rate")
    r = r / r.max()  # scale-free; avoids underflow of the squares
    return float(math.fsum(r) ** 2 / (r.size * math.fsum(r * r)))


def user_mean_rates(user_rate_bps: np.ndarray, user_active: np.ndarray) -> np.ndarray:
    """Each user's rate averaged over the slots in which it was active.

    Users that were never active get NaN.
    """
    n = user_active.sum(axis=0)
    total = np.where(user_active, user_rate_bps, 0.0).sum(axis=0)
    return np.divide(total, n, out=np.full(n.shape, np.nan), where=n > 0)


def packet_throughputs(packets: Sequence[PacketRecord]) -> np.ndarray:
    return np.array([p.bits / p.tau_s for p in packets], dtype=float)


def percentile(values, q: float) -> float:
    """Linear interpolation between the closest order statistics."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise NoData("percentile of an empty sample")
    return float(np.percentile(v, q, method="linear"))


def throughput_stats(packets: Sequence[PacketRecord]) -> tuple[float, float]:
    """``(mean, 5th percentile)`` packet throughput in bit/s."""
    thp = packet_throughputs(packets)
    if thp.size == 0:
        raise NoData("no completed packet")
    return math.fsum(thp) / thp.size, percentile(thp, 5.0)


def completed_per_user(packets: Sequence[PacketRecord], users: int) -> float:
    return len(packets) / users


def empirical_cdf(samples, points: int = CDF_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """CDF evaluated on an even grid from the sample minimum to its maximum.

    The last value is always exactly 1.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise NoData("CDF of an empty sample")
    x = np.linspace(s[0], s[-1], points) if s[-1] > s[0] else np.array([s[0]])
    x[-1] = s[-1]
    return x, np.searchsorted(s, x, side="right") / s.size


def outside_cell_fraction(outside_ticks, n_ticks: int) -> np.ndarray:
    return np.asarray(outside_ticks, dtype=float) / n_ticks


def _window(result):
    c = result.config
    first = int(math.ceil(c.warmup_discard_s / c.ras_s - 1e-9))
    return first, c.warmup_discard_s


def geometry_statistics(result) -> dict[str, np.ndarray]:
    """Raw link samples (distance, elevation, LoS probability) after warm-up."""
    first, _ = _window(result)
    keep = result.link_tick >= first
    return {
        "ground_distance_m": result.link_distance_m[keep],
        "elevation_deg": result.link_elevation_deg[keep],
        "p_los": result.link_p_los[keep],
    }


def geometry_cdfs(result, points: int = CDF_POINTS) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {k: empirical_cdf(v, points) for k, v in geometry_statistics(result).items() if v.size}


def kept_packets(result) -> list[PacketRecord]:
    _, t0 = _window(result)
    return [p for p in result.packets if p.start_s >= t0]


def _nan_on_nodata(fn, *args):
    try:
        return fn(*args)
    except NoData:
        return float("nan")


def summarize(result) -> MetricsSummary:
    """Every scalar metric of a run; metrics without data are NaN."""
    c = result.config
    first, _ = _window(result)
    se = result.cell_se[first:]
    active = result.user_active[first:]
    rates = user_mean_rates(result.user_rate_bps[first:], active)
    packets = kept_packets(result)
    mean_thp = p5 = float("nan")
    if packets:
        mean_thp, p5 = throughput_stats(packets)
    n = se.shape[0]
    centre = CellGrid(c.grid_side, c.cell_edge).center_index
    taus = [p.tau_s for p in packets]
    return MetricsSummary(
        time_avg_se=_nan_on_nodata(time_avg_se, se),
        jain=_nan_on_nodata(jain_index, rates[~np.isnan(rates)]),
        mean_packet_throughput_bps=mean_thp,
        p5_packet_throughput_bps=p5,
        completed_requests_per_user=completed_per_user(packets, c.users_per_cell),
        transmission_time_fraction=float(np.count_nonzero(result.n_active[first:]) / n),
        outside_cell_fraction=float(result.outside_ticks[centre] / result.n_ticks),
        user_active_fraction=float(active.mean()),
        mean_tau_s=math.fsum(taus) / len(taus) if taus else float("nan"),
    )


def aggregate(summaries: Sequence[MetricsSummary]) -> dict[str, dict[str, float]]:
    """Mean and population standard deviation of each metric across runs.

    NaN entries (metrics without data in a run) are left out.
    """
    if not summaries:
        raise NoData("nothing to aggregate")
    out: dict[str, dict[str, float]] = {"mean": {}, "std": {}}
    for key in summaries[0].as_dict():
        vals = [getattr(s, key) for s in summaries]
        vals = [v for v in vals if not math.isnan(v)]
        if not vals:
            out["mean"][key] = out["std"][key] = float("nan")
            continue
        m = math.fsum(vals) / len(vals)
        out["mean"][key] = m
        out["std"][key] = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / len(vals))
    return out
