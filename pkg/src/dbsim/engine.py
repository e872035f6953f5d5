"""Time-stepped simulation loop.

Each slot of ``ras_s`` seconds runs, in order: mobility decision (at the
start of every direction-update epoch), drone motion, user motion,
scheduling, spectral-efficiency evaluation, bit delivery, traffic update and
recording. Only the centre cell is recorded in detail; outside-cell time is
counted for every drone.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dbsim import kernels
from dbsim.channel import ChannelParams
from dbsim.config import DMA, Scheduler, ScenarioConfig, validate
from dbsim.dma import SystemSnapshot, decide
from dbsim.geometry import CellGrid, arc_positions, outside_cell
from dbsim.scheduler import allocate_cells
from dbsim.traffic import PacketRecord, Population


@dataclass
class RunResult:
    """Centre-cell records of one run.

    Per-tick arrays have one row per slot. ``cell_se`` is NaN in slots where
    the centre cell has no active user. Link statistics are flat arrays with
    one entry per (slot, active centre user); ``link_tick`` maps them back.
    """

    config: ScenarioConfig
    time_s: np.ndarray
    cell_se: np.ndarray
    n_active: np.ndarray
    user_active: np.ndarray
    user_rate_bps: np.ndarray
    drone_xy: np.ndarray
    link_tick: np.ndarray
    link_distance_m: np.ndarray
    link_elevation_deg: np.ndarray
    link_p_los: np.ndarray
    packets: list[PacketRecord]
    outside_ticks: np.ndarray
    delivered_bits: np.ndarray
    completed: np.ndarray
    in_flight_bits: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return self.time_s.shape[0]


class _Recorder:
    def __init__(self, n_ticks: int, U: int):
        self.cell_se = np.full(n_ticks, np.nan)
        self.n_active = np.zeros(n_ticks, dtype=np.int64)
        self.user_active = np.zeros((n_ticks, U), dtype=bool)
        self.user_rate = np.zeros((n_ticks, U))
        self.drone_xy = np.zeros((n_ticks, 2))
        self.link = [[], [], [], []]


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for each source of randomness in a run."""
    names = ("init", "traffic", "motion", "gt")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def run(config: ScenarioConfig) -> RunResult:
    c = validate(config)
    grid = CellGrid(c.grid_side, c.cell_edge)
    N, U = grid.n_cells, c.users_per_cell
    centre = grid.center_index
    centers = grid.centers()
    bounds = grid.all_bounds()
    params = ChannelParams.from_config(c).as_tuple()
    noise = params[-1]
    h = c.drone_height
    t_r, t_m = c.ras_s, c.direction_update_s
    n_ticks, tpe = c.n_ticks, c.ticks_per_epoch
    cq = c.scheduler is Scheduler.CQ_BASED
    hover = c.dma is DMA.HOV

    rngs = rng_streams(c.seed)
    pop = Population(bounds, U, c.packet_bits, c.mean_reading_s, c.rwp_speed_range,
                     c.rwp_pause_range, rngs["init"], rngs["traffic"], rngs["motion"])
    heading = rngs["init"].uniform(-math.pi, math.pi, N)
    dx = centers[:, 0].copy()
    dy = centers[:, 1].copy()
    offsets = np.arange(1, tpe + 1) * t_r
    offsets[-1] = t_m

    rec = _Recorder(n_ticks, U)
    outside = np.zeros(N, dtype=np.int64)
    packets: list[PacketRecord] = []
    cs = slice(centre * U, (centre + 1) * U)
    diag = {"epochs": 0, "gt_converged": 0, "gt_sweeps": 0, "position_reads": 0, "players": 0}
    path_x = path_y = path_h = None

    for t in range(n_ticks):
        j = t % tpe
        if not hover and j == 0:
            if path_x is not None:
                dx, dy, heading = path_x[:, -1].copy(), path_y[:, -1].copy(), path_h[:, -1].copy()
            snap = SystemSnapshot(t * t_r, c, dx, dy, heading, pop.x, pop.y, pop.cell, pop.active)
            out = decide(snap, rngs["gt"])
            diag["epochs"] += 1
            diag["gt_converged"] += int(out.diagnostics.get("converged", False))
            diag["gt_sweeps"] += out.diagnostics.get("sweeps", 0)
            diag["position_reads"] += out.diagnostics.get("position_reads", 0)
            diag["players"] += out.diagnostics.get("players", 0)
            thetas = out.candidates[out.indices][:, None]
            px, py, ph = arc_positions(dx, dy, heading, np.full(N, c.drone_speed), thetas, offsets, t_m)
            path_x, path_y, path_h = px[:, 0, :], py[:, 0, :], ph[:, 0, :]
        if not hover:
            cx = np.ascontiguousarray(path_x[:, j])
            cy = np.ascontiguousarray(path_y[:, j])
        else:
            cx, cy = dx, dy
        outside += outside_cell(cx, cy, bounds)

        pop.step_motion(t_r)

        active = pop.active
        a = np.flatnonzero(active)
        se = np.zeros(pop.n)
        if a.size:
            serv = pop.cell[a]
            ux, uy = pop.x[a], pop.y[a]
            ex = ux - cx[serv]
            ey = uy - cy[serv]
            r2 = ex * ex + ey * ey
            p_los, s_los, s_nlos = kernels.link_terms(r2, params)
            tx = np.bincount(serv, minlength=N) > 0
            interf = kernels.interference(ux, uy, serv, cx[None, :], cy[None, :], tx, params)[0]
            se[a] = kernels.user_se(p_los, s_los, s_nlos, interf, noise)
            own = serv == centre
            if own.any():
                r = np.sqrt(r2[own])
                rec.link[0].append(np.full(r.size, t))
                rec.link[1].append(r)
                rec.link[2].append(np.degrees(np.arctan2(h, r)))
                rec.link[3].append(p_los[own])
        b = allocate_cells(active, pop.cell, N, c.bandwidth_hz, se if cq else None)
        rate = b * se
        delivered = rate * t_r

        act_c = active[cs]
        rec.user_active[t] = act_c
        rec.user_rate[t] = rate[cs]
        rec.n_active[t] = act_c.sum()
        if act_c.any():
            rec.cell_se[t] = rate[cs].sum() / c.bandwidth_hz
        rec.drone_xy[t] = cx[centre], cy[centre]

        for p in pop.step_traffic(t_r, delivered, (t + 1) * t_r):
            if pop.cell[p.user] == centre:
                packets.append(p)

    link = [np.concatenate(x) if x else np.zeros(0) for x in rec.link]
    in_flight = np.where(pop.active, c.packet_bits - pop.bits_left, 0.0)
    return RunResult(
        config=c,
        time_s=np.arange(n_ticks) * t_r,
        cell_se=rec.cell_se,
        n_active=rec.n_active,
        user_active=rec.user_active,
        user_rate_bps=rec.user_rate,
        drone_xy=rec.drone_xy,
        link_tick=link[0].astype(np.int64),
        link_distance_m=link[1],
        link_elevation_deg=link[2],
        link_p_los=link[3],
        packets=packets,
        outside_ticks=outside,
        delivered_bits=pop.delivered_total.copy(),
        completed=pop.completed.copy(),
        in_flight_bits=in_flight,
        diagnostics=diag,
    )


def _run_seed(args):
    config, seed = args
    try:
        return run(config.replace(seed=seed))
    except Exception as exc:
        raise RuntimeError(f"run with seed {seed} failed: {exc}") from exc


def run_many(configs: list[ScenarioConfig], seeds: list[int], workers: int = 1) -> list[list[RunResult]]:
    """Run every config with every seed; results come back in input order."""
    jobs = [(cfg, s) for cfg in configs for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_run_seed, jobs))
    else:
        flat = [_run_seed(j) for j in jobs]
    k = len(seeds)
    return [flat[i * k:(i + 1) * k] for i in range(len(configs))]


def run_batch(config: ScenarioConfig, seeds: list[int], workers: int = 1):
    """Independent runs over ``seeds`` plus the mean and std of every metric.

    Results are ordered by seed, so the summary does not depend on the
    order in which seeds were given.
    """
    from dbsim.metrics import aggregate, summarize

    if not seeds:
        raise ValueError("at least one seed is required")
    ordered = sorted(int(s) for s in seeds)
    results = run_many([config], ordered, workers)[0]
    return results, aggregate([summarize(r) for r in results])
