"""Drone mobility algorithms: pick one turning angle per drone per epoch.

Every algorithm scores the same discrete set of candidate arcs. A candidate
is scored on ``path_samples`` points along its arc while users stay frozen at
their epoch-start positions. Drones without active users head back toward
their cell centre.

* ``HOV``  drones hover at their cell centres.
* ``SNR``  each drone maximises its own users' mean signal-to-noise ratio.
* ``SLR``  as SNR, but signal is divided by the power the drone leaks onto
  active users of neighbouring cells.
* ``GT``   best-response dynamics of a game whose players are drones with
  active users and whose payoff is the player's own cell spectral efficiency.
* ``OPT``  exhaustive search over all players' angle profiles for the best
  mean cell spectral efficiency.

Ties are broken in favour of the smallest ``|theta|``, negative before
positive. Two scores count as tied when they differ by at most ``TIE_RTOL``
relative, so that rounding noise cannot pick a curved path over a straight
one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from dbsim import kernels
from dbsim.channel import ChannelParams
from dbsim.config import DMA, GTMode, ScenarioConfig
from dbsim.errors import InfeasibleSearch, NoActiveUsers
from dbsim.geometry import (
    CellGrid,
    DronePose,
    GroundPoint,
    arc_advance,
    arc_positions,
    candidate_angles,
    max_turn_angle,
    preference_order,
)

TIE_RTOL = 1e-12
SLR_LEAKAGE_FLOOR_W = 1e-30
_OPT_BATCH_ELEMENTS = 400_000


@dataclass(frozen=True)
class SystemSnapshot:
    """Frozen network state handed to a decision at an epoch boundary.

    Arrays are read-only views. Users are grouped by cell, ``users_per_cell``
    consecutive entries per cell.
    """

    time_s: float
    config: ScenarioConfig
    drone_x: np.ndarray
    drone_y: np.ndarray
    heading: np.ndarray
    user_x: np.ndarray
    user_y: np.ndarray
    user_cell: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        for name in ("drone_x", "drone_y", "heading", "user_x", "user_y", "user_cell", "active"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def grid(self) -> CellGrid:
        return CellGrid(self.config.grid_side, self.config.cell_edge)

    @property
    def n_drones(self) -> int:
        return self.drone_x.shape[0]

    @property
    def transmitting(self) -> np.ndarray:
        """Boolean per drone: has at least one active user."""
        return np.bincount(self.user_cell[self.active], minlength=self.n_drones) > 0

    def pose(self, n: int) -> DronePose:
        return DronePose(GroundPoint(float(self.drone_x[n]), float(self.drone_y[n])),
                         float(self.heading[n]), self.config.drone_speed, self.config.drone_height)

    def active_positions(self, n: int) -> np.ndarray:
        sel = self.active & (self.user_cell == n)
        return np.column_stack([self.user_x[sel], self.user_y[sel]])

    def user_positions(self, n: int) -> np.ndarray:
        sel = self.user_cell == n
        return np.column_stack([self.user_x[sel], self.user_y[sel]])


@dataclass
class DecisionOutcome:
    """Chosen angle per drone plus algorithm diagnostics.

    ``indices`` are positions in ``candidates``; both are empty for HOV.
    """

    candidates: np.ndarray
    indices: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def angles(self) -> dict[int, float]:
        return {n: float(self.candidates[i]) for n, i in enumerate(self.indices)}


def pref_argmax(values: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Row-wise argmax over the last axis with tolerance tie-breaking.

    Among entries within ``TIE_RTOL`` of the row maximum, the one appearing
    first in ``order`` wins.
    """
    v = np.atleast_2d(values)
    best = v.max(axis=-1, keepdims=True)
    ok = v[..., order] >= best - TIE_RTOL * np.abs(best)
    return np.asarray(order)[np.argmax(ok, axis=-1)]


def center_fallback(pose: DronePose, cell_center: GroundPoint, candidates, t_m: float) -> float:
    """Candidate turn whose arc endpoint lands closest to the cell centre."""
    cands = list(candidates)
    dist = np.array([
        math.hypot(e.x - cell_center.x, e.y - cell_center.y)
        for e in (arc_advance(pose, th, t_m, t_m).position for th in cands)
    ])
    return float(cands[int(pref_argmax(-dist, preference_order(len(cands)))[0])])


class _Context:
    """Per-snapshot quantities shared by all algorithms."""

    def __init__(self, snap: SystemSnapshot):
        c = snap.config
        self.snap = snap
        self.params = ChannelParams.from_config(c).as_tuple()
        self.noise = self.params[-1]
        self.N = snap.n_drones
        theta_max = max_turn_angle(c.drone_speed, c.max_accel, c.direction_update_s, c.theta_cap_rad)
        self.candidates = np.array(candidate_angles(theta_max, c.n_candidates))
        self.C = self.candidates.size
        self.order = np.array(preference_order(self.C))
        self.K = c.path_samples
        offsets = np.array([c.direction_update_s if j == self.K else j * c.direction_update_s / self.K
                            for j in range(1, self.K + 1)])
        self.px, self.py, _ = arc_positions(snap.drone_x, snap.drone_y, snap.heading,
                                            np.full(self.N, c.drone_speed), self.candidates,
                                            offsets, c.direction_update_s)
        self.centers = snap.grid.centers()

        self.act = np.flatnonzero(snap.active)
        self.aserv = snap.user_cell[self.act].astype(np.int_)
        self.ux = np.ascontiguousarray(snap.user_x[self.act])
        self.uy = np.ascontiguousarray(snap.user_y[self.act])
        self.M = self.act.size
        self.tx = snap.transmitting
        self.players = np.flatnonzero(self.tx)
        counts = np.bincount(self.aserv, minlength=self.N)
        self.counts = counts
        # active users are sorted by cell, so each player's users are contiguous
        self.starts = np.concatenate([[0], np.cumsum(counts)])[:-1]

        self._own = None

    # -- shared pieces ----------------------------------------------------
    def fallback_indices(self) -> np.ndarray:
        ex = self.px[:, :, -1] - self.centers[:, 0:1]
        ey = self.py[:, :, -1] - self.centers[:, 1:2]
        return pref_argmax(-np.hypot(ex, ey), self.order)

    def own_terms(self):
        """Link terms from each active user's own drone at every candidate sample: ``(M, C, K)``."""
        if self._own is None:
            dx = self.px[self.aserv] - self.ux[:, None, None]
            dy = self.py[self.aserv] - self.uy[:, None, None]
            self._own = kernels.link_terms(dx * dx + dy * dy, self.params)
        return self._own

    def cell_mean(self, per_user: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Average ``per_user`` (first axis = active users) over each cell's users."""
        out = np.empty((cells.size,) + per_user.shape[1:])
        for r, n in enumerate(cells):
            s = self.starts[n]
            out[r] = per_user[s:s + self.counts[n]].mean(axis=0)
        return out

    def sample_positions(self, idx: np.ndarray):
        """Drone positions ``(K, N)`` along the arcs picked by ``idx``."""
        rows = np.arange(self.N)
        return (np.ascontiguousarray(self.px[rows, idx].T),
                np.ascontiguousarray(self.py[rows, idx].T))

    def user_se_all_candidates(self, idx: np.ndarray, users: np.ndarray | None = None) -> np.ndarray:
        """SE ``(M', C, K)`` of active users for every candidate of their own drone.

        Other drones fly the arcs in ``idx``. ``users`` restricts to a subset
        of active-user positions.
        """
        dx, dy = self.sample_positions(idx)
        sel = slice(None) if users is None else users
        interf = kernels.interference(self.ux[sel], self.uy[sel], self.aserv[sel], dx, dy,
                                      self.tx, self.params)
        p, sl, sn = (t[sel] for t in self.own_terms())
        return kernels.user_se(p, sl, sn, interf.T[:, None, :], self.noise)

    def position_reads(self, algorithm: DMA, nbr: np.ndarray | None = None) -> int:
        """Positions a decision needs to learn, summed over deciding drones."""
        q = self.counts
        if algorithm is DMA.SNR:
            return int(q[self.players].sum())
        if algorithm is DMA.SLR:
            return int(sum(q[n] + q[nbr[n]].sum() for n in self.players))
        if algorithm in (DMA.GT, DMA.OPT):
            return int(self.players.size * (self.N + q.sum()))
        return 0


def _outcome(ctx: _Context, idx: np.ndarray, **diag) -> DecisionOutcome:
    return DecisionOutcome(ctx.candidates, np.asarray(idx, dtype=np.int64), dict(diag))


# -- utility --------------------------------------------------------------

def _profile_indices(ctx: _Context, profile: Mapping[int, float] | np.ndarray) -> np.ndarray:
    if isinstance(profile, np.ndarray) and profile.dtype.kind in "iu":
        return profile.astype(np.int64)
    idx = ctx.fallback_indices()
    for n, theta in dict(profile).items():
        j = int(np.argmin(np.abs(ctx.candidates - theta)))
        if not math.isclose(ctx.candidates[j], theta, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"angle {theta} is not a candidate of drone {n}")
        idx[n] = j
    return idx


def path_utility_se(n: int, profile, snap: SystemSnapshot) -> float:
    """Spectral efficiency drone ``n``'s cell would get over the coming interval.

    ``profile`` maps drone id to turning angle (or is an index array over the
    candidate set); drones missing from a mapping fly their centre-return arc.
    Raises :class:`NoActiveUsers` if ``n`` serves nobody.
    """
    ctx = _Context(snap)
    if ctx.counts[n] == 0:
        raise NoActiveUsers(f"drone {n} has no active users")
    idx = _profile_indices(ctx, profile)
    users = np.arange(ctx.starts[n], ctx.starts[n] + ctx.counts[n])
    se = ctx.user_se_all_candidates(idx, users)[:, idx[n], :]
    return float(se.mean(axis=1).mean())


def profile_system_se(profile, snap: SystemSnapshot) -> float:
    """Mean over transmitting cells of the interval-averaged cell SE."""
    ctx = _Context(snap)
    if ctx.players.size == 0:
        raise NoActiveUsers("no drone has active users")
    idx = _profile_indices(ctx, profile)
    return float(_opt_evaluate(ctx, idx[ctx.players][None, :], _opt_tensors(ctx))[0])


# -- algorithms -----------------------------------------------------------

def decide_hov(snap: SystemSnapshot) -> DecisionOutcome:
    return DecisionOutcome(np.zeros(0), np.zeros(0, dtype=np.int64), {"players": 0, "position_reads": 0})


def decide_snr(snap: SystemSnapshot) -> DecisionOutcome:
    ctx = _Context(snap)
    idx = ctx.fallback_indices()
    if ctx.players.size:
        p, sl, sn = ctx.own_terms()
        snr = (p * sl + (1.0 - p) * sn) / ctx.noise
        score = ctx.cell_mean(snr.mean(axis=2), ctx.players)
        idx[ctx.players] = pref_argmax(score, ctx.order)
    return _outcome(ctx, idx, players=int(ctx.players.size),
                    position_reads=ctx.position_reads(DMA.SNR))


def neighbour_mask(snap: SystemSnapshot) -> np.ndarray:
    """``[n, j]`` set when drones ``n != j`` are within interference range of each other."""
    dx = snap.drone_x[:, None] - snap.drone_x[None, :]
    dy = snap.drone_y[:, None] - snap.drone_y[None, :]
    nbr = dx * dx + dy * dy <= snap.config.interference_range ** 2
    np.fill_diagonal(nbr, False)
    return nbr


def decide_slr(snap: SystemSnapshot) -> DecisionOutcome:
    ctx = _Context(snap)
    idx = ctx.fallback_indices()
    nbr = neighbour_mask(snap)
    if ctx.players.size:
        P = ctx.players
        cx = ctx.px[P].reshape(P.size, -1)
        cy = ctx.py[P].reshape(P.size, -1)
        leak = kernels.leakage(cx, cy, P, ctx.ux, ctx.uy, ctx.aserv, nbr, ctx.params)
        leak = leak.reshape(P.size, ctx.C, ctx.K)
        leak = np.where(leak > 0, leak, SLR_LEAKAGE_FLOOR_W)
        p, sl, sn = ctx.own_terms()
        signal = p * sl + (1.0 - p) * sn
        score = np.empty((P.size, ctx.C))
        for r, n in enumerate(P):
            s = ctx.starts[n]
            slr = signal[s:s + ctx.counts[n]] / leak[r][None, :, :]
            score[r] = slr.mean(axis=0).mean(axis=1)
        idx[P] = pref_argmax(score, ctx.order)
    return _outcome(ctx, idx, players=int(ctx.players.size),
                    position_reads=ctx.position_reads(DMA.SLR, nbr))


def best_responses(ctx: _Context, idx: np.ndarray, players: np.ndarray | None = None):
    """Each player's utility for every own candidate against ``idx``: ``(P, C)``."""
    P = ctx.players if players is None else players
    if players is None:
        se = ctx.user_se_all_candidates(idx)
        return ctx.cell_mean(se.mean(axis=2), P)
    out = np.empty((P.size, ctx.C))
    for r, n in enumerate(P):
        users = np.arange(ctx.starts[n], ctx.starts[n] + ctx.counts[n])
        se = ctx.user_se_all_candidates(idx, users)
        out[r] = se.mean(axis=2).mean(axis=0)
    return out


def decide_gt(snap: SystemSnapshot, rng: np.random.Generator) -> DecisionOutcome:
    """Best-response dynamics from a random start until no player wants to move.

    Synchronous mode updates all players from the previous profile at once;
    sequential mode updates them one by one in id order. Stops after
    ``gt_max_sweeps`` sweeps keeping the last profile.
    """
    c = snap.config
    ctx = _Context(snap)
    idx = ctx.fallback_indices()
    P = ctx.players
    diag = dict(players=int(P.size), position_reads=ctx.position_reads(DMA.GT))
    if P.size == 0:
        return _outcome(ctx, idx, sweeps=0, converged=True, **diag)
    idx[P] = rng.integers(0, ctx.C, size=P.size)
    converged = False
    sweeps = 0
    for sweeps in range(1, c.gt_max_sweeps + 1):
        if c.gt_mode is GTMode.SEQUENTIAL:
            changed = False
            for n in P:
                util = best_responses(ctx, idx, np.array([n]))
                br = pref_argmax(util, ctx.order)[0]
                if br != idx[n]:
                    idx[n] = br
                    changed = True
            if not changed:
                converged = True
                break
        else:
            br = pref_argmax(best_responses(ctx, idx), ctx.order)
            if np.array_equal(br, idx[P]):
                converged = True
                break
            idx[P] = br
    return _outcome(ctx, idx, sweeps=sweeps, converged=converged, **diag)


def _opt_tensors(ctx: _Context):
    """Interference each player contributes to each active user, ``(P, C, K, M)``."""
    P = ctx.players
    dx = ctx.px[P][..., None] - ctx.ux
    dy = ctx.py[P][..., None] - ctx.uy
    r2 = dx * dx + dy * dy
    pw = kernels.expected_power(r2, ctx.params)
    gate = (r2 <= ctx.params[8]) & (P[:, None, None, None] != ctx.aserv)
    pw = np.where(gate, pw, 0.0)
    pos = np.full(ctx.N, -1)
    pos[P] = np.arange(P.size)
    return pw, pos[ctx.aserv]


def _opt_evaluate(ctx: _Context, profiles: np.ndarray, tensors) -> np.ndarray:
    """System utility for a batch of player profiles ``(B, P)`` of candidate indices."""
    pw, owner = tensors
    B, P = profiles.shape
    interf = np.zeros((B, ctx.K, ctx.M))
    for i in range(P):
        interf += pw[i][profiles[:, i]]
    p, sl, sn = ctx.own_terms()
    own_idx = profiles[:, owner]                      # (B, M)
    m = np.arange(ctx.M)
    se = kernels.user_se(p[m, own_idx], sl[m, own_idx], sn[m, own_idx],
                         np.swapaxes(interf, 1, 2), ctx.noise)      # (B, M, K)
    per_user = se.mean(axis=2)
    cells = ctx.cell_mean(per_user.T, ctx.players)     # (P, B)
    return cells.mean(axis=0)


def decide_opt(snap: SystemSnapshot) -> DecisionOutcome:
    """Exhaustive search over every player's candidate angles.

    Profiles are enumerated in tie-break order (player by player, smallest
    ``|theta|`` first) so the first profile within tolerance of the best
    value is returned.
    """
    c = snap.config
    ctx = _Context(snap)
    idx = ctx.fallback_indices()
    P = ctx.players
    diag = dict(players=int(P.size), position_reads=ctx.position_reads(DMA.OPT))
    if P.size == 0:
        return _outcome(ctx, idx, profiles=0, **diag)
    total = ctx.C ** P.size
    if total > c.opt_max_profiles:
        raise InfeasibleSearch(total, c.opt_max_profiles)
    tensors = _opt_tensors(ctx)
    batch = max(1, _OPT_BATCH_ELEMENTS // max(1, ctx.K * ctx.M))
    values = np.empty(total)
    for start in range(0, total, batch):
        ranks = _mixed_radix(np.arange(start, min(start + batch, total)), ctx.C, P.size)
        values[start:start + ranks.shape[0]] = _opt_evaluate(ctx, ctx.order[ranks], tensors)
    best = values.max()
    first = int(np.argmax(values >= best - TIE_RTOL * abs(best)))
    idx[P] = ctx.order[_mixed_radix(np.array([first]), ctx.C, P.size)[0]]
    return _outcome(ctx, idx, profiles=int(total), utility=float(values[first]), **diag)


def _mixed_radix(numbers: np.ndarray, base: int, digits: int) -> np.ndarray:
    """Digits of ``numbers`` in ``base``, most significant first: ``(len, digits)``."""
    out = np.empty((numbers.size, digits), dtype=np.int64)
    rest = numbers.astype(np.int64)
    for d in range(digits - 1, -1, -1):
        rest, out[:, d] = np.divmod(rest, base)
    return out


def decide(snap: SystemSnapshot, rng: np.random.Generator | None = None) -> DecisionOutcome:
    algo = snap.config.dma
    if algo is DMA.HOV:
        return decide_hov(snap)
    if algo is DMA.SNR:
        return decide_snr(snap)
    if algo is DMA.SLR:
        return decide_slr(snap)
    if algo is DMA.GT:
        return decide_gt(snap, rng if rng is not None else np.random.default_rng(snap.config.seed))
    return decide_opt(snap)
