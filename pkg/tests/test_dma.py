from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from conftest import random_snapshot
from dbsim.config import GTMode, default_config
from dbsim.dma import (
    SLR_LEAKAGE_FLOOR_W,
    SystemSnapshot,
    center_fallback,
    decide,
    decide_gt,
    decide_hov,
    decide_opt,
    decide_slr,
    decide_snr,
    neighbour_mask,
    path_utility_se,
    pref_argmax,
    profile_system_se,
)
from dbsim.errors import InfeasibleSearch, NoActiveUsers
from dbsim.geometry import DronePose, GroundPoint, candidate_angles


def single_cell(users, active=None, heading=0.0, pos=(40.0, 40.0), **kw):
    c = default_config(grid_side=1, users_per_cell=len(users), **kw)
    users = np.asarray(users, dtype=float)
    act = np.ones(len(users), bool) if active is None else np.asarray(active)
    return SystemSnapshot(0.0, c, [pos[0]], [pos[1]], [heading], users[:, 0], users[:, 1],
                          np.zeros(len(users), int), act)


def angle(out, n=0):
    return out.angles[n]


# -- tie-breaking and fallback ---------------------------------------------

def test_pref_argmax_breaks_ties_toward_straight_then_negative():
    order = np.array([2, 1, 3, 0, 4])
    assert pref_argmax(np.array([5.0, 5.0, 1.0, 5.0, 5.0]), order)[0] == 1
    assert pref_argmax(np.array([1.0, 2.0, 2.0, 2.0, 0.0]), order)[0] == 2
    assert pref_argmax(np.array([1.0, 2.0, 2.0 + 1e-15, 0.0, 0.0]), order)[0] == 2


def test_center_fallback_examples():
    ctr = GroundPoint(40.0, 40.0)
    cands = candidate_angles(2.0, 21)
    ahead = DronePose(GroundPoint(20.0, 40.0), 0.0, 2.0, 10.0)
    assert center_fallback(ahead, ctr, cands, 1.0) == 0.0
    behind = DronePose(GroundPoint(60.0, 40.0), 0.0, 2.0, 10.0)
    assert center_fallback(behind, ctr, candidate_angles(math.pi, 21), 1.0) == -math.pi
    at = DronePose(ctr, 0.7, 2.0, 10.0)
    chosen = center_fallback(at, ctr, cands, 1.0)
    ends = [math.dist(_end(at, t), (40.0, 40.0)) for t in cands]
    assert math.dist(_end(at, chosen), (40.0, 40.0)) == pytest.approx(min(ends))


def _end(p, theta):
    from dbsim.geometry import arc_advance
    q = arc_advance(p, theta, 1.0, 1.0).position
    return q.x, q.y


# -- utility ---------------------------------------------------------------

def test_utility_peaks_on_the_path_passing_overhead():
    snap = single_cell([[41.2, 40.0]], heading=0.0)
    c = snap.config
    utils = [path_utility_se(0, {0: t}, snap) for t in candidate_angles(2.0, 21)]
    assert int(np.argmax(utils)) == 10
    table = oracles.sample_table(snap)
    want = oracles.player_utility(snap, table, np.arange(21)[:, None], 0)
    np.testing.assert_allclose(utils, want, rtol=1e-10)
    assert c.path_samples == 5


def test_utility_is_pure_and_monotone_in_interference(snapshot_factory):
    snap = snapshot_factory(3)
    n = int(np.flatnonzero(snap.transmitting)[0])
    prof = {n: 0.0}
    assert path_utility_se(n, prof, snap) == path_utility_se(n, prof, snap)
    quiet = SystemSnapshot(0.0, snap.config, snap.drone_x, snap.drone_y, snap.heading, snap.user_x,
                           snap.user_y, snap.user_cell, snap.active & (snap.user_cell == n))
    assert path_utility_se(n, prof, snap) <= path_utility_se(n, prof, quiet)


def test_utility_matches_oracle_for_random_profiles(snapshot_factory):
    snap = snapshot_factory(5)
    table = oracles.sample_table(snap)
    rng = np.random.default_rng(0)
    for _ in range(5):
        idx = rng.integers(0, 21, snap.n_drones)
        for n in np.flatnonzero(snap.transmitting)[:6]:
            got = path_utility_se(int(n), idx, snap)
            assert got == pytest.approx(oracles.player_utility(snap, table, idx, int(n))[0], rel=1e-10)
        assert profile_system_se(idx, snap) == pytest.approx(oracles.system_utility(snap, table, idx)[0], rel=1e-10)


def test_utility_without_users_signals():
    snap = single_cell([[10.0, 10.0]], active=[False])
    with pytest.raises(NoActiveUsers):
        path_utility_se(0, {0: 0.0}, snap)


def test_utility_rejects_non_candidate_angle():
    snap = single_cell([[10.0, 10.0]])
    with pytest.raises(ValueError):
        path_utility_se(0, {0: 0.123456}, snap)


# -- HOV / SNR / SLR ---------------------------------------------------------

def test_hov_consumes_no_angles(snapshot_factory):
    out = decide_hov(snapshot_factory(0))
    assert out.angles == {} and out.diagnostics["position_reads"] == 0


def test_snr_examples():
    assert angle(decide_snr(single_cell([[60.0, 40.0]]))) == 0.0
    behind = single_cell([[20.0, 40.0]], pos=(41.0, 40.0), max_accel=40.0)
    assert abs(angle(decide_snr(behind))) == pytest.approx(math.pi)
    idle = single_cell([[20.0, 40.0]], active=[False], pos=(30.0, 40.0), heading=math.pi)
    out = decide_snr(idle)
    p = idle.pose(0)
    assert angle(out) == center_fallback(p, GroundPoint(40.0, 40.0), candidate_angles(2.0, 21), 1.0)


def test_snr_matches_brute_force(snapshot_factory):
    snap = snapshot_factory(11)
    table = oracles.sample_table(snap)
    out = decide_snr(snap)
    c = snap.config
    noise = 10 ** ((-174 + c.ue_noise_figure_db) / 10) * c.bandwidth_hz * 1e-3
    fb = oracles.fallback(snap, table)
    order = oracles.pref_order(21)
    for n in range(snap.n_drones):
        users = oracles.cell_users(snap, n)
        if users.size == 0:
            assert out.indices[n] == fb[n]
            continue
        r = np.hypot(snap.user_x[users][None, None] - table[n, :, :, 0, None],
                     snap.user_y[users][None, None] - table[n, :, :, 1, None])
        p, los, nlos = oracles._power(r, c)
        score = ((p * los + (1 - p) * nlos) / noise).mean(axis=2).mean(axis=1)
        best = score.max()
        assert out.indices[n] == next(i for i in order if score[i] >= best - 1e-12 * best)


def test_slr_without_neighbour_users_equals_snr(snapshot_factory):
    snap = snapshot_factory(2)
    n = 24
    lone = SystemSnapshot(0.0, snap.config, snap.drone_x, snap.drone_y, snap.heading, snap.user_x, snap.user_y,
                          snap.user_cell, snap.active & (snap.user_cell == n))
    assert decide_slr(lone).indices[n] == decide_snr(lone).indices[n]


def test_slr_penalises_leaking_candidate():
    # two cells side by side; the neighbour's user sits where a left turn would lead
    c = default_config(grid_side=3, users_per_cell=1, max_accel=8.0)
    ux = np.full(9, 1000.0)
    uy = np.full(9, 1000.0)
    act = np.zeros(9, bool)
    ux[4], uy[4], act[4] = 140.0, 120.0, True        # own user, straight ahead
    ux[7], uy[7], act[7] = 122.0, 160.0, True        # neighbour cell above, near the left arc
    ux = np.clip(ux, 0, 239)
    uy = np.clip(uy, 0, 239)
    snap = SystemSnapshot(0.0, c, np.full(9, 120.0) + np.arange(9) * 0, np.full(9, 120.0), np.zeros(9),
                          ux, uy, np.arange(9), act)
    slr = decide_slr(snap)
    snr = decide_snr(snap)
    assert slr.angles[4] <= snr.angles[4]
    assert slr.angles[4] <= 0.0


def test_slr_range_gate():
    c = default_config(grid_side=3, users_per_cell=1, interference_range=50.0)
    snap = SystemSnapshot(0.0, c, [40, 120, 200] * 3, [40] * 3 + [120] * 3 + [200] * 3, np.zeros(9),
                          np.arange(9) % 3 * 80 + 30.0, np.arange(9) // 3 * 80 + 30.0, np.arange(9), np.ones(9, bool))
    nbr = neighbour_mask(snap)
    assert not nbr.any()
    assert np.array_equal(decide_slr(snap).indices, decide_snr(snap).indices)
    assert SLR_LEAKAGE_FLOOR_W == 1e-30


# -- GT ----------------------------------------------------------------------

def test_gt_single_player_is_unilateral_argmax():
    snap = single_cell([[55.0, 52.0], [30.0, 35.0]], heading=0.4)
    out = decide_gt(snap, np.random.default_rng(3))
    assert out.diagnostics["converged"] and out.diagnostics["sweeps"] <= 2
    utils = [path_utility_se(0, {0: t}, snap) for t in candidate_angles(2.0, 21)]
    assert utils[out.indices[0]] == max(utils)
    assert out.indices[0] == decide_opt(snap).indices[0]


@pytest.mark.parametrize("seed", range(4))
def test_gt_converged_profiles_are_equilibria(snapshot_factory, seed):
    snap = snapshot_factory(100 + seed)
    out = decide_gt(snap, np.random.default_rng(seed))
    assert out.diagnostics["converged"]
    assert oracles.nash_violations(snap, out.indices) == []


def test_gt_far_apart_players_decouple():
    c = default_config(grid_side=3, cell_edge=300.0, users_per_cell=1)
    cx = np.array([150.0, 450.0, 750.0] * 3)
    cy = np.repeat([150.0, 450.0, 750.0], 3)
    act = np.zeros(9, bool)
    act[[0, 8]] = True
    snap = SystemSnapshot(0.0, c, cx, cy, np.array([0.3] * 9), cx + 20.0, cy - 15.0, np.arange(9), act)
    gt = decide_gt(snap, np.random.default_rng(0))
    for n in (0, 8):
        solo = SystemSnapshot(0.0, c, cx, cy, snap.heading, snap.user_x, snap.user_y, np.arange(9),
                              act & (np.arange(9) == n))
        assert gt.indices[n] == decide_snr(solo).indices[n] or gt.indices[n] == decide_gt(
            solo, np.random.default_rng(1)).indices[n]
        assert gt.indices[n] == decide_gt(solo, np.random.default_rng(5)).indices[n]


def test_gt_deterministic_and_sequential_mode(snapshot_factory):
    snap = snapshot_factory(7)
    a = decide_gt(snap, np.random.default_rng(42))
    b = decide_gt(snap, np.random.default_rng(42))
    assert np.array_equal(a.indices, b.indices) and a.diagnostics == b.diagnostics
    seq = snapshot_factory(7, gt_mode=GTMode.SEQUENTIAL.value)
    out = decide_gt(seq, np.random.default_rng(42))
    if out.diagnostics["converged"]:
        assert oracles.nash_violations(seq, out.indices) == []


def test_gt_non_players_fly_home(snapshot_factory):
    snap = snapshot_factory(9, p_active=0.2)
    out = decide_gt(snap, np.random.default_rng(0))
    fb = oracles.fallback(snap, oracles.sample_table(snap))
    idle = ~snap.transmitting
    assert idle.any()
    assert np.array_equal(out.indices[idle], fb[idle])


def test_gt_stops_at_sweep_limit(snapshot_factory):
    snap = snapshot_factory(12, gt_max_sweeps=1)
    out = decide_gt(snap, np.random.default_rng(0))
    assert out.diagnostics["sweeps"] == 1


# -- OPT ---------------------------------------------------------------------

def test_opt_two_players_three_candidates_matches_enumeration():
    snap = random_snapshot(21, grid_side=3, n_candidates=3, users_per_cell=2, p_active=0.0)
    act = np.zeros(18, bool)
    act[[0, 9]] = True
    snap = SystemSnapshot(0.0, snap.config, snap.drone_x, snap.drone_y, snap.heading, snap.user_x, snap.user_y,
                          snap.user_cell, act)
    out = decide_opt(snap)
    assert out.diagnostics["profiles"] == 9
    prof, val = oracles.brute_force_opt(snap)
    assert np.array_equal(out.indices, prof)
    assert out.diagnostics["utility"] == pytest.approx(val, rel=1e-10)


def test_opt_budget():
    snap = random_snapshot(1, grid_side=3, p_active=0.9, opt_max_profiles=1000)
    with pytest.raises(InfeasibleSearch) as err:
        decide_opt(snap)
    assert err.value.required == 21 ** int(snap.transmitting.sum())


@pytest.mark.parametrize("seed", range(3))
def test_opt_dominates_gt(seed):
    snap = random_snapshot(300 + seed, grid_side=3, n_candidates=3, p_active=0.4)
    opt = decide_opt(snap)
    gt = decide_gt(snap, np.random.default_rng(seed))
    assert profile_system_se(opt.indices, snap) >= profile_system_se(gt.indices, snap) * (1 - 1e-12)


def test_decide_dispatch(snapshot_factory):
    snap = snapshot_factory(4, dma="SNR")
    assert np.array_equal(decide(snap).indices, decide_snr(snap).indices)


def test_selected_angles_respect_acceleration(snapshot_factory):
    snap = snapshot_factory(6, drone_speed=8.0)
    for fn in (decide_snr, decide_slr):
        out = fn(snap)
        for th in out.angles.values():
            assert 8.0 * abs(th) <= 4.0 * (1 + 1e-12)


# -- signalling ----------------------------------------------------------------

def test_position_reads_scale_with_network_size():
    reads = {}
    for side in (3, 5, 7):
        snap = random_snapshot(0, grid_side=side, p_active=1.0, interference_range=1e4)
        N, U = side * side, snap.config.users_per_cell
        r = {name: fn(snap).diagnostics["position_reads"] for name, fn in
             (("SNR", decide_snr), ("SLR", decide_slr))}
        r["GT"] = decide_gt(snap, np.random.default_rng(0)).diagnostics["position_reads"]
        assert r["SNR"] == N * U
        assert r["SLR"] == N * U * N
        assert r["GT"] == N * (N + N * U)
        reads[N] = r
    for name, order in (("SNR", 1), ("SLR", 2), ("GT", 2)):
        growth = math.log(reads[49][name] / reads[9][name]) / math.log(49 / 9)
        assert growth == pytest.approx(order, abs=0.1)
