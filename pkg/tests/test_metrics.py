from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbsim.config import default_config
from dbsim.engine import run
from dbsim.errors import NoData
from dbsim.metrics import (
    aggregate,
    completed_per_user,
    empirical_cdf,
    geometry_statistics,
    jain_index,
    packet_throughputs,
    percentile,
    summarize,
    throughput_stats,
    time_avg_se,
    user_mean_rates,
)
from dbsim.traffic import PacketRecord


def pk(tau, bits=3.2e8):
    return PacketRecord(0, 0.0, tau, tau, bits)


def test_time_avg_se_examples():
    assert time_avg_se([2.0] * 10) == 2.0
    assert time_avg_se([1.0, 3.0]) == 2.0
    assert time_avg_se([2.0, None, 4.0]) == 3.0
    assert time_avg_se([2.0, float("nan"), 4.0]) == 3.0
    with pytest.raises(NoData):
        time_avg_se([None, float("nan")])


def test_jain_examples():
    assert jain_index([3.0] * 5) == pytest.approx(1.0)
    assert jain_index([0, 0, 7.0, 0, 0]) == pytest.approx(0.2)
    assert jain_index([1, 2, 3]) == pytest.approx(0.8571428571428571, rel=1e-12)
    with pytest.raises(NoData):
        jain_index([0.0, 0.0])


@given(st.lists(st.floats(0, 1e8), min_size=1, max_size=20).filter(lambda r: sum(r) > 0))
@settings(max_examples=100)
def test_jain_bounds(rates):
    j = jain_index(rates)
    assert 1 / len(rates) - 1e-12 <= j <= 1 + 1e-12


def test_packet_throughput_examples():
    assert packet_throughputs([pk(32.0)])[0] == pytest.approx(1e7)
    assert packet_throughputs([pk(64.0)])[0] == pytest.approx(5e6)
    packets = [pk(3.2e8 / (m * 1e6)) for m in range(1, 101)]
    mean, p5 = throughput_stats(packets)
    assert p5 == pytest.approx(5.95e6, rel=1e-9)
    assert mean == pytest.approx(50.5e6, rel=1e-9)
    rng = np.random.default_rng(0)
    shuffled = [packets[i] for i in rng.permutation(100)]
    assert throughput_stats(shuffled) == (mean, p5)
    with pytest.raises(NoData):
        throughput_stats([])
    with pytest.raises(NoData):
        percentile([], 5)


def test_completed_per_user_examples():
    assert completed_per_user([pk(1.0)] * 450, 5) == 90
    assert completed_per_user([], 5) == 0


def test_user_mean_rates_use_active_slots_only():
    rate = np.array([[2.0, 0.0], [4.0, 0.0], [0.0, 0.0]])
    act = np.array([[True, False], [True, False], [False, False]])
    r = user_mean_rates(rate, act)
    assert r[0] == 3.0 and math.isnan(r[1])


def test_empirical_cdf_ends_at_one():
    x, F = empirical_cdf([3.0, 1.0, 2.0, 2.0], points=5)
    assert x[0] == 1.0 and x[-1] == 3.0
    assert F[-1] == 1.0 and np.all(np.diff(F) >= 0)
    assert empirical_cdf([4.0])[1].tolist() == [1.0]
    with pytest.raises(NoData):
        empirical_cdf([])


def test_aggregate_mean_and_std():
    a = summarize(run(default_config(grid_side=3, duration_s=10.0, mean_reading_s=1.0, packet_bits=1e7)))
    agg = aggregate([a])
    assert agg["mean"] == a.as_dict()
    assert all(v == 0.0 or math.isnan(v) for v in agg["std"].values())


def test_hover_distance_bounded_by_half_diagonal():
    r = run(default_config(dma="HOV", grid_side=3, duration_s=60.0, mean_reading_s=2.0, packet_bits=2e7))
    g = geometry_statistics(r)
    assert g["ground_distance_m"].max() <= 40 * math.sqrt(2) + 1e-9
    assert np.all((g["p_los"] >= 0) & (g["p_los"] <= 1))
    assert np.allclose(g["elevation_deg"], np.degrees(np.arctan2(10.0, g["ground_distance_m"])))


def test_summary_fractions_in_range_and_warmup():
    c = default_config(grid_side=3, duration_s=40.0, mean_reading_s=2.0, packet_bits=2e7, dma="SNR")
    s = summarize(run(c))
    for v in (s.transmission_time_fraction, s.outside_cell_fraction, s.user_active_fraction, s.jain):
        assert 0 <= v <= 1
    assert s.p5_packet_throughput_bps <= s.mean_packet_throughput_bps
    late = summarize(run(c.replace(warmup_discard_s=20.0)))
    assert late.completed_requests_per_user <= s.completed_requests_per_user
