"""Arrival streams, marks, and service-rate models."""

import math

import numpy as np
import pytest

from conftest import discrete_scenario, fig_scenario, whole_space_scenario
from hailsim.arrivals import (HeightLaw, InterarrivalLaw, MarkModel,
                              PowerLawAttenuation, RateModel, Scenario,
                              rate, sample_stream, sample_stream_arrays,
                              sum_rate_lower_bound)
from hailsim.errors import ContractViolationError, InvalidArgumentError
from hailsim.geometry import ExclusionLaw, Space


# -- stream sampling -----------------------------------------------------------

def test_stream_deterministic():
    sc = fig_scenario(0.7)
    a = sample_stream_arrays(sc, 500, seed=42)
    b = sample_stream_arrays(sc, 500, seed=42)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_stream_prefix_stable_across_chunks():
    # the draw is chunked internally; a short read must be a prefix of a
    # longer one even when the cut crosses a chunk boundary
    sc = fig_scenario(1.0)
    short = sample_stream_arrays(sc, 1000, seed=7)
    long = sample_stream_arrays(sc, 1500, seed=7)
    for s, l in zip(short, long):
        np.testing.assert_array_equal(s, l[:1000])


def test_replications_differ():
    sc = fig_scenario(1.0)
    a = sample_stream_arrays(sc, 100, seed=3, replication=0)
    b = sample_stream_arrays(sc, 100, seed=3, replication=1)
    assert not np.array_equal(a[0], b[0])
    assert not np.array_equal(a[3], b[3])


def test_stream_shapes_and_ranges():
    sc = fig_scenario(0.5)
    times, xs, radii, heights = sample_stream_arrays(sc, 300, seed=1)
    assert times.shape == (300,) and xs.shape == (300, 2)
    assert np.all(np.diff(times) >= 0) and times[0] >= 0
    assert np.all(xs >= -2) and np.all(xs < 2)
    assert np.all(radii >= 0) and np.all(heights > 0)


def test_discrete_stream_locations():
    sc = discrete_scenario(n_servers=20)
    times, xs, radii, heights = sample_stream_arrays(sc, 200, seed=5)
    assert xs.dtype.kind == "i"
    assert xs.min() >= 1 and xs.max() <= 20
    arrivals = sample_stream(sc, 10, seed=5)
    assert all(isinstance(a.x, int) for a in arrivals)


def test_arrival_rate_scales_with_measure():
    sc = fig_scenario(1.0, intensity=2.0)
    assert sc.total_rate == pytest.approx(32.0)
    times, *_ = sample_stream_arrays(sc, 20_000, seed=11)
    # 20000 arrivals at rate 32 take about 625 time units
    assert times[-1] * 32.0 == pytest.approx(20_000, rel=0.05)


def test_interarrival_families():
    rng = np.random.default_rng(0)
    for family, shape in [("exponential", 1.0), ("deterministic", 1.0),
                          ("uniform", 1.0), ("gamma", 3.0)]:
        law = InterarrivalLaw(family=family, shape=shape)
        draws = law.sample(rng, 40_000, mean=0.5)
        assert draws.mean() == pytest.approx(0.5, rel=0.05)
        assert np.all(draws >= 0)
    with pytest.raises(Exception):
        InterarrivalLaw(family="cauchy").sample(rng, 1, 1.0)


def test_height_and_radius_laws():
    rng = np.random.default_rng(1)
    h = HeightLaw.exponential(2.0).sample(rng, 50_000)
    assert h.mean() == pytest.approx(2.0, rel=0.05)
    assert np.all(HeightLaw.deterministic(0.7).sample(rng, 5) == 0.7)
    sp = Space.torus_2d(2.0)
    r = ExclusionLaw.exponential_ball(0.4).sample_half_extents(rng, 50_000, sp)
    assert r.mean() == pytest.approx(0.4, rel=0.05)
    assert np.all(np.isinf(
        ExclusionLaw.whole_space().sample_half_extents(rng, 4, sp)))


def test_scenario_rejects_negative_intensity():
    with pytest.raises(InvalidArgumentError):
        whole_space_scenario(intensity=-0.1)


# -- rate models ----------------------------------------------------------------

def test_shannon_rate_hand_value():
    sp = Space.torus_2d(2.0)
    model = RateModel.shannon()
    active = [((0.0, 0.0), 0), ((1.5, 0.0), 1)]
    want = math.log2(1.0 + 1.0 / (0.05 + 1.5 ** -4))
    assert rate(model, 0, active, sp) == pytest.approx(want, abs=1e-12)
    assert rate(model, 1, active, sp) == pytest.approx(want, abs=1e-12)
    # alone: the isolated-customer rate log2(1 + s/w) = log2(21)
    assert rate(model, 0, [((0.0, 0.0), 0)], sp) == pytest.approx(
        math.log2(21.0), abs=1e-12)


def test_shannon_rate_caps_attenuation():
    sp = Space.torus_2d(2.0)
    model = RateModel.shannon()
    # colocated interferer: l(0) = cap = 1, not infinity
    active = [((0.0, 0.0), 0), ((0.0, 0.0), 1)]
    want = math.log2(1.0 + 1.0 / (0.05 + 1.0))
    assert rate(model, 0, active, sp) == pytest.approx(want, abs=1e-12)


def test_attenuation_function():
    att = PowerLawAttenuation(cap=1.0, exponent=4.0)
    assert att(0.0) == 1.0
    assert att(0.5) == 1.0          # capped below r = 1
    assert att(2.0) == pytest.approx(2.0 ** -4)
    assert att.at_zero == 1.0


def test_discrete_indicator_rate():
    sp = Space.discrete_circle(20)
    model = RateModel.discrete_indicator(v=1.0, reach=2.0)
    active = [(1, 0), (3, 1), (10, 2)]
    # customer 0 sees one other active within reach 2 (server 3)
    assert rate(model, 0, active, sp) == pytest.approx(0.5)
    assert rate(model, 2, active, sp) == pytest.approx(1.0)
    assert rate(RateModel.constant(), 0, active, sp) == 1.0


def test_custom_rate_bounds_checked():
    sp = Space.torus_2d(2.0)
    model = RateModel.custom(lambda x, others, s: 5.0, s_min=1.0, s_max=2.0)
    with pytest.raises(ContractViolationError):
        rate(model, 0, [((0.0, 0.0), 0)], sp, check_bounds=True)


def test_sum_rate_lower_bound_holds():
    # the bound must hold for every active configuration; active customers
    # here are arbitrary points, which only increases interference vs the
    # hard-core truth, so the check is conservative
    sp = Space.torus_2d(2.0)
    model = RateModel.shannon()
    rng = np.random.default_rng(12)
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        pts = rng.uniform(-2, 2, (n, 2))
        active = [(tuple(p), i) for i, p in enumerate(pts)]
        total = sum(rate(model, i, active, sp) for i in range(n))
        assert total >= sum_rate_lower_bound(n, model) - 1e-12


def test_sum_rate_lower_bound_other_models():
    assert sum_rate_lower_bound(0, RateModel.constant()) == 0.0
    assert sum_rate_lower_bound(5, RateModel.constant()) == 5.0
    m = RateModel.discrete_indicator(v=1.0, reach=3.0)
    assert sum_rate_lower_bound(4, m) == pytest.approx(1.0)
    assert sum_rate_lower_bound(1, RateModel.shannon()) == pytest.approx(
        math.log2(21.0))


def test_max_rate():
    assert RateModel.shannon().max_rate == pytest.approx(math.log2(21.0))
    assert RateModel.constant().max_rate == 1.0
    assert RateModel.custom(lambda *a: 1.0, 0.5, 2.5).max_rate == 2.5
