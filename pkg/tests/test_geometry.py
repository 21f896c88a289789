"""Geometry: wrapped metrics, exclusion sets, cover chains and probabilities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hailsim.errors import InvalidArgumentError
from hailsim.geometry import (CoverChain, ExclusionLaw, ExclusionSet, Space,
                              build_cover_chain, chain_cover_probabilities,
                              cover_probability, covers, covers_from_arrays,
                              distance, distance_to_point, intersects,
                              packing_bound, validate_cover_chain)

T1 = Space.torus_1d(2.0)
T2 = Space.torus_2d(2.0)
D20 = Space.discrete_circle(20)


# -- metric -----------------------------------------------------------------

def test_distance_hand_values():
    assert distance((0.0,), (1.0,), T1) == 1.0
    # wrapping: -1.9 and 1.9 are 0.2 apart on a circumference-4 circle
    assert distance((-1.9,), (1.9,), T1) == pytest.approx(0.2, abs=1e-12)
    assert distance((0.0, 0.0), (3.0, 4.0), Space.torus_2d(10.0)) == 5.0
    # each axis wraps independently
    assert distance((-1.9, -1.9), (1.9, 1.9), T2) == pytest.approx(
        0.2 * math.sqrt(2), abs=1e-12)


def test_discrete_distance():
    assert distance(1, 2, D20) == 1
    assert distance(1, 20, D20) == 1
    assert distance(1, 11, D20) == 10
    assert distance(5, 5, D20) == 0


def test_diameter_and_measure():
    assert T1.diameter == 2.0
    assert T2.diameter == pytest.approx(2.0 * math.sqrt(2))
    assert T2.measure == 16.0
    assert D20.diameter == 10
    assert D20.measure == 20


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2),
       st.lists(st.floats(-50, 50), min_size=2, max_size=2),
       st.lists(st.floats(-50, 50), min_size=2, max_size=2))
@settings(max_examples=200, deadline=None)
def test_metric_properties(p, q, r):
    p, q, r = tuple(p), tuple(q), tuple(r)
    dpq = distance(p, q, T2)
    assert dpq == pytest.approx(distance(q, p, T2), abs=1e-9)
    assert dpq <= T2.diameter + 1e-9
    assert distance(p, p, T2) <= 1e-9
    # triangle inequality
    assert dpq <= distance(p, r, T2) + distance(r, q, T2) + 1e-9
    # translation invariance modulo wrapping
    shift = (0.75, -1.5)
    ps = (p[0] + shift[0], p[1] + shift[1])
    qs = (q[0] + shift[0], q[1] + shift[1])
    assert dpq == pytest.approx(distance(ps, qs, T2), abs=1e-9)


def test_distance_to_point_matches_scalar():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-2, 2, (64, 2))
    q = (0.3, -1.7)
    vec = distance_to_point(xs, q, T2)
    for i in range(len(xs)):
        assert vec[i] == pytest.approx(distance(tuple(xs[i]), q, T2), abs=1e-12)


def test_distance_to_point_discrete():
    xs = np.arange(1, 21)
    vec = distance_to_point(xs, 1, D20)
    assert vec[0] == 0 and vec[1] == 1 and vec[19] == 1 and vec[10] == 10


# -- exclusion sets ----------------------------------------------------------

def test_ball_intersects_with_wrap():
    a = ExclusionSet.ball((-1.9, 0.0), 0.15)
    b = ExclusionSet.ball((1.9, 0.0), 0.1)
    assert intersects(a, b, T2)          # touch across the seam
    c = ExclusionSet.ball((0.0, 0.0), 0.1)
    assert not intersects(a, c, T2)


def test_whole_space_set():
    w = ExclusionSet.whole_space()
    assert w.is_whole(T2)
    assert intersects(w, ExclusionSet.ball((1.0, 1.0), 0.01), T2)
    assert covers(w, ExclusionSet.ball((0.0, 0.0), 1.0), T2)
    # a ball with radius at the diameter covers everything
    big = ExclusionSet.ball((0.0, 0.0), T2.diameter)
    assert covers(big, w, T2)


def test_interval_sets():
    a = ExclusionSet.interval(1, 3)      # servers 20, 1, 2
    b = ExclusionSet.interval(3, 3)      # servers 2, 3, 4
    c = ExclusionSet.interval(10, 3)
    assert intersects(a, b, D20)
    assert not intersects(a, c, D20)
    assert covers(ExclusionSet.interval(1, 5), ExclusionSet.interval(20, 3), D20)
    assert not covers(ExclusionSet.interval(1, 3), ExclusionSet.interval(20, 5), D20)


def test_covers_reflexive_and_monotone():
    s = ExclusionSet.ball((0.5, -0.25), 0.7)
    assert covers(s, s, T2)
    assert covers(s, ExclusionSet.ball((0.5, -0.25), 0.3), T2)
    assert not covers(ExclusionSet.ball((0.5, -0.25), 0.3), s, T2)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 3), st.floats(0, 1.5))
@settings(max_examples=150, deadline=None)
def test_covers_from_arrays_matches_scalar(cx, cy, r_mark, r_target):
    target = ExclusionSet.ball((0.25, -0.5), r_target)
    xs = np.array([[cx, cy]])
    radii = np.array([r_mark])
    got = covers_from_arrays(xs, radii, target, T2)[0]
    want = covers(ExclusionSet.ball((cx, cy), r_mark), target, T2)
    assert got == want


# -- cover probabilities ------------------------------------------------------

def test_cover_probability_whole_space_law():
    assert cover_probability(ExclusionSet.ball((0, 0), 1.0),
                             ExclusionLaw.whole_space(), T2) == 1.0


def test_cover_probability_exponential_whole_target():
    # covering the whole space needs radius >= diameter
    p = cover_probability(ExclusionSet.whole_space(),
                          ExclusionLaw.exponential_ball(4.0), T2)
    assert p == pytest.approx(math.exp(-2.0 * math.sqrt(2.0) / 4.0), rel=1e-12)
    assert p == pytest.approx(0.49307, abs=5e-6)


def test_cover_probability_fixed_ball():
    # fixed radius below the target radius can never cover it
    b = ExclusionSet.ball((0.0, 0.0), 0.5)
    assert cover_probability(b, ExclusionLaw.fixed_ball(0.4), T2) == 0.0
    assert cover_probability(b, ExclusionLaw.fixed_ball(2 * math.sqrt(2)), T2) == 1.0
    # radius 1.0 covers the 0.5-ball iff the center is within 0.5
    p = cover_probability(b, ExclusionLaw.fixed_ball(1.0), T2)
    assert p == pytest.approx(math.pi * 0.25 / 16.0, rel=1e-9)


def test_cover_probability_against_monte_carlo():
    b = ExclusionSet.ball((0.6, -0.4), 0.8)
    law = ExclusionLaw.exponential_ball(1.5)
    p = cover_probability(b, law, T2)
    mc_law = ExclusionLaw.from_sampler(lambda rng, n: rng.exponential(1.5, n))
    p_mc, se = cover_probability(b, mc_law, T2, n_samples=200_000, seed=4,
                                 return_stderr=True)
    assert abs(p - p_mc) < 4.0 * se + 1e-12


def test_cover_probability_discrete():
    law = ExclusionLaw.fixed_interval(5)
    # target width 3: slack one server each way, 3 favorable centers of 20
    p = cover_probability(ExclusionSet.interval(7, 3), law, D20)
    assert p == pytest.approx(3.0 / 20.0)
    assert cover_probability(ExclusionSet.interval(7, 7), law, D20) == 0.0


# -- cover chains --------------------------------------------------------------

@pytest.mark.parametrize("sp,radius", [
    (T1, 0.5), (T1, 1.2), (T2, 0.7), (T2, 1.5), (Space.torus_2d(5.0), 0.9),
])
def test_build_cover_chain_valid(sp, radius):
    chain = build_cover_chain(sp, radius)
    report = validate_cover_chain(chain, sp)
    assert report.ok, report


def test_build_cover_chain_collapses_to_whole_space():
    chain = build_cover_chain(T2, T2.diameter + 0.1)
    assert len(chain.sets) == 1 and chain.sets[0].is_whole(T2)


def test_build_cover_chain_discrete():
    chain = build_cover_chain(D20, 2)       # width-5 intervals
    report = validate_cover_chain(chain, D20)
    assert report.ok, report
    assert all(s.width == 5 for s in chain.sets)


def test_build_cover_chain_rejects_nonpositive():
    with pytest.raises(InvalidArgumentError):
        build_cover_chain(T2, 0.0)


def test_chain_cover_probabilities_positive():
    chain = build_cover_chain(T2, 1.0)
    law = ExclusionLaw.exponential_ball(1.0)
    annotated = chain_cover_probabilities(chain, law, T2)
    assert annotated.probabilities is not None
    assert all(p > 0 for p in annotated.probabilities)
    report = validate_cover_chain(annotated, T2)
    assert report.ok, report


def test_validate_cover_chain_catches_gap():
    # two distant small balls: not a chain (no overlap, no coverage)
    bad = CoverChain((ExclusionSet.ball((-1.5, -1.5), 0.2),
                      ExclusionSet.ball((1.5, 1.5), 0.2)))
    report = validate_cover_chain(bad, T2)
    assert not report.ok


def test_packing_bound():
    assert packing_bound(T2, 2.0 * math.sqrt(2.0)) >= 1
    assert packing_bound(D20, 1.0) == 20
    small = packing_bound(T2, 0.25)
    big = packing_bound(T2, 1.0)
    assert small > big >= 1
