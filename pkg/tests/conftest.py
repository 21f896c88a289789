"""Shared scenario factories and independent oracles for the test suite.

The oracles here reimplement reference behavior from first principles
(max-plus recursions, FCFS bookkeeping) without touching the engine or the
kernels, so agreement is evidence and not tautology.
"""

import math

import numpy as np

from hailsim.arrivals import (Arrival, HeightLaw, InterarrivalLaw, MarkModel,
                              RateModel, Scenario, sample_stream)
from hailsim.geometry import ExclusionLaw, Space, intersects


def fig_scenario(mean_radius: float = 2.0, intensity: float = 1.0,
                 interarrival: str = "exponential") -> Scenario:
    """Torus [-2,2]^2, exponential radii and heights, default Shannon rate."""
    return Scenario(
        space=Space.torus_2d(2.0), intensity=intensity,
        marks=MarkModel(exclusion=ExclusionLaw.exponential_ball(mean_radius),
                        height=HeightLaw.exponential(1.0)),
        interarrival=InterarrivalLaw(family=interarrival),
        scenario_id=f"fig-r{mean_radius:g}")


def whole_space_scenario(intensity: float = 0.15,
                         mean_height: float = 1.0) -> Scenario:
    """Every arrival excludes the whole space: the single-server reduction."""
    return Scenario(
        space=Space.torus_2d(2.0), intensity=intensity,
        marks=MarkModel(exclusion=ExclusionLaw.whole_space(),
                        height=HeightLaw.exponential(mean_height)),
        scenario_id="whole-space")


def discrete_scenario(n_servers: int = 20, width: int = 3,
                      intensity: float = 0.02, v: float = 1.0,
                      reach: float = 0.0) -> Scenario:
    return Scenario(
        space=Space.discrete_circle(n_servers), intensity=intensity,
        marks=MarkModel(exclusion=ExclusionLaw.fixed_interval(width),
                        height=HeightLaw.exponential(1.0)),
        rate_model=RateModel.discrete_indicator(v=v, reach=reach),
        scenario_id="discrete")


def phhg_oracle(arrivals, space):
    """Departure times under constant unit rate, by max-plus recursion.

    A customer starts at the latest departure among earlier conflicting
    customers still present at its arrival (its arrival time if none) and
    departs a full height later.  O(n^2), no event loop.
    """
    n = len(arrivals)
    departs = np.empty(n)
    starts = np.empty(n)
    for i, a in enumerate(arrivals):
        s = a.time
        for j in range(i):
            if departs[j] > a.time and intersects(arrivals[j].S, a.S, space):
                s = max(s, departs[j])
        starts[i] = s
        departs[i] = s + a.h
    return starts, departs


def fcfs_oracle(times, heights, rate):
    """Single-server FCFS at a fixed service rate."""
    n = len(times)
    starts = np.empty(n)
    departs = np.empty(n)
    free = -math.inf
    for i in range(n):
        starts[i] = max(times[i], free)
        departs[i] = starts[i] + heights[i] / rate
        free = departs[i]
    return starts, departs


def stream(scenario: Scenario, count: int, seed: int, replication: int = 0):
    """Arrival objects for oracle-style tests."""
    return sample_stream(scenario, count, seed, replication)
