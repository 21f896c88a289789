"""Arrival streams, mark distributions, and service-rate models.

Arrivals form a marked renewal process (Poisson by default): uniform
locations on the space, an exclusion set and a work height attached to each
point.  Service rates are functions of the active configuration; the default
is a Shannon-type rate with power-law attenuated interference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import rng as rng_mod
from .errors import (ContractViolationError, InvalidArgumentError,
                     UnsupportedModelError)
from .geometry import ExclusionLaw, ExclusionSet, Point, Space, distance

STREAM_CHUNK = 1024


# --------------------------------------------------------------------------
# Attenuation and rate models

@dataclass(frozen=True)
class PowerLawAttenuation:
    """l(r) = min(cap, r^-exponent); cap = l(0)."""

    cap: float = 1.0
    exponent: float = 4.0

    def __call__(self, r) -> float:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            val = np.minimum(self.cap, r ** -self.exponent)
        return float(val) if val.ndim == 0 else val

    @property
    def at_zero(self) -> float:
        return self.cap


@dataclass(frozen=True)
class RateModel:
    """Service-rate law evaluated on the active configuration.

    Kinds:

    * ``shannon``: bandwidth * log2(1 + signal / (noise + interference)),
      interference summing the attenuation over the other active customers;
    * ``constant``: rate 1 regardless of configuration;
    * ``discrete-indicator``: 1 / (1 + v * count of other active customers
      within ``reach``), the discrete-circle model;
    * ``custom``: a user function of (location, other active locations)
      with declared positive bounds.
    """

    kind: str
    bandwidth: float = 1.0
    signal: float = 1.0
    noise: float = 0.05
    attenuation: Callable = PowerLawAttenuation()
    v: float = 1.0
    reach: float = 0.0
    fn: Optional[Callable] = None
    bounds: Tuple[float, float] = (0.0, math.inf)

    @staticmethod
    def shannon(bandwidth: float = 1.0, signal: float = 1.0, noise: float = 0.05,
                attenuation: Callable = PowerLawAttenuation()) -> "RateModel":
        if bandwidth <= 0 or signal <= 0 or noise <= 0:
            raise InvalidArgumentError("bandwidth, signal and noise must be positive")
        return RateModel("shannon", bandwidth=bandwidth, signal=signal,
                         noise=noise, attenuation=attenuation)

    @staticmethod
    def constant() -> "RateModel":
        return RateModel("constant")

    @staticmethod
    def discrete_indicator(v: float = 1.0, reach: float = 0.0) -> "RateModel":
        if v < 0 or reach < 0:
            raise InvalidArgumentError("v and reach must be >= 0")
        return RateModel("discrete-indicator", v=v, reach=reach)

    @staticmethod
    def custom(fn: Callable, s_min: float, s_max: float) -> "RateModel":
        if not (0 < s_min <= s_max < math.inf):
            raise InvalidArgumentError("bounds must satisfy 0 < s_min <= s_max < inf")
        return RateModel("custom", fn=fn, bounds=(s_min, s_max))

    @property
    def max_rate(self) -> float:
        """Rate of an isolated customer (upper bound for shannon/constant)."""
        if self.kind == "shannon":
            return self.bandwidth * math.log2(1.0 + self.signal / self.noise)
        if self.kind in ("constant", "discrete-indicator"):
            return 1.0
        return self.bounds[1]


def shannon_rate(i: int, active: Sequence[Tuple[Point, int]], model: RateModel,
                 sp: Space) -> float:
    """Shannon rate of active customer ``i`` given the active configuration.

    ``active`` lists (location, customer index) pairs; all of them, including
    customer ``i`` itself, interfere except the customer being served.
    """
    x_i = None
    for x, idx in active:
        if idx == i:
            x_i = x
            break
    if x_i is None:
        raise InvalidArgumentError(f"customer {i} is not active")
    interference = 0.0
    for x, idx in active:
        if idx != i:
            interference += model.attenuation(distance(x, x_i, sp))
    return model.bandwidth * math.log2(
        1.0 + model.signal / (model.noise + interference))


def rate(model: RateModel, i: int, active: Sequence[Tuple[Point, int]],
         sp: Space, check_bounds: bool = False) -> float:
    """Service rate of active customer ``i`` under any rate model."""
    if model.kind == "constant":
        return 1.0
    if model.kind == "shannon":
        return shannon_rate(i, active, model, sp)
    if model.kind == "discrete-indicator":
        x_i = next(x for x, idx in active if idx == i)
        near = sum(1 for x, idx in active
                   if idx != i and distance(x, x_i, sp) <= model.reach)
        return 1.0 / (1.0 + model.v * near)
    if model.kind == "custom":
        x_i = next(x for x, idx in active if idx == i)
        others = [x for x, idx in active if idx != i]
        val = float(model.fn(x_i, others, sp))
        if check_bounds and not (model.bounds[0] <= val <= model.bounds[1]):
            raise ContractViolationError(
                f"custom rate {val} outside declared bounds {model.bounds}")
        return val
    raise UnsupportedModelError(model.kind)


def sum_rate_lower_bound(n: int, model: RateModel) -> float:
    """Lower bound on the total active service rate with n active customers.

    For the shannon model this is b*log2(1 + n*s/(w + (n-1)*L)) with
    L = l(0); it decreases to b*log2(1 + s/L) as n grows.  For the other
    bounded-below models the trivial bound n * minimum rate is returned.
    """
    if n < 0:
        raise InvalidArgumentError("n must be >= 0")
    if n == 0:
        return 0.0
    if model.kind == "shannon":
        L = model.attenuation.at_zero
        return model.bandwidth * math.log2(
            1.0 + n * model.signal / (model.noise + (n - 1) * L))
    if model.kind == "constant":
        return float(n)
    if model.kind == "discrete-indicator":
        return n / (1.0 + model.v * (n - 1))
    return n * model.bounds[0]


# --------------------------------------------------------------------------
# Mark and interarrival laws

@dataclass(frozen=True)
class HeightLaw:
    """Distribution of the work attached to an arrival."""

    family: str                   # "exponential" | "deterministic" | "sampler"
    value: float = 1.0            # mean (exponential) or the fixed height
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    @staticmethod
    def exponential(mean: float = 1.0) -> "HeightLaw":
        if mean <= 0:
            raise InvalidArgumentError("mean height must be positive")
        return HeightLaw("exponential", value=mean)

    @staticmethod
    def deterministic(value: float) -> "HeightLaw":
        if value <= 0:
            raise InvalidArgumentError("height must be positive")
        return HeightLaw("deterministic", value=value)

    @staticmethod
    def from_sampler(fn: Callable[[np.random.Generator, int], np.ndarray]) -> "HeightLaw":
        return HeightLaw("sampler", sampler=fn, value=math.nan)

    @property
    def mean(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(self.value, n)
        if self.family == "deterministic":
            return np.full(n, self.value)
        return np.asarray(self.sampler(rng, n), dtype=float)


@dataclass(frozen=True)
class MarkModel:
    """Joint mark law: exclusion set and height, drawn independently."""

    exclusion: ExclusionLaw
    height: HeightLaw = HeightLaw.exponential(1.0)


@dataclass(frozen=True)
class InterarrivalLaw:
    """Renewal interarrival family; the mean is pinned by the intensity."""

    family: str = "exponential"   # exponential | deterministic | uniform | gamma
    shape: float = 1.0            # gamma shape

    def sample(self, rng: np.random.Generator, n: int, mean: float) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(mean, n)
        if self.family == "deterministic":
            return np.full(n, mean)
        if self.family == "uniform":
            return rng.uniform(0.0, 2.0 * mean, n)
        if self.family == "gamma":
            return rng.gamma(self.shape, mean / self.shape, n)
        raise UnsupportedModelError(self.family)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to generate and serve an arrival stream."""

    space: Space
    intensity: float                      # arrivals per unit time per unit volume
    marks: MarkModel
    rate_model: RateModel = field(default_factory=RateModel.shannon)
    interarrival: InterarrivalLaw = InterarrivalLaw()
    scenario_id: str = "scenario"

    def __post_init__(self):
        if self.intensity < 0:
            raise InvalidArgumentError("intensity must be >= 0")

    @property
    def total_rate(self) -> float:
        """Arrival rate over the whole space."""
        return self.intensity * self.space.measure


@dataclass(frozen=True)
class Arrival:
    """One marked arrival."""

    id: int
    time: float
    x: Point
    S: ExclusionSet
    h: float


class StreamChunks:
    """Chunked array generator for an arrival stream.

    Draw order inside each fixed-size chunk: interarrival gaps, locations,
    exclusion half-extents, heights.  The chunking makes prefixes stable: the
    first n arrivals do not depend on how many are consumed in total.
    """

    def __init__(self, scenario: Scenario, seed: int, replication: int = 0,
                 with_times: bool = True, chunk: int = STREAM_CHUNK):
        self.scenario = scenario
        self.rng = rng_mod.generator(seed, replication)
        self.with_times = with_times
        self.chunk = chunk
        self._clock = 0.0
        if with_times and scenario.total_rate <= 0:
            raise InvalidArgumentError("a timed stream needs positive intensity")

    def __iter__(self) -> Iterator[tuple]:
        sc = self.scenario
        sp = sc.space
        while True:
            n = self.chunk
            if self.with_times:
                gaps = sc.interarrival.sample(self.rng, n, 1.0 / sc.total_rate)
                times = self._clock + np.cumsum(gaps)
                self._clock = float(times[-1])
            else:
                times = None
            if sp.is_discrete:
                xs = self.rng.integers(1, sp.n_servers + 1, n).astype(np.int64)
            else:
                w = sp.half_width
                xs = self.rng.uniform(-w, w, (n, sp.dimension))
            radii = sc.marks.exclusion.sample_half_extents(self.rng, n, sp)
            heights = sc.marks.height.sample(self.rng, n)
            yield times, xs, radii, heights


def sample_stream_arrays(scenario: Scenario, count: int, seed: int,
                         replication: int = 0) -> tuple:
    """First ``count`` arrivals as (times, xs, half_extents, heights) arrays."""
    if count < 0:
        raise InvalidArgumentError("count must be >= 0")
    sp = scenario.space
    if count == 0:
        xs = (np.empty((0,), np.int64) if sp.is_discrete
              else np.empty((0, sp.dimension)))
        return np.empty(0), xs, np.empty(0), np.empty(0)
    parts = []
    got = 0
    for chunk in StreamChunks(scenario, seed, replication):
        parts.append(chunk)
        got += len(chunk[3])
        if got >= count:
            break
    times = np.concatenate([p[0] for p in parts])[:count]
    xs = np.concatenate([p[1] for p in parts])[:count]
    radii = np.concatenate([p[2] for p in parts])[:count]
    heights = np.concatenate([p[3] for p in parts])[:count]
    return times, xs, radii, heights


def arrivals_from_arrays(times, xs, radii, heights, sp: Space,
                         law: ExclusionLaw) -> List[Arrival]:
    """Materialize Arrival objects from stream arrays."""
    out = []
    for i in range(len(heights)):
        x = int(xs[i]) if sp.is_discrete else tuple(np.atleast_1d(xs[i]))
        out.append(Arrival(id=i, time=float(times[i]), x=x,
                           S=law.set_at(x, float(radii[i]), sp),
                           h=float(heights[i])))
    return out


def sample_stream(scenario: Scenario, count: int, seed: int,
                  replication: int = 0) -> List[Arrival]:
    """First ``count`` arrivals of the marked stream, as objects."""
    times, xs, radii, heights = sample_stream_arrays(scenario, count, seed,
                                                     replication)
    return arrivals_from_arrays(times, xs, radii, heights, scenario.space,
                                scenario.marks.exclusion)
