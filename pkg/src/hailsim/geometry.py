"""Spaces, exclusion sets, cover chains, and coverage probabilities.

Three spaces are supported:

* ``torus-1d``: the interval [-W, W) with endpoints glued,
* ``torus-2d``: the square [-W, W)^2 with opposite edges glued,
* ``discrete-circle``: servers 1..N on a cycle (N even).

All distances are wrapped (shortest path on the torus / cycle).  Exclusion
sets are closed; boundary tangency counts as intersection and as coverage.
A ball whose radius reaches the wrapped diameter is equivalent to the whole
space and is treated as such by every predicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, UnsupportedModelError

Point = Union[int, Sequence[float], np.ndarray]

CONTINUOUS_KINDS = ("torus-1d", "torus-2d")


@dataclass(frozen=True)
class Space:
    """A bounded homogeneous space on which arrivals land."""

    kind: str
    half_width: float = 0.0   # W, continuous kinds
    n_servers: int = 0        # N, discrete kind

    def __post_init__(self):
        if self.kind in CONTINUOUS_KINDS:
            if not (self.half_width > 0):
                raise InvalidArgumentError("half_width must be positive")
        elif self.kind == "discrete-circle":
            if self.n_servers < 2 or self.n_servers % 2:
                raise InvalidArgumentError("n_servers must be even and >= 2")
        else:
            raise InvalidArgumentError(f"unknown space kind {self.kind!r}")

    @staticmethod
    def torus_1d(half_width: float) -> "Space":
        return Space("torus-1d", half_width=half_width)

    @staticmethod
    def torus_2d(half_width: float) -> "Space":
        return Space("torus-2d", half_width=half_width)

    @staticmethod
    def discrete_circle(n_servers: int) -> "Space":
        return Space("discrete-circle", n_servers=n_servers)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete-circle"

    @property
    def dimension(self) -> int:
        return 2 if self.kind == "torus-2d" else 1

    @property
    def measure(self) -> float:
        """Total volume |X|: (2W)^d, or the number of servers."""
        if self.is_discrete:
            return float(self.n_servers)
        return (2.0 * self.half_width) ** self.dimension

    @property
    def diameter(self) -> float:
        """Largest wrapped distance between two points."""
        if self.is_discrete:
            return self.n_servers / 2.0
        return math.sqrt(self.dimension) * self.half_width

    def wrap(self, p: Point) -> Point:
        """Canonical representative of a point (server in 1..N, coords in [-W, W))."""
        if self.is_discrete:
            return int((int(p) - 1) % self.n_servers + 1)
        w = self.half_width
        coords = np.atleast_1d(np.asarray(p, dtype=float))
        if coords.shape != (self.dimension,):
            raise InvalidArgumentError(
                f"point of dimension {coords.shape} on a {self.dimension}-d space")
        return tuple(((coords + w) % (2.0 * w)) - w)


def distance(p: Point, q: Point, sp: Space) -> float:
    """Wrapped distance between two points of ``sp``."""
    if sp.is_discrete:
        n = sp.n_servers
        d = abs(int(p) - int(q)) % n
        return float(min(d, n - d))
    w2 = 2.0 * sp.half_width
    pa = np.atleast_1d(np.asarray(p, dtype=float))
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    diff = np.abs(pa - qa) % w2
    diff = np.minimum(diff, w2 - diff)
    if diff.size == 1:
        return float(diff[0])
    # explicit sqrt-of-squares so the compiled kernel computes bit-identical
    # distances
    return math.sqrt(float(diff[0]) ** 2 + float(diff[1]) ** 2)


def distance_to_point(xs: np.ndarray, q: Point, sp: Space) -> np.ndarray:
    """Vectorized wrapped distance from each row of ``xs`` to the point ``q``."""
    if sp.is_discrete:
        n = sp.n_servers
        arr = np.asarray(xs, dtype=np.int64).reshape(-1)
        d = np.abs(arr - int(q)) % n
        return np.minimum(d, n - d).astype(float)
    w2 = 2.0 * sp.half_width
    qa = np.asarray(sp.wrap(q), dtype=float)
    diff = np.abs(np.atleast_2d(xs) - qa) % w2
    diff = np.minimum(diff, w2 - diff)
    return np.sqrt((diff * diff).sum(axis=1))


# --------------------------------------------------------------------------
# Exclusion sets

@dataclass(frozen=True)
class ExclusionSet:
    """A closed region blocked by a customer.

    Variants: ``ball(center, radius)`` on continuous spaces, ``interval
    (center, width)`` (odd width, in servers) on the discrete circle, and
    ``whole-space`` on either.
    """

    variant: str                      # "ball" | "interval" | "whole-space"
    center: Optional[Point] = None
    radius: float = 0.0               # ball radius, or interval half-width
    width: int = 0                    # interval width (odd), 0 otherwise

    @staticmethod
    def ball(center: Sequence[float], radius: float) -> "ExclusionSet":
        if radius < 0 or not math.isfinite(radius):
            raise InvalidArgumentError("ball radius must be finite and >= 0")
        return ExclusionSet("ball", center=tuple(float(c) for c in center),
                            radius=float(radius))

    @staticmethod
    def interval(center: int, width: int) -> "ExclusionSet":
        if width < 1 or width % 2 == 0:
            raise InvalidArgumentError("interval width must be odd and >= 1")
        return ExclusionSet("interval", center=int(center), width=int(width),
                            radius=(width - 1) / 2.0)

    @staticmethod
    def whole_space() -> "ExclusionSet":
        return ExclusionSet("whole-space")

    def half_extent(self, sp: Space) -> float:
        """Radius descriptor: ball radius / interval half-width / +inf."""
        if self.variant == "whole-space":
            return math.inf
        return self.radius

    def is_whole(self, sp: Space) -> bool:
        """True when the set is (equivalent to) the whole space."""
        return self.half_extent(sp) >= sp.diameter


def intersects(a: ExclusionSet, b: ExclusionSet, sp: Space) -> bool:
    """Closed-set intersection test; tangency counts."""
    ra, rb = a.half_extent(sp), b.half_extent(sp)
    if math.isinf(ra) or math.isinf(rb):
        return True
    return distance(a.center, b.center, sp) <= ra + rb


def covers(s: ExclusionSet, b: ExclusionSet, sp: Space) -> bool:
    """True iff b is contained in s (closed sets, wrapped metric)."""
    if s.is_whole(sp):
        return True
    if b.is_whole(sp):
        return False
    return distance(s.center, b.center, sp) + b.half_extent(sp) <= s.half_extent(sp)


def covers_from_arrays(xs: np.ndarray, radii: np.ndarray, b: ExclusionSet,
                       sp: Space) -> np.ndarray:
    """Vectorized ``covers`` for marks given as (location, half-extent) arrays.

    ``radii`` uses the half-extent convention (+inf for whole-space marks).
    """
    whole = radii >= sp.diameter
    if b.is_whole(sp):
        return whole
    d = distance_to_point(xs, b.center, sp)
    return whole | (d + b.half_extent(sp) <= radii)


# --------------------------------------------------------------------------
# Exclusion-set laws (the S-part of the mark distribution)

@dataclass(frozen=True)
class ExclusionLaw:
    """Distribution of the exclusion set attached to an arrival.

    Families: ``fixed-ball`` (radius R), ``exponential-ball`` (mean radius),
    ``whole-space``, ``interval`` (fixed odd width, discrete spaces), and
    ``sampler`` (a callable ``(rng, n) -> half-extent array`` for Monte Carlo
    paths that have no closed form).
    """

    family: str
    radius: float = 0.0       # R for fixed-ball, mean for exponential-ball
    width: int = 0            # interval width
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    @staticmethod
    def fixed_ball(radius: float) -> "ExclusionLaw":
        if radius < 0:
            raise InvalidArgumentError("radius must be >= 0")
        return ExclusionLaw("fixed-ball", radius=float(radius))

    @staticmethod
    def exponential_ball(mean: float) -> "ExclusionLaw":
        if mean <= 0:
            raise InvalidArgumentError("mean radius must be positive")
        return ExclusionLaw("exponential-ball", radius=float(mean))

    @staticmethod
    def whole_space() -> "ExclusionLaw":
        return ExclusionLaw("whole-space")

    @staticmethod
    def fixed_interval(width: int) -> "ExclusionLaw":
        if width < 1 or width % 2 == 0:
            raise InvalidArgumentError("interval width must be odd and >= 1")
        return ExclusionLaw("interval", width=int(width))

    @staticmethod
    def from_sampler(fn: Callable[[np.random.Generator, int], np.ndarray]) -> "ExclusionLaw":
        return ExclusionLaw("sampler", sampler=fn)

    def sample_half_extents(self, rng: np.random.Generator, n: int,
                            sp: Space) -> np.ndarray:
        """Draw n half-extent descriptors (+inf encodes whole-space)."""
        if self.family == "fixed-ball":
            return np.full(n, self.radius)
        if self.family == "exponential-ball":
            return rng.exponential(self.radius, n)
        if self.family == "whole-space":
            return np.full(n, np.inf)
        if self.family == "interval":
            return np.full(n, (self.width - 1) / 2.0)
        if self.family == "sampler":
            out = np.asarray(self.sampler(rng, n), dtype=float)
            if out.shape != (n,):
                raise InvalidArgumentError("sampler must return shape (n,)")
            return out
        raise UnsupportedModelError(self.family)

    def set_at(self, x: Point, half_extent: float, sp: Space) -> ExclusionSet:
        """Materialize the exclusion-set object for one arrival."""
        if math.isinf(half_extent):
            return ExclusionSet.whole_space()
        if sp.is_discrete:
            return ExclusionSet.interval(int(x), int(round(2 * half_extent + 1)))
        return ExclusionSet.ball(sp.wrap(x), half_extent)

    def guaranteed_half_extent(self) -> float:
        """Half-extent every realization is guaranteed to reach (0 if none)."""
        if self.family == "fixed-ball":
            return self.radius
        if self.family == "interval":
            return (self.width - 1) / 2.0
        if self.family == "whole-space":
            return math.inf
        return 0.0


# --------------------------------------------------------------------------
# Cover chains

@dataclass(frozen=True)
class CoverChain:
    """Ordered sets B_1..B_k used to define zigzag events.

    Consecutive sets intersect, each adds new area, and the union is the
    whole space; ``probabilities`` optionally stores P(B_i is covered by a
    random exclusion set).
    """

    sets: tuple
    probabilities: Optional[tuple] = None

    @property
    def k(self) -> int:
        return len(self.sets)


@dataclass
class CoverChainReport:
    overlap_ok: bool
    new_area_ok: bool
    coverage_ok: bool
    positivity_ok: Optional[bool]
    overlap_failures: list = field(default_factory=list)   # indices i: B_i, B_{i+1} disjoint
    new_area_failures: list = field(default_factory=list)  # indices i: B_i adds nothing
    coverage_witness: Optional[Point] = None               # an uncovered point

    @property
    def ok(self) -> bool:
        checks = [self.overlap_ok, self.new_area_ok, self.coverage_ok]
        if self.positivity_ok is not None:
            checks.append(self.positivity_ok)
        return all(checks)


def build_cover_chain(sp: Space, guaranteed_radius: float) -> CoverChain:
    """Construct a cover chain for marks that always reach ``guaranteed_radius``.

    Continuous spaces get a boustrophedon grid of balls; the pitch is chosen
    strictly above the ball radius (and at most sqrt(2) times it) so that
    every ball past the first adds area not covered by its predecessors while
    the union still covers the space.  A radius at or above the wrapped
    diameter collapses to the single whole-space set.  On the discrete circle
    the chain is made of intervals of the guaranteed width stepping by
    width-1 servers.
    """
    if guaranteed_radius <= 0:
        raise InvalidArgumentError("guaranteed_radius must be positive")
    if guaranteed_radius >= sp.diameter:
        return CoverChain((ExclusionSet.whole_space(),))

    if sp.is_discrete:
        half = int(guaranteed_radius)
        if half < 1:
            raise InvalidArgumentError(
                "no valid chain for single-server exclusion (width 1): "
                "consecutive sets could never intersect")
        width = 2 * half + 1
        n = sp.n_servers
        step = width - 1
        k = -(-n // step)  # ceil
        first = 1 + half
        sets = tuple(ExclusionSet.interval((first + i * step - 1) % n + 1, width)
                     for i in range(k))
        return CoverChain(sets)

    w = sp.half_width
    rho0 = guaranteed_radius / 2.0
    n_axis = max(2, math.ceil(2.0 * w / (1.2 * rho0)))
    pitch = 2.0 * w / n_axis
    rho = min(rho0, 0.85 * pitch)
    offsets = [-w + j * pitch for j in range(n_axis)]
    if sp.dimension == 1:
        centers = [(x,) for x in offsets]
    else:
        centers = []
        for i, y in enumerate(offsets):
            row = offsets if i % 2 == 0 else offsets[::-1]
            centers.extend((x, y) for x in row)
    return CoverChain(tuple(ExclusionSet.ball(c, rho) for c in centers))


def _grid_points(sp: Space, resolution: float) -> np.ndarray:
    w = sp.half_width
    n = max(2, int(math.ceil(2.0 * w / resolution)))
    axis = -w + (np.arange(n) + 0.5) * (2.0 * w / n)
    if sp.dimension == 1:
        return axis[:, None]
    gx, gy = np.meshgrid(axis, axis)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _membership(points: np.ndarray, s: ExclusionSet, sp: Space) -> np.ndarray:
    if s.is_whole(sp):
        return np.ones(len(points), dtype=bool)
    return distance_to_point(points, s.center, sp) <= s.radius


def validate_cover_chain(chain: CoverChain, sp: Space,
                         resolution: Optional[float] = None) -> CoverChainReport:
    """Check chain assumptions: (a) consecutive overlap, (b) new area,
    (c) full coverage, and (d) positive cover probabilities when stored.

    (a) uses the exact intersection predicate.  On continuous spaces (b) and
    (c) are checked by grid sampling (default resolution: an eighth of the
    smallest radius); on the discrete circle they are exact enumerations.
    """
    sets = chain.sets
    if not sets:
        raise InvalidArgumentError("empty chain")

    overlap_failures = [i for i in range(len(sets) - 1)
                        if not intersects(sets[i], sets[i + 1], sp)]

    if sp.is_discrete:
        points = np.arange(1, sp.n_servers + 1)[:, None]
    else:
        if resolution is None:
            finite = [s.radius for s in sets if not s.is_whole(sp)]
            resolution = (min(finite) / 8.0) if finite else sp.half_width / 8.0
        points = _grid_points(sp, resolution)

    member = np.column_stack([_membership(points, s, sp) for s in sets])

    new_area_failures = []
    covered_so_far = member[:, 0].copy()
    for i in range(1, len(sets)):
        if not np.any(member[:, i] & ~covered_so_far):
            new_area_failures.append(i)
        covered_so_far |= member[:, i]

    uncovered = ~covered_so_far
    coverage_witness = None
    if np.any(uncovered):
        p = points[int(np.argmax(uncovered))]
        coverage_witness = int(p[0]) if sp.is_discrete else tuple(p)

    positivity_ok = None
    if chain.probabilities is not None:
        positivity_ok = all(p > 0 for p in chain.probabilities)

    return CoverChainReport(
        overlap_ok=not overlap_failures,
        new_area_ok=not new_area_failures,
        coverage_ok=coverage_witness is None,
        positivity_ok=positivity_ok,
        overlap_failures=overlap_failures,
        new_area_failures=new_area_failures,
        coverage_witness=coverage_witness,
    )


# --------------------------------------------------------------------------
# Coverage probabilities

def _ball_area(t: float, sp: Space) -> float:
    """Volume of a wrapped ball of radius t."""
    w = sp.half_width
    if t <= 0:
        return 0.0
    if sp.dimension == 1:
        return min(2.0 * t, 2.0 * w)
    if t <= w:
        return math.pi * t * t
    t = min(t, sp.diameter)
    # disc spilling over the fundamental square: clip four segments
    return math.pi * t * t - 4.0 * (t * t * math.acos(w / t)
                                    - w * math.sqrt(t * t - w * w))


def _ball_perimeter(t: float, sp: Space) -> float:
    """d/dt of ``_ball_area``."""
    w = sp.half_width
    if sp.dimension == 1:
        return 2.0 if t < w else 0.0
    if t <= w:
        return 2.0 * math.pi * t
    if t >= sp.diameter:
        return 0.0
    return t * (2.0 * math.pi - 8.0 * math.acos(w / t))


def cover_probability(b: ExclusionSet, law: ExclusionLaw, sp: Space,
                      n_samples: int = 100_000, seed: int = 0,
                      return_stderr: bool = False):
    """P(a random exclusion set, centered at a uniform point, covers b).

    Closed-form families are evaluated analytically (the exponential-ball
    case by one-dimensional quadrature over the exact wrapped-distance
    density); ``sampler`` laws fall back to Monte Carlo hit counting, with
    the standard error available via ``return_stderr``.
    """
    def _ret(p, se=0.0):
        return (p, se) if return_stderr else p

    if law.family == "whole-space":
        return _ret(1.0)

    if law.family == "sampler":
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        radii = law.sample_half_extents(rng, n_samples, sp)
        if sp.is_discrete:
            xs = rng.integers(1, sp.n_servers + 1, n_samples)[:, None]
        else:
            w = sp.half_width
            xs = rng.uniform(-w, w, (n_samples, sp.dimension))
        hits = covers_from_arrays(xs, radii, b, sp)
        p = float(hits.mean())
        se = math.sqrt(max(p * (1 - p), 0.0) / n_samples)
        return _ret(p, se)

    if sp.is_discrete:
        if law.family != "interval":
            raise UnsupportedModelError(f"{law.family} on a discrete space")
        ws = (law.width - 1) // 2
        if b.is_whole(sp):
            return _ret(1.0 if ws >= sp.diameter else 0.0)
        slack = ws - int(b.half_extent(sp))
        if slack < 0:
            return _ret(0.0)
        return _ret(min(2 * slack + 1, sp.n_servers) / sp.n_servers)

    if law.family not in ("fixed-ball", "exponential-ball"):
        raise UnsupportedModelError(f"{law.family} on a continuous space")

    diam = sp.diameter
    rho = 0.0 if b.is_whole(sp) else b.half_extent(sp)

    if law.family == "fixed-ball":
        r = law.radius
        if r >= diam:
            return _ret(1.0)
        if b.is_whole(sp):
            return _ret(0.0)
        return _ret(_ball_area(r - rho, sp) / sp.measure if r > rho else 0.0)

    # exponential-ball: covers iff R >= min(diam, dist + rho)
    mean = law.radius
    if b.is_whole(sp):
        return _ret(math.exp(-diam / mean))
    t_star = diam - rho
    tail = math.exp(-diam / mean) * (sp.measure - _ball_area(t_star, sp))
    if t_star > 0:
        body, _ = integrate.quad(
            lambda t: math.exp(-(t + rho) / mean) * _ball_perimeter(t, sp),
            0.0, t_star, points=[sp.half_width] if t_star > sp.half_width else None,
            limit=200)
    else:
        body, tail = 0.0, math.exp(-diam / mean) * sp.measure
    return _ret((body + tail) / sp.measure)


def chain_cover_probabilities(chain: CoverChain, law: ExclusionLaw,
                              sp: Space, **kw) -> CoverChain:
    """Return a copy of the chain with P(B_i covered) filled in."""
    probs = tuple(cover_probability(b, law, sp, **kw) for b in chain.sets)
    return CoverChain(chain.sets, probs)


def packing_bound(sp: Space, radius: float) -> int:
    """Coarse area bound on how many fixed-radius exclusion balls can be
    pairwise disjoint (hence on the active-set size for such marks)."""
    if sp.is_discrete:
        return sp.n_servers
    if radius <= 0:
        return np.iinfo(np.int64).max
    w2 = 2.0 * sp.half_width
    if sp.dimension == 1:
        return math.ceil((w2 + radius) / radius)
    return math.ceil((w2 + radius) ** 2 / (math.pi * (radius / 2.0) ** 2))
