"""Zigzag events, block decomposition, and block service times.

A cover chain B_1..B_k cuts the marked arrival stream into blocks at
zigzag events: runs of consecutive marks covering the chain in ascending
then descending order.  A zigzag forces everything before it to drain
before anything after it starts, so the blocks between cut points are
independent and identically distributed (apart from the very first one)
and carry all the information the stability estimator needs.

Cut points are scanned only at index offsets that are multiples of the
zigzag length from the previous cut, so candidate windows tile the stream
and the number of windows per block is geometric.  The ``single`` variant
(one whole-space mark, no doubling) scans every index instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from . import _kernel
from .arrivals import Arrival, RateModel, Scenario, StreamChunks, rate
from .engine import Engine
from .errors import InvalidArgumentError
from .geometry import (CoverChain, ExclusionSet, Space, covers,
                       covers_from_arrays)


@dataclass(frozen=True)
class ZigzagSpec:
    """Cover chain plus the zigzag variant built from it.

    ``doubled`` is the general construction (ascending then descending
    cover runs, length 2k).  ``single`` needs k = 1 with B_1 the whole
    space; the event is then one whole-space mark and no doubling.
    """

    chain: CoverChain
    variant: str = "doubled"

    def __post_init__(self):
        if self.variant not in ("doubled", "single"):
            raise InvalidArgumentError(
                f"variant must be 'doubled' or 'single', got {self.variant!r}")
        if self.variant == "single" and self.chain.k != 1:
            raise InvalidArgumentError(
                "the single variant needs a one-set chain covering the space")

    @staticmethod
    def single() -> "ZigzagSpec":
        return ZigzagSpec(CoverChain((ExclusionSet.whole_space(),)), "single")

    @property
    def k(self) -> int:
        return self.chain.k

    @property
    def period(self) -> int:
        """Spacing of candidate cut points (and tile width of the scan)."""
        return 2 * self.chain.k if self.variant == "doubled" else 1

    @property
    def scan_start(self) -> int:
        """First stream index examined by the scan."""
        return self.chain.k if self.variant == "doubled" else 1

    def required_set(self, offset: int) -> int:
        """Chain index (0-based) a mark at this tile offset must cover."""
        if self.variant == "single":
            return 0
        k = self.chain.k
        return offset if offset < k else 2 * k - 1 - offset

    def validate_for(self, space: Space) -> None:
        if self.variant == "single" and not self.chain.sets[0].is_whole(space):
            raise InvalidArgumentError(
                "the single variant needs B_1 to cover the whole space")
        if self.chain.probabilities is not None and \
                any(p <= 0 for p in self.chain.probabilities):
            raise InvalidArgumentError(
                "chain has a zero cover probability; blocks would never close")


def is_zigzag(marks: Sequence[ExclusionSet], n: int, spec: ZigzagSpec,
              space: Space) -> bool:
    """Whether a zigzag event sits at index ``n`` of a mark sequence.

    Doubled variant: marks n-k..n-1 cover B_1..B_k in order and marks
    n..n+k-1 cover B_k..B_1 in order.  Single variant: mark n covers the
    whole space.
    """
    sets = spec.chain.sets
    k = spec.chain.k
    if spec.variant == "single":
        if not 0 <= n < len(marks):
            raise InvalidArgumentError(f"index {n} out of range")
        return covers(marks[n], ExclusionSet.whole_space(), space)
    if n - k < 0 or n + k - 1 >= len(marks):
        raise InvalidArgumentError(
            f"zigzag at {n} needs marks {n - k}..{n + k - 1}")
    for i in range(k):
        if not covers(marks[n - k + i], sets[i], space):
            return False
    for j in range(k):
        if not covers(marks[n + j], sets[k - 1 - j], space):
            return False
    return True


@dataclass(frozen=True)
class Block:
    """One block of the stream: marks between consecutive cut points.

    Arrays are parallel over the entries in arrival order.  ``times`` are
    relative to the opening arrival (first entry, time 0) and present only
    when the block was sampled with arrival epochs; ``gap_after`` is then
    the time from this opening to the next block's opening.
    """

    space: Space
    xs: np.ndarray
    radii: np.ndarray
    heights: np.ndarray
    k: int
    variant: str
    is_first_block: bool = False
    times: Optional[np.ndarray] = None
    gap_after: Optional[float] = None

    @property
    def nu(self) -> int:
        return len(self.heights)

    @property
    def opening_index(self) -> int:
        return 0

    @property
    def closing_index(self) -> int:
        return self.nu - 1


class BlockSampler:
    """Iterator cutting a mark stream into consecutive blocks.

    The scan origin starts the first block, which therefore has no opening
    zigzag; it is flagged ``is_first_block`` and the estimator drops it.
    Sampling draws marks in fixed-size chunks, so a given (seed,
    replication) pair always yields the same block sequence regardless of
    how many blocks are consumed.
    """

    def __init__(self, scenario: Scenario, spec: ZigzagSpec, seed: int,
                 replication: int = 0, with_times: bool = False):
        spec.validate_for(scenario.space)
        self.scenario = scenario
        self.spec = spec
        self.with_times = with_times
        self._stream = iter(StreamChunks(scenario, seed, replication,
                                         with_times=with_times))

    def __iter__(self) -> Iterator[Block]:
        sp = self.scenario.space
        spec = self.spec
        sets = spec.chain.sets
        P = spec.period
        s0 = spec.scan_start

        buf_t: Optional[np.ndarray] = None
        buf_x = buf_r = buf_h = None
        lo = 0                      # absolute stream index of buffer row 0
        hi = 0                      # one past the last buffered index
        ok_tail = np.empty(0, dtype=bool)
        tiles_done = 0
        emitted = 0

        for times, xs, radii, heights in self._stream:
            n = len(heights)
            if hi == 0:
                buf_t, buf_x, buf_r, buf_h = times, xs, radii, heights
            else:
                if self.with_times:
                    buf_t = np.concatenate([buf_t, times])
                buf_x = np.concatenate([buf_x, xs])
                buf_r = np.concatenate([buf_r, radii])
                buf_h = np.concatenate([buf_h, heights])
            a, hi = hi, hi + n

            # cover tests for the tested positions of this chunk
            t0 = max(a, s0)
            if t0 < hi:
                idx = np.arange(t0, hi)
                ok = np.empty(len(idx), dtype=bool)
                offs = (idx - s0) % P
                for i in range(len(sets)) if spec.variant == "doubled" else (0,):
                    mask = np.zeros(len(idx), dtype=bool)
                    if spec.variant == "doubled":
                        kk = spec.chain.k
                        mask |= offs == i
                        mask |= offs == 2 * kk - 1 - i
                    else:
                        mask[:] = True
                    rows = idx[mask] - lo
                    ok[mask] = covers_from_arrays(buf_x[rows], buf_r[rows],
                                                  sets[i], sp)
                ok_tail = np.concatenate([ok_tail, ok])

            n_tiles = len(ok_tail) // P
            if n_tiles == 0:
                continue
            results = ok_tail[:n_tiles * P].reshape(n_tiles, P).all(axis=1)
            ok_tail = ok_tail[n_tiles * P:]

            origin = lo
            for i in np.nonzero(results)[0]:
                cut = (tiles_done + int(i) + 1) * P
                rows = slice(origin - lo, cut - lo)
                rel = gap = None
                if self.with_times:
                    t_open = buf_t[origin - lo]
                    rel = buf_t[rows] - t_open
                    gap = float(buf_t[cut - lo] - t_open)
                yield Block(sp, buf_x[rows].copy(), buf_r[rows].copy(),
                            buf_h[rows].copy(), spec.chain.k, spec.variant,
                            is_first_block=(emitted == 0),
                            times=None if rel is None else rel.copy(),
                            gap_after=gap)
                emitted += 1
                origin = cut
            tiles_done += n_tiles

            if origin > lo:
                keep = slice(origin - lo, None)
                if self.with_times:
                    buf_t = buf_t[keep].copy()
                buf_x = buf_x[keep].copy()
                buf_r = buf_r[keep].copy()
                buf_h = buf_h[keep].copy()
                lo = origin


def sample_blocks(scenario: Scenario, spec: ZigzagSpec, n_blocks: int,
                  seed: int, replication: int = 0,
                  with_times: bool = False) -> List[Block]:
    """First ``n_blocks`` blocks of the stream (the first one flagged)."""
    if n_blocks < 1:
        raise InvalidArgumentError("n_blocks must be >= 1")
    out: List[Block] = []
    for block in BlockSampler(scenario, spec, seed, replication, with_times):
        out.append(block)
        if len(out) == n_blocks:
            return out
    raise AssertionError("stream ended; StreamChunks is infinite")


def sample_block(scenario: Scenario, spec: ZigzagSpec, seed: int,
                 replication: int = 0, with_times: bool = False) -> Block:
    """One estimation-grade block (the flagged first block is skipped)."""
    return sample_blocks(scenario, spec, 2, seed, replication, with_times)[1]


def block_boundaries(xs: np.ndarray, radii: np.ndarray, spec: ZigzagSpec,
                     space: Space) -> np.ndarray:
    """Cut points of an explicit mark stream, starting at the origin.

    Returns the absolute indices n_1 = 0 < n_2 < ... where blocks open;
    marks at or after the last returned index do not form a complete block.
    """
    n = len(radii)
    P = spec.period
    s0 = spec.scan_start
    sets = spec.chain.sets
    n_tiles = (n - s0) // P
    if n_tiles <= 0:
        return np.array([0], dtype=np.int64)
    idx = np.arange(s0, s0 + n_tiles * P)
    offs = (idx - s0) % P
    ok = np.empty(len(idx), dtype=bool)
    if spec.variant == "single":
        ok[:] = covers_from_arrays(xs[idx], radii[idx], sets[0], space)
    else:
        k = spec.chain.k
        for i in range(k):
            mask = (offs == i) | (offs == 2 * k - 1 - i)
            rows = idx[mask]
            ok[mask] = covers_from_arrays(xs[rows], radii[rows], sets[i], space)
    hits = np.nonzero(ok.reshape(n_tiles, P).all(axis=1))[0]
    return np.concatenate([[0], (hits + 1) * P]).astype(np.int64)


def annotate_blocks(times: Optional[np.ndarray], xs: np.ndarray,
                    radii: np.ndarray, heights: np.ndarray,
                    spec: ZigzagSpec, space: Space) -> List[Block]:
    """Cut an explicit stream into complete blocks.

    Used to reconcile block statistics with a full-system trace over the
    same arrivals; the trailing incomplete block is dropped.
    """
    spec.validate_for(space)
    cuts = block_boundaries(xs, radii, spec, space)
    out = []
    for m in range(len(cuts) - 1):
        a, b = int(cuts[m]), int(cuts[m + 1])
        rel = gap = None
        if times is not None:
            rel = times[a:b] - times[a]
            gap = float(times[b] - times[a])
        out.append(Block(space, xs[a:b], radii[a:b], heights[a:b],
                         spec.chain.k, spec.variant, is_first_block=(m == 0),
                         times=rel, gap_after=gap))
    return out


# --------------------------------------------------------------------------
# Block service times

def _exclusion_from(x, half_extent: float, sp: Space) -> ExclusionSet:
    if half_extent >= sp.diameter:
        return ExclusionSet.whole_space()
    if sp.is_discrete:
        return ExclusionSet.interval(int(x), 2 * int(half_extent) + 1)
    pt = (float(x),) if np.ndim(x) == 0 else tuple(float(c) for c in x)
    return ExclusionSet.ball(pt, float(half_extent))


def _engine_drain(block: Block, model: RateModel, gate: Optional[float]) -> float:
    """Object-engine path for rate models the array kernels cannot run."""
    sp = block.space
    arrivals = []
    next_id = 0
    if gate is not None and gate > 0:
        # virtual whole-space blocker: sized to depart exactly at the gate
        x0 = 1 if sp.is_discrete else (0.0,) * sp.dimension
        solo = rate(model, 0, [(x0, 0)], sp)
        arrivals.append(Arrival(0, 0.0, x0, ExclusionSet.whole_space(),
                                gate * solo))
        next_id = 1
    rel = block.times if gate is not None else np.zeros(block.nu)
    for i in range(block.nu):
        arrivals.append(Arrival(
            next_id + i, float(rel[i]), _x_value(block.xs[i], sp),
            _exclusion_from(block.xs[i], float(block.radii[i]), sp),
            float(block.heights[i])))
    eng = Engine(sp, model, arrivals)
    trace = eng.run(empty_after=len(arrivals))
    last = max(rec.departure for cid, rec in trace.customers.items()
               if cid >= next_id)
    return float(last) - (gate or 0.0)


def _x_value(x, sp: Space):
    if sp.is_discrete:
        return int(x)
    return (float(x),) if np.ndim(x) == 0 else tuple(float(c) for c in x)


def sigma_hat(block: Block, model: RateModel) -> float:
    """Saturated block service time.

    All entries are placed at time 0, keeping index order for precedence,
    and the heap drains to empty; returns the last departure time.
    """
    if block.nu == 0:
        raise InvalidArgumentError("empty block")
    if not _kernel.supports(model):
        return _engine_drain(block, model, gate=None)
    res = _kernel.run_arrays(None, block.xs, block.radii, block.heights,
                             block.space, model, saturated=True)
    return float(np.max(res["departs"]))


def sigma(w: float, block: Block, model: RateModel) -> float:
    """Gated block service time.

    The block runs in isolation behind a virtual whole-space blocker that
    departs at ``w`` (relative to the opening arrival), so nothing starts
    before ``w``; returns the last departure time minus ``w``.
    """
    if block.times is None:
        raise InvalidArgumentError("block carries no arrival times")
    if w < 0:
        raise InvalidArgumentError("gate must be >= 0")
    if block.nu == 0:
        raise InvalidArgumentError("empty block")
    if not _kernel.supports(model):
        return _engine_drain(block, model, gate=w)
    res = _kernel.run_arrays(block.times, block.xs, block.radii,
                             block.heights, block.space, model, gate=w)
    return float(np.max(res["departs"]))
