"""Event-driven dynamics: exclusion precedence plus state-dependent rates.

The state is a DAG over the customers currently present.  When a customer
arrives it receives a precedence edge from every present customer whose
exclusion set intersects its own; customers with no predecessor are *active*
(in service).  Active customers drain their residual work at the current
rate-model rates, and each event is either the next departure or the next
arrival, whichever is due first (departures win exact ties; among
simultaneous departures the lowest id leaves first).

This module is the readable reference implementation.  The array kernels in
``hailsim._kernel`` implement the same dynamics for the hot Monte Carlo
paths and are tested against this engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .arrivals import Arrival, RateModel, rate
from .errors import InvalidArgumentError, NumericFaultError
from .geometry import ExclusionSet, Point, Space, intersects


@dataclass(frozen=True)
class EngineConfig:
    eps_work: float = 1e-12          # relative residual snap: z <= eps*h departs
    check_invariants: bool = False   # O(|U|^2) conflict-freedom audit per event
    check_rate_bounds: bool = False  # enforce declared custom-rate bounds


@dataclass(frozen=True)
class TraceEvent:
    kind: str          # "arrival" | "departure"
    time: float
    id: int
    x: Point
    radius: float      # exclusion half-extent descriptor (inf = whole space)
    active_count: int


@dataclass
class CustomerRecord:
    arrival: float
    start: Optional[float] = None
    departure: Optional[float] = None

    @property
    def waiting(self) -> Optional[float]:
        return None if self.start is None else self.start - self.arrival


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    customers: Dict[int, CustomerRecord] = field(default_factory=dict)
    final_time: float = 0.0
    n_arrivals: int = 0
    n_departures: int = 0
    max_active: int = 0

    def mean_waiting(self) -> float:
        waits = [c.waiting for c in self.customers.values() if c.start is not None]
        return sum(waits) / len(waits) if waits else 0.0

    def mean_sojourn(self) -> float:
        drt = [c.departure - c.arrival for c in self.customers.values()
               if c.departure is not None]
        return sum(drt) / len(drt) if drt else 0.0


class _Node:
    __slots__ = ("id", "x", "S", "h", "z", "arrival", "start", "preds",
                 "succs", "served")

    def __init__(self, a: Arrival):
        self.id = a.id
        self.x = a.x
        self.S = a.S
        self.h = a.h
        self.z = a.h
        self.arrival = a.time
        self.start: Optional[float] = None
        self.preds: set = set()
        self.succs: set = set()
        self.served = 0.0


class Engine:
    """Stepwise simulator over a prescribed arrival sequence."""

    def __init__(self, space: Space, rate_model: RateModel,
                 arrivals: Iterable[Arrival] = (),
                 config: EngineConfig = EngineConfig()):
        self.space = space
        self.rate_model = rate_model
        self.config = config
        self.clock = 0.0
        self.nodes: Dict[int, _Node] = {}
        self.active: set = set()
        self._pending: Iterator[Arrival] = iter(arrivals)
        self._next: Optional[Arrival] = next(self._pending, None)
        self._arrival_cap = math.inf   # admit arrivals strictly before this
        self.trace = Trace()

    # -- state inspection ---------------------------------------------------

    def active_config(self) -> List[Tuple[Point, int]]:
        """Sorted (location, id) pairs of the customers in service."""
        return [(self.nodes[i].x, i) for i in sorted(self.active)]

    @property
    def n_present(self) -> int:
        return len(self.nodes)

    def _rates(self) -> Dict[int, float]:
        cfg = self.active_config()
        out = {}
        for _, i in cfg:
            r = rate(self.rate_model, i, cfg, self.space,
                     check_bounds=self.config.check_rate_bounds)
            if not (r > 0) or not math.isfinite(r):
                raise NumericFaultError(
                    f"rate {r} for customer {i} at clock {self.clock}")
            out[i] = r
        return out

    # -- events ---------------------------------------------------------------

    def _elapse(self, dt: float, rates: Dict[int, float]) -> None:
        if dt < 0 or not math.isfinite(dt):
            raise NumericFaultError(f"elapsed time {dt} at clock {self.clock}")
        for i in sorted(rates):
            node = self.nodes[i]
            work = dt * rates[i]
            node.z -= work
            node.served += work
        self.clock += dt

    def _emit(self, kind: str, node: _Node) -> TraceEvent:
        ev = TraceEvent(kind, self.clock, node.id, node.x,
                        node.S.half_extent(self.space), len(self.active))
        self.trace.events.append(ev)
        self.trace.final_time = self.clock
        self.trace.max_active = max(self.trace.max_active, len(self.active))
        return ev

    def _admit(self, a: Arrival) -> TraceEvent:
        node = _Node(a)
        for other in self.nodes.values():
            if intersects(other.S, node.S, self.space):
                node.preds.add(other.id)
                other.succs.add(node.id)
        self.nodes[node.id] = node
        if not node.preds:
            node.start = self.clock
            self.active.add(node.id)
        self.trace.customers[node.id] = CustomerRecord(arrival=a.time,
                                                       start=node.start)
        self.trace.n_arrivals += 1
        self._next = next(self._pending, None)
        return self._emit("arrival", node)

    def _depart(self, u: int) -> TraceEvent:
        node = self.nodes.pop(u)
        node.z = 0.0
        self.active.discard(u)
        for s in sorted(node.succs):
            succ = self.nodes[s]
            succ.preds.discard(u)
            if not succ.preds:
                succ.start = self.clock
                self.active.add(s)
                self.trace.customers[s].start = self.clock
        self.trace.customers[u].departure = self.clock
        self.trace.n_departures += 1
        return self._emit("departure", node)

    def _next_arrival_gap(self) -> float:
        if self._next is None or self._next.time >= self._arrival_cap:
            return math.inf
        gap = self._next.time - self.clock
        if gap < 0:
            raise InvalidArgumentError(
                f"arrival {self._next.id} at {self._next.time} is in the past "
                f"(clock {self.clock}); arrivals must be time-ordered")
        return gap

    def step(self) -> Optional[TraceEvent]:
        """Process one event; None when neither a departure nor an arrival is due."""
        rates = self._rates()
        eps = self.config.eps_work
        q = math.inf
        u = None
        for i in sorted(rates):
            node = self.nodes[i]
            p = 0.0 if node.z <= eps * node.h else node.z / rates[i]
            if p < q:
                q, u = p, i
        tau = self._next_arrival_gap()
        if u is not None and q <= tau:
            self._elapse(q, rates)
            ev = self._depart(u)
        elif math.isfinite(tau):
            self._elapse(tau, rates)
            ev = self._admit(self._next)
        else:
            return None
        if self.config.check_invariants:
            self._audit()
        return ev

    def peek_next_time(self) -> float:
        """Absolute time of the next event (inf when idle)."""
        rates = self._rates()
        eps = self.config.eps_work
        q = math.inf
        for i, r in rates.items():
            node = self.nodes[i]
            p = 0.0 if node.z <= eps * node.h else node.z / r
            q = min(q, p)
        return self.clock + min(q, self._next_arrival_gap())

    def run(self, max_events: Optional[int] = None,
            max_time: Optional[float] = None,
            empty_after: Optional[float] = None) -> Trace:
        """Run until a stop condition triggers or no event is due."""
        if max_events is None and max_time is None and empty_after is None:
            raise InvalidArgumentError("need at least one stop condition")
        if empty_after is not None:
            self._arrival_cap = empty_after
        n = 0
        while True:
            if max_events is not None and n >= max_events:
                break
            if max_time is not None and self.peek_next_time() > max_time:
                self.clock = max(self.clock, max_time)
                self.trace.final_time = self.clock
                break
            ev = self.step()
            if ev is None:
                break
            n += 1
        return self.trace

    def time_to_empty(self) -> float:
        """Time to drain the current backlog with arrivals disabled.

        Non-destructive: runs on a copy of the present state.
        """
        clone = Engine(self.space, self.rate_model, (), self.config)
        clone.clock = self.clock
        for i, node in self.nodes.items():
            c = _Node(Arrival(node.id, node.arrival, node.x, node.S, node.h))
            c.z = node.z
            c.start = node.start
            c.preds = set(node.preds)
            c.succs = set(node.succs)
            clone.nodes[i] = c
            clone.trace.customers[i] = CustomerRecord(arrival=node.arrival,
                                                      start=node.start)
        clone.active = set(self.active)
        start = clone.clock
        while clone.nodes:
            if clone.step() is None:
                raise NumericFaultError("stalled while draining")
        return clone.clock - start

    # -- debug audit ----------------------------------------------------------

    def _audit(self) -> None:
        ids = sorted(self.active)
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                if intersects(self.nodes[ids[a]].S, self.nodes[ids[b]].S,
                              self.space):
                    raise NumericFaultError(
                        f"active customers {ids[a]} and {ids[b]} conflict")
        for i, node in self.nodes.items():
            if i not in self.active and not node.preds:
                raise NumericFaultError(f"waiting customer {i} has no predecessor")
            if node.z < -1e-9 * max(node.h, 1.0):
                raise NumericFaultError(f"negative residual on customer {i}")
            for p in node.preds:
                if p not in self.nodes:
                    raise NumericFaultError(f"dangling predecessor {p} of {i}")


def run_scenario(scenario, count: int, seed: int, replication: int = 0,
                 config: EngineConfig = EngineConfig(),
                 max_events: Optional[int] = None,
                 max_time: Optional[float] = None) -> Trace:
    """Convenience: sample ``count`` arrivals from the scenario and run.

    Stops after all sampled arrivals have departed unless a tighter stop is
    given.
    """
    from .arrivals import sample_stream
    arrivals = sample_stream(scenario, count, seed, replication)
    eng = Engine(scenario.space, scenario.rate_model, arrivals, config)
    if max_events is None and max_time is None:
        max_events = 2 * count + 1
    return eng.run(max_events=max_events, max_time=max_time)
