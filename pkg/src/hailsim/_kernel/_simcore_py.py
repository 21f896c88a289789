"""Pure-Python array kernel: the fallback when the extension is unavailable.

Implements exactly the same dynamics as ``hailsim.engine.Engine`` on flat
arrays, with the same floating-point operation order as the Cython kernel,
so the two backends produce interchangeable results.  See the package
docstring of :mod:`hailsim._kernel` for the calling convention.
"""

from __future__ import annotations

import math
from bisect import insort

import numpy as np

from ..errors import NumericFaultError

ARRIVAL = 0
DEPARTURE = 1


def _dist(xs, i, j, wrap_len, dim):
    dx = abs(xs[i, 0] - xs[j, 0]) % wrap_len
    if dx > wrap_len - dx:
        dx = wrap_len - dx
    if dim == 1:
        return dx
    dy = abs(xs[i, 1] - xs[j, 1]) % wrap_len
    if dy > wrap_len - dy:
        dy = wrap_len - dy
    return math.sqrt(dx * dx + dy * dy)


def simulate(times, xs, radii, heights, dim, wrap_len, rate_kind,
             b=1.0, s=1.0, w=0.05, cap=1.0, exponent=4.0, v=1.0, reach=0.0,
             gate=0.0, saturated=False, eps_work=1e-12,
             max_events=-1, max_time=math.inf, want_events=False):
    n = len(heights)
    xs = np.ascontiguousarray(xs, dtype=np.float64).reshape(n, dim)
    radii = np.asarray(radii, dtype=np.float64)
    heights = np.asarray(heights, dtype=np.float64)
    if times is None or saturated:
        times = np.zeros(n)
    times = np.asarray(times, dtype=np.float64)

    z = heights.copy()
    status = np.zeros(n, dtype=np.int8)      # 0 unseen, 1 waiting, 2 active, 3 gone
    pred = np.zeros(n, dtype=np.int64)
    starts = np.full(n, math.nan)
    departs = np.full(n, math.nan)
    present = []          # insertion order
    active = []           # ascending customer index
    neg_exp = -exponent

    ev_kind, ev_time, ev_id, ev_active = [], [], [], []

    def atten(r):
        if r <= 0.0:
            return cap
        val = r ** neg_exp
        return cap if val > cap else val

    def service_rate(i):
        if rate_kind == 1:
            return 1.0
        if rate_kind == 0:
            interference = 0.0
            for j in active:
                if j != i:
                    interference += atten(_dist(xs, j, i, wrap_len, dim))
            return b * math.log2(1.0 + s / (w + interference))
        near = 0
        for j in active:
            if j != i and _dist(xs, j, i, wrap_len, dim) <= reach:
                near += 1
        return 1.0 / (1.0 + v * near)

    def insert(i, clock):
        cnt = 0
        for j in present:
            if _dist(xs, i, j, wrap_len, dim) <= radii[i] + radii[j]:
                cnt += 1
        pred[i] = cnt
        present.append(i)
        if cnt == 0:
            status[i] = 2
            starts[i] = clock
            insort(active, i)
        else:
            status[i] = 1

    # customers arriving strictly before the gate (or everyone, in a
    # saturated run) are present from relative time 0 with index precedence
    pre = n if saturated else int(np.searchsorted(times, gate, side="left"))
    for i in range(pre):
        insert(i, 0.0)

    clock = 0.0
    i_next = pre
    n_events = 0
    max_active = len(active)
    fault = ""

    while True:
        if max_events >= 0 and n_events >= max_events:
            break
        # next departure among active customers (lowest index wins ties)
        q = math.inf
        u = -1
        rates = []
        for i in active:
            r = service_rate(i)
            if not (r > 0.0) or r == math.inf or r != r:
                fault = f"rate {r} for customer {i}"
                break
            rates.append(r)
            p = 0.0 if z[i] <= eps_work * heights[i] else z[i] / r
            if p < q:
                q, u = p, i
        if fault:
            break
        tau = (times[i_next] - gate) - clock if i_next < n else math.inf
        dt = q if (u >= 0 and q <= tau) else tau
        if dt == math.inf:
            break
        if clock + dt > max_time:
            clock = max_time
            break

        for k, i in enumerate(active):
            z[i] -= dt * rates[k]
        clock += dt

        if u >= 0 and q <= tau:
            z[u] = 0.0
            status[u] = 3
            departs[u] = clock
            active.remove(u)
            present.remove(u)
            for j in present:
                if status[j] == 1 and j > u and \
                        _dist(xs, u, j, wrap_len, dim) <= radii[u] + radii[j]:
                    pred[j] -= 1
                    if pred[j] == 0:
                        status[j] = 2
                        starts[j] = clock
                        insort(active, j)
            kind, who = DEPARTURE, u
        else:
            who = i_next
            insert(who, clock)
            i_next += 1
            kind = ARRIVAL

        n_events += 1
        if len(active) > max_active:
            max_active = len(active)
        if want_events:
            ev_kind.append(kind)
            ev_time.append(clock)
            ev_id.append(who)
            ev_active.append(len(active))

    if fault:
        raise NumericFaultError(f"{fault} at relative clock {clock}")

    return {
        "starts": starts,
        "departs": departs,
        "final_time": clock,
        "n_events": n_events,
        "max_active": max_active,
        "pending": n - i_next,
        "in_system": len(present),
        "ev_kind": np.asarray(ev_kind, dtype=np.int8),
        "ev_time": np.asarray(ev_time, dtype=np.float64),
        "ev_id": np.asarray(ev_id, dtype=np.int64),
        "ev_active": np.asarray(ev_active, dtype=np.int64),
    }
