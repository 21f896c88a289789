# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled array kernel.

Same dynamics and floating-point operation order as ``_simcore_py``; see
that module and :mod:`hailsim._kernel` for the calling convention.
"""

import numpy as np

from libc.math cimport INFINITY, fabs, fmod, log2, pow, sqrt

from ..errors import NumericFaultError

ARRIVAL = 0
DEPARTURE = 1


cdef inline double _dist(double[:, ::1] xs, Py_ssize_t i, Py_ssize_t j,
                         double wrap_len, int dim) noexcept nogil:
    cdef double dx = fmod(fabs(xs[i, 0] - xs[j, 0]), wrap_len)
    cdef double dy
    if dx > wrap_len - dx:
        dx = wrap_len - dx
    if dim == 1:
        return dx
    dy = fmod(fabs(xs[i, 1] - xs[j, 1]), wrap_len)
    if dy > wrap_len - dy:
        dy = wrap_len - dy
    return sqrt(dx * dx + dy * dy)


cdef inline double _atten(double r, double cap, double neg_exp) noexcept nogil:
    cdef double val
    if r <= 0.0:
        return cap
    val = pow(r, neg_exp)
    return cap if val > cap else val


def simulate(times, xs, radii, heights, int dim, double wrap_len, int rate_kind,
             double b=1.0, double s=1.0, double w=0.05, double cap=1.0,
             double exponent=4.0, double v=1.0, double reach=0.0,
             double gate=0.0, bint saturated=False, double eps_work=1e-12,
             long long max_events=-1, double max_time=INFINITY,
             bint want_events=False):
    cdef Py_ssize_t n = len(heights)
    xs_arr = np.ascontiguousarray(xs, dtype=np.float64).reshape(n, dim)
    radii_arr = np.asarray(radii, dtype=np.float64)
    heights_arr = np.asarray(heights, dtype=np.float64)
    if times is None or saturated:
        times_arr = np.zeros(n)
    else:
        times_arr = np.asarray(times, dtype=np.float64)

    z_arr = heights_arr.copy()
    starts_arr = np.full(n, np.nan)
    departs_arr = np.full(n, np.nan)
    status_arr = np.zeros(n, dtype=np.int8)
    pred_arr = np.zeros(n, dtype=np.int64)
    active_arr = np.empty(n, dtype=np.int64)
    present_arr = np.empty(n, dtype=np.int64)
    rates_arr = np.empty(n, dtype=np.float64)

    cdef double[:, ::1] X = xs_arr
    cdef double[::1] T = times_arr
    cdef double[::1] R = radii_arr
    cdef double[::1] H = heights_arr
    cdef double[::1] Z = z_arr
    cdef double[::1] STARTS = starts_arr
    cdef double[::1] DEPARTS = departs_arr
    cdef signed char[::1] STATUS = status_arr
    cdef long long[::1] PRED = pred_arr
    cdef long long[::1] ACTIVE = active_arr
    cdef long long[::1] PRESENT = present_arr
    cdef double[::1] RATES = rates_arr

    cdef Py_ssize_t n_active = 0, n_present = 0
    cdef double neg_exp = -exponent

    # each customer contributes at most one arrival and one departure event
    ev_cap = 2 * n + 4
    if 0 <= max_events < ev_cap:
        ev_cap = max_events + 4
    ev_kind_arr = np.empty(ev_cap if want_events else 0, dtype=np.int8)
    ev_time_arr = np.empty(ev_cap if want_events else 0, dtype=np.float64)
    ev_id_arr = np.empty(ev_cap if want_events else 0, dtype=np.int64)
    ev_active_arr = np.empty(ev_cap if want_events else 0, dtype=np.int64)
    cdef signed char[::1] EV_KIND = ev_kind_arr
    cdef double[::1] EV_TIME = ev_time_arr
    cdef long long[::1] EV_ID = ev_id_arr
    cdef long long[::1] EV_ACTIVE = ev_active_arr

    cdef Py_ssize_t i, j, k, pos, u, who, i_next, pre, fault_id = -1
    cdef long long cnt, near
    cdef double clock = 0.0, q, p, tau, dt, r, interference, fault_rate = 0.0
    cdef long long n_events = 0
    cdef Py_ssize_t max_active = 0
    cdef int kind
    cdef bint fault = False, departure_due

    # --- initial insertion: everyone before the gate, or the whole heap ----
    if saturated:
        pre = n
    else:
        pre = np.searchsorted(times_arr, gate, side="left")

    for i in range(pre):
        cnt = 0
        for k in range(n_present):
            j = PRESENT[k]
            if _dist(X, i, j, wrap_len, dim) <= R[i] + R[j]:
                cnt += 1
        PRED[i] = cnt
        PRESENT[n_present] = i
        n_present += 1
        if cnt == 0:
            STATUS[i] = 2
            STARTS[i] = 0.0
            # ascending insertion (i is already the largest index so far)
            ACTIVE[n_active] = i
            n_active += 1
        else:
            STATUS[i] = 1

    i_next = pre
    max_active = n_active

    while True:
        if max_events >= 0 and n_events >= max_events:
            break

        q = INFINITY
        u = -1
        for k in range(n_active):
            i = ACTIVE[k]
            if rate_kind == 1:
                r = 1.0
            elif rate_kind == 0:
                interference = 0.0
                for pos in range(n_active):
                    j = ACTIVE[pos]
                    if j != i:
                        interference += _atten(_dist(X, j, i, wrap_len, dim),
                                               cap, neg_exp)
                r = b * log2(1.0 + s / (w + interference))
            else:
                near = 0
                for pos in range(n_active):
                    j = ACTIVE[pos]
                    if j != i and _dist(X, j, i, wrap_len, dim) <= reach:
                        near += 1
                r = 1.0 / (1.0 + v * near)
            if not (r > 0.0) or r == INFINITY or r != r:
                fault = True
                fault_id = i
                fault_rate = r
                break
            RATES[k] = r
            p = 0.0 if Z[i] <= eps_work * H[i] else Z[i] / r
            if p < q:
                q = p
                u = i
        if fault:
            break

        tau = (T[i_next] - gate) - clock if i_next < n else INFINITY
        departure_due = u >= 0 and q <= tau
        dt = q if departure_due else tau
        if dt == INFINITY:
            break
        if clock + dt > max_time:
            clock = max_time
            break

        for k in range(n_active):
            Z[ACTIVE[k]] -= dt * RATES[k]
        clock += dt

        if departure_due:
            Z[u] = 0.0
            STATUS[u] = 3
            DEPARTS[u] = clock
            for k in range(n_active):        # remove from active (keep order)
                if ACTIVE[k] == u:
                    for pos in range(k, n_active - 1):
                        ACTIVE[pos] = ACTIVE[pos + 1]
                    n_active -= 1
                    break
            for k in range(n_present):       # remove from present (swap)
                if PRESENT[k] == u:
                    PRESENT[k] = PRESENT[n_present - 1]
                    n_present -= 1
                    break
            for k in range(n_present):
                j = PRESENT[k]
                if STATUS[j] == 1 and j > u and \
                        _dist(X, u, j, wrap_len, dim) <= R[u] + R[j]:
                    PRED[j] -= 1
                    if PRED[j] == 0:
                        STATUS[j] = 2
                        STARTS[j] = clock
                        pos = n_active
                        while pos > 0 and ACTIVE[pos - 1] > j:
                            ACTIVE[pos] = ACTIVE[pos - 1]
                            pos -= 1
                        ACTIVE[pos] = j
                        n_active += 1
            kind = DEPARTURE
            who = u
        else:
            who = i_next
            cnt = 0
            for k in range(n_present):
                j = PRESENT[k]
                if _dist(X, who, j, wrap_len, dim) <= R[who] + R[j]:
                    cnt += 1
            PRED[who] = cnt
            PRESENT[n_present] = who
            n_present += 1
            if cnt == 0:
                STATUS[who] = 2
                STARTS[who] = clock
                pos = n_active
                while pos > 0 and ACTIVE[pos - 1] > who:
                    ACTIVE[pos] = ACTIVE[pos - 1]
                    pos -= 1
                ACTIVE[pos] = who
                n_active += 1
            else:
                STATUS[who] = 1
            i_next += 1
            kind = ARRIVAL

        if want_events:
            EV_KIND[n_events] = kind
            EV_TIME[n_events] = clock
            EV_ID[n_events] = who
            EV_ACTIVE[n_events] = n_active
        n_events += 1
        if n_active > max_active:
            max_active = n_active

    if fault:
        raise NumericFaultError(
            f"rate {fault_rate} for customer {fault_id} at relative clock {clock}")

    return {
        "starts": starts_arr,
        "departs": departs_arr,
        "final_time": clock,
        "n_events": int(n_events),
        "max_active": int(max_active),
        "pending": int(n - i_next),
        "in_system": int(n_present),
        "ev_kind": ev_kind_arr[:n_events] if want_events else ev_kind_arr,
        "ev_time": ev_time_arr[:n_events] if want_events else ev_time_arr,
        "ev_id": ev_id_arr[:n_events] if want_events else ev_id_arr,
        "ev_active": ev_active_arr[:n_events] if want_events else ev_active_arr,
    }
