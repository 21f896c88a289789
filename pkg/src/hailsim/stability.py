"""Stability-threshold estimation and Lindley-chain diagnostics.

The central quantity is the critical arrival intensity lambda_c below
which the system is positive recurrent.  It is estimated from i.i.d.
blocks as ``mean(nu) / (|X| * mean(sigma_hat))``, which equals the
closed-form ``2k / (p_b |X| E sigma_hat)`` in expectation but does not
care which zigzag variant produced the blocks.  Everything here reports
lambda < lambda_c as the stable side.

For scenarios whose zigzag probability is astronomically small (tiny
fixed radii), block sampling cannot close a single block in reasonable
time; ``estimate_lambda_c_bisection`` brackets the threshold instead by
classifying queue drift at trial intensities.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad

from . import _kernel
from . import blocks as blocks_mod
from . import rng as rng_mod
from .arrivals import (PowerLawAttenuation, RateModel, Scenario,
                       arrivals_from_arrays, sample_stream_arrays)
from .blocks import BlockSampler, ZigzagSpec
from .errors import InvalidArgumentError, NumericFaultError
from .geometry import Space

BOOTSTRAP_RESAMPLES = 2000
BOOTSTRAP_STREAM = 2 ** 62      # replication id reserved for resampling draws

# Drift-test knobs (artifact choices, reported in CLI metadata): the tail
# window is the last quarter of a run, instability needs a slope positive
# at three standard errors, and stability needs re-entry below the level K
# in at least this fraction of the tail.
TAIL_FRACTION = 0.25
SLOPE_SIGMAS = 3.0
RE_ENTRY_MIN = 0.02

STABLE = "stable-evidence"
UNSTABLE = "unstable-evidence"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StabilityEstimate:
    """Point estimate of lambda_c with a confidence interval.

    ``method`` is "blocks" for the Monte Carlo estimator (bootstrap CI)
    or "bisection" for the drift-bracketing fallback, where the interval
    is the final bracket and the block statistics are NaN.
    """

    lambda_c_hat: float
    ci_low: float
    ci_high: float
    mean_nu: float
    mean_sigma_hat: float
    p_b_hat: float
    n_blocks: int
    seed: int
    variant: str = "single"
    method: str = "blocks"
    ci_level: float = 0.95

    def __post_init__(self):
        if not (self.ci_low <= self.lambda_c_hat <= self.ci_high):
            raise InvalidArgumentError(
                "confidence interval does not contain the point estimate")


@dataclass(frozen=True)
class LindleyRun:
    """Waiting-time chain of block openings.

    ``W[m]`` is the waiting time of the (m+1)-th retained block's opening
    customer (``W[0]`` is the initial value) and ``T[m]`` the corresponding
    opening epoch relative to the first one.
    """

    W: np.ndarray
    T: np.ndarray
    w0: float
    intensity: float
    seed: int

    def __post_init__(self):
        if len(self.W) != len(self.T):
            raise InvalidArgumentError("W and T must have equal length")

    def tail_slope(self, window: int) -> Tuple[float, float]:
        """Least-squares slope of W over the trailing window, with s.e."""
        return _ls_slope(self.W[-window:])

    def re_entry_fraction(self, K: float, window: int) -> float:
        """Fraction of the trailing window spent at or below level K."""
        tail = self.W[-window:]
        return float(np.mean(tail <= K))


def _ls_slope(y: np.ndarray) -> Tuple[float, float]:
    n = len(y)
    if n < 3:
        raise InvalidArgumentError("slope needs at least 3 points")
    x = np.arange(n, dtype=float)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - (y.mean() + slope * xc)
    se = math.sqrt(max(0.0, float(resid @ resid)) / (n - 2) / sxx)
    return slope, se


# --------------------------------------------------------------------------
# Block-based estimator

def _block_worker(scenario: Scenario, spec: ZigzagSpec, retained: int,
                  seed: int, replication: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sample blocks on one replication stream; returns (nu, sigma_hat)."""
    nus = np.empty(retained)
    sig = np.empty(retained)
    got = 0
    for block in BlockSampler(scenario, spec, seed, replication):
        if block.is_first_block:
            continue
        nus[got] = block.nu
        sig[got] = blocks_mod.sigma_hat(block, scenario.rate_model)
        got += 1
        if got == retained:
            break
    return nus, sig


def _bootstrap_ci(nus: np.ndarray, sigmas: np.ndarray, measure: float,
                  point: float, seed: int, n_resamples: int,
                  ci_level: float) -> Tuple[float, float]:
    m = len(nus)
    if m < 2:
        return 0.0, math.inf
    g = rng_mod.generator(seed, BOOTSTRAP_STREAM)
    out = np.empty(n_resamples)
    done = 0
    step = max(1, int(5e7) // m)        # keep the index matrix modest
    while done < n_resamples:
        b = min(step, n_resamples - done)
        idx = g.integers(0, m, size=(b, m))
        out[done:done + b] = (nus[idx].mean(axis=1)
                              / (measure * sigmas[idx].mean(axis=1)))
        done += b
    alpha = (1.0 - ci_level) / 2.0
    lo, hi = np.quantile(out, [alpha, 1.0 - alpha])
    return min(float(lo), point), max(float(hi), point)


def estimate_lambda_c(scenario: Scenario, spec: ZigzagSpec, n_blocks: int,
                      seed: int, jobs: int = 1, ci_level: float = 0.95,
                      n_resamples: int = BOOTSTRAP_RESAMPLES) -> StabilityEstimate:
    """Monte Carlo estimate of lambda_c from sampled blocks.

    ``n_blocks`` counts sampled blocks including the discarded first one
    (one per replication stream).  With ``jobs > 1`` the blocks are split
    over that many replication streams evaluated in a process pool; the
    result is deterministic given (seed, jobs).
    """
    if n_blocks < 2:
        raise InvalidArgumentError("n_blocks must be >= 2; the first block "
                                   "does not enter the statistics")
    jobs = max(1, min(jobs, n_blocks - 1))
    retained = n_blocks - 1
    quota = [retained // jobs + (1 if r < retained % jobs else 0)
             for r in range(jobs)]
    if jobs == 1:
        parts = [_block_worker(scenario, spec, retained, seed, 0)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_block_worker, [scenario] * jobs,
                                  [spec] * jobs, quota, [seed] * jobs,
                                  range(jobs)))
    nus = np.concatenate([p[0] for p in parts])
    sigmas = np.concatenate([p[1] for p in parts])
    measure = scenario.space.measure
    lam = float(nus.mean() / (measure * sigmas.mean()))
    lo, hi = _bootstrap_ci(nus, sigmas, measure, lam, seed, n_resamples,
                           ci_level)
    return StabilityEstimate(
        lambda_c_hat=lam, ci_low=lo, ci_high=hi,
        mean_nu=float(nus.mean()), mean_sigma_hat=float(sigmas.mean()),
        p_b_hat=spec.period / float(nus.mean()),
        n_blocks=len(nus), seed=seed, variant=spec.variant,
        ci_level=ci_level)


# --------------------------------------------------------------------------
# Closed forms

def _attenuation_integral(half_width: float, dimension: int,
                          att: PowerLawAttenuation) -> float:
    """Integral of the attenuation over the torus, by adaptive quadrature.

    Inside the fundamental domain the wrapped norm equals the plain one,
    so this is a standard integral with a kink where the cap stops binding.
    """
    r_knee = att.cap ** (-1.0 / att.exponent)   # attenuation cap radius

    if dimension == 1:
        pts = [r_knee] if 0.0 < r_knee < half_width else None
        val, err = quad(lambda x: att(abs(x)), 0.0, half_width,
                        points=pts, epsabs=5e-7, limit=200)
        total, toterr = 2.0 * val, 2.0 * err
    else:
        def inner(x):
            y_knee = math.sqrt(r_knee * r_knee - x * x) if x < r_knee else None
            pts = [y_knee] if y_knee and y_knee < half_width else None
            v, _ = quad(lambda y: att(math.sqrt(x * x + y * y)), 0.0,
                        half_width, points=pts, epsabs=1e-8, limit=200)
            return v
        val, err = quad(inner, 0.0, half_width,
                        points=[r_knee] if r_knee < half_width else None,
                        epsabs=2.5e-7, limit=200)
        total, toterr = 4.0 * val, 4.0 * err

    if not math.isfinite(total) or total <= 0.0 or toterr > 1e-3:
        raise NumericFaultError(
            f"attenuation quadrature failed (value {total}, error {toterr})")
    return total


def lambda_c_closed_form(kind: str, half_width: float = 2.0,
                         dimension: int = 2, mean_height: float = 1.0,
                         attenuation: Optional[PowerLawAttenuation] = None,
                         bandwidth: float = 1.0, signal: float = 1.0,
                         noise: float = 0.05, measure: Optional[float] = None,
                         mean_radius: Optional[float] = None,
                         mean_sigma_hat: Optional[float] = None) -> float:
    """Analytic thresholds for the three solvable cases.

    ``wsbd``: the zero-radius saturation bound l(0) / (ln 2 * E h *
    integral of l over the space).  ``mm1``: whole-space exclusion,
    c / (|X| * E h) with c the solo service rate.  ``exp-radius``:
    exponential radii, exp(diameter / mean radius) / (|X| * E sigma_hat)
    with the block mean supplied externally.
    """
    if measure is None:
        measure = (2.0 * half_width) ** dimension
    if kind == "wsbd":
        att = attenuation if attenuation is not None else PowerLawAttenuation()
        integral = _attenuation_integral(half_width, dimension, att)
        return att.at_zero / (math.log(2.0) * mean_height * integral)
    if kind == "mm1":
        c = bandwidth * math.log2(1.0 + signal / noise)
        return c / (measure * mean_height)
    if kind == "exp-radius":
        if not mean_radius or mean_radius <= 0:
            raise InvalidArgumentError("exp-radius needs a positive mean_radius")
        if not mean_sigma_hat or mean_sigma_hat <= 0:
            raise InvalidArgumentError("exp-radius needs mean_sigma_hat > 0")
        diameter = math.sqrt(dimension) * half_width
        return math.exp(diameter / mean_radius) / (measure * mean_sigma_hat)
    raise InvalidArgumentError(f"unknown closed form {kind!r}")


# --------------------------------------------------------------------------
# Lindley chain

def lindley_trajectory(scenario: Scenario, spec: ZigzagSpec, intensity: float,
                       n_blocks: int, w0: float = 0.0,
                       seed: int = 0) -> LindleyRun:
    """Iterate the waiting-time recursion over sampled timed blocks.

    ``W_{m+1} = (W_m + sigma(W_m, Y_m) - (T_{m+1} - T_m))^+`` with sigma
    the gated block service time.  ``n_blocks`` recursion steps are taken
    over retained blocks; deterministic given the seed.
    """
    if intensity <= 0:
        raise InvalidArgumentError("intensity must be positive")
    if n_blocks < 1:
        raise InvalidArgumentError("n_blocks must be >= 1")
    if w0 < 0:
        raise InvalidArgumentError("w0 must be >= 0")
    sc = replace(scenario, intensity=intensity)
    model = sc.rate_model
    W = np.empty(n_blocks + 1)
    T = np.empty(n_blocks + 1)
    W[0], T[0] = w0, 0.0
    m = 0
    for block in BlockSampler(sc, spec, seed, with_times=True):
        if block.is_first_block:
            continue
        s = blocks_mod.sigma(float(W[m]), block, model)
        W[m + 1] = max(0.0, W[m] + s - block.gap_after)
        T[m + 1] = T[m] + block.gap_after
        m += 1
        if m == n_blocks:
            break
    return LindleyRun(W=W, T=T, w0=w0, intensity=intensity, seed=seed)


def classify_stability(run: LindleyRun, K: float,
                       window: Optional[int] = None) -> str:
    """Drift diagnostic on the trailing window of a Lindley run.

    Stable evidence: the chain re-enters [0, K] at a positive frequency
    and the tail shows no meaningful upward drift, meaning the slope is
    non-positive within one standard error or the fitted rise over the
    whole window stays below K.  The second route matters because the
    chain is autocorrelated and the least-squares standard error, which
    assumes independent residuals, understates the slope noise of a
    perfectly stationary run.  Unstable evidence: slope positive at
    three standard errors and the tail never dips to K.  Anything else
    is inconclusive.  This is a finite-run diagnostic, not a proof.
    """
    n = len(run.W)
    if window is None:
        window = max(8, int(TAIL_FRACTION * n))
    if window > n:
        raise InvalidArgumentError(f"window {window} exceeds run length {n}")
    if window < 3:
        raise InvalidArgumentError("window must be >= 3")
    tail = run.W[-window:]
    slope, se = _ls_slope(tail)
    if slope > SLOPE_SIGMAS * se and float(tail.min()) > K:
        return UNSTABLE
    drift_small = slope <= se or slope * window <= K
    if np.mean(tail <= K) >= RE_ENTRY_MIN and drift_small:
        return STABLE
    return INCONCLUSIVE


# --------------------------------------------------------------------------
# Bisection fallback (no block sampling required)

@dataclass(frozen=True)
class _QueueRun:
    """Adapter so queue-length paths reuse the Lindley classifier."""
    W: np.ndarray


def _queue_path(scenario: Scenario, n_arrivals: int, seed: int,
                replication: int) -> np.ndarray:
    """In-system count after each event, run over a finite stream."""
    times, xs, radii, heights = sample_stream_arrays(
        scenario, n_arrivals, seed, replication)
    sp, model = scenario.space, scenario.rate_model
    if _kernel.supports(model):
        res = _kernel.run_arrays(times, xs, radii, heights, sp, model,
                                 gate=0.0, max_time=float(times[-1]),
                                 want_events=True)
        kinds = res["ev_kind"]
    else:
        from .engine import Engine
        arr = arrivals_from_arrays(times, xs, radii, heights, sp,
                                   scenario.marks.exclusion)
        trace = Engine(sp, model, arr).run(max_time=float(times[-1]))
        kinds = np.array([0 if e.kind == "arrival" else 1
                          for e in trace.events], dtype=np.int8)
    steps = np.where(kinds == _kernel.ARRIVAL, 1, -1)
    return np.cumsum(steps).astype(float)


def _drift_verdict(scenario: Scenario, intensity: float, n_arrivals: int,
                   seed: int, replications: int) -> str:
    votes = {STABLE: 0, UNSTABLE: 0, INCONCLUSIVE: 0}
    sc = replace(scenario, intensity=intensity)
    for rep in range(replications):
        q = _queue_path(sc, n_arrivals, seed, rep)
        head = q[:max(8, len(q) // 4)]
        level = max(5.0, float(np.quantile(head, 0.9)))
        votes[classify_stability(_QueueRun(W=q), K=level)] += 1
    if votes[UNSTABLE] > votes[STABLE]:
        return UNSTABLE
    if votes[STABLE] > votes[UNSTABLE]:
        return STABLE
    return INCONCLUSIVE


def estimate_lambda_c_bisection(scenario: Scenario, lo: float, hi: float,
                                seed: int, n_arrivals: int = 20000,
                                replications: int = 3, iterations: int = 10
                                ) -> StabilityEstimate:
    """Bracket lambda_c by classifying queue drift at trial intensities.

    For mark laws whose zigzag probability is out of reach, the threshold
    is still visible as the onset of linear queue growth.  The returned
    interval is the final bracket (not a confidence interval) and the
    block statistics are NaN; ``method`` is set to "bisection".
    Inconclusive majorities shrink the bracket downward, countering the
    stable-looking bias of finite runs near criticality.
    """
    if not (0 < lo < hi):
        raise InvalidArgumentError("need 0 < lo < hi")
    v_lo = _drift_verdict(scenario, lo, n_arrivals, seed, replications)
    if v_lo == UNSTABLE:
        raise InvalidArgumentError(f"lower bracket {lo} already unstable")
    v_hi = _drift_verdict(scenario, hi, n_arrivals, seed, replications)
    if v_hi == STABLE:
        raise InvalidArgumentError(f"upper bracket {hi} still stable")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _drift_verdict(scenario, mid, n_arrivals, seed, replications) == STABLE:
            lo = mid
        else:
            hi = mid
    return StabilityEstimate(
        lambda_c_hat=0.5 * (lo + hi), ci_low=lo, ci_high=hi,
        mean_nu=math.nan, mean_sigma_hat=math.nan, p_b_hat=math.nan,
        n_blocks=0, seed=seed, variant="none", method="bisection")
