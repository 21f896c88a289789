"""Command-line interface.

Three subcommands drive the library end to end::

    hailsim simulate --config run.toml --out trace.jsonl
    hailsim estimate --config run.toml --sweep mean_radius=0.05,0.4,2.0 --out fig3.csv
    hailsim lindley  --config run.toml --lambda 0.14 --blocks 2000 --out path.csv

Every output file starts with a reproducibility header carrying the fully
resolved configuration and the master seed.  Rerunning simulate or lindley
with the same config and seed reproduces the file byte for byte; estimate
reproduces every statistic exactly but re-measures the wall-time column.

Exit codes: 0 success, 2 configuration error, 3 numeric fault during
simulation.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from typing import Iterable, List, Optional

import numpy as np

from . import __version__, _kernel
from .arrivals import sample_stream_arrays
from .blocks import ZigzagSpec
from .config import (RunConfig, default_config, load_config, with_fixed_radius,
                     with_mean_radius)
from .engine import run_scenario
from .errors import (ConfigError, HailsimError, InvalidArgumentError,
                     NumericFaultError)
from .geometry import chain_cover_probabilities
from .stability import (classify_stability, estimate_lambda_c,
                        estimate_lambda_c_bisection, lindley_trajectory)

SWEEP_KEYS = ("mean_radius", "fixed_radius")

# Block sampling hands a sweep point to the bisection fallback when the
# expected number of marks across all requested blocks passes this bound.
MAX_SWEEP_MARKS = 2e7

# Bisection bracket relative to the isolated-customer rate scale
# max_rate / (|X| Eh); the bracket is validated before the search runs.
BISECT_BRACKET = (0.1, 4.0)
BISECT_ITERATIONS = 12

CSV_COLUMNS = ("scenario_id", "radius", "variant", "n_blocks", "mean_nu",
               "mean_sigma_hat", "lambda_c_hat", "ci_low", "ci_high",
               "method", "wall_time_s")


# --------------------------------------------------------------------------
# Output plumbing

@contextlib.contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _header_lines(cfg: RunConfig, command: str) -> List[str]:
    lines = [f"# hailsim {__version__} {command}",
             f"# seed = {cfg.seed}"]
    for key, value in cfg.describe().items():
        lines.append(f"# {key} = {value}")
    return lines


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "blocks", None) is not None:
        cfg = replace(cfg, blocks=args.blocks)
    if getattr(args, "jobs", None) is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if getattr(args, "variant", None) is not None:
        zz = ZigzagSpec(chain=cfg.zigzag.chain, variant=args.variant)
        zz.validate_for(cfg.scenario.space)
        cfg = replace(cfg, zigzag=zz)
    return cfg


def _jobs(cfg: RunConfig) -> int:
    return cfg.jobs if cfg.jobs >= 1 else (os.cpu_count() or 1)


# --------------------------------------------------------------------------
# simulate

def _json_x(x, discrete: bool):
    if discrete:
        return int(x)
    return [float(v) for v in np.atleast_1d(x)]


def _json_radius(r: float):
    return None if math.isinf(r) else float(r)


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    sc = cfg.scenario
    count = cfg.arrivals
    max_events = args.max_events
    max_time = args.max_time

    t0 = time.perf_counter()
    if _kernel.supports(sc.rate_model):
        times, xs, radii, heights = sample_stream_arrays(sc, count, cfg.seed)
        res = _kernel.run_arrays(
            times, xs, radii, heights, sc.space, sc.rate_model,
            max_events=-1 if max_events is None else max_events,
            max_time=math.inf if max_time is None else max_time,
            want_events=True)
        starts, departs = res["starts"], res["departs"]
        events = zip(res["ev_kind"], res["ev_time"], res["ev_id"],
                     res["ev_active"])
        started = ~np.isnan(starts)
        departed = ~np.isnan(departs)
        summary = {
            "n_arrivals": int(np.sum(res["ev_kind"] == 0)),
            "n_departures": int(np.sum(res["ev_kind"] == 1)),
            "mean_waiting": (float(np.mean(starts[started] - times[started]))
                             if started.any() else 0.0),
            "mean_sojourn": (float(np.mean(departs[departed] - times[departed]))
                             if departed.any() else 0.0),
            "max_active": int(res["max_active"]) if res["n_events"] else 0,
            "final_time": float(res["final_time"]),
        }

        def rows():
            names = ("arrival", "departure")
            for kind, t, i, na in events:
                yield {"kind": names[kind], "time": float(t), "id": int(i),
                       "x": _json_x(xs[i], sc.space.is_discrete),
                       "radius": _json_radius(float(radii[i])),
                       "active_count": int(na)}
    else:
        trace = run_scenario(sc, count, cfg.seed, max_events=max_events,
                             max_time=max_time)
        summary = {
            "n_arrivals": trace.n_arrivals,
            "n_departures": trace.n_departures,
            "mean_waiting": trace.mean_waiting(),
            "mean_sojourn": trace.mean_sojourn(),
            "max_active": trace.max_active,
            "final_time": trace.final_time,
        }

        def rows():
            for ev in trace.events:
                yield {"kind": ev.kind, "time": ev.time, "id": ev.id,
                       "x": _json_x(ev.x, sc.space.is_discrete),
                       "radius": _json_radius(ev.radius),
                       "active_count": ev.active_count}

    wall = time.perf_counter() - t0
    with _open_out(args.out) as fh:
        header = {"kind": "header", "command": "simulate",
                  "version": __version__, "seed": cfg.seed,
                  "config": cfg.describe()}
        fh.write(json.dumps(header) + "\n")
        for row in rows():
            fh.write(json.dumps(row) + "\n")
        fh.write(json.dumps({"kind": "summary", **summary}) + "\n")
    print(f"simulate: {summary['n_arrivals']} arrivals, "
          f"{summary['n_departures']} departures, "
          f"mean waiting {summary['mean_waiting']:.6g}, "
          f"max active {summary['max_active']} ({wall:.2f}s)", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# estimate

def _parse_sweep(text: str):
    key, _, values = text.partition("=")
    key = key.strip()
    if key not in SWEEP_KEYS:
        raise ConfigError(f"--sweep: key must be one of {', '.join(SWEEP_KEYS)}; "
                          f"got {key!r}")
    try:
        points = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sweep: {exc}") from exc
    if not points:
        raise ConfigError("--sweep: no values given")
    return key, points


def _radius_label(cfg: RunConfig) -> float:
    law = cfg.scenario.marks.exclusion
    if law.family in ("fixed-ball", "exponential-ball"):
        return law.radius
    if law.family == "interval":
        return float(law.width)
    return math.inf


def _expected_marks(cfg: RunConfig) -> float:
    """Expected marks consumed by the requested block count (inf if p_b = 0)."""
    spec = cfg.zigzag
    chain = chain_cover_probabilities(spec.chain,
                                      cfg.scenario.marks.exclusion,
                                      cfg.scenario.space)
    probs = chain.probabilities
    if spec.variant == "single":
        p_b = probs[0]
    else:
        p_b = 1.0
        for p in probs:
            p_b *= p * p
    if p_b <= 0.0:
        return math.inf
    return cfg.blocks * spec.period / p_b


def _estimate_point(cfg: RunConfig) -> dict:
    sc = cfg.scenario
    t0 = time.perf_counter()
    if _expected_marks(cfg) <= MAX_SWEEP_MARKS:
        est = estimate_lambda_c(sc, cfg.zigzag, n_blocks=cfg.blocks,
                                seed=cfg.seed, jobs=_jobs(cfg))
    else:
        scale = sc.rate_model.max_rate / (sc.space.measure *
                                          sc.marks.height.mean)
        est = estimate_lambda_c_bisection(
            sc, BISECT_BRACKET[0] * scale, BISECT_BRACKET[1] * scale,
            seed=cfg.seed, n_arrivals=max(cfg.arrivals, 10_000),
            iterations=BISECT_ITERATIONS)
    wall = time.perf_counter() - t0
    return {"scenario_id": sc.scenario_id,
            "radius": _radius_label(cfg),
            "variant": est.variant,
            "n_blocks": est.n_blocks,
            "mean_nu": est.mean_nu,
            "mean_sigma_hat": est.mean_sigma_hat,
            "lambda_c_hat": est.lambda_c_hat,
            "ci_low": est.ci_low,
            "ci_high": est.ci_high,
            "method": est.method,
            "wall_time_s": round(wall, 3)}


def cmd_estimate(args) -> int:
    cfg = _resolve(args)
    if args.sweep:
        key, points = _parse_sweep(args.sweep)
        vary = with_mean_radius if key == "mean_radius" else with_fixed_radius
        configs = [vary(cfg, v) for v in points]
    else:
        configs = [cfg]

    rows = [_estimate_point(c) for c in configs]
    with _open_out(args.out) as fh:
        for line in _header_lines(cfg, "estimate"):
            fh.write(line + "\n")
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(f"estimate: R={row['radius']:g} lambda_c_hat="
              f"{row['lambda_c_hat']:.6g} "
              f"[{row['ci_low']:.6g}, {row['ci_high']:.6g}] "
              f"({row['method']}, {row['wall_time_s']}s)", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# lindley

def cmd_lindley(args) -> int:
    cfg = _resolve(args)
    if args.lam is None:
        raise ConfigError("--lambda is required for the lindley command")
    if args.lam <= 0:
        raise ConfigError("--lambda: must be > 0")
    run = lindley_trajectory(cfg.scenario, cfg.zigzag, args.lam,
                             n_blocks=cfg.blocks, seed=cfg.seed)
    k = cfg.lindley_k if args.K is None else args.K
    verdict = classify_stability(run, K=k)
    with _open_out(args.out) as fh:
        for line in _header_lines(cfg, "lindley"):
            fh.write(line + "\n")
        fh.write(f"# lambda = {args.lam}\n# K = {k}\n")
        writer = csv.writer(fh)
        writer.writerow(("m", "T_m", "W_m"))
        for m, (t, w) in enumerate(zip(run.T, run.W)):
            writer.writerow((m, repr(float(t)), repr(float(w))))
        fh.write(f"# verdict = {verdict}\n")
    print(f"lindley: lambda={args.lam:g} blocks={len(run.W) - 1} "
          f"verdict={verdict}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hailsim",
        description="Spatial queueing simulator and stability-threshold "
                    "estimator.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, blocks=False):
        p.add_argument("--config", metavar="PATH",
                       help="TOML configuration file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="master seed (overrides the config)")
        p.add_argument("--out", metavar="PATH",
                       help="output file (default: stdout)")
        if blocks:
            p.add_argument("--blocks", type=int, metavar="N",
                           help="number of blocks (overrides the config)")
            p.add_argument("--variant", choices=("doubled", "single"),
                           help="zigzag variant (overrides the config)")

    p_sim = sub.add_parser("simulate", help="run one trace and summarize it")
    common(p_sim)
    p_sim.add_argument("--max-events", type=int, metavar="N",
                       help="stop after N events")
    p_sim.add_argument("--max-time", type=float, metavar="T",
                       help="stop at simulated time T")
    p_sim.set_defaults(fn=cmd_simulate)

    p_est = sub.add_parser("estimate",
                           help="estimate the critical intensity lambda_c")
    common(p_est, blocks=True)
    p_est.add_argument("--jobs", type=int, metavar="N",
                       help="worker processes (default: config or all cores)")
    p_est.add_argument("--sweep", metavar="KEY=V1,V2,...",
                       help="sweep mean_radius or fixed_radius over values")
    p_est.set_defaults(fn=cmd_estimate)

    p_lin = sub.add_parser("lindley",
                           help="iterate the waiting-time recursion at a "
                                "fixed intensity")
    common(p_lin, blocks=True)
    p_lin.add_argument("--lambda", dest="lam", type=float, metavar="X",
                       help="arrival intensity")
    p_lin.add_argument("--K", dest="K", type=float, metavar="X",
                       help="recurrence set [0, K] for the verdict")
    p_lin.set_defaults(fn=cmd_lindley)
    return parser


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"hailsim: config error: {exc}", file=sys.stderr)
        return 2
    except NumericFaultError as exc:
        print(f"hailsim: numeric fault: {exc}", file=sys.stderr)
        return 3
    except HailsimError as exc:
        print(f"hailsim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
