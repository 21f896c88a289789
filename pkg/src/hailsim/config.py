"""TOML run configuration.

A config file describes one scenario plus run sizes, in sections::

    [space]             # kind = "torus-2d" | "torus-1d" | "discrete"
    [arrival]           # intensity, interarrival family
    [marks.radius]      # exclusion-set law
    [marks.height]      # work-height law
    [rate]              # service-rate model
    [blocks]            # zigzag variant and cover chain
    [run]               # seed, blocks, arrivals, jobs

Every key has a default; an empty file is a valid config (whole-plane torus
W=2, Poisson intensity 1, exponential radii and heights with mean 1, the
Shannon rate with b=1, s=1, w=0.05 and attenuation min(1, r^-4)).  Parsing
either returns a fully validated :class:`RunConfig` or raises
:class:`~hailsim.errors.ConfigError` naming the offending section and key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Optional

import tomli

from .arrivals import (HeightLaw, InterarrivalLaw, MarkModel,
                       PowerLawAttenuation, RateModel, Scenario)
from .blocks import ZigzagSpec
from .errors import ConfigError, InvalidArgumentError
from .geometry import (CoverChain, ExclusionLaw, ExclusionSet, Space,
                       build_cover_chain)

SPACE_KINDS = ("torus-2d", "torus-1d", "discrete")
RADIUS_LAWS = ("exponential", "fixed", "whole-space", "fixed-interval")
HEIGHT_LAWS = ("exponential", "fixed")
RATE_KINDS = ("shannon", "constant", "discrete-indicator")
INTERARRIVALS = ("exponential", "deterministic", "uniform", "gamma")
CHAIN_MODES = ("whole-space", "guaranteed")


@dataclass(frozen=True)
class RunConfig:
    """A parsed configuration: the scenario plus run-size defaults."""

    scenario: Scenario
    zigzag: ZigzagSpec
    seed: int = 0
    blocks: int = 1000
    arrivals: int = 10_000
    jobs: int = 0        # 0 = use available parallelism
    lindley_k: float = 5.0
    source: str = "<defaults>"

    def describe(self) -> dict:
        """Resolved key-value view, embedded in output headers."""
        sc = self.scenario
        radius = sc.marks.exclusion
        height = sc.marks.height
        out = {
            "space.kind": sc.space.kind,
            "arrival.intensity": sc.intensity,
            "arrival.interarrival": sc.interarrival.family,
            "marks.radius.law": radius.family,
            "marks.height.law": height.family,
            "rate.kind": sc.rate_model.kind,
            "blocks.variant": self.zigzag.variant,
            "blocks.k": self.zigzag.k,
            "run.seed": self.seed,
            "run.blocks": self.blocks,
            "run.arrivals": self.arrivals,
            "run.jobs": self.jobs,
            "scenario_id": sc.scenario_id,
        }
        if sc.space.is_discrete:
            out["space.n_servers"] = sc.space.n_servers
        else:
            out["space.half_width"] = sc.space.half_width
        if radius.family == "exponential-ball":
            out["marks.radius.mean"] = radius.radius
        elif radius.family == "fixed-ball":
            out["marks.radius.value"] = radius.radius
        elif radius.family == "interval":
            out["marks.radius.width"] = radius.width
        out["marks.height.mean"] = height.mean
        if sc.rate_model.kind == "shannon":
            att = sc.rate_model.attenuation
            out.update({
                "rate.bandwidth": sc.rate_model.bandwidth,
                "rate.signal": sc.rate_model.signal,
                "rate.noise": sc.rate_model.noise,
                "rate.cap": att.cap,
                "rate.exponent": att.exponent,
            })
        elif sc.rate_model.kind == "discrete-indicator":
            out.update({"rate.v": sc.rate_model.v,
                        "rate.reach": sc.rate_model.reach})
        return out


class _Section:
    """Typed reader over one TOML table, tracking the path for diagnostics."""

    def __init__(self, table: dict, path: str):
        self.table = dict(table)
        self.path = path

    def _take(self, key: str, default):
        return self.table.pop(key, default)

    def fail(self, key: str, message: str):
        where = f"[{self.path}].{key}" if self.path else key
        raise ConfigError(f"{where}: {message}")

    def string(self, key: str, default: str, allowed=None) -> str:
        value = self._take(key, default)
        if not isinstance(value, str):
            self.fail(key, f"expected a string, got {value!r}")
        if allowed is not None and value not in allowed:
            self.fail(key, f"must be one of {', '.join(allowed)}; got {value!r}")
        return value

    def number(self, key: str, default: float, minimum: Optional[float] = None,
               strict: bool = False) -> float:
        value = self._take(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            self.fail(key, "must be finite")
        if minimum is not None:
            if strict and value <= minimum:
                self.fail(key, f"must be > {minimum}")
            if not strict and value < minimum:
                self.fail(key, f"must be >= {minimum}")
        return value

    def integer(self, key: str, default: int, minimum: Optional[int] = None) -> int:
        value = self._take(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(key, f"must be >= {minimum}")
        return value

    def reject_unknown(self):
        for key in self.table:
            if not isinstance(self.table[key], dict):
                self.fail(key, "unknown key")


def _parse_space(table: dict) -> Space:
    sec = _Section(table, "space")
    kind = sec.string("kind", "torus-2d", SPACE_KINDS)
    if kind == "discrete":
        n = sec.integer("n_servers", 20, minimum=2)
        if n % 2:
            sec.fail("n_servers", "must be even")
        sec.reject_unknown()
        return Space.discrete_circle(n)
    w = sec.number("half_width", 2.0, minimum=0.0, strict=True)
    sec.reject_unknown()
    return Space.torus_1d(w) if kind == "torus-1d" else Space.torus_2d(w)


def _parse_arrival(table: dict) -> tuple:
    sec = _Section(table, "arrival")
    intensity = sec.number("intensity", 1.0, minimum=0.0)
    family = sec.string("interarrival", "exponential", INTERARRIVALS)
    shape = sec.number("gamma_shape", 1.0, minimum=0.0, strict=True)
    sec.reject_unknown()
    return intensity, InterarrivalLaw(family=family, shape=shape)


def _parse_radius(table: dict, space: Space) -> ExclusionLaw:
    sec = _Section(table, "marks.radius")
    default_law = "fixed-interval" if space.is_discrete else "exponential"
    law = sec.string("law", default_law, RADIUS_LAWS)
    if law == "fixed-interval" and not space.is_discrete:
        sec.fail("law", "fixed-interval requires a discrete space")
    if law in ("exponential", "fixed") and space.is_discrete:
        sec.fail("law", f"{law} radii require a continuous space")
    if law == "exponential":
        mean = sec.number("mean", 1.0, minimum=0.0, strict=True)
        out = ExclusionLaw.exponential_ball(mean)
    elif law == "fixed":
        value = sec.number("value", 0.5, minimum=0.0)
        out = ExclusionLaw.fixed_ball(value)
    elif law == "fixed-interval":
        width = sec.integer("width", 1, minimum=1)
        if width % 2 == 0:
            sec.fail("width", "interval width must be odd")
        out = ExclusionLaw.fixed_interval(width)
    else:
        out = ExclusionLaw.whole_space()
    sec.reject_unknown()
    return out


def _parse_height(table: dict) -> HeightLaw:
    sec = _Section(table, "marks.height")
    law = sec.string("law", "exponential", HEIGHT_LAWS)
    if law == "exponential":
        out = HeightLaw.exponential(sec.number("mean", 1.0, minimum=0.0, strict=True))
    else:
        out = HeightLaw.deterministic(sec.number("value", 1.0, minimum=0.0))
    sec.reject_unknown()
    return out


def _parse_rate(table: dict, space: Space) -> RateModel:
    sec = _Section(table, "rate")
    default_kind = "discrete-indicator" if space.is_discrete else "shannon"
    kind = sec.string("kind", default_kind, RATE_KINDS)
    if kind == "shannon":
        cap = sec.number("cap", 1.0, minimum=0.0, strict=True)
        exponent = sec.number("exponent", 4.0, minimum=0.0, strict=True)
        model = RateModel.shannon(
            bandwidth=sec.number("bandwidth", 1.0, minimum=0.0, strict=True),
            signal=sec.number("signal", cap, minimum=0.0, strict=True),
            noise=sec.number("noise", 0.05, minimum=0.0, strict=True),
            attenuation=PowerLawAttenuation(cap=cap, exponent=exponent))
    elif kind == "constant":
        model = RateModel.constant()
    else:
        model = RateModel.discrete_indicator(
            v=sec.number("v", 1.0, minimum=0.0),
            reach=sec.number("reach", 0.0, minimum=0.0))
    sec.reject_unknown()
    return model


def _parse_blocks(table: dict, space: Space, radius: ExclusionLaw) -> ZigzagSpec:
    sec = _Section(table, "blocks")
    variant = sec.string("variant", "single", ("single", "doubled"))
    chain_mode = sec.string("chain", "whole-space", CHAIN_MODES)
    sec.reject_unknown()
    if chain_mode == "guaranteed":
        guaranteed = radius.guaranteed_half_extent()
        if guaranteed <= 0:
            sec.fail("chain", "the radius law guarantees no minimum extent; "
                              "use chain = \"whole-space\"")
        chain = build_cover_chain(space, guaranteed)
    else:
        chain = CoverChain(sets=(ExclusionSet.whole_space(),))
    try:
        spec = ZigzagSpec(chain=chain, variant=variant)
        spec.validate_for(space)
    except InvalidArgumentError as exc:
        raise ConfigError(f"[blocks]: {exc}") from exc
    return spec


def parse_config(data: dict, source: str = "<dict>") -> RunConfig:
    """Build a :class:`RunConfig` from a parsed TOML mapping."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a table")
    data = dict(data)
    marks = data.pop("marks", {})
    if not isinstance(marks, dict):
        raise ConfigError("[marks]: expected a table")

    space = _parse_space(data.pop("space", {}))
    intensity, interarrival = _parse_arrival(data.pop("arrival", {}))
    radius = _parse_radius(marks.pop("radius", {}), space)
    height = _parse_height(marks.pop("height", {}))
    for key in marks:
        raise ConfigError(f"[marks].{key}: unknown key")
    rate_model = _parse_rate(data.pop("rate", {}), space)
    zigzag = _parse_blocks(data.pop("blocks", {}), space, radius)

    run = _Section(data.pop("run", {}), "run")
    seed = run.integer("seed", 0, minimum=0)
    blocks = run.integer("blocks", 1000, minimum=2)
    arrivals = run.integer("arrivals", 10_000, minimum=0)
    jobs = run.integer("jobs", 0, minimum=0)   # 0 = available parallelism
    lindley_k = run.number("lindley_k", 5.0, minimum=0.0)
    scenario_id = run.string("scenario_id", "scenario")
    run.reject_unknown()

    for key in data:
        raise ConfigError(f"[{key}]: unknown section")

    try:
        scenario = Scenario(space=space, intensity=intensity,
                            marks=MarkModel(exclusion=radius, height=height),
                            rate_model=rate_model, interarrival=interarrival,
                            scenario_id=scenario_id)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(scenario=scenario, zigzag=zigzag, seed=seed,
                     blocks=blocks, arrivals=arrivals, jobs=jobs,
                     lindley_k=lindley_k, source=source)


def load_config(path: str) -> RunConfig:
    """Parse a TOML file into a :class:`RunConfig`.

    Raises :class:`~hailsim.errors.ConfigError` with a section.key diagnostic
    on any structural or value problem.
    """
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: no such file") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, source=path)


def default_config() -> RunConfig:
    """The all-defaults configuration (equivalent to an empty file)."""
    return parse_config({}, source="<defaults>")


def with_mean_radius(cfg: RunConfig, mean: float) -> RunConfig:
    """Copy of ``cfg`` with the exponential mean radius replaced."""
    sc = cfg.scenario
    marks = replace(sc.marks, exclusion=ExclusionLaw.exponential_ball(mean))
    return replace(cfg, scenario=replace(sc, marks=marks))


def with_fixed_radius(cfg: RunConfig, value: float) -> RunConfig:
    """Copy of ``cfg`` with a fixed ball radius replacing the radius law."""
    sc = cfg.scenario
    marks = replace(sc.marks, exclusion=ExclusionLaw.fixed_ball(value))
    return replace(cfg, scenario=replace(sc, marks=marks))
