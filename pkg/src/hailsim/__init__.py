"""Spatial queueing simulator with exclusion regions and interference.

Arrivals land on a torus (or a discrete circle of servers) carrying an
exclusion set and a work requirement.  A customer is served once every
earlier conflicting customer has left, at a rate set by the active
configuration (Shannon rate with power-law attenuation by default).  The
package simulates these dynamics event by event, samples regeneration
blocks, and estimates the critical arrival intensity separating the stable
and unstable regimes.

The heavy inner loop has a compiled twin; the pure-Python kernel is
selected automatically when the extension is unavailable (or when
``HAILSIM_PURE_PYTHON=1``).
"""

from ._kernel import BACKEND as KERNEL_BACKEND
from .arrivals import (Arrival, HeightLaw, InterarrivalLaw, MarkModel,
                       PowerLawAttenuation, RateModel, Scenario, rate,
                       sample_stream, sample_stream_arrays,
                       sum_rate_lower_bound)
from .blocks import (Block, BlockSampler, ZigzagSpec, annotate_blocks,
                     block_boundaries, is_zigzag, sample_block, sample_blocks,
                     sigma, sigma_hat)
from .config import RunConfig, default_config, load_config, parse_config
from .engine import Engine, EngineConfig, Trace, TraceEvent, run_scenario
from .errors import (ConfigError, ContractViolationError, HailsimError,
                     InvalidArgumentError, NumericFaultError,
                     UnsupportedModelError)
from .geometry import (CoverChain, ExclusionLaw, ExclusionSet, Space,
                       build_cover_chain, cover_probability, covers,
                       distance, intersects, validate_cover_chain)
from .stability import (INCONCLUSIVE, STABLE, UNSTABLE, LindleyRun,
                        StabilityEstimate, classify_stability,
                        estimate_lambda_c, estimate_lambda_c_bisection,
                        lambda_c_closed_form, lindley_trajectory)

__version__ = "0.1.0"

__all__ = [
    "Arrival", "Block", "BlockSampler", "ConfigError", "ContractViolationError",
    "CoverChain", "Engine", "EngineConfig", "ExclusionLaw", "ExclusionSet",
    "HailsimError", "HeightLaw", "INCONCLUSIVE", "InterarrivalLaw",
    "InvalidArgumentError", "KERNEL_BACKEND", "LindleyRun", "MarkModel",
    "NumericFaultError", "PowerLawAttenuation", "RateModel", "RunConfig",
    "STABLE", "Scenario", "Space", "StabilityEstimate", "Trace", "TraceEvent",
    "UNSTABLE", "UnsupportedModelError", "ZigzagSpec", "annotate_blocks",
    "block_boundaries", "build_cover_chain", "classify_stability",
    "cover_probability", "covers", "default_config", "distance",
    "estimate_lambda_c", "estimate_lambda_c_bisection", "intersects",
    "is_zigzag", "lambda_c_closed_form", "lindley_trajectory", "load_config",
    "parse_config", "rate", "run_scenario", "sample_block", "sample_blocks",
    "sample_stream", "sample_stream_arrays", "sigma", "sigma_hat",
    "sum_rate_lower_bound", "validate_cover_chain",
]
