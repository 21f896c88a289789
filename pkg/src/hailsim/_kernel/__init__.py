"""Array-based simulation kernels with a compiled and a pure-Python backend.

Both backends expose the same ``simulate`` function operating on flat
arrays: interleaved event induction over a marked stream given as
``(times, xs, radii, heights)`` in arrival order.  A radius of ``+inf``
encodes an exclusion set covering the whole space.  Two calling modes:

* ``saturated=True``: every customer is present at relative time 0 with
  index precedence and the heap drains to empty (``times`` is ignored).
* ``gate=w``: customers with ``times < w`` are present at relative time 0
  with index precedence; later ones arrive at relative time ``times - w``.

The compiled backend is selected at import when available; set the
environment variable ``HAILSIM_PURE_PYTHON=1`` to force the fallback.
Both are kept in exact floating-point lockstep, which the test suite
checks, so switching backends never changes results.
"""

from __future__ import annotations

import os

from ..arrivals import PowerLawAttenuation, RateModel
from ..errors import UnsupportedModelError
from ..geometry import Space
from . import _simcore_py

try:
    from . import _simcore  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _simcore = None
    HAVE_COMPILED = False

FORCE_PURE = os.environ.get("HAILSIM_PURE_PYTHON", "") == "1"

if HAVE_COMPILED and not FORCE_PURE:
    _impl = _simcore
    BACKEND = "compiled"
else:
    _impl = _simcore_py
    BACKEND = "python"

ARRIVAL = _simcore_py.ARRIVAL
DEPARTURE = _simcore_py.DEPARTURE

simulate = _impl.simulate
simulate_python = _simcore_py.simulate
simulate_compiled = _simcore.simulate if HAVE_COMPILED else None


def supports(rate_model: RateModel) -> bool:
    """Whether the array kernels can evaluate this rate model.

    Custom rate functions and non-power-law attenuations need the object
    engine; everything else compiles down to a handful of scalars.
    """
    if rate_model.kind == "constant":
        return True
    if rate_model.kind == "discrete-indicator":
        return True
    if rate_model.kind == "shannon":
        return isinstance(rate_model.attenuation, PowerLawAttenuation)
    return False


def kernel_args(space: Space, rate_model: RateModel) -> dict:
    """Scalar parameters for ``simulate`` (raises if unsupported)."""
    if not supports(rate_model):
        raise UnsupportedModelError(
            f"rate model kind {rate_model.kind!r} has no array-kernel form")
    if space.is_discrete:
        dim, wrap_len = 1, float(space.n_servers)
    else:
        dim, wrap_len = space.dimension, 2.0 * space.half_width
    args = {"dim": dim, "wrap_len": wrap_len}
    if rate_model.kind == "constant":
        args["rate_kind"] = 1
    elif rate_model.kind == "shannon":
        law = rate_model.attenuation
        args.update(rate_kind=0, b=rate_model.bandwidth, s=rate_model.signal,
                    w=rate_model.noise, cap=law.cap, exponent=law.exponent)
    else:
        args.update(rate_kind=2, v=rate_model.v, reach=float(rate_model.reach))
    return args


def run_arrays(times, xs, radii, heights, space, rate_model,
               backend=None, **kwargs):
    """Run a kernel over a marked stream given as flat arrays.

    ``backend`` may be ``"compiled"`` or ``"python"`` to override the
    import-time selection (the benchmark and parity tests use this).
    Remaining keyword arguments pass through to ``simulate``.
    """
    if backend is None:
        fn = simulate
    elif backend == "compiled":
        if simulate_compiled is None:
            raise UnsupportedModelError("compiled kernel is not available")
        fn = simulate_compiled
    elif backend == "python":
        fn = simulate_python
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return fn(times, xs, radii, heights,
              **kernel_args(space, rate_model), **kwargs)
