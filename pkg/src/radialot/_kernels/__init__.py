"""Hot numeric kernels with a compiled core and a NumPy fallback.

The compiled extension (`_core`, Cython) implements the two loops that
dominate runtime: batched component log-densities (E-steps, transport maps,
per-pixel color work) and the M-step objective/gradient.  The NumPy
implementation in `_fallback` is the reference; both expose the same
functions and agree to float rounding.

Selection happens once at import: the extension if it built, else the
fallback.  Set ``RADIALOT_PURE=1`` to force the fallback (benchmarks use
this to compare the two).
"""

import os

KIND_CODES = {"imq": 0, "compact": 1, "gauss": 2}

if os.environ.get("RADIALOT_PURE", "0") not in ("", "0"):
    from . import _fallback as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "numpy"

component_log_densities = _impl.component_log_densities
mstep_value_grad = _impl.mstep_value_grad

__all__ = ["BACKEND", "KIND_CODES", "component_log_densities", "mstep_value_grad"]
