"""Select the summation kernel: compiled extension or numpy fallback.

Both backends expose the same two functions (winsor_stats, slice_sum)
and agree to ~1e-12 relative on identical input (Kahan vs pairwise
summation; bit-identity is only promised across worker counts, which
share one backend).  The compiled one is used
when importable; TRIMSUM_BACKEND=numpy forces the fallback and
TRIMSUM_BACKEND=cython makes a missing extension a hard error instead
of a silent downgrade.
"""

from __future__ import annotations

import os

from .errors import ConfigError

_requested = os.environ.get("TRIMSUM_BACKEND", "")
if _requested not in ("", "cython", "numpy"):
    raise ConfigError(
        f"TRIMSUM_BACKEND must be 'cython' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import _mckernel as kernel
    BACKEND = "numpy"
else:
    try:
        from . import _kernel as kernel  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ConfigError(
                "TRIMSUM_BACKEND=cython but the compiled kernel is not importable"
            ) from None
        from . import _mckernel as kernel  # type: ignore[no-redef]
        BACKEND = "numpy"

__all__ = ["kernel", "BACKEND"]
