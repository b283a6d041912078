"""NumPy fallback for the compiled replication accumulators.

Same signatures as the Cython module; pairwise summation instead of
Kahan.  mc picks whichever imports.
"""

import numpy as np


def winsor_stats(x, lo, hi, mu):
    x = np.asarray(x, dtype=float)
    n_le_lo = int(np.count_nonzero(x <= lo))
    n_le_hi = int(np.count_nonzero(x <= hi))
    d = np.clip(x, lo, hi) - mu
    return float(d.sum()), float(np.square(d).sum()), n_le_lo, n_le_hi


def slice_sum(x, i0, i1):
    x = np.asarray(x, dtype=float)
    if not (0 <= i0 <= i1 <= x.shape[0]):
        raise IndexError(f"slice [{i0}, {i1}) out of range for length {x.shape[0]}")
    return float(x[i0:i1].sum())
