# cython: boundscheck=False, wraparound=False, cdivision=True
"""Single-pass replication accumulators for the Monte Carlo driver.

Kahan-compensated sums so per-replication statistics do not drift at large n.
The NumPy fallback uses pairwise summation; the two backends agree to
~1e-12 relative but are not bit-identical, and the backend contract does
not promise that.  Bit-identity is promised across worker counts, which
share one backend.
"""


def winsor_stats(const double[::1] x, double lo, double hi, double mu):
    """One pass over raw data: centered Winsorized sums and tail counts.

    Returns (sum of (W - mu), sum of (W - mu)^2, #{x <= lo}, #{x <= hi})
    where W = lo if x < lo, hi if x > hi, else x.
    """
    cdef Py_ssize_t i, n = x.shape[0]
    cdef Py_ssize_t n_le_lo = 0, n_le_hi = 0
    cdef double s1 = 0.0, c1 = 0.0, s2 = 0.0, c2 = 0.0
    cdef double v, d, y, t
    for i in range(n):
        v = x[i]
        if v <= lo:
            n_le_lo += 1
        if v <= hi:
            n_le_hi += 1
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        d = v - mu
        y = d - c1
        t = s1 + y
        c1 = (t - s1) - y
        s1 = t
        y = d * d - c2
        t = s2 + y
        c2 = (t - s2) - y
        s2 = t
    return s1, s2, n_le_lo, n_le_hi


def slice_sum(const double[::1] x, Py_ssize_t i0, Py_ssize_t i1):
    """Compensated sum of x[i0:i1]."""
    cdef double s = 0.0, c = 0.0, y, t
    cdef Py_ssize_t i
    if i0 < 0 or i1 > x.shape[0] or i0 > i1:
        raise IndexError(f"slice [{i0}, {i1}) out of range for length {x.shape[0]}")
    for i in range(i0, i1):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
    return s
