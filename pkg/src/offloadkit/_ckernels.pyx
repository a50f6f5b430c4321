# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the numeric kernels in ``_pykernels``.

Inputs are int64 / float64 buffers (``array.array('q')`` and ``array.array('d')``
both work).  Results must match the pure-Python kernels exactly.
"""

from array import array

from libc.math cimport sqrt


def gap_usage(const long long[:] timestamps, long long end_us,
              long long cap_a_us, long long cap_b_us):
    cdef Py_ssize_t n = timestamps.shape[0]
    cdef Py_ssize_t i
    cdef long long gap, nxt
    cdef long long total_a = 0, total_b = 0
    for i in range(n):
        if i + 1 < n:
            nxt = timestamps[i + 1]
        else:
            nxt = end_us
        gap = nxt - timestamps[i]
        total_a += gap if gap < cap_a_us else cap_a_us
        total_b += gap if gap < cap_b_us else cap_b_us
    return total_a, total_b


def bin_counts(const long long[:] timestamps, long long start_us,
               long long width_us, Py_ssize_t nbins):
    cdef Py_ssize_t n = timestamps.shape[0]
    cdef Py_ssize_t i
    cdef long long t, k
    cdef long long dropped = 0
    cdef long long[:] c = array("q", [0]) * nbins
    for i in range(n):
        t = timestamps[i]
        if t < start_us:
            dropped += 1
            continue
        k = (t - start_us) // width_us
        if k >= nbins:
            dropped += 1
        else:
            c[k] += 1
    return list(c), dropped


def xcorr_max(const double[:] a, const double[:] b, Py_ssize_t max_lag):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, lo, hi
    cdef Py_ssize_t lag
    cdef double mean_a = 0.0, mean_b = 0.0, saa = 0.0, sbb = 0.0
    cdef double s, r, denom, best = -1.0
    if n == 0:
        return 0.0
    for i in range(n):
        mean_a += a[i]
        mean_b += b[i]
    mean_a /= n
    mean_b /= n
    for i in range(n):
        saa += (a[i] - mean_a) * (a[i] - mean_a)
        sbb += (b[i] - mean_b) * (b[i] - mean_b)
    denom = sqrt(saa * sbb)
    if denom == 0.0:
        return 0.0
    for lag in range(-max_lag, max_lag + 1):
        lo = -lag if lag < 0 else 0
        hi = n - lag if lag > 0 else n
        s = 0.0
        for i in range(lo, hi):
            s += (a[i] - mean_a) * (b[i + lag] - mean_b)
        r = s / denom
        if r > best:
            best = r
    if best > 1.0:
        return 1.0
    if best < -1.0:
        return -1.0
    return best


def nearest_calls(const long long[:] call_timestamps,
                  const long long[:] packet_timestamps):
    cdef Py_ssize_t m = call_timestamps.shape[0]
    cdef Py_ssize_t n = packet_timestamps.shape[0]
    cdef Py_ssize_t i, lo, hi, mid
    cdef long long t
    out = [0] * n
    for i in range(n):
        t = packet_timestamps[i]
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if call_timestamps[mid] < t:
                lo = mid + 1
            else:
                hi = mid
        if lo == m:
            out[i] = m - 1
        elif lo == 0 or call_timestamps[lo] == t:
            out[i] = lo
        elif t - call_timestamps[lo - 1] <= call_timestamps[lo] - t:
            out[i] = lo - 1
        else:
            out[i] = lo
    return out
