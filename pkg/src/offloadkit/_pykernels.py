"""Pure-Python versions of the numeric kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled kernels are tested against.  Every function takes
plain sequences and returns plain Python values.
"""

from bisect import bisect_left
from math import sqrt


def gap_usage(timestamps, end_us, cap_a_us, cap_b_us):
    """Sum of ``min(gap, cap)`` over inter-packet gaps for two caps.

    ``gap`` for the last packet runs to ``end_us``.  Returns
    ``(sum_a, sum_b)``.  Timestamps must be sorted and ``<= end_us``.
    """
    n = len(timestamps)
    total_a = 0
    total_b = 0
    for i in range(n):
        nxt = timestamps[i + 1] if i + 1 < n else end_us
        gap = nxt - timestamps[i]
        total_a += gap if gap < cap_a_us else cap_a_us
        total_b += gap if gap < cap_b_us else cap_b_us
    return total_a, total_b


def bin_counts(timestamps, start_us, width_us, nbins):
    counts = [0] * nbins
    dropped = 0
    for t in timestamps:
        if t < start_us:
            dropped += 1
            continue
        i = (t - start_us) // width_us
        if i >= nbins:
            dropped += 1
        else:
            counts[i] += 1
    return counts, dropped


def xcorr_max(a, b, max_lag):
    n = len(a)
    if n == 0:
        return 0.0
    mean_a = sum(a) / n
    mean_b = sum(b) / n
    ac = [x - mean_a for x in a]
    bc = [x - mean_b for x in b]
    denom = sqrt(sum(x * x for x in ac) * sum(x * x for x in bc))
    if denom == 0.0:
        return 0.0
    best = -1.0
    for lag in range(-max_lag, max_lag + 1):
        lo = max(0, -lag)
        hi = min(n, n - lag)
        s = 0.0
        for i in range(lo, hi):
            s += ac[i] * bc[i + lag]
        r = s / denom
        if r > best:
            best = r
    return min(1.0, max(-1.0, best))


def nearest_calls(call_timestamps, packet_timestamps):
    """Index of the closest call for each packet; ties go to the earlier call."""
    m = len(call_timestamps)
    out = []
    for t in packet_timestamps:
        j = bisect_left(call_timestamps, t)
        if j == m:
            out.append(m - 1)
        elif j == 0 or call_timestamps[j] == t:
            out.append(j)
        elif t - call_timestamps[j - 1] <= call_timestamps[j] - t:
            out.append(j - 1)
        else:
            out.append(j)
    return out
