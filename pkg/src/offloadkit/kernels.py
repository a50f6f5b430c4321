"""Kernel dispatch: compiled extension if importable, pure Python otherwise.

Set ``OFFLOADKIT_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names
the implementation in use.
"""

import os
from array import array

from offloadkit import _pykernels

_ext = None
if not os.environ.get("OFFLOADKIT_PURE_PYTHON"):
    try:
        from offloadkit import _ckernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"


def _i64(values):
    return values if isinstance(values, array) and values.typecode == "q" else array("q", values)


def _f64(values):
    return values if isinstance(values, array) and values.typecode == "d" else array("d", values)


def gap_usage(timestamps, end_us, cap_a_us, cap_b_us):
    if _ext is not None:
        return _ext.gap_usage(_i64(timestamps), end_us, cap_a_us, cap_b_us)
    return _pykernels.gap_usage(timestamps, end_us, cap_a_us, cap_b_us)


def bin_counts(timestamps, start_us, width_us, nbins):
    if _ext is not None:
        return _ext.bin_counts(_i64(timestamps), start_us, width_us, nbins)
    return _pykernels.bin_counts(timestamps, start_us, width_us, nbins)


def xcorr_max(a, b, max_lag):
    if _ext is not None:
        return _ext.xcorr_max(_f64(a), _f64(b), max_lag)
    return _pykernels.xcorr_max(a, b, max_lag)


def nearest_calls(call_timestamps, packet_timestamps):
    if not call_timestamps:
        raise ValueError("no calls to match against")
    if _ext is not None:
        return _ext.nearest_calls(_i64(call_timestamps), _i64(packet_timestamps))
    return _pykernels.nearest_calls(call_timestamps, packet_timestamps)
