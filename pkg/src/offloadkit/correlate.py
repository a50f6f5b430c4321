"""Flow-to-thread attribution by binned cross-correlation, then packet-to-call
attribution by nearest network-related enter event."""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from offloadkit import kernels
from offloadkit.trace import Flow, ThreadTrace

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH_US = 100_000
DEFAULT_MAX_LAG_BINS = 2
DEFAULT_THRESHOLD = 0.3
LOW_CONFIDENCE_MARGIN = 0.1
DEFAULT_NETWORK_PREFIXES = (
    "java.net.",
    "javax.net.",
    "org.apache.http.",
    "android.net.",
    "libcore.io.",
)


@dataclass(frozen=True)
class BinnedSeries:
    bin_width_us: int
    start_us: int
    counts: tuple[int, ...]
    dropped: int = 0

    def __post_init__(self):
        if self.bin_width_us <= 0:
            raise ValueError("bin width must be positive")
        if len(self.counts) < 1:
            raise ValueError("series needs at least one bin")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative count")


@dataclass(frozen=True)
class NetworkCallFilter:
    prefixes: tuple[str, ...] = DEFAULT_NETWORK_PREFIXES

    def __post_init__(self):
        object.__setattr__(self, "prefixes", tuple(self.prefixes))
        if not self.prefixes:
            raise ValueError("network call filter needs at least one prefix")

    def matches(self, method_id: str) -> bool:
        return method_id.startswith(self.prefixes)

    def network_enters(self, thread: ThreadTrace) -> list[int]:
        """Indices of network-related enter events in ``thread.events``."""
        return [
            i for i, e in enumerate(thread.events)
            if e.kind == "enter" and self.matches(e.method_id)
        ]


@dataclass(frozen=True)
class PacketCall:
    thread_id: int
    event_index: int


@dataclass
class FlowAssignment:
    """Flow-level and (after :func:`associate_packets_to_calls`) packet-level attribution.

    ``flow_threads[i]`` is the thread of flow ``i`` or None; ``scores[i]``
    maps thread id to correlation score; ``packet_calls`` maps a global
    packet index to the call it was attributed to.
    """

    flow_threads: list[int | None]
    scores: list[dict[int, float]]
    low_confidence: list[bool]
    packet_calls: dict[int, PacketCall] = field(default_factory=dict)

    def best_score(self, flow_index: int) -> float:
        s = self.scores[flow_index]
        tid = self.flow_threads[flow_index]
        if tid is not None:
            return s[tid]
        return max(s.values()) if s else 0.0

    def packets_of_thread(self, thread_id: int) -> list[int]:
        return sorted(i for i, c in self.packet_calls.items() if c.thread_id == thread_id)


def bin_events(timestamps: Sequence[int], bin_width_us: int, start_us: int,
               end_us: int) -> BinnedSeries:
    """Count sorted timestamps in ``[start + i*w, start + (i+1)*w)`` over ``[start, end)``."""
    if bin_width_us <= 0:
        raise ValueError("bin width must be positive")
    if end_us < start_us:
        raise ValueError("range end precedes start")
    nbins = max(1, -(-(end_us - start_us) // bin_width_us))
    ts = list(timestamps)
    cut = bisect_left(ts, end_us)  # the last bin may reach past end_us
    counts, dropped = kernels.bin_counts(ts[:cut], start_us, bin_width_us, nbins)
    dropped += len(ts) - cut
    if dropped:
        log.debug("bin_events: %d timestamps outside [%d, %d)", dropped, start_us, end_us)
    return BinnedSeries(bin_width_us, start_us, tuple(counts), dropped)


def cross_correlation(a: BinnedSeries, b: BinnedSeries, max_lag_bins: int = 0) -> float:
    """Maximum normalized cross-correlation of ``a`` and ``b`` over lags ``|l| <= max_lag_bins``.

    Each series is centered on its own mean and normalized by its full-length
    energy; positions shifted out of range contribute nothing.  At lag 0 this
    is the Pearson coefficient.  Zero-variance input gives 0.
    """
    if (a.bin_width_us, a.start_us, len(a.counts)) != (b.bin_width_us, b.start_us, len(b.counts)):
        raise ValueError("series have different binning")
    if max_lag_bins < 0:
        raise ValueError("max_lag_bins must be >= 0")
    return kernels.xcorr_max(a.counts, b.counts, max_lag_bins)


def assign_flows_to_threads(
    flows: Sequence[Flow],
    threads: Mapping[int, ThreadTrace],
    filter: NetworkCallFilter | None = None,
    bin_width_us: int = DEFAULT_BIN_WIDTH_US,
    max_lag_bins: int = DEFAULT_MAX_LAG_BINS,
    threshold: float = DEFAULT_THRESHOLD,
) -> FlowAssignment:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    filter = filter or NetworkCallFilter()
    call_times = {
        tid: [threads[tid].events[i].timestamp_us for i in filter.network_enters(threads[tid])]
        for tid in sorted(threads)
    }
    every = [t for f in flows for t in f.timestamps()]
    every += [t for ts in call_times.values() for t in ts]
    if not every:
        n = len(flows)
        return FlowAssignment([None] * n, [{} for _ in flows], [False] * n)
    start, end = min(every), max(every) + 1
    thread_series = {
        tid: bin_events(ts, bin_width_us, start, end) for tid, ts in call_times.items()
    }

    flow_threads: list[int | None] = []
    scores: list[dict[int, float]] = []
    low_conf: list[bool] = []
    for flow in flows:
        fs = bin_events(flow.timestamps(), bin_width_us, start, end)
        s = {tid: cross_correlation(fs, ser, max_lag_bins) for tid, ser in thread_series.items()}
        ranked = sorted(s.items(), key=lambda kv: (-kv[1], kv[0]))
        chosen = None
        if ranked and ranked[0][1] >= threshold:
            chosen = ranked[0][0]
        flow_threads.append(chosen)
        scores.append(s)
        low_conf.append(
            chosen is not None and len(ranked) > 1
            and ranked[0][1] - ranked[1][1] < LOW_CONFIDENCE_MARGIN
        )
    return FlowAssignment(flow_threads, scores, low_conf)


def associate_packets_to_calls(
    assignment: FlowAssignment,
    flows: Sequence[Flow],
    threads: Mapping[int, ThreadTrace],
    filter: NetworkCallFilter | None = None,
) -> FlowAssignment:
    """Attach every packet of an assigned flow to its thread's nearest network call.

    Returns a new assignment; flows whose thread has no network calls are
    unassigned with a warning.
    """
    filter = filter or NetworkCallFilter()
    flow_threads = list(assignment.flow_threads)
    low_conf = list(assignment.low_confidence)
    packet_calls: dict[int, PacketCall] = {}
    enters_cache: dict[int, list[int]] = {}
    for fi, flow in enumerate(flows):
        tid = flow_threads[fi]
        if tid is None:
            continue
        if tid not in enters_cache:
            enters_cache[tid] = filter.network_enters(threads[tid])
        enters = enters_cache[tid]
        if not enters:
            log.warning("flow %d: thread %d has no network calls, leaving unassigned", fi, tid)
            flow_threads[fi] = None
            low_conf[fi] = False
            continue
        events = threads[tid].events
        call_ts = [events[i].timestamp_us for i in enters]
        for pi, j in zip(flow.indices, kernels.nearest_calls(call_ts, flow.timestamps())):
            packet_calls[pi] = PacketCall(tid, enters[j])
    return FlowAssignment(flow_threads, [dict(s) for s in assignment.scores], low_conf, packet_calls)


def format_assignment(assignment: FlowAssignment, flows: Sequence[Flow],
                      threads: Mapping[int, ThreadTrace], n_packets: int) -> str:
    """Flow lines, a blank line, then one line per packet in trace order."""
    out = ["flow_index,thread_id,score,low_confidence\n"]
    for fi in range(len(flows)):
        tid = assignment.flow_threads[fi]
        out.append(
            f"{fi},{'none' if tid is None else tid},{assignment.best_score(fi):.6f},"
            f"{str(assignment.low_confidence[fi]).lower()}\n"
        )
    flow_of = {pi: fi for fi, f in enumerate(flows) for pi in f.indices}
    out.append("\npacket_index,flow_index,method_id,enter_timestamp_us\n")
    for pi in range(n_packets):
        call = assignment.packet_calls.get(pi)
        if call is None:
            out.append(f"{pi},{flow_of.get(pi, 'none')},none,none\n")
        else:
            ev = threads[call.thread_id].events[call.event_index]
            out.append(f"{pi},{flow_of[pi]},{ev.method_id},{ev.timestamp_us}\n")
    return "".join(out)
