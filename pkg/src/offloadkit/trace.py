"""Packet and method trace model, line-format parsers, flow segmentation."""

from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass, field
from typing import Iterable

log = logging.getLogger(__name__)

DEFAULT_IDLE_GAP_US = 60_000_000

_DIRECTIONS = {"in": "inbound", "out": "outbound"}
_DIRECTION_CODES = {v: k for k, v in _DIRECTIONS.items()}
_TRANSPORTS = ("tcp", "udp")


class TraceFormatError(ValueError):
    """Malformed or invalid trace input.  ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        text = f"{source}: {message}" if source else message
        if line:
            text += f" at line {line}"
        super().__init__(text)
        self.bare_message = message


@dataclass(frozen=True)
class PacketRecord:
    timestamp_us: int
    direction: str
    size_bytes: int
    src_addr: str
    src_port: int
    dst_addr: str
    dst_port: int
    transport: str

    def __post_init__(self):
        if self.direction not in _DIRECTION_CODES:
            raise ValueError(f"direction must be inbound or outbound, got {self.direction!r}")
        if self.size_bytes < 1:
            raise ValueError(f"size_bytes must be >= 1, got {self.size_bytes}")
        if self.transport not in _TRANSPORTS:
            raise ValueError(f"transport must be tcp or udp, got {self.transport!r}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")

    @property
    def outbound(self) -> bool:
        return self.direction == "outbound"


@dataclass(frozen=True)
class PacketTrace:
    packets: tuple[PacketRecord, ...] = ()
    epoch_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        prev = None
        for p in self.packets:
            if prev is not None and p.timestamp_us < prev:
                raise ValueError("packet timestamps must be non-decreasing")
            prev = p.timestamp_us

    def __len__(self):
        return len(self.packets)

    def __iter__(self):
        return iter(self.packets)

    def __getitem__(self, i):
        return self.packets[i]

    def timestamps(self) -> list[int]:
        return [p.timestamp_us for p in self.packets]

    def subset(self, indices: Iterable[int]) -> PacketTrace:
        """Sub-trace made of the packets at ``indices`` (in trace order)."""
        return PacketTrace(tuple(self.packets[i] for i in sorted(set(indices))), self.epoch_label)


@dataclass(frozen=True, order=True)
class FlowKey:
    transport: str
    lower: tuple[str, int]
    higher: tuple[str, int]

    @classmethod
    def of(cls, packet: PacketRecord) -> FlowKey:
        a = (packet.src_addr, packet.src_port)
        b = (packet.dst_addr, packet.dst_port)
        lo, hi = (a, b) if a <= b else (b, a)
        return cls(packet.transport, lo, hi)


@dataclass(frozen=True)
class Flow:
    key: FlowKey
    indices: tuple[int, ...]
    packets: tuple[PacketRecord, ...]

    def timestamps(self) -> list[int]:
        return [p.timestamp_us for p in self.packets]


@dataclass(frozen=True)
class MethodEvent:
    kind: str
    timestamp_us: int
    thread_id: int
    method_id: str

    def __post_init__(self):
        if self.kind not in ("enter", "exit"):
            raise ValueError(f"kind must be enter or exit, got {self.kind!r}")
        if not self.method_id:
            raise ValueError("method_id must be non-empty")


@dataclass(frozen=True)
class ThreadTrace:
    """Events of one thread.  ``auto_closed`` counts synthetic trailing exits."""

    thread_id: int
    events: tuple[MethodEvent, ...] = ()
    auto_closed: int = 0

    def enter_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.events) if e.kind == "enter"]


@dataclass
class MethodTraceResult:
    threads: dict[int, ThreadTrace]
    warnings: list[str] = field(default_factory=list)


def _lines(data):
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        return data.splitlines()
    return (ln.decode("utf-8") if isinstance(ln, bytes) else ln for ln in data)


def _int(text: str, what: str, lineno: int, source) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise TraceFormatError(f"bad {what} {text.strip()!r}", lineno, source) from None


def parse_packet_trace(data, epoch_label: str = "", source: str | None = None) -> PacketTrace:
    """Parse ``timestamp_us,direction,size_bytes,transport,src,sport,dst,dport`` lines.

    ``data`` may be bytes, str, or an iterable of lines.  Blank lines and
    lines starting with ``#`` are skipped.
    """
    packets = []
    prev_ts = None
    for lineno, raw in enumerate(_lines(data), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise TraceFormatError(f"expected 8 fields, got {len(parts)}", lineno, source)
        ts = _int(parts[0], "timestamp", lineno, source)
        direction = _DIRECTIONS.get(parts[1].strip())
        if direction is None:
            raise TraceFormatError(f"bad direction {parts[1].strip()!r}", lineno, source)
        size = _int(parts[2], "size", lineno, source)
        if size < 1:
            raise TraceFormatError(f"size_bytes < 1 ({size})", lineno, source)
        transport = parts[3].strip()
        if transport not in _TRANSPORTS:
            raise TraceFormatError(f"bad transport {transport!r}", lineno, source)
        src, dst = parts[4].strip(), parts[6].strip()
        for addr in (src, dst):
            try:
                ipaddress.ip_address(addr)
            except ValueError:
                raise TraceFormatError(f"bad address {addr!r}", lineno, source) from None
        sport = _int(parts[5], "port", lineno, source)
        dport = _int(parts[7], "port", lineno, source)
        if not (0 <= sport <= 65535 and 0 <= dport <= 65535):
            raise TraceFormatError("port out of range", lineno, source)
        if prev_ts is not None and ts < prev_ts:
            raise TraceFormatError("non-monotonic timestamp", lineno, source)
        prev_ts = ts
        packets.append(PacketRecord(ts, direction, size, src, sport, dst, dport, transport))
    return PacketTrace(tuple(packets), epoch_label)


def format_packet_trace(trace: PacketTrace) -> str:
    out = []
    for p in trace.packets:
        out.append(
            f"{p.timestamp_us},{_DIRECTION_CODES[p.direction]},{p.size_bytes},{p.transport},"
            f"{p.src_addr},{p.src_port},{p.dst_addr},{p.dst_port}\n"
        )
    return "".join(out)


def parse_method_trace(data, source: str | None = None) -> MethodTraceResult:
    """Parse ``timestamp_us,kind,thread_id,method_id`` lines into per-thread traces.

    Enters still open at end of input are closed with synthetic exits at the
    last timestamp seen in the stream, and a warning is recorded.
    """
    events: dict[int, list[MethodEvent]] = {}
    stacks: dict[int, list[str]] = {}
    last_ts = None
    for lineno, raw in enumerate(_lines(data), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(parts)}", lineno, source)
        ts = _int(parts[0], "timestamp", lineno, source)
        kind = parts[1].strip()
        if kind not in ("enter", "exit"):
            raise TraceFormatError(f"bad event kind {kind!r}", lineno, source)
        tid = _int(parts[2], "thread id", lineno, source)
        method = parts[3].strip()
        if not method:
            raise TraceFormatError("empty method_id", lineno, source)
        evs = events.setdefault(tid, [])
        stack = stacks.setdefault(tid, [])
        if evs and ts < evs[-1].timestamp_us:
            raise TraceFormatError("non-monotonic timestamp", lineno, source)
        if kind == "enter":
            stack.append(method)
        else:
            if not stack:
                raise TraceFormatError(f"exit without enter ({method})", lineno, source)
            if stack[-1] != method:
                raise TraceFormatError(
                    f"exit of {method} does not match open call {stack[-1]}", lineno, source
                )
            stack.pop()
        evs.append(MethodEvent(kind, ts, tid, method))
        last_ts = ts if last_ts is None else max(last_ts, ts)

    warnings = []
    threads = {}
    for tid in sorted(events):
        evs = events[tid]
        stack = stacks[tid]
        if stack:
            warnings.append(f"thread {tid}: {len(stack)} unclosed call(s) closed at {last_ts}")
            for method in reversed(stack):
                evs.append(MethodEvent("exit", last_ts, tid, method))
        threads[tid] = ThreadTrace(tid, tuple(evs), len(stack))
    for w in warnings:
        log.warning(w)
    return MethodTraceResult(threads, warnings)


def segment_flows(trace: PacketTrace, idle_gap_us: int = DEFAULT_IDLE_GAP_US) -> list[Flow]:
    """Split a trace into flows by normalized 5-tuple and idle gap.

    Flows are returned ordered by the index of their first packet.
    """
    if idle_gap_us <= 0:
        raise ValueError("idle_gap_us must be positive")
    open_flows: dict[FlowKey, list[int]] = {}
    done: list[tuple[FlowKey, list[int]]] = []
    for i, p in enumerate(trace.packets):
        key = FlowKey.of(p)
        cur = open_flows.get(key)
        if cur is not None and p.timestamp_us - trace.packets[cur[-1]].timestamp_us > idle_gap_us:
            done.append((key, cur))
            cur = None
        if cur is None:
            cur = open_flows[key] = []
        cur.append(i)
    done.extend(open_flows.items())
    done.sort(key=lambda kv: kv[1][0])
    return [
        Flow(key, tuple(idx), tuple(trace.packets[i] for i in idx))
        for key, idx in done
    ]
