import pytest
from hypothesis import given, strategies as st

from offloadkit.trace import (
    FlowKey,
    PacketTrace,
    TraceFormatError,
    format_packet_trace,
    parse_method_trace,
    parse_packet_trace,
    segment_flows,
)

from conftest import pkt


def test_empty_packet_trace():
    assert len(parse_packet_trace(b"")) == 0


def test_single_line():
    tr = parse_packet_trace(b"0,out,100,tcp,10.0.0.1,1000,10.0.0.2,80\n")
    assert tr.packets == (pkt(0, 100),)


def test_comments_and_blank_lines_skipped():
    tr = parse_packet_trace("# header\n\n5,in,20,udp,::1,53,::1,5353\n")
    assert len(tr) == 1 and tr[0].direction == "inbound" and tr[0].transport == "udp"


def test_non_monotonic_timestamp():
    text = "200,out,1,tcp,1.1.1.1,1,2.2.2.2,2\n100,out,1,tcp,1.1.1.1,1,2.2.2.2,2\n"
    with pytest.raises(TraceFormatError, match="non-monotonic timestamp at line 2") as exc:
        parse_packet_trace(text)
    assert exc.value.line == 2


@pytest.mark.parametrize("line, msg", [
    ("0,out,0,tcp,1.1.1.1,1,2.2.2.2,2", "size_bytes < 1"),
    ("0,out,5,sctp,1.1.1.1,1,2.2.2.2,2", "bad transport"),
    ("0,sideways,5,tcp,1.1.1.1,1,2.2.2.2,2", "bad direction"),
    ("0,out,5,tcp,1.1.1.1,70000,2.2.2.2,2", "port out of range"),
    ("0,out,5,tcp,not-an-ip,1,2.2.2.2,2", "bad address"),
    ("x,out,5,tcp,1.1.1.1,1,2.2.2.2,2", "bad timestamp"),
    ("0,out,5,tcp", "expected 8 fields"),
])
def test_malformed_lines_report_line_number(line, msg):
    with pytest.raises(TraceFormatError, match=msg) as exc:
        parse_packet_trace("# c\n" + line + "\n")
    assert exc.value.line == 2


addrs = st.sampled_from(["10.0.0.1", "10.0.0.2", "192.168.1.9", "fe80::1"])
packets = st.builds(
    pkt,
    st.integers(0, 10**9),
    st.integers(1, 65535),
    st.sampled_from(["inbound", "outbound"]),
    st.tuples(addrs, st.integers(0, 65535)),
    st.tuples(addrs, st.integers(0, 65535)),
    st.sampled_from(["tcp", "udp"]),
)
traces = st.lists(packets, max_size=40).map(
    lambda ps: PacketTrace(tuple(sorted(ps, key=lambda p: p.timestamp_us)))
)


@given(traces)
def test_round_trip(tr):
    assert parse_packet_trace(format_packet_trace(tr)) == tr


def test_method_trace_basic():
    res = parse_method_trace("1,enter,1,A.f\n2,exit,1,A.f\n")
    assert list(res.threads) == [1]
    assert len(res.threads[1].events) == 2
    assert res.warnings == []


def test_exit_without_enter():
    with pytest.raises(TraceFormatError, match="exit without enter"):
        parse_method_trace("1,exit,1,A.f\n")


def test_mismatched_exit():
    with pytest.raises(TraceFormatError, match="does not match"):
        parse_method_trace("1,enter,1,A.f\n2,exit,1,B.g\n")


def test_interleaved_threads_partition():
    text = (
        "1,enter,1,A.f\n"
        "2,enter,2,B.g\n"
        "3,enter,1,C.h(int)\n"
        "4,exit,2,B.g\n"
        "5,exit,1,C.h(int)\n"
        "6,exit,1,A.f\n"
    )
    res = parse_method_trace(text)
    t1 = [(e.timestamp_us, e.kind, e.method_id) for e in res.threads[1].events]
    t2 = [(e.timestamp_us, e.kind, e.method_id) for e in res.threads[2].events]
    assert t1 == [(1, "enter", "A.f"), (3, "enter", "C.h(int)"), (5, "exit", "C.h(int)"), (6, "exit", "A.f")]
    assert t2 == [(2, "enter", "B.g"), (4, "exit", "B.g")]


def test_unclosed_enters_auto_closed_at_stream_end():
    res = parse_method_trace("1,enter,1,A.f\n2,enter,1,B.g\n9,enter,2,C.h\n10,exit,2,C.h\n")
    th = res.threads[1]
    assert th.auto_closed == 2
    assert [(e.kind, e.method_id, e.timestamp_us) for e in th.events[2:]] == [
        ("exit", "B.g", 10), ("exit", "A.f", 10)]
    assert len(res.warnings) == 1


def test_method_trace_per_thread_monotonic():
    with pytest.raises(TraceFormatError, match="non-monotonic"):
        parse_method_trace("5,enter,1,A.f\n3,exit,1,A.f\n")


def test_flows_one_flow_small_gaps():
    tr = PacketTrace(tuple(pkt(t) for t in (0, 1_000_000, 2_000_000)))
    flows = segment_flows(tr)
    assert len(flows) == 1 and flows[0].indices == (0, 1, 2)


def test_flows_split_on_idle_gap():
    tr = PacketTrace((pkt(0), pkt(120_000_000)))
    flows = segment_flows(tr)
    assert [f.indices for f in flows] == [(0,), (1,)]


def test_flows_key_normalized_both_directions():
    a, b = ("10.0.0.1", 1000), ("10.0.0.2", 80)
    tr = PacketTrace((
        pkt(0, src=a, dst=b), pkt(1, direction="inbound", src=b, dst=a),
        pkt(2, src=a, dst=b), pkt(3, direction="inbound", src=b, dst=a),
    ))
    flows = segment_flows(tr)
    assert len(flows) == 1
    assert flows[0].key == FlowKey("tcp", a, b)


def test_flows_separate_transport_and_ports():
    tr = PacketTrace((pkt(0), pkt(1, transport="udp"), pkt(2, dst=("10.0.0.2", 443))))
    assert len(segment_flows(tr)) == 3


def test_idle_gap_must_be_positive():
    with pytest.raises(ValueError):
        segment_flows(PacketTrace(), 0)


@given(traces, st.integers(1, 10**9))
def test_segmentation_is_partition(tr, gap):
    flows = segment_flows(tr, gap)
    seen = sorted(i for f in flows for i in f.indices)
    assert seen == list(range(len(tr)))
    for f in flows:
        assert all(FlowKey.of(p) == f.key for p in f.packets)
        ts = f.timestamps()
        assert ts == sorted(ts)


def _flip(p):
    return pkt(p.timestamp_us, p.size_bytes, p.direction, (p.dst_addr, p.dst_port),
               (p.src_addr, p.src_port), p.transport)


@given(traces, st.data())
def test_flow_count_invariant_under_direction_relabel(tr, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(tr), max_size=len(tr)))
    flipped = PacketTrace(tuple(_flip(p) if m else p for p, m in zip(tr, mask)))
    assert len(segment_flows(flipped)) == len(segment_flows(tr))
