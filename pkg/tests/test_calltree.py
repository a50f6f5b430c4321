import pydot
import pytest
from hypothesis import given, settings, strategies as st

from offloadkit.calltree import CallNode, aggregate_traffic, build_call_tree, emit_dot, emit_report
from offloadkit.correlate import FlowAssignment, PacketCall, assign_flows_to_threads, associate_packets_to_calls
from offloadkit.energy import EnergyBounds, Horizon, RrcModelParams, WifiModelParams, estimate_energy
from offloadkit.trace import PacketTrace, parse_method_trace, segment_flows

from conftest import pkt
from generators import ground_truth_fixture

S = 1_000_000
RRC = RrcModelParams()


def thread(text, tid=1):
    return parse_method_trace(text).threads[tid]


def shape(node):
    return (node.method_id, node.invocation_count, [shape(c) for c in node.children])


def test_nested_calls():
    t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,exit,1,A\n")
    assert shape(build_call_tree(t)) == ("<thread:1>", 1, [("A", 1, [("B", 1, [])])])


def test_repeated_child_merged():
    t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,enter,1,B\n4,exit,1,B\n5,exit,1,A\n")
    assert shape(build_call_tree(t)) == ("<thread:1>", 1, [("A", 1, [("B", 2, [])])])


def test_top_level_order():
    t = thread("0,enter,1,A\n1,exit,1,A\n2,enter,1,C\n3,exit,1,C\n")
    assert [c.method_id for c in build_call_tree(t).children] == ["A", "C"]


def test_non_adjacent_siblings_merge_and_children_merge():
    t = thread("0,enter,1,A\n1,enter,1,X\n2,exit,1,X\n3,exit,1,A\n"
               "4,enter,1,C\n5,exit,1,C\n"
               "6,enter,1,A\n7,enter,1,Y\n8,exit,1,Y\n9,enter,1,X\n10,exit,1,X\n11,exit,1,A\n")
    assert shape(build_call_tree(t)) == ("<thread:1>", 1, [
        ("A", 2, [("X", 2, []), ("Y", 1, [])]), ("C", 1, [])])


def test_collapse_library_frames():
    t = thread("0,enter,1,app.Main.go\n1,enter,1,lib.Http.get\n2,enter,1,lib.Conn.open\n"
               "3,exit,1,lib.Conn.open\n4,exit,1,lib.Http.get\n5,exit,1,app.Main.go\n")
    tree = build_call_tree(t, collapse_prefixes=["lib."])
    assert shape(tree) == ("<thread:1>", 1, [("app.Main.go", 1, [("lib.Http.get", 1, [])])])
    assert tree.children[0].children[0].enter_indices == [1, 2]


def test_unbalanced_tree_rejected():
    from offloadkit.trace import MethodEvent, ThreadTrace
    bad = ThreadTrace(1, (MethodEvent("enter", 0, 1, "A"), MethodEvent("exit", 1, 1, "B")))
    with pytest.raises(ValueError, match="unbalanced"):
        build_call_tree(bad)


def _manual(tree, calls):
    """Assignment attributing packet i to (thread 1, enter index calls[i])."""
    return FlowAssignment([1], [{1: 1.0}], [False], {i: PacketCall(1, e) for i, e in enumerate(calls)})


def test_leaf_traffic_reaches_parent():
    t = thread("0,enter,1,A\n1,enter,1,java.net.B\n2,exit,1,java.net.B\n3,exit,1,A\n")
    packets = PacketTrace(tuple(pkt(10 + i, 100) for i in range(3)))
    tree = aggregate_traffic(build_call_tree(t), _manual(None, [1, 1, 1]), packets, RRC)
    a = tree.children[0]
    b = a.children[0]
    assert b.own_packets == (0, 1, 2) and b.agg_bytes == 300
    assert a.own_packets == () and a.agg_bytes == 300
    assert tree.agg_bytes == 300


def test_two_children_sum():
    t = thread("0,enter,1,java.net.X\n1,exit,1,java.net.X\n2,enter,1,java.net.Y\n3,exit,1,java.net.Y\n")
    packets = PacketTrace((pkt(5, 300), pkt(6, 200)))
    tree = aggregate_traffic(build_call_tree(t), _manual(None, [0, 2]), packets, RRC)
    assert [c.agg_bytes for c in tree.children] == [300, 200]
    assert tree.agg_bytes == 500


def test_root_bounds_equal_thread_energy():
    t = thread("0,enter,1,java.net.X\n1,exit,1,java.net.X\n")
    packets = PacketTrace((pkt(0), pkt(S)))
    h = Horizon(0, 18 * S)
    tree = aggregate_traffic(build_call_tree(t), _manual(None, [0, 0]), packets, RRC, h)
    assert tree.bounds.e_min_j == pytest.approx(tree.bounds.e_max_j)
    assert tree.bounds.e_max_j == pytest.approx(estimate_energy(packets, RRC, h))


def test_missing_enter_event():
    t = thread("0,enter,1,A\n1,exit,1,A\n")
    with pytest.raises(ValueError, match="not in tree"):
        aggregate_traffic(build_call_tree(t), _manual(None, [1]), PacketTrace((pkt(0),)), RRC)


def _dot_nodes(text):
    (g,) = pydot.graph_from_dot_data(text)
    nodes = [n for n in g.get_nodes() if n.get_name() not in ("node", "graph", "edge")]
    return g, nodes


def test_dot_root_only_without_traffic():
    t = thread("0,enter,1,A\n1,exit,1,A\n")
    tree = aggregate_traffic(build_call_tree(t), FlowAssignment([], [], []), PacketTrace(), RRC)
    g, nodes = _dot_nodes(emit_dot(tree))
    assert len(nodes) == 1 and not g.get_edges()


def test_dot_chain_with_bytes():
    t = thread("0,enter,1,A\n1,enter,1,java.net.B\n2,exit,1,java.net.B\n3,exit,1,A\n")
    packets = PacketTrace(tuple(pkt(10 + i, 100) for i in range(3)))
    tree = aggregate_traffic(build_call_tree(t), _manual(None, [1, 1, 1]), packets, RRC)
    text = emit_dot(tree)
    g, nodes = _dot_nodes(text)
    assert len(nodes) == 3 and len(g.get_edges()) == 2
    assert text.count("bytes=300") == 3
    assert "calls=1" in text and "E=[" in text
    _, only_root = _dot_nodes(emit_dot(tree, min_bytes_filter=10**9))
    assert len(only_root) == 1


def test_dot_escapes_quotes():
    tree = CallNode('we"ird\\name')
    _, nodes = _dot_nodes(emit_dot(tree))
    assert len(nodes) == 1


def test_report_empty():
    assert emit_report([]) == "method_id,calls,packets,bytes,e_min_j,e_max_j\n"


def test_report_sorted_by_emax():
    root = CallNode("<thread:1>", thread_id=1)
    root.children = [
        CallNode("a.Low", bounds=EnergyBounds(1.0, 5.0)),
        CallNode("a.High", bounds=EnergyBounds(0.80, 9.52)),
    ]
    rows = emit_report([root]).splitlines()
    assert rows[1] == "a.High,1,0,0,0.800000,9.520000"
    assert rows[2].startswith("a.Low,")


def test_report_counts_recursive_method_traffic_once():
    t = thread("0,enter,1,java.net.R\n1,enter,1,java.net.R\n2,exit,1,java.net.R\n3,exit,1,java.net.R\n")
    packets = PacketTrace((pkt(5, 10), pkt(6, 20)))
    tree = aggregate_traffic(build_call_tree(t), _manual(None, [0, 1]), packets, RRC)
    row = emit_report([tree]).splitlines()[1].split(",")
    assert row[:4] == ["java.net.R", "2", "2", "30"]


def _aggregated_fixture(seed, model):
    fx = ground_truth_fixture(seed)
    flows = segment_flows(fx.packets)
    a = assign_flows_to_threads(flows, fx.threads)
    a = associate_packets_to_calls(a, flows, fx.threads)
    trees = [aggregate_traffic(build_call_tree(fx.threads[t]), a, fx.packets, model)
             for t in sorted(fx.threads)]
    return fx, a, trees


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([RRC, WifiModelParams()]))
def test_conservation_and_child_sum(seed, model):
    fx, a, trees = _aggregated_fixture(seed, model)
    for root in trees:
        assigned = [i for i, c in a.packet_calls.items() if c.thread_id == root.thread_id]
        assert root.agg_bytes == sum(fx.packets[i].size_bytes for i in assigned)
        for node in root.walk():
            own = sum(fx.packets[i].size_bytes for i in node.own_packets)
            assert node.agg_bytes == own + sum(c.agg_bytes for c in node.children)
            for c in node.children:
                assert c.agg_packets <= node.agg_packets
                assert c.bounds.e_max_j <= node.bounds.e_max_j
            assert 0 <= node.bounds.e_min_j <= node.bounds.e_max_j


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_dot_has_one_statement_per_unpruned_node(seed):
    _, _, trees = _aggregated_fixture(seed, RRC)
    text = emit_dot(trees, min_bytes_filter=1)
    _, nodes = _dot_nodes(text)
    expected = 0
    for root in trees:
        stack = [root]
        while stack:
            n = stack.pop()
            expected += 1
            stack.extend(c for c in n.children if c.agg_bytes >= 1)
    assert len(nodes) == expected
