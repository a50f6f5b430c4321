"""Per-thread call trees annotated with attributed traffic and savings bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from offloadkit.correlate import FlowAssignment
from offloadkit.energy import BoundsCalculator, EnergyBounds, EnergyModel, Horizon, default_horizon
from offloadkit.trace import PacketTrace, ThreadTrace


@dataclass(eq=False)
class CallNode:
    method_id: str
    invocation_count: int = 1
    children: list[CallNode] = field(default_factory=list)
    enter_indices: list[int] = field(default_factory=list)
    thread_id: int | None = None
    own_packets: tuple[int, ...] = ()
    agg_packets: frozenset[int] = frozenset()
    agg_bytes: int = 0
    bounds: EnergyBounds | None = None

    def walk(self) -> Iterable[CallNode]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def child(self, method_id: str) -> CallNode | None:
        for c in self.children:
            if c.method_id == method_id:
                return c
        return None


def root_name(thread_id: int) -> str:
    return f"<thread:{thread_id}>"


def build_call_tree(thread: ThreadTrace, collapse_prefixes: Sequence[str] = ()) -> CallNode:
    """Replay enter/exit events into a tree under a synthetic ``<thread:ID>`` root.

    Sibling invocations of the same method share one node whose
    ``invocation_count`` counts them.  With ``collapse_prefixes``, a frame
    matching a prefix entered directly from another matching frame is folded
    into its caller's node.
    """
    prefixes = tuple(collapse_prefixes)
    root = CallNode(root_name(thread.thread_id), thread_id=thread.thread_id)
    frames: list[tuple[CallNode, str]] = [(root, "")]
    for i, ev in enumerate(thread.events):
        parent = frames[-1][0]
        if ev.kind == "enter":
            if (prefixes and parent is not root and ev.method_id.startswith(prefixes)
                    and parent.method_id.startswith(prefixes)):
                node = parent
            else:
                node = parent.child(ev.method_id)
                if node is None:
                    node = CallNode(ev.method_id, 0)
                    parent.children.append(node)
                node.invocation_count += 1
            node.enter_indices.append(i)
            frames.append((node, ev.method_id))
        else:
            if len(frames) == 1 or frames[-1][1] != ev.method_id:
                raise ValueError(
                    f"thread {thread.thread_id}: unbalanced exit of {ev.method_id} at event {i}"
                )
            frames.pop()
    if len(frames) != 1:
        raise ValueError(f"thread {thread.thread_id}: {len(frames) - 1} call(s) never exit")
    return root


def aggregate_traffic(tree: CallNode, assignment: FlowAssignment, packets: PacketTrace,
                      model: EnergyModel, horizon: Horizon | None = None) -> CallNode:
    """Attach the thread's attributed packets to nodes and aggregate bottom-up.

    Per-node bounds use the thread's attributed packets as the full trace.
    ``horizon`` defaults to the default horizon of ``packets`` (the whole
    capture), so all threads are priced on the same window.
    """
    tid = tree.thread_id
    by_enter = {i: node for node in tree.walk() for i in node.enter_indices}
    own: dict[int, list[int]] = {}
    thread_packets = []
    for pi in sorted(assignment.packet_calls):
        call = assignment.packet_calls[pi]
        if call.thread_id != tid:
            continue
        node = by_enter.get(call.event_index)
        if node is None:
            raise ValueError(f"packet {pi} refers to enter event {call.event_index} not in tree")
        own.setdefault(id(node), []).append(pi)
        thread_packets.append(pi)

    if horizon is None:
        horizon = default_horizon(packets, model)
    calc = BoundsCalculator([packets[i] for i in thread_packets], model, horizon)
    position = {pi: k for k, pi in enumerate(thread_packets)}

    order = list(tree.walk())
    for node in reversed(order):
        node.own_packets = tuple(own.get(id(node), ()))
        agg = set(node.own_packets)
        for c in node.children:
            agg |= c.agg_packets
        node.agg_packets = frozenset(agg)
        node.agg_bytes = sum(packets[i].size_bytes for i in node.own_packets) + sum(
            c.agg_bytes for c in node.children
        )
        node.bounds = calc.bounds(position[i] for i in agg)
    return tree


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _label(node: CallNode) -> str:
    lines = [node.method_id, f"calls={node.invocation_count}", f"bytes={node.agg_bytes}"]
    if node.bounds is not None:
        lines.append(f"E=[{node.bounds.e_min_j:.6f},{node.bounds.e_max_j:.6f}] J")
    return _dot_quote("\n".join(lines)).replace("\n", "\\n")


def emit_dot(trees: CallNode | Sequence[CallNode], min_bytes_filter: int = 1) -> str:
    """DOT digraph of one or more trees; subtrees below ``min_bytes_filter`` bytes are hidden.

    Roots are always emitted.
    """
    if isinstance(trees, CallNode):
        trees = [trees]
    out = ["digraph network_usage {\n", "  node [shape=box, fontname=\"monospace\"];\n"]
    counter = 0
    for root in trees:
        stack: list[tuple[CallNode, str | None]] = [(root, None)]
        while stack:
            node, parent_id = stack.pop()
            nid = f"n{counter}"
            counter += 1
            out.append(f"  {nid} [label={_label(node)}];\n")
            if parent_id is not None:
                out.append(f"  {parent_id} -> {nid};\n")
            kept = [c for c in node.children if c.agg_bytes >= min_bytes_filter]
            stack.extend((c, nid) for c in reversed(kept))
    out.append("}\n")
    return "".join(out)


REPORT_HEADER = "method_id,calls,packets,bytes,e_min_j,e_max_j\n"


def emit_report(trees: Sequence[CallNode]) -> str:
    """Per-method summary over all threads, sorted by descending ``e_max``.

    Calls sum over every node of the method.  Traffic and bounds come from
    the method's outermost nodes (those with no same-method ancestor), so a
    recursive method's packets count once; bounds of separate call sites add.
    """
    rows: dict[str, list] = {}
    for root in trees:
        stack: list[tuple[CallNode, frozenset[str]]] = [(c, frozenset()) for c in root.children]
        while stack:
            node, above = stack.pop()
            row = rows.setdefault(node.method_id, [0, 0, 0, 0.0, 0.0])
            row[0] += node.invocation_count
            if node.method_id not in above:
                row[1] += len(node.agg_packets)
                row[2] += node.agg_bytes
                if node.bounds is not None:
                    row[3] += node.bounds.e_min_j
                    row[4] += node.bounds.e_max_j
            inner = above | {node.method_id}
            stack.extend((c, inner) for c in node.children)
    out = [REPORT_HEADER]
    for method, (calls, npk, nbytes, lo, hi) in sorted(rows.items(), key=lambda kv: (-kv[1][4], kv[0])):
        out.append(f"{method},{calls},{npk},{nbytes},{lo:.6f},{hi:.6f}\n")
    return "".join(out)
