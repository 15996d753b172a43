"""Mixed graphs with endpoint marks, separation queries and rewrites.

Graphs carry three endpoint marks (tail, arrow, circle) on unordered
edges, so the same structure serves as DAG, ancestral graph with
bidirected edges, or a partially oriented output of a discovery run.
Statistic nodes are deterministic functions of their argument parents;
:func:`augment` splices them into a base graph and :func:`d_separated`
treats them like any other node, which is what makes separation-by-a-
statistic queries expressible.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

__all__ = [
    "EndpointMark",
    "MixedGraph",
    "StatisticNodeSpec",
    "d_separated",
    "augment",
    "intervene",
    "render",
]

NODE_KINDS = ("observable", "latent", "statistic")


class EndpointMark(Enum):
    TAIL = "tail"
    ARROW = "arrow"
    CIRCLE = "circle"


_LEFT_CHAR = {EndpointMark.TAIL: "-", EndpointMark.CIRCLE: "o", EndpointMark.ARROW: "<"}
_RIGHT_CHAR = {EndpointMark.TAIL: "-", EndpointMark.CIRCLE: "o", EndpointMark.ARROW: ">"}
_PRECEDENCE = {EndpointMark.TAIL: 0, EndpointMark.CIRCLE: 1, EndpointMark.ARROW: 2}


@dataclass(frozen=True)
class StatisticNodeSpec:
    """Declares a statistic node to splice into a graph.

    ``arguments`` are the variables the statistic is computed from,
    ``hosts`` the variables whose mechanism consumes it.  ``labels``
    optionally stores the total map from joint argument states (row-major)
    to statistic states; the graph layer never interprets it.
    """

    name: str
    arguments: tuple[str, ...]
    hosts: tuple[str, ...]
    labels: tuple[int, ...] | None = None


def _edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class MixedGraph:
    """Nodes with kinds, marked edges, and recorded noncollider triples."""

    def __init__(self) -> None:
        self._kinds: dict[str, str] = {}
        self._edges: dict[tuple[str, str], dict[str, EndpointMark]] = {}
        self._adj: dict[str, set[str]] = {}
        self._noncolliders: set[tuple[str, str, str]] = set()

    # -- construction ----------------------------------------------------

    def add_node(self, name: str, kind: str = "observable") -> None:
        if kind not in NODE_KINDS:
            raise ValueError(f"unknown node kind {kind!r}")
        if name in self._kinds:
            raise ValueError(f"node {name!r} already present")
        self._kinds[name] = kind
        self._adj[name] = set()

    def add_edge(self, a: str, b: str, mark_a: EndpointMark, mark_b: EndpointMark) -> None:
        if a == b:
            raise ValueError("self loops are not allowed")
        for n in (a, b):
            if n not in self._kinds:
                raise KeyError(f"unknown node {n!r}")
        key = _edge_key(a, b)
        if key in self._edges:
            raise ValueError(f"edge {a!r}-{b!r} already present")
        self._edges[key] = {a: mark_a, b: mark_b}
        self._adj[a].add(b)
        self._adj[b].add(a)

    def add_directed_edge(self, parent: str, child: str) -> None:
        self.add_edge(parent, child, EndpointMark.TAIL, EndpointMark.ARROW)

    def remove_edge(self, a: str, b: str) -> None:
        key = _edge_key(a, b)
        if key not in self._edges:
            raise KeyError(f"no edge {a!r}-{b!r}")
        del self._edges[key]
        self._adj[a].discard(b)
        self._adj[b].discard(a)
        self._noncolliders = {
            t for t in self._noncolliders if self._triple_supported(t)
        }

    def add_noncollider(self, a: str, y: str, b: str) -> None:
        triple = self._normalize_triple(a, y, b)
        if not self._triple_supported(triple):
            raise ValueError(f"noncollider {triple} needs edges {a}-{y} and {y}-{b}")
        self._noncolliders.add(triple)

    @staticmethod
    def _normalize_triple(a: str, y: str, b: str) -> tuple[str, str, str]:
        lo, hi = (a, b) if a <= b else (b, a)
        return (lo, y, hi)

    def _triple_supported(self, triple: tuple[str, str, str]) -> bool:
        a, y, b = triple
        return self.has_edge(a, y) and self.has_edge(y, b)

    # -- queries ---------------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self._kinds)

    def kind(self, name: str) -> str:
        return self._kinds[name]

    def has_node(self, name: str) -> bool:
        return name in self._kinds

    def has_edge(self, a: str, b: str) -> bool:
        return _edge_key(a, b) in self._edges

    def edges(self) -> list[tuple[str, str]]:
        return sorted(self._edges)

    def mark_at(self, node: str, other: str) -> EndpointMark:
        """Mark at ``node``'s end of the edge between node and other."""
        key = _edge_key(node, other)
        if key not in self._edges:
            raise KeyError(f"no edge {node!r}-{other!r}")
        return self._edges[key][node]

    def set_mark(self, node: str, other: str, mark: EndpointMark) -> None:
        key = _edge_key(node, other)
        if key not in self._edges:
            raise KeyError(f"no edge {node!r}-{other!r}")
        self._edges[key][node] = mark

    def neighbors(self, node: str) -> set[str]:
        return set(self._adj[node])

    def noncolliders(self) -> set[tuple[str, str, str]]:
        return set(self._noncolliders)

    def is_noncollider(self, a: str, y: str, b: str) -> bool:
        return self._normalize_triple(a, y, b) in self._noncolliders

    def is_directed(self, parent: str, child: str) -> bool:
        return (
            self.has_edge(parent, child)
            and self.mark_at(parent, child) is EndpointMark.TAIL
            and self.mark_at(child, parent) is EndpointMark.ARROW
        )

    def parents(self, node: str) -> set[str]:
        return {n for n in self._adj[node] if self.is_directed(n, node)}

    def children(self, node: str) -> set[str]:
        return {n for n in self._adj[node] if self.is_directed(node, n)}

    def descendants(self, node: str) -> set[str]:
        """Nodes reachable through fully directed edges, including node."""
        seen = {node}
        stack = [node]
        while stack:
            cur = stack.pop()
            for child in self.children(cur):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return seen

    def ancestors(self, node: str) -> set[str]:
        seen = {node}
        stack = [node]
        while stack:
            cur = stack.pop()
            for parent in self.parents(cur):
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return seen

    def validate(self) -> None:
        """Reject directed cycles; statistic chains count as directed too."""
        color: dict[str, int] = {}

        def visit(node: str, trail: list[str]) -> None:
            color[node] = 1
            for child in self.children(node):
                if color.get(child, 0) == 1:
                    raise ValueError(f"directed cycle through {child!r}: {trail + [node, child]}")
                if color.get(child, 0) == 0:
                    visit(child, trail + [node])
            color[node] = 2

        for node in self._kinds:
            if color.get(node, 0) == 0:
                visit(node, [])

    def copy(self) -> "MixedGraph":
        g = MixedGraph()
        g._kinds = dict(self._kinds)
        g._edges = {k: dict(v) for k, v in self._edges.items()}
        g._adj = {k: set(v) for k, v in self._adj.items()}
        g._noncolliders = set(self._noncolliders)
        return g

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "nodes": [{"name": n, "kind": k} for n, k in self._kinds.items()],
            "edges": [
                {
                    "a": a,
                    "b": b,
                    "mark_a": self._edges[(a, b)][a].value,
                    "mark_b": self._edges[(a, b)][b].value,
                }
                for a, b in self.edges()
            ],
            "noncolliders": sorted(list(t) for t in self._noncolliders),
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MixedGraph":
        payload = json.loads(text)
        g = cls()
        for node in payload["nodes"]:
            g.add_node(node["name"], node.get("kind", "observable"))
        for e in payload["edges"]:
            g.add_edge(e["a"], e["b"], EndpointMark(e["mark_a"]), EndpointMark(e["mark_b"]))
        for a, y, b in payload.get("noncolliders", []):
            g.add_noncollider(a, y, b)
        return g


def _as_set(x: str | Iterable[str]) -> set[str]:
    if isinstance(x, str):
        return {x}
    return set(x)


def d_separated(
    g: MixedGraph,
    a: str | Iterable[str],
    b: str | Iterable[str],
    s: Iterable[str] = (),
) -> bool:
    """True when every path between the node sets is blocked given s.

    A path is active when all its colliders (both incident marks are
    arrows) are in s or have a descendant in s, and no other interior node
    is in s.  Implemented as reachability over (node, entered-by-arrow)
    states, checked against an exhaustive path enumeration in the tests.
    """
    set_a, set_b, set_s = _as_set(a), _as_set(b), _as_set(s)
    for n in set_a | set_b | set_s:
        if not g.has_node(n):
            raise KeyError(f"unknown node {n!r}")
    if set_a & set_b or set_a & set_s or set_b & set_s:
        raise ValueError("query sets must be disjoint")

    # collider passage: node in s, or some descendant in s
    opens_collider = {
        n: bool(g.descendants(n) & set_s) for n in g.nodes
    }

    queue: deque[tuple[str, bool]] = deque()
    visited: set[tuple[str, bool]] = set()
    for start in set_a:
        for nb in g.neighbors(start):
            if nb in set_b:
                return False
            state = (nb, g.mark_at(nb, start) is EndpointMark.ARROW)
            if state not in visited:
                visited.add(state)
                queue.append(state)
    while queue:
        node, in_arrow = queue.popleft()
        for nb in g.neighbors(node):
            out_arrow = g.mark_at(node, nb) is EndpointMark.ARROW
            if in_arrow and out_arrow:
                passable = node in set_s or opens_collider[node]
            else:
                passable = node not in set_s
            if not passable:
                continue
            if nb in set_b:
                return False
            state = (nb, g.mark_at(nb, node) is EndpointMark.ARROW)
            if state not in visited:
                visited.add(state)
                queue.append(state)
    return True


def augment(
    g: MixedGraph,
    stats: Sequence[StatisticNodeSpec],
    keep_direct: Iterable[tuple[str, str]] = (),
) -> MixedGraph:
    """Splice statistic nodes between their arguments and hosts.

    Every (argument, host) direct edge is removed, reflecting that the
    argument acts on the host only through the statistic; pairs listed in
    ``keep_direct`` keep their edge (the argument also enters the host's
    mechanism bare).  With an empty ``stats`` the graph is returned
    unchanged (as a copy).
    """
    keep = set(keep_direct)
    out = g.copy()
    for spec in stats:
        if out.has_node(spec.name):
            raise ValueError(f"statistic name {spec.name!r} collides with an existing node")
        out.add_node(spec.name, "statistic")
        for arg in spec.arguments:
            out.add_directed_edge(arg, spec.name)
        for host in spec.hosts:
            out.add_directed_edge(spec.name, host)
        for arg in spec.arguments:
            for host in spec.hosts:
                if (arg, host) in keep:
                    continue
                if out.has_edge(arg, host):
                    out.remove_edge(arg, host)
    out.validate()
    return out


def intervene(g: MixedGraph, targets: str | Iterable[str]) -> MixedGraph:
    """Cut every edge with an arrowhead at a target (incoming and bidirected)."""
    targets = _as_set(targets)
    for t in targets:
        if not g.has_node(t):
            raise KeyError(f"unknown node {t!r}")
    out = g.copy()
    for t in targets:
        for nb in list(out.neighbors(t)):
            if out.mark_at(t, nb) is EndpointMark.ARROW:
                out.remove_edge(t, nb)
    return out


def render(g: MixedGraph) -> str:
    """Human-readable listing: nodes, one line per edge, noncolliders.

    The endpoint with the higher-precedence mark (arrow > circle > tail)
    is printed on the right; ties fall back to name order.
    """
    lines = []
    kinds = [f"{n} ({g.kind(n)})" if g.kind(n) != "observable" else n for n in sorted(g.nodes)]
    lines.append("nodes: " + ", ".join(kinds))
    for a, b in g.edges():
        ma, mb = g.mark_at(a, b), g.mark_at(b, a)
        if _PRECEDENCE[ma] > _PRECEDENCE[mb]:
            left, right, ml, mr = b, a, mb, ma
        else:
            left, right, ml, mr = a, b, ma, mb
        lines.append(f"{left} {_LEFT_CHAR[ml]}-{_RIGHT_CHAR[mr]} {right}")
    for a, y, b in sorted(g.noncolliders()):
        lines.append(f"{a} *-({y})-* {b} underlined")
    return "\n".join(lines)
