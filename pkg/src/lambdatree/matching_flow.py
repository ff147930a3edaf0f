"""Combinatorial kernels: bipartite matching with alternating-path
reachability, and integral max-flow with residual reachability.

These back the feasibility-row computations: the matching side answers
"which labels can be left unused by some full assignment of children",
the flow side answers the same question on networks whose central label
band is bundled into a single high-capacity node.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

__all__ = [
    "BipartiteGraph",
    "Matching",
    "FlowNetwork",
    "max_matching",
    "alternating_reachable",
    "max_flow",
    "residual_reachable",
]


class BipartiteGraph:
    """Left vertices (children) to right vertices (labels), adjacency lists."""

    __slots__ = ("left_count", "right_count", "adj")

    def __init__(self, left_count, right_count, edges=None):
        self.left_count = left_count
        self.right_count = right_count
        self.adj = [[] for _ in range(left_count)]
        if edges:
            for u, v in edges:
                self.add_edge(u, v)

    def add_edge(self, left, right):
        if not (0 <= left < self.left_count and 0 <= right < self.right_count):
            raise ValueError(f"edge ({left},{right}) out of range")
        self.adj[left].append(right)


@dataclass
class Matching:
    pair_of_left: list
    pair_of_right: list

    @property
    def size(self):
        return sum(1 for r in self.pair_of_left if r is not None)


_INF = float("inf")


def max_matching(g):
    """Hopcroft-Karp. Deterministic: lefts in index order, adjacency order kept."""
    pair_l = [None] * g.left_count
    pair_r = [None] * g.right_count
    dist = [0] * g.left_count

    def bfs():
        queue = deque()
        found = False
        for u in range(g.left_count):
            if pair_l[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        while queue:
            u = queue.popleft()
            for r in g.adj[u]:
                w = pair_r[r]
                if w is None:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u):
        for r in g.adj[u]:
            w = pair_r[r]
            if w is None or (dist[w] == dist[u] + 1 and dfs(w)):
                pair_l[u] = r
                pair_r[r] = u
                return True
        dist[u] = _INF
        return False

    while bfs():
        for u in range(g.left_count):
            if pair_l[u] is None:
                dfs(u)
    return Matching(pair_l, pair_r)


def alternating_reachable(g, m):
    """Right vertices reachable from unmatched rights via alternating paths.

    Paths alternate a non-matching edge (right to left) with a matching edge
    (left to its partner); an unmatched right vertex reaches itself.  A right
    vertex lands in the result exactly when some maximum matching of the same
    size leaves it unmatched.
    """
    right_to_lefts = [[] for _ in range(g.right_count)]
    for u in range(g.left_count):
        for r in g.adj[u]:
            right_to_lefts[r].append(u)
    reach = [False] * g.right_count
    queue = deque()
    for r in range(g.right_count):
        if m.pair_of_right[r] is None:
            reach[r] = True
            queue.append(r)
    while queue:
        r = queue.popleft()
        for u in right_to_lefts[r]:
            pr = m.pair_of_left[u]
            if pr is not None and pr != r and not reach[pr]:
                reach[pr] = True
                queue.append(pr)
    return {r for r in range(g.right_count) if reach[r]}


@dataclass
class _Arc:
    to: int
    cap: int
    flow: int = 0


class FlowNetwork:
    """Integral-capacity network with Dinic augmentation.

    Nodes are plain ints.  ``child_nodes`` and ``label_nodes`` mark the two
    middle layers when the network encodes a child-to-label assignment;
    ``residual_reachable`` relies on them.
    """

    def __init__(self, num_nodes, source, sink):
        self.num_nodes = num_nodes
        self.source = source
        self.sink = sink
        self.arcs = []
        self.out = [[] for _ in range(num_nodes)]
        self.child_nodes = []
        self.label_nodes = []
        self._sink_arc = {}

    def add_edge(self, u, v, cap):
        if cap < 0:
            raise ValueError("capacity must be nonnegative")
        i = len(self.arcs)
        self.arcs.append(_Arc(v, cap))
        self.arcs.append(_Arc(u, 0))
        self.out[u].append(i)
        self.out[v].append(i + 1)
        if v == self.sink:
            self._sink_arc[u] = i
        return i

    def arc_flow(self, i):
        return self.arcs[i].flow

    def max_flow_value(self):
        total = 0
        arcs = self.arcs
        while True:
            level = [-1] * self.num_nodes
            level[self.source] = 0
            queue = deque([self.source])
            while queue:
                x = queue.popleft()
                for i in self.out[x]:
                    a = arcs[i]
                    if a.cap - a.flow > 0 and level[a.to] < 0:
                        level[a.to] = level[x] + 1
                        queue.append(a.to)
            if level[self.sink] < 0:
                return total
            it = [0] * self.num_nodes

            def dfs(x, pushed):
                if x == self.sink:
                    return pushed
                while it[x] < len(self.out[x]):
                    i = self.out[x][it[x]]
                    a = arcs[i]
                    if a.cap - a.flow > 0 and level[a.to] == level[x] + 1:
                        got = dfs(a.to, min(pushed, a.cap - a.flow))
                        if got > 0:
                            a.flow += got
                            arcs[i ^ 1].flow -= got
                            return got
                    it[x] += 1
                return 0

            while True:
                pushed = dfs(self.source, 1 << 60)
                if pushed == 0:
                    break
                total += pushed


def max_flow(net):
    """Value of a maximum source-to-sink flow; flows stay stored on the arcs."""
    return net.max_flow_value()


def residual_reachable(net):
    """Label nodes freeable under some maximum flow.

    Starts from labels whose sink arc has slack and walks paths inside the
    child-label layer whose arcs alternately have residual capacity and
    positive flow.  Must be called after ``max_flow``.
    """
    arcs = net.arcs
    label_set = set(net.label_nodes)
    slack = []
    for c in net.label_nodes:
        i = net._sink_arc.get(c)
        if i is not None and arcs[i].cap - arcs[i].flow >= 1:
            slack.append(c)
    reach = set(slack)
    queue = deque(slack)
    while queue:
        c = queue.popleft()
        # residual (unused) arc child -> c, then a flow-carrying arc child -> c'
        for i in net.out[c]:
            back = arcs[i]
            w = back.to
            if w in label_set or w == net.sink or w == net.source:
                continue
            fwd = arcs[i ^ 1]  # the child -> label arc
            if fwd.cap - fwd.flow < 1:
                continue
            for j in net.out[w]:
                a = arcs[j]
                if a.flow >= 1 and a.to in label_set and a.to not in reach:
                    reach.add(a.to)
                    queue.append(a.to)
    return reach
