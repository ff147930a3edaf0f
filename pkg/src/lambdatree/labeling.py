"""Labelings, validity checking, span bounds, and the exhaustive oracles.

The oracles are deliberately independent of the table engines: plain
backtracking over vertex labels in breadth-first order.  They are the
ground truth every other component is tested against.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .delta_engine import DeltaTable
from .errors import CapExceededError

__all__ = [
    "Labeling",
    "LambdaBounds",
    "validate_labeling",
    "find_violation",
    "lambda_bounds",
    "brute_force_lambda",
    "brute_force_all_optimal",
    "brute_force_delta",
    "oracle_cap",
]

DEFAULT_ORACLE_CAP = 15
ORACLE_CAP_ENV = "LAMBDATREE_ORACLE_CAP"


def oracle_cap():
    raw = os.environ.get(ORACLE_CAP_ENV)
    if raw is None:
        return DEFAULT_ORACLE_CAP
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{ORACLE_CAP_ENV} must be an integer, got {raw!r}") from None


@dataclass
class Labeling:
    """Vertex labels in input order; the span is the largest label used."""

    labels: list

    @property
    def lambda_used(self):
        return max(self.labels) if self.labels else 0

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, v):
        return self.labels[v]

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class LambdaBounds:
    lower: int
    upper: int


def find_violation(t, labels, p, q):
    """First violated constraint, or None.

    Returns ("adjacent", u, v) or ("distance2", u, v) with the offending
    pair; raises ValueError on a size mismatch.
    """
    if len(labels) != t.n:
        raise ValueError(f"labeling has {len(labels)} entries for {t.n} vertices")
    for u, v in t.edges:
        if abs(labels[u] - labels[v]) < p:
            return ("adjacent", u, v)
    for mid in range(t.n):
        nbrs = t.adj[mid]
        if len(nbrs) < 2:
            continue
        by_label = sorted(nbrs, key=lambda w: labels[w])
        for i in range(len(by_label) - 1):
            x, y = by_label[i], by_label[i + 1]
            if abs(labels[x] - labels[y]) < q:
                return ("distance2", x, y)
    return None


def validate_labeling(t, labeling, p, q):
    """True iff adjacent labels differ by >= p and distance-2 labels by >= q."""
    labels = list(labeling)
    return find_violation(t, labels, p, q) is None


def lambda_bounds(t, p):
    """Span bounds for optimal labelings: [D+p-1, min(D+2p-2, 2D+p-2)]."""
    if t.n == 1:
        return LambdaBounds(0, 0)
    d = t.max_degree
    return LambdaBounds(d + p - 1, min(d + 2 * p - 2, 2 * d + p - 2))


def _bfs_context(t, root):
    """BFS order plus the already-placed vertices each one must be checked
    against: parent (distance 1), grandparent and earlier siblings
    (distance 2)."""
    parent = [-1] * t.n
    order = []
    seen = [False] * t.n
    seen[root] = True
    queue = deque([root])
    while queue:
        x = queue.popleft()
        order.append(x)
        for y in t.adj[x]:
            if not seen[y]:
                seen[y] = True
                parent[y] = x
                queue.append(y)
    earlier_sibs = [[] for _ in range(t.n)]
    placed_children = [[] for _ in range(t.n)]
    for v in order:
        pv = parent[v]
        if pv >= 0:
            earlier_sibs[v] = list(placed_children[pv])
            placed_children[pv].append(v)
    return order, parent, earlier_sibs


def _search(t, p, q, lam, order, parent, earlier_sibs, collect=None):
    """Backtracking over labels 0..lam in BFS order.

    Returns one complete valid labeling, or None; with ``collect`` set,
    exhausts the space and feeds every valid labeling to it.
    """
    n = t.n
    labels = [-1] * n

    def ok(v, c):
        pv = parent[v]
        if pv >= 0:
            if abs(c - labels[pv]) < p:
                return False
            gp = parent[pv]
            if gp >= 0 and abs(c - labels[gp]) < q:
                return False
        for s in earlier_sibs[v]:
            if abs(c - labels[s]) < q:
                return False
        return True

    cand = [0] * n
    idx = 0
    while idx >= 0:
        if idx == n:
            if collect is None:
                return list(labels)
            collect(list(labels))
            idx -= 1
            continue
        v = order[idx]
        c = cand[idx]
        placed = False
        while c <= lam:
            if ok(v, c):
                labels[v] = c
                cand[idx] = c + 1
                idx += 1
                placed = True
                break
            c += 1
        if not placed:
            labels[v] = -1
            cand[idx] = 0
            idx -= 1
    return None


def _feasible(t, p, q, lam):
    root = max(range(t.n), key=lambda v: len(t.adj[v]))
    order, parent, sibs = _bfs_context(t, root)
    return _search(t, p, q, lam, order, parent, sibs)


def brute_force_lambda(t, p, q, cap=None):
    """Exact minimum span with a witness, by ascending feasibility search.

    For q = 1 the scan runs over the proven bounds; general q scans upward
    from p.  Instances above the size cap are refused.
    """
    cap = oracle_cap() if cap is None else cap
    if t.n > cap:
        raise CapExceededError(f"oracle capped at n <= {cap}, got n = {t.n}")
    if p < q or q < 1:
        raise ValueError("need p >= q >= 1")
    if t.n == 1:
        return 0, Labeling([0])
    if q == 1:
        bounds = lambda_bounds(t, p)
        candidates = range(bounds.lower, bounds.upper + 1)
    else:
        candidates = range(p, (t.n - 1) * max(p, q) + 1)
    for lam in candidates:
        witness = _feasible(t, p, q, lam)
        if witness is not None:
            return lam, Labeling(witness)
    raise RuntimeError("no feasible span found within the scanned range")


def brute_force_all_optimal(t, p, q, lam, cap=None):
    """Every valid labeling with span bound lam, for small instances."""
    cap = oracle_cap() if cap is None else cap
    if t.n > cap:
        raise CapExceededError(f"oracle capped at n <= {cap}, got n = {t.n}")
    if t.n == 1:
        return [[c] for c in range(lam + 1)]
    root = max(range(t.n), key=lambda v: len(t.adj[v]))
    order, parent, sibs = _bfs_context(t, root)
    out = []
    _search(t, p, q, lam, order, parent, sibs, collect=out.append)
    return out


def brute_force_delta(rt, v, p, lam, cap=8):
    """Exhaustive table for the subtree at v plus a virtual parent u.

    Entry (a, b) is set when some labeling of the subtree with span <= lam
    has label a on u and b on v; found by backtracking over the subtree in
    BFS order for each pair.  Serves as the oracle for all table engines.
    """
    size = rt.subtree_size[v]
    if size > cap:
        raise CapExceededError(f"delta oracle capped at size {cap}, got {size}")
    sub = [v]
    i = 0
    while i < len(sub):
        sub.extend(rt.children[sub[i]])
        i += 1
    index = {x: k for k, x in enumerate(sub)}
    parents = [-1] * len(sub)
    for k, x in enumerate(sub[1:], start=1):
        parents[k] = index[rt.parent[x]]
    dense = np.zeros((lam + 1, lam + 1), dtype=bool)
    labels = [-1] * len(sub)

    def dfs(k, a):
        if k == len(sub):
            return True
        pk = parents[k]
        for c in range(lam + 1):
            if abs(c - labels[pk]) < p:
                continue
            if pk == 0 and c == a:
                # distance 2 through v to the virtual parent
                continue
            gp = parents[pk]
            if gp >= 0 and c == labels[gp]:
                continue
            conflict = False
            for j in range(1, k):
                if parents[j] == pk and c == labels[j]:
                    conflict = True
                    break
            if conflict:
                continue
            labels[k] = c
            if dfs(k + 1, a):
                labels[k] = -1
                return True
            labels[k] = -1
        return False

    for a in range(lam + 1):
        for b in range(lam + 1):
            if abs(a - b) < p:
                continue
            labels[0] = b
            if dfs(1, a):
                dense[a, b] = True
    return DeltaTable.from_dense(dense, lam, p)
