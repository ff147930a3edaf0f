"""Tree structures, parsing, generators, and the shape-restricting reductions.

The reductions (leaf stripping and long-path splitting) restrict the shape of
the input while preserving, for a fixed target span, whether a valid labeling
exists.  Feasibility of the original tree equals the conjunction of
feasibility over the returned pieces.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .errors import TreeParseError

__all__ = [
    "Tree",
    "RootedTree",
    "PathComponent",
    "PreprocessResult",
    "parse_tree",
    "tree_to_text",
    "root_at_leaf",
    "path_components",
    "preprocess",
    "is_i_major",
    "generate_tree",
]


class Tree:
    """Undirected, simple, connected tree on vertices 0..n-1.

    Instances are immutable once constructed and safe to share between
    threads.
    """

    __slots__ = ("n", "edges", "adj", "max_degree")

    def __init__(self, n, edges, validate=True):
        edges = [(int(u), int(v)) for u, v in edges]
        if validate:
            _validate_tree(n, edges)
        self.n = n
        self.edges = edges
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adj = adj
        self.max_degree = max((len(a) for a in adj), default=0)

    def degree(self, v):
        return len(self.adj[v])

    def degrees(self):
        return [len(a) for a in self.adj]

    def leaves(self):
        return [v for v in range(self.n) if len(self.adj[v]) == 1]

    def __repr__(self):
        return f"Tree(n={self.n}, max_degree={self.max_degree})"


def _validate_tree(n, edges):
    if n < 1:
        raise TreeParseError("vertex count must be at least 1")
    if len(edges) != n - 1:
        raise TreeParseError(
            f"disconnected or cyclic input: expected {n - 1} edges, got {len(edges)}"
        )
    seen = set()
    deg = [0] * n
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise TreeParseError(f"vertex id out of range in edge {u} {v}")
        if u == v:
            raise TreeParseError(f"self-loop at vertex {u}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise TreeParseError(f"duplicate edge {u} {v}")
        seen.add(key)
        deg[u] += 1
        deg[v] += 1
    # n-1 edges and no duplicates; connectivity still needs one BFS.
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    reached = 1
    mark = bytearray(n)
    mark[0] = 1
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if not mark[y]:
                mark[y] = 1
                reached += 1
                queue.append(y)
    if reached != n:
        raise TreeParseError("disconnected input")


def parse_tree(text):
    """Parse the edge-list document format: line 1 is n, then n-1 lines "u v"."""
    lines = text.splitlines()
    if not lines:
        raise TreeParseError("empty input", line=1)
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise TreeParseError(f"expected vertex count, got {lines[0]!r}", line=1) from None
    if n < 1:
        raise TreeParseError("vertex count must be at least 1", line=1)
    edges = []
    lineno = 1
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise TreeParseError(f"expected 'u v', got {raw!r}", line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TreeParseError(f"expected integers, got {raw!r}", line=lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise TreeParseError(f"vertex id out of range in edge {u} {v}", line=lineno)
        if u == v:
            raise TreeParseError(f"self-loop at vertex {u}", line=lineno)
        edges.append((u, v))
    if len(edges) < n - 1:
        raise TreeParseError(
            f"disconnected input: expected {n - 1} edges, got {len(edges)}",
            line=lineno,
        )
    if len(edges) > n - 1:
        raise TreeParseError(
            f"cycle: expected {n - 1} edges, got {len(edges)}", line=lineno
        )
    try:
        return Tree(n, edges)
    except TreeParseError as exc:
        raise TreeParseError(str(exc), line=None) from None


def tree_to_text(t):
    """Serialize in the exact on-disk format (LF endings, trailing newline)."""
    out = [str(t.n)]
    out.extend(f"{u} {v}" for u, v in t.edges)
    return "\n".join(out) + "\n"


class RootedTree:
    """A tree with a distinguished leaf root and the usual per-vertex indices.

    ``order`` is a BFS ordering from the root, so iterating it in reverse
    visits every child before its parent.
    """

    __slots__ = (
        "tree",
        "root",
        "parent",
        "children",
        "order",
        "depth",
        "subtree_size",
        "height",
    )

    def __init__(self, tree, root):
        n = tree.n
        self.tree = tree
        self.root = root
        parent = [-1] * n
        depth = [0] * n
        order = [root]
        parent[root] = root  # sentinel, replaced by -1 below
        queue = deque([root])
        adj = tree.adj
        while queue:
            x = queue.popleft()
            px = parent[x]
            for y in adj[x]:
                if y != px:
                    parent[y] = x
                    depth[y] = depth[x] + 1
                    order.append(y)
                    queue.append(y)
        parent[root] = -1
        children = [[] for _ in range(n)]
        for v in order[1:]:
            children[parent[v]].append(v)
        size = [1] * n
        height = [0] * n
        for v in reversed(order):
            p = parent[v]
            if p >= 0:
                size[p] += size[v]
                if height[v] + 1 > height[p]:
                    height[p] = height[v] + 1
        self.parent = parent
        self.children = children
        self.order = order
        self.depth = depth
        self.subtree_size = size
        self.height = height

    def d_prime(self, v):
        return len(self.children[v])


def root_at_leaf(t):
    """Root at the lowest-id leaf (the single vertex when n = 1)."""
    if t.n == 1:
        return RootedTree(t, 0)
    root = min(v for v in range(t.n) if len(t.adj[v]) == 1)
    return RootedTree(t, root)


@dataclass(frozen=True)
class PathComponent:
    """A maximal run of consecutive degree-2 vertices."""

    vertices: tuple

    @property
    def size(self):
        return len(self.vertices)


def path_components(t):
    """All maximal runs of degree-2 vertices, each reported once.

    Each run is ordered end to end, starting from the endpoint with the
    smaller vertex id.
    """
    deg = t.degrees()
    seen = [False] * t.n
    comps = []
    for v in range(t.n):
        if deg[v] != 2 or seen[v]:
            continue
        # Collect the full run by BFS over degree-2 vertices.
        run = {v}
        queue = deque([v])
        while queue:
            x = queue.popleft()
            for w in t.adj[x]:
                if deg[w] == 2 and w not in run:
                    run.add(w)
                    queue.append(w)
        for x in run:
            seen[x] = True
        # Order the run: endpoints have at most one degree-2 neighbor inside.
        ends = [
            x
            for x in run
            if sum(1 for w in t.adj[x] if w in run) <= 1
        ]
        start = min(ends) if ends else min(run)
        ordered = [start]
        prev = -1
        cur = start
        while len(ordered) < len(run):
            nxt = next(w for w in t.adj[cur] if w in run and w != prev)
            ordered.append(nxt)
            prev, cur = cur, nxt
        comps.append(PathComponent(tuple(ordered)))
    comps.sort(key=lambda c: c.vertices[0])
    return comps


@dataclass
class PreprocessResult:
    """Outcome of the shape-restricting reductions.

    ``trees`` are the split pieces; ``piece_vertex_maps[i][k]`` is the
    original id of piece i's local vertex k.  ``removal_events`` lists
    (leaf, neighbor) pairs in removal order, in original ids, so stripped
    leaves can be re-inserted in reverse.
    """

    trees: list
    removed_leaves: int
    splits: int
    piece_vertex_maps: list = field(default_factory=list)
    removal_events: list = field(default_factory=list)


def preprocess(t, p, lam, split_paths=True):
    """Strip irrelevant leaves and split long degree-2 runs.

    Step 1 repeatedly removes any leaf whose unique neighbor has degree
    less than lam - 2p + 3.  Step 2 splits every path component of size
    at least 4 by deleting its second and third vertices.  Both steps
    preserve lam-feasibility; they run interleaved to a joint fixpoint.

    With ``split_paths=False`` only Step 1 runs, which keeps a single
    piece and makes label reconstruction a pure reverse replay.
    """
    n = t.n
    if n <= 2:
        return PreprocessResult(
            trees=[t],
            removed_leaves=0,
            splits=0,
            piece_vertex_maps=[list(range(n))],
            removal_events=[],
        )
    thr = lam - 2 * p + 3
    alive = bytearray(b"\x01" * n)
    deg = t.degrees()
    adj = t.adj
    events = []
    splits = 0

    def step1(seed_vertices):
        stack = list(seed_vertices)
        while stack:
            v = stack.pop()
            if not alive[v] or deg[v] != 1:
                continue
            u = next(w for w in adj[v] if alive[w])
            if deg[u] >= thr:
                continue
            alive[v] = 0
            deg[v] = 0
            deg[u] -= 1
            events.append((v, u))
            if deg[u] == 1:
                stack.append(u)
            elif deg[u] == thr - 1:
                # u just dropped below the threshold: its leaves wake up.
                for w in adj[u]:
                    if alive[w] and deg[w] == 1:
                        stack.append(w)

    def find_one_split():
        # One maximal alive run of degree-2 vertices with size >= 4.
        visited = set()
        for v in range(n):
            if not alive[v] or deg[v] != 2 or v in visited:
                continue
            run = {v}
            queue = deque([v])
            while queue:
                x = queue.popleft()
                for w in adj[x]:
                    if alive[w] and deg[w] == 2 and w not in run:
                        run.add(w)
                        queue.append(w)
            visited |= run
            if len(run) < 4:
                continue
            ends = [
                x
                for x in run
                if sum(1 for w in adj[x] if alive[w] and w in run) <= 1
            ]
            start = min(ends)
            ordered = [start]
            prev = -1
            cur = start
            while len(ordered) < len(run):
                nxt = next(
                    w for w in adj[cur] if alive[w] and w in run and w != prev
                )
                ordered.append(nxt)
                prev, cur = cur, nxt
            return ordered
        return None

    step1(
        [v for v in range(n) if deg[v] == 1]
    )
    while split_paths:
        run = find_one_split()
        if run is None:
            break
        v1, v2, v3, v4 = run[0], run[1], run[2], run[3]
        alive[v2] = 0
        alive[v3] = 0
        deg[v2] = 0
        deg[v3] = 0
        deg[v1] -= 1
        deg[v4] -= 1
        splits += 1
        step1([v1, v4])

    # Extract the surviving components as piece trees.
    pieces = []
    maps = []
    claimed = bytearray(n)
    for v in range(n):
        if not alive[v] or claimed[v]:
            continue
        comp = [v]
        claimed[v] = 1
        queue = deque([v])
        while queue:
            x = queue.popleft()
            for w in adj[x]:
                if alive[w] and not claimed[w]:
                    claimed[w] = 1
                    comp.append(w)
                    queue.append(w)
        comp.sort()
        local = {orig: i for i, orig in enumerate(comp)}
        piece_edges = [
            (local[a], local[b])
            for a, b in t.edges
            if alive[a] and alive[b] and a in local and b in local
        ]
        pieces.append(Tree(len(comp), piece_edges, validate=False))
        maps.append(comp)
    return PreprocessResult(
        trees=pieces,
        removed_leaves=len(events),
        splits=splits,
        piece_vertex_maps=maps,
        removal_events=events,
    )


def is_i_major(t, v, i, p, lam, at_least=True):
    """Degree test against lam - p - i + 1; ``at_least`` picks the >= variant."""
    target = lam - p - i + 1
    d = t.degree(v)
    return d >= target if at_least else d == target


def generate_tree(kind, n, delta=None, seed=0):
    """Deterministic tree generators used by tests, the CLI, and the bench."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if kind == "path":
        return Tree(n, [(i, i + 1) for i in range(n - 1)], validate=False)
    if kind == "star":
        if delta is not None and delta != n - 1:
            raise ValueError(f"star with n={n} has delta {n - 1}, not {delta}")
        return Tree(n, [(0, i) for i in range(1, n)], validate=False)
    if kind == "caterpillar":
        return _gen_caterpillar(n, delta)
    if kind == "broom":
        return _gen_broom(n, delta)
    if kind == "random":
        return _gen_random(n, delta, seed)
    if kind == "v45_stress":
        return _gen_v45_stress(n, delta, seed)
    raise ValueError(f"unknown tree kind {kind!r}")


def _gen_caterpillar(n, delta):
    if n <= 2:
        return generate_tree("path", n)
    if delta is None:
        delta = 3
    if delta < 3:
        raise ValueError("caterpillar needs delta >= 3")
    legs = delta - 2
    edges = []
    spine_prev = 0
    next_id = 1
    while next_id < n:
        # attach legs to the current spine vertex, then extend the spine
        for _ in range(legs):
            if next_id >= n:
                break
            edges.append((spine_prev, next_id))
            next_id += 1
        if next_id < n:
            edges.append((spine_prev, next_id))
            spine_prev = next_id
            next_id += 1
    return Tree(n, edges, validate=False)


def _gen_broom(n, delta):
    if delta is None:
        raise ValueError("broom needs delta")
    if n < delta + 1:
        raise ValueError(f"broom with delta={delta} needs n >= {delta + 1}")
    edges = [(0, i) for i in range(1, delta + 1)]
    # tail grafted through one star leaf
    prev = delta
    for v in range(delta + 1, n):
        edges.append((prev, v))
        prev = v
    return Tree(n, edges, validate=False)


def _prufer_decode(seq, n):
    deg = [1] * n
    for x in seq:
        deg[x] += 1
    edges = []
    # leaf pointer scan, O(n log n)-free classic decode
    import heapq

    leaves = [v for v in range(n) if deg[v] == 1]
    heapq.heapify(leaves)
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        deg[x] -= 1
        if deg[x] == 1:
            heapq.heappush(leaves, x)
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def _gen_random(n, delta, seed):
    rng = random.Random(seed)
    if n == 1:
        return Tree(1, [], validate=False)
    if n == 2:
        return Tree(2, [(0, 1)], validate=False)
    if delta is None:
        seq = [rng.randrange(n) for _ in range(n - 2)]
        return Tree(n, _prufer_decode(seq, n), validate=False)
    if delta < 2 and n > 2:
        raise ValueError("random tree with n > 2 needs delta >= 2")
    if n < delta + 1:
        raise ValueError(f"max degree {delta} needs n >= {delta + 1}")
    # Random attachment under a degree cap, then lift one vertex to the cap
    # so the maximum degree is exactly delta.
    deg = [0] * n
    nbr = [[] for _ in range(n)]
    parent = [0] * n
    for v in range(1, n):
        while True:
            u = rng.randrange(v)
            if deg[u] < delta:
                break
        parent[v] = u
        deg[u] += 1
        deg[v] += 1
        nbr[u].append(v)
        nbr[v].append(u)
    target = max(range(n), key=lambda v: (deg[v], -v))
    if deg[target] < delta:
        candidates = [v for v in range(n) if deg[v] == 1 and v != target]
        rng.shuffle(candidates)
        for leaf in candidates:
            if deg[target] >= delta:
                break
            u = nbr[leaf][0]
            if u == target or leaf in nbr[target]:
                continue
            if deg[u] == 1:
                continue
            nbr[u].remove(leaf)
            deg[u] -= 1
            nbr[leaf] = [target]
            nbr[target].append(leaf)
            deg[target] += 1
        if deg[target] != delta:
            raise ValueError(
                f"could not realize max degree {delta} with n={n} (seed {seed})"
            )
    edges = []
    for v in range(n):
        for w in nbr[v]:
            if v < w:
                edges.append((v, w))
    return Tree(n, edges, validate=False)


def _gen_v45_stress(n, delta, seed):
    """Spine with grafted major-vertex stars.

    Star subtrees have size exactly delta, so their leaves survive leaf
    stripping.  Most attachment points carry one star; periodic bumps carry
    several so that the grafted subtree sizes straddle delta*(delta-19).
    One branch vertex with two spine arms exercises the branching class.
    Vertex 0 is a leaf of the first star, so rooting picks the far end.
    """
    if delta is None:
        raise ValueError("v45_stress needs delta")
    if delta < 21:
        raise ValueError("v45_stress needs delta >= 21")
    if n < 6 * delta:
        raise ValueError(f"v45_stress with delta={delta} needs n >= {6 * delta}")
    edges = []
    next_id = [0]

    def fresh():
        v = next_id[0]
        next_id[0] += 1
        return v

    def add_star(attach):
        # center + (delta - 1) leaves; center degree = delta with the parent
        leaves = [fresh() for _ in range(delta - 1)]
        center = fresh()
        for leaf in leaves:
            edges.append((center, leaf))
        edges.append((attach, center))
        return delta

    # First star owns ids 0..delta-1; its center attaches to the spine head.
    star_leaves = [fresh() for _ in range(delta - 1)]
    head_center = fresh()
    for leaf in star_leaves:
        edges.append((head_center, leaf))
    spine = fresh()
    edges.append((spine, head_center))
    budget = n - next_id[0]

    v4_group = max(2, (delta * (delta - 19)) // (2 * delta))  # sum <= split point
    v5_group = delta - 18  # sum = (delta-18)*delta > delta*(delta-19)
    pattern = [1, 1, "v4", 1, 1, "v5", 1, "branch", 1]
    step = 0
    while budget > delta + 4:
        kind = pattern[step % len(pattern)]
        step += 1
        # two plain spine vertices keep degree-2 runs short
        for _ in range(2):
            if budget <= delta + 4:
                break
            nxt = fresh()
            edges.append((spine, nxt))
            spine = nxt
            budget -= 1
        if budget <= delta + 4:
            break
        groups = 1
        if kind == "v4":
            groups = v4_group
        elif kind == "v5":
            groups = v5_group
        if kind == "branch" and budget > 3 * delta + 6:
            # side arm with its own star so d-tilde(spine) >= 2
            arm = fresh()
            edges.append((spine, arm))
            budget -= 1
            arm2 = fresh()
            edges.append((arm, arm2))
            budget -= 1
            budget -= add_star(arm2)
            continue
        for _ in range(groups):
            if budget < delta + 2:
                break
            budget -= add_star(spine)
    # pad the tail with a chain broken by stars every 2 steps
    while budget > 0:
        nxt = fresh()
        edges.append((spine, nxt))
        spine = nxt
        budget -= 1
        if budget >= delta and budget % 3 == 0:
            budget -= add_star(spine)
    assert next_id[0] == n
    return Tree(n, edges, validate=False)
