"""Feasibility-table computation for rooted subtrees.

A table answers, for the edge between a vertex v and its (possibly virtual)
parent u: can the subtree hanging from v be labeled with span at most lam
when u gets label a and v gets label b?  Entries with |a-b| < p are
structurally infeasible.

Central labels far from both ends of [0, lam] are interchangeable once the
subtree is small enough (the level bound below quantifies this), so tables
can be stored over a compressed domain: the concrete labels near the ends
plus one representative for the whole central band.  Row computation then
runs on a flow network whose band node carries the band's total capacity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError
from .matching_flow import (
    BipartiteGraph,
    FlowNetwork,
    alternating_reachable,
    max_flow,
    max_matching,
    residual_reachable,
)

__all__ = [
    "LabelDomain",
    "DeltaTable",
    "ChildTypeVector",
    "level_bound",
    "trivial_level",
    "vq_base_delta",
    "generalized_leaf_base_delta",
    "maintain_matching_delta",
    "flow_delta",
    "compute_delta_v3",
    "compute_delta_v4",
    "compute_delta_v5",
    "delta_table_for",
    "DeltaComputer",
]


def ball_size(b, p, lam):
    """Number of labels within distance p-1 of b inside [0, lam]."""
    return min(b + p - 1, lam) - max(b - p + 1, 0) + 1


def trivial_level(lam):
    """Compression level at which the central band vanishes."""
    return (lam + 2) // 2


def level_bound(subtree_size, lam, p):
    """Smallest level certified for a subtree of the given size.

    Returns the least h with subtree_size < (lam - 2h - 4p + 4)^(h/(2p-2))
    and lam - 2h >= 3p - 3; labels in [h, lam-h] are then interchangeable.
    Falls back to the trivial level when no h qualifies.  Level 0 for p = 1,
    where all labels are interchangeable.
    """
    if subtree_size < 1:
        raise ValueError("subtree_size must be >= 1")
    if p == 1:
        return 0
    top = trivial_level(lam)
    lhs = subtree_size ** (2 * p - 2)
    for h in range(1, top):
        if lam - 2 * h < 3 * p - 3:
            break
        base = lam - 2 * h - 4 * p + 4
        if base >= 2 and lhs < base**h:
            return h
    return top


class LabelDomain:
    """Concrete labels near 0 and lam plus one slot for the central band.

    Slot layout: 0..level-1 are the low labels, slot ``level`` is the band
    [level, lam-level], slots level+1..2*level are the high labels.  A level
    at or above ``trivial_level(lam)`` degenerates to one slot per label.
    """

    __slots__ = ("lam", "p", "level", "compressed", "band_lo", "band_hi", "size")

    def __init__(self, lam, p, level):
        self.lam = lam
        self.p = p
        if level >= trivial_level(lam) or 2 * level + 1 > lam + 1:
            self.level = trivial_level(lam)
            self.compressed = False
            self.band_lo = None
            self.band_hi = None
            self.size = lam + 1
        else:
            self.level = level
            self.compressed = True
            self.band_lo = level
            self.band_hi = lam - level
            self.size = 2 * level + 1

    def slot_of(self, label):
        if not self.compressed:
            return label
        if label < self.band_lo:
            return label
        if label > self.band_hi:
            return self.level + 1 + (label - self.band_hi - 1)
        return self.level

    def label_of_slot(self, slot):
        """Concrete label for a slot, or None for the band slot."""
        if not self.compressed:
            return slot
        if slot < self.level:
            return slot
        if slot == self.level:
            return None
        return self.band_hi + (slot - self.level)

    def slot_index_vector(self):
        return np.array([self.slot_of(c) for c in range(self.lam + 1)], dtype=np.intp)

    @property
    def band_slot(self):
        return self.level if self.compressed else None

    def band_rep(self):
        """Canonical concrete stand-in for the band; its ball stays in-band."""
        rep = self.band_lo + self.p - 1
        if rep > self.band_hi:
            raise InvariantViolationError("band too narrow for a representative")
        return rep

    def band_count_outside_ball(self, b):
        lo, hi = self.band_lo, self.band_hi
        low = min(hi, b - self.p) - lo + 1
        high = hi - max(lo, b + self.p) + 1
        return max(0, low) + max(0, high)

    def band_witness_outside_ball(self, b):
        """Some band label at distance >= p from b, preferring the far end."""
        lo, hi = self.band_lo, self.band_hi
        lo_ok = b - lo >= self.p
        hi_ok = hi - b >= self.p
        if not lo_ok and not hi_ok:
            return None
        if lo_ok and hi_ok:
            return lo if b - lo >= hi - b else hi
        return lo if lo_ok else hi

    def band_members_outside_ball(self, b, avoid=(), limit=None):
        lo, hi = self.band_lo, self.band_hi
        out = []
        for c in range(lo, hi + 1):
            if abs(c - b) >= self.p and c not in avoid:
                out.append(c)
                if limit is not None and len(out) >= limit:
                    break
        return out

    def __eq__(self, other):
        return (
            isinstance(other, LabelDomain)
            and self.lam == other.lam
            and self.p == other.p
            and self.level == other.level
        )

    def __hash__(self):
        return hash((self.lam, self.p, self.level))


class DeltaTable:
    """Bit table over a (possibly compressed) head x neck label domain.

    ``bits[a_slot, b_slot]`` answers feasibility for parent label a and
    vertex label b.  The same domain serves both axes.
    """

    __slots__ = ("lam", "p", "domain", "bits", "intern_id")

    def __init__(self, domain, bits):
        self.lam = domain.lam
        self.p = domain.p
        self.domain = domain
        self.bits = bits
        self.intern_id = None

    @property
    def head_domain(self):
        return self.domain

    @property
    def neck_domain(self):
        return self.domain

    @property
    def head_level(self):
        return self.domain.level

    @property
    def neck_level(self):
        return self.domain.level

    def get(self, a, b):
        """Entry for concrete labels a (head) and b (neck)."""
        if abs(a - b) < self.p:
            return False
        return bool(self.bits[self.domain.slot_of(a), self.domain.slot_of(b)])

    def expand(self):
        """Dense (lam+1) x (lam+1) boolean table."""
        ix = self.domain.slot_index_vector()
        dense = self.bits[np.ix_(ix, ix)].copy()
        labels = np.arange(self.lam + 1)
        dense &= np.abs(labels[:, None] - labels[None, :]) >= self.p
        return dense

    def neck_feasible_count(self, b):
        """(count, unique) of neck labels c with get(b, c) true, head = b.

        ``unique`` is the single feasible c when count == 1, else None.
        """
        dom = self.domain
        row = self.bits[dom.slot_of(b)]
        count = 0
        unique = None
        for slot in range(dom.size):
            if not row[slot]:
                continue
            c = dom.label_of_slot(slot)
            if c is None:
                k = dom.band_count_outside_ball(b)
                if k:
                    count += k
                    if k == 1:
                        unique = dom.band_members_outside_ball(b, limit=1)[0]
            elif abs(c - b) >= self.p:
                count += 1
                unique = c
        return count, (unique if count == 1 else None)

    def dump(self):
        """Text grid: rows are head labels a, columns neck labels b.

        '.' marks pairs with |a-b| < p, else '1'/'0'.
        """
        dense = self.expand()
        lines = []
        for a in range(self.lam + 1):
            row = []
            for b in range(self.lam + 1):
                if abs(a - b) < self.p:
                    row.append(".")
                else:
                    row.append("1" if dense[a, b] else "0")
            lines.append("".join(row))
        return "\n".join(lines)

    @classmethod
    def from_dense(cls, dense, lam, p):
        dom = LabelDomain(lam, p, trivial_level(lam))
        bits = np.asarray(dense, dtype=bool).copy()
        labels = np.arange(lam + 1)
        bits &= np.abs(labels[:, None] - labels[None, :]) >= p
        return cls(dom, bits)


def _pair_witness(domain, a_slot, b_slot):
    """Concrete (a, b) standing in for a slot pair, or None when |a-b| >= p
    is unachievable for the pair."""
    p = domain.p
    if b_slot == domain.band_slot:
        b = domain.band_rep()
    else:
        b = domain.label_of_slot(b_slot)
    if a_slot == domain.band_slot:
        a = domain.band_witness_outside_ball(b)
        if a is None:
            return None
    else:
        a = domain.label_of_slot(a_slot)
        if abs(a - b) < p:
            return None
    return a, b


def table_from_rule(domain, rule):
    """Build a table by evaluating ``rule(a, b)`` at slot-pair witnesses.

    Sound whenever the true table is band-compatible at the domain's level,
    which the callers guarantee via ``level_bound``.
    """
    size = domain.size
    bits = np.zeros((size, size), dtype=bool)
    for sb in range(size):
        for sa in range(size):
            wit = _pair_witness(domain, sa, sb)
            if wit is not None:
                bits[sa, sb] = rule(*wit)
    return DeltaTable(domain, bits)


def leaf_rule(p):
    return lambda a, b: abs(a - b) >= p


def star_rule(k, p, lam):
    """k leaf children: they need k distinct labels outside b's ball and != a."""

    def rule(a, b):
        if abs(a - b) < p:
            return False
        return k == 0 or k <= lam - ball_size(b, p, lam)

    return rule


def star_table(k, domain):
    return table_from_rule(domain, star_rule(k, domain.p, domain.lam))


def chain_table(child, k, domain):
    """One non-leaf child plus k leaf children, by case split on how many
    labels the child can still take."""
    p, lam = domain.p, domain.lam
    size = domain.size
    bits = np.zeros((size, size), dtype=bool)
    for sb in range(size):
        if sb == domain.band_slot:
            b = domain.band_rep()
        else:
            b = domain.label_of_slot(sb)
        count, unique = child.neck_feasible_count(b)
        if count == 0:
            continue
        fits = k == 0 or k <= lam - 1 - ball_size(b, p, lam)
        if not fits:
            continue
        for sa in range(size):
            wit = _pair_witness(domain, sa, sb)
            if wit is None:
                continue
            a, _ = wit
            if count == 1 and a == unique:
                continue
            bits[sa, sb] = True
    return DeltaTable(domain, bits)


def vq_base_delta(lam, delta):
    """Closed form for a major vertex whose children are all leaves.

    Valid for p = 2 with lam = delta + 1: the vertex label must be 0 or lam
    and the parent label at distance >= 2.  Returned uncompressed.
    """
    if lam != delta + 1:
        raise ValueError("closed form requires lam == delta + 1")
    dom = LabelDomain(lam, 2, trivial_level(lam))
    return table_from_rule(dom, lambda a, b: b in (0, lam) and abs(a - b) >= 2)


def leaf_table(p, lam):
    dom = LabelDomain(lam, p, trivial_level(lam))
    return table_from_rule(dom, leaf_rule(p))


def maintain_matching_delta(child_tables, b, p, lam, leaf_children=0):
    """Row of head values for a fixed neck label b, via one matching.

    Builds the children x labels graph with an edge (w, c) when the child's
    table allows c under b; if no matching covers every child the row is
    all zero, otherwise a head label is feasible exactly when it can be
    left unused by some maximum matching.
    """
    n_children = len(child_tables) + leaf_children
    row = np.zeros(lam + 1, dtype=bool)
    if n_children == 0:
        labels = np.arange(lam + 1)
        row[np.abs(labels - b) >= p] = True
        return row
    g = BipartiteGraph(n_children, lam + 1)
    for i, tab in enumerate(child_tables):
        for c in range(lam + 1):
            if tab.get(b, c):
                g.add_edge(i, c)
    for j in range(leaf_children):
        i = len(child_tables) + j
        for c in range(lam + 1):
            if abs(c - b) >= p:
                g.add_edge(i, c)
    m = max_matching(g)
    if m.size < n_children:
        return row
    for c in alternating_reachable(g, m):
        if abs(c - b) >= p:
            row[c] = True
    return row


def _band_query(tab, b, lo, hi, p):
    """Common table value over band labels [lo, hi] outside b's ball.

    Exact for any table: scans the band through ``get``; compressed tables
    collapse the scan to their band slot.  Returns None when no band label
    is at distance >= p from b.
    """
    dom = tab.domain
    if dom.compressed and dom.band_lo <= lo and hi <= dom.band_hi:
        lo_ok = b - lo >= p
        hi_ok = hi - b >= p
        if not lo_ok and not hi_ok:
            return None
        c = lo if lo_ok else hi
        return tab.get(b, c)
    val = None
    for c in range(lo, hi + 1):
        if abs(c - b) < p:
            continue
        v = tab.get(b, c)
        if val is None:
            val = v
        elif v != val:
            raise InvariantViolationError(
                "child table is not band-constant over the requested band"
            )
    return val


def flow_delta(child_tables, b, domain, leaf_children=0):
    """Row over ``domain`` slots for a fixed concrete neck label b.

    Children become unit supplies (leaves share one bundled supply of size
    ``leaf_children``); concrete labels have unit capacity and the band node
    carries the number of band labels outside b's ball.  The row follows
    from residual reachability after one max-flow.
    """
    p, lam = domain.p, domain.lam
    n_tabs = len(child_tables)
    needed = n_tabs + leaf_children
    size = domain.size
    row = np.zeros(size, dtype=bool)
    if needed == 0:
        for slot in range(size):
            c = domain.label_of_slot(slot)
            if c is None:
                row[slot] = domain.band_count_outside_ball(b) > 0
            else:
                row[slot] = abs(c - b) >= p
        return row
    n_children = n_tabs + (1 if leaf_children else 0)
    # node ids: s, children, labels, t
    s = 0
    t = 1 + n_children + size
    net = FlowNetwork(t + 1, s, t)
    net.child_nodes = list(range(1, 1 + n_children))
    net.label_nodes = list(range(1 + n_children, 1 + n_children + size))

    def label_node(slot):
        return 1 + n_children + slot

    band_cap = domain.band_count_outside_ball(b) if domain.compressed else 0
    for slot in range(size):
        c = domain.label_of_slot(slot)
        if c is None:
            net.add_edge(label_node(slot), t, band_cap)
        else:
            net.add_edge(label_node(slot), t, 1)
    for i, tab in enumerate(child_tables):
        node = 1 + i
        net.add_edge(s, node, 1)
        for slot in range(size):
            c = domain.label_of_slot(slot)
            if c is None:
                if band_cap > 0 and _band_query(
                    tab, b, domain.band_lo, domain.band_hi, p
                ):
                    net.add_edge(node, label_node(slot), 1)
            elif tab.get(b, c):
                net.add_edge(node, label_node(slot), 1)
    if leaf_children:
        node = 1 + n_tabs
        net.add_edge(s, node, leaf_children)
        for slot in range(size):
            c = domain.label_of_slot(slot)
            if c is None:
                if band_cap > 0:
                    net.add_edge(node, label_node(slot), band_cap)
            elif abs(c - b) >= p:
                net.add_edge(node, label_node(slot), 1)
    if max_flow(net) < needed:
        return row
    for node in residual_reachable(net):
        slot = node - (1 + n_children)
        c = domain.label_of_slot(slot)
        if c is None or abs(c - b) >= p:
            row[slot] = True
    return row


def compute_delta_v3(w_star_table, p, lam, b_values):
    """Leafless or major chain vertex: one relevant child, constant-time rows.

    For each neck b: two or more labels open for the child make every head
    outside b's ball feasible; exactly one (c*) blocks only head c*; none
    blocks the whole row.  Returns an uncompressed table plus per-step hit
    counts.
    """
    dom = LabelDomain(lam, p, trivial_level(lam))
    bits = np.zeros((lam + 1, lam + 1), dtype=bool)
    steps = Counter()
    labels = np.arange(lam + 1)
    for b in b_values:
        count, unique = w_star_table.neck_feasible_count(b)
        if count == 0:
            steps["v3_step_33"] += 1
            continue
        col = np.abs(labels - b) >= p
        if count == 1:
            steps["v3_step_32"] += 1
            col &= labels != unique
        else:
            steps["v3_step_31"] += 1
        bits[:, b] = col
    return DeltaTable(dom, bits), steps


def _w_star_band_info(w_star_table, b, lo, hi, p):
    """(count, unique) of band labels in [lo, hi] open for w* under neck b."""
    count = 0
    unique = None
    for c in range(lo, hi + 1):
        if abs(c - b) >= p and w_star_table.get(b, c):
            count += 1
            unique = c
    return count, (unique if count == 1 else None)


def _tiny_matching_feasible(cand_sets, rights):
    """Exact bitmask matching: one distinct right per left."""
    order = sorted(range(len(cand_sets)), key=lambda i: len(cand_sets[i] & rights))
    used = set()

    def go(idx):
        if idx == len(order):
            return True
        i = order[idx]
        for c in cand_sets[i] & rights:
            if c not in used:
                used.add(c)
                if go(idx + 1):
                    return True
                used.remove(c)
        return False

    # backtracking is fine: at most 17 lefts over at most 17 rights
    return go(0)


def compute_delta_v4(
    w_star_table,
    vm2_tables,
    p,
    lam,
    b_values,
    band_level,
    flow_fallback=None,
    max_lemma_children=None,
):
    """Single-relevant-child vertex with a small crowd of pseudo-leaf children.

    Per neck b the pseudo-leaves split into fully band-flexible ones and
    band-blocked ones; more band-blocked children than extreme labels kills
    the row outright, otherwise only the blocked children plus w* need an
    explicit assignment into the extreme labels (band-flexible children
    absorb leftover band labels).  When the pseudo-leaf count exceeds the
    absorption bound the per-b row is delegated to ``flow_fallback``.
    """
    lo, hi = band_level, lam - band_level
    extremes = [c for c in range(lam + 1) if c < lo or c > hi]
    dom = LabelDomain(lam, p, trivial_level(lam))
    bits = np.zeros((lam + 1, lam + 1), dtype=bool)
    hits = Counter()
    for b in b_values:
        c2 = []
        for tab in vm2_tables:
            val = _band_query(tab, b, lo, hi, p)
            if val is None or not val:
                c2.append(tab)
        if len(c2) > len(extremes):
            hits["v4_reject"] += 1
            continue
        if max_lemma_children is not None and len(vm2_tables) > max_lemma_children:
            if flow_fallback is None:
                raise InvariantViolationError(
                    "pseudo-leaf count exceeds the absorption bound"
                )
            hits["v4_fallback"] += 1
            bits[:, b] = flow_fallback(b)
            continue
        w8cnt, w8unique = _w_star_band_info(w_star_table, b, lo, hi, p)
        if w8cnt >= 2:
            hits["v4_case1"] += 1
        elif w8cnt == 1:
            hits["v4_case2"] += 1
        else:
            hits["v4_case3"] += 1
        c2_cands = [
            frozenset(e for e in extremes if tab.get(b, e)) for tab in c2
        ]
        w_ext = frozenset(e for e in extremes if w_star_table.get(b, e))
        band_ok = {c for c in range(lo, hi + 1) if abs(c - b) >= p}

        def cell(a):
            rights = {e for e in extremes if e != a and abs(e - b) >= p}
            sets = list(c2_cands)
            w_set = set(w_ext & rights)
            if any(c != a for c in band_ok if w_star_table.get(b, c)):
                w_set.add(-1)  # virtual slot: w* goes into the band
            sets.append(frozenset(w_set))
            return _tiny_matching_feasible(sets, rights | {-1})

        col = np.zeros(lam + 1, dtype=bool)
        for a in extremes:
            if abs(a - b) >= p:
                col[a] = cell(a)
        generic = None
        for a in range(lo, hi + 1):
            if abs(a - b) < p:
                continue
            if w8cnt == 1 and a == w8unique:
                col[a] = cell(a)
            else:
                if generic is None:
                    generic = cell(a)
                col[a] = generic
        bits[:, b] = col
    return DeltaTable(dom, bits), hits


@dataclass(frozen=True)
class ChildTypeVector:
    """Feasibility pattern of a pseudo-leaf child over the extreme labels
    plus the band, under a fixed neck label; ``count`` children share it."""

    bits: tuple
    count: int


def _type_vectors(tables, leaf_children, b, lo, hi, p, lam):
    positions = [c for c in range(lam + 1) if c < lo or c > hi]
    counts = Counter()
    for tab in tables:
        key = tuple(1 if tab.get(b, e) else 0 for e in positions)
        band = _band_query(tab, b, lo, hi, p)
        counts[key + (1 if band else 0,)] += 1
    if leaf_children:
        key = tuple(1 if abs(e - b) >= p else 0 for e in positions)
        band_any = any(abs(c - b) >= p for c in range(lo, hi + 1))
        counts[key + (1 if band_any else 0,)] += leaf_children
    return [ChildTypeVector(bits, cnt) for bits, cnt in sorted(counts.items())]


def compute_delta_v5_cell(type_vectors, w_star_table, a, b, p, lam, band_level):
    """One feasibility bit via the bundled-type flow network.

    Children sharing a pattern collapse to one supply node; the band node
    absorbs band assignments with multiplicity.  w* keeps its own node since
    its table need not be band-constant.
    """
    lo, hi = band_level, lam - band_level
    if abs(a - b) < p:
        return False
    positions = [c for c in range(lam + 1) if c < lo or c > hi]
    band_avail = sum(
        1 for c in range(lo, hi + 1) if abs(c - b) >= p and c != a
    )
    n_types = len(type_vectors)
    # nodes: s, types, w*, labels (extremes + band), t
    n_labels = len(positions) + 1
    s = 0
    w_node = 1 + n_types
    first_label = w_node + 1
    t = first_label + n_labels
    net = FlowNetwork(t + 1, s, t)
    net.child_nodes = list(range(1, w_node + 1))
    net.label_nodes = list(range(first_label, first_label + n_labels))
    needed = sum(tv.count for tv in type_vectors) + 1
    for j, e in enumerate(positions):
        cap = 0 if e == a or abs(e - b) < p else 1
        net.add_edge(first_label + j, t, cap)
    band_node = first_label + len(positions)
    net.add_edge(band_node, t, band_avail)
    for i, tv in enumerate(type_vectors):
        node = 1 + i
        net.add_edge(s, node, tv.count)
        for j, e in enumerate(positions):
            if tv.bits[j] and e != a:
                net.add_edge(node, first_label + j, 1)
        if tv.bits[-1] and band_avail:
            net.add_edge(node, band_node, band_avail)
    net.add_edge(s, w_node, 1)
    for j, e in enumerate(positions):
        if e != a and w_star_table.get(b, e):
            net.add_edge(w_node, first_label + j, 1)
    if band_avail and any(
        abs(c - b) >= p and c != a and w_star_table.get(b, c)
        for c in range(lo, hi + 1)
    ):
        net.add_edge(w_node, band_node, 1)
    return max_flow(net) == needed


def compute_delta_v5(
    w_star_table, vm2_tables, leaf_children, p, lam, b_values, band_level
):
    """Row assembly for the bundled-type network, probing only the reduced
    head-candidate set: every extreme label, plus one band stand-in (two
    when exactly one band label is open for w*, which is then special)."""
    lo, hi = band_level, lam - band_level
    dom = LabelDomain(lam, p, trivial_level(lam))
    bits = np.zeros((lam + 1, lam + 1), dtype=bool)
    hits = Counter()
    extremes = [c for c in range(lam + 1) if c < lo or c > hi]
    for b in b_values:
        tvs = _type_vectors(vm2_tables, leaf_children, b, lo, hi, p, lam)
        col = np.zeros(lam + 1, dtype=bool)
        for a in extremes:
            if abs(a - b) >= p:
                col[a] = compute_delta_v5_cell(
                    tvs, w_star_table, a, b, p, lam, band_level
                )
        w8cnt, w8unique = _w_star_band_info(w_star_table, b, lo, hi, p)
        band_members = [c for c in range(lo, hi + 1) if abs(c - b) >= p]
        if w8cnt == 1:
            hits["v5_fact2"] += 1
            others = [c for c in band_members if c != w8unique]
            val_other = (
                compute_delta_v5_cell(
                    tvs, w_star_table, others[0], b, p, lam, band_level
                )
                if others
                else False
            )
            for a in band_members:
                if a == w8unique:
                    col[a] = compute_delta_v5_cell(
                        tvs, w_star_table, a, b, p, lam, band_level
                    )
                else:
                    col[a] = val_other
        else:
            hits["v5_fact1"] += 1
            if band_members:
                val = compute_delta_v5_cell(
                    tvs, w_star_table, band_members[-1], b, p, lam, band_level
                )
                for a in band_members:
                    col[a] = val
        bits[:, b] = col
    return DeltaTable(dom, bits), hits


class DeltaComputer:
    """Bottom-up table computation for one rooted tree.

    Structural shortcuts: star and single-child closed forms, and interning
    of tables by content so repeated subtree shapes are computed once.  With
    ``compress=True`` every table lives on the domain certified by
    ``level_bound``; a partition (from the solver) routes vertices of the
    thin classes through their constant-size procedures.
    """

    def __init__(
        self,
        rt,
        p,
        lam,
        compress=False,
        partition=None,
        specials=None,
        stats=None,
    ):
        self.rt = rt
        self.p = p
        self.lam = lam
        self.compress = compress
        self.partition = partition
        self.specials = specials  # SpecialParams from the solver, or None
        self.stats = stats if stats is not None else Counter()
        self.tables = {}
        self._domains = {}
        self._intern = {}
        self._memo = {}
        self._next_id = 0

    def domain(self, level):
        dom = self._domains.get(level)
        if dom is None:
            dom = LabelDomain(self.lam, self.p, level)
            self._domains[level] = dom
        return dom

    def _level_for(self, v):
        if not self.compress:
            return trivial_level(self.lam)
        return level_bound(self.rt.subtree_size[v], self.lam, self.p)

    def _intern_table(self, table):
        key = (table.domain.level, table.bits.tobytes())
        hit = self._intern.get(key)
        if hit is not None:
            return hit
        table.intern_id = self._next_id
        self._next_id += 1
        self._intern[key] = table
        return table

    def split_children(self, v):
        leafk = 0
        tabs = []
        for w in self.rt.children[v]:
            if self.rt.subtree_size[w] == 1:
                leafk += 1
            else:
                tabs.append(self.tables[w])
        return tabs, leafk

    def run(self, vertices=None):
        """Compute tables child-before-parent; returns the table dict."""
        rt = self.rt
        if vertices is None:
            vertices = [
                v
                for v in reversed(rt.order)
                if v != rt.root and rt.subtree_size[v] > 1
            ]
        for v in vertices:
            self.tables[v] = self.table_for(v)
        return self.tables

    def table_for(self, v):
        part = self.partition
        if part is not None and self.specials is not None:
            klass = part.class_of[v]
            if klass == 3:
                return self._v3(v)
            if klass == 4:
                return self._v4(v)
            if klass == 5:
                return self._v5(v)
        return self._generic(v)

    def _generic(self, v):
        tabs, leafk = self.split_children(v)
        domain = self.domain(self._level_for(v))
        key = (domain.level, leafk, tuple(sorted(t.intern_id for t in tabs)))
        hit = self._memo.get(key)
        if hit is not None:
            self.stats["table_cache_hits"] += 1
            return hit
        self.stats["delta_computations"] += 1
        if not tabs:
            table = star_table(leafk, domain)
        elif len(tabs) == 1:
            table = chain_table(tabs[0], leafk, domain)
        else:
            table = self._row_sweep(tabs, leafk, domain)
        table = self._intern_table(table)
        self._memo[key] = table
        return table

    def _row_sweep(self, tabs, leafk, domain):
        size = domain.size
        bits = np.zeros((size, size), dtype=bool)
        for sb in range(size):
            if sb == domain.band_slot:
                b = domain.band_rep()
            else:
                b = domain.label_of_slot(sb)
            if domain.compressed:
                bits[:, sb] = flow_delta(tabs, b, domain, leaf_children=leafk)
            else:
                bits[:, sb] = maintain_matching_delta(
                    tabs, b, self.p, self.lam, leaf_children=leafk
                )
        return DeltaTable(domain, bits)

    def _b_values(self, v, leafk):
        """Neck candidates for the thin-class procedures: everything, or the
        two end labels when the vertex carries leaves (it is then major)."""
        if leafk:
            return [0, self.lam]
        return list(range(self.lam + 1))

    def _w_star(self, v):
        part = self.partition
        for w in self.rt.children[v]:
            if self.rt.subtree_size[w] > 1 and not part.vm2[w]:
                return w
        raise InvariantViolationError("thin-class vertex without its main child")

    def _vm2_tables(self, v):
        part = self.partition
        return [
            self.tables[w]
            for w in self.rt.children[v]
            if self.rt.subtree_size[w] > 1 and part.vm2[w]
        ]

    def _v3(self, v):
        tabs, leafk = self.split_children(v)
        if len(tabs) != 1:
            raise InvariantViolationError("thin chain class expects one table child")
        self.stats["delta_computations"] += 1
        table, steps = compute_delta_v3(
            tabs[0], self.p, self.lam, self._b_values(v, leafk)
        )
        self.stats.update(steps)
        return self._intern_table(table)

    def _v4(self, v):
        part = self.partition
        w_star = self._w_star(v)
        vm2 = self._vm2_tables(v)
        _, leafk = self.split_children(v)
        self.stats["delta_computations"] += 1
        domain = self.domain(self._level_for(v))

        def fallback(b):
            tabs, leafk2 = self.split_children(v)
            return flow_delta(tabs, b, domain, leaf_children=leafk2)

        table, hits = compute_delta_v4(
            self.tables[w_star],
            vm2,
            self.p,
            self.lam,
            self._b_values(v, leafk),
            self.specials.band_level,
            flow_fallback=fallback,
            max_lemma_children=self.specials.max_lemma_children,
        )
        self.stats.update(hits)
        return self._intern_table(table)

    def _v5(self, v):
        w_star = self._w_star(v)
        vm2 = self._vm2_tables(v)
        _, leafk = self.split_children(v)
        self.stats["delta_computations"] += 1
        table, hits = compute_delta_v5(
            self.tables[w_star],
            vm2,
            leafk,
            self.p,
            self.lam,
            self._b_values(v, leafk),
            self.specials.band_level,
        )
        self.stats.update(hits)
        return self._intern_table(table)


def generalized_leaf_base_delta(rt, v, p, lam):
    """Table for the subtree hanging from v, computed bottom-up with
    per-node compression levels."""
    if rt.subtree_size[v] == 1:
        return leaf_table(p, lam)
    comp = DeltaComputer(rt, p, lam, compress=True)
    sub = []
    stack = [v]
    while stack:
        x = stack.pop()
        sub.append(x)
        stack.extend(rt.children[x])
    # `sub` is a DFS preorder, so its reverse visits children before parents
    vertices = [x for x in reversed(sub) if rt.subtree_size[x] > 1]
    comp.run(vertices)
    return comp.tables[v]


def delta_table_for(rt, v, child_tables, partition_class, p, lam, specials=None):
    """Dispatch a single vertex's table from explicit child tables.

    ``partition_class`` of None or 1/2 runs the generic engine; 3/4/5 run the
    thin-class procedures after a structural guard.
    """
    n_tabs = len(child_tables)
    leafk = sum(1 for w in rt.children[v] if rt.subtree_size[w] == 1)
    if n_tabs != sum(1 for w in rt.children[v] if rt.subtree_size[w] > 1):
        raise InvariantViolationError("child table count does not match the tree")
    if partition_class in (None, 1, 2):
        domain = LabelDomain(lam, p, level_bound(rt.subtree_size[v], lam, p))
        size = domain.size
        bits = np.zeros((size, size), dtype=bool)
        for sb in range(size):
            b = domain.band_rep() if sb == domain.band_slot else domain.label_of_slot(sb)
            bits[:, sb] = flow_delta(child_tables, b, domain, leaf_children=leafk)
        return DeltaTable(domain, bits)
    b_values = [0, lam] if leafk else list(range(lam + 1))
    if partition_class == 3:
        if n_tabs != 1:
            raise InvariantViolationError("class-3 vertex must have one table child")
        table, _ = compute_delta_v3(child_tables[0], p, lam, b_values)
        return table
    if partition_class in (4, 5):
        raise InvariantViolationError(
            "classes 4 and 5 need the partition context; use DeltaComputer"
        )
    raise InvariantViolationError(f"unknown partition class {partition_class!r}")
