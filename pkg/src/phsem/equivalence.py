"""Model equivalence of DAGs under a variance partition, and the class CPDAG."""
from __future__ import annotations

import enum
from collections import Counter
from typing import Iterable

from .errors import BudgetExceeded, CyclicGraph, DimensionMismatch, InternalInconsistency
from .graph import Dag, Partition, Pdag, skeleton, unshielded_colliders

DEFAULT_CLASS_CAP = 2**20


class MeekRule(enum.IntEnum):
    R1 = 1
    R2 = 2
    R3 = 3
    R4 = 4


ALL_RULES = frozenset(MeekRule)


def _same_p(g1, g2):
    if g1.p != g2.p:
        raise DimensionMismatch(f"graphs have {g1.p} and {g2.p} nodes")


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    _same_p(g1, g2)
    return skeleton(g1) == skeleton(g2) and unshielded_colliders(g1) == unshielded_colliders(g2)


def pi_equivalent(g1: Dag, g2: Dag, pi: Partition) -> bool:
    """Same model under ``pi``: Markov equivalent, and every node in a
    block of size two or more keeps its parent set."""
    _same_p(g1, g2)
    if pi.p != g1.p:
        raise DimensionMismatch(f"partition covers {pi.p} nodes, graphs have {g1.p}")
    if not markov_equivalent(g1, g2):
        return False
    return all(g1.parents(i) == g2.parents(i) for i in pi.constrained_nodes())


class _Working:
    """Mutable mixed graph used while closing orientations."""

    def __init__(self, pdag: Pdag):
        p = pdag.p
        self.p = p
        self.out = [set() for _ in range(p)]
        self.inc = [set() for _ in range(p)]
        self.und = [set() for _ in range(p)]
        for i, j in pdag.directed:
            self.out[i].add(j)
            self.inc[j].add(i)
        for i, j in pdag.undirected:
            self.und[i].add(j)
            self.und[j].add(i)

    def adjacent(self, x, y):
        return y in self.out[x] or y in self.inc[x] or y in self.und[x]

    def orient(self, a, b):
        self.und[a].discard(b)
        self.und[b].discard(a)
        self.out[a].add(b)
        self.inc[b].add(a)

    def undirected_edges(self):
        return sorted((i, j) for i in range(self.p) for j in self.und[i] if i < j)

    def freeze(self) -> Pdag:
        directed = [(i, j) for i in range(self.p) for j in self.out[i]]
        return Pdag(self.p, directed, self.undirected_edges())

    # each check asks whether a - b must become a -> b
    def r1(self, a, b):
        return any(not self.adjacent(c, b) for c in self.inc[a])

    def r2(self, a, b):
        return bool(self.out[a] & self.inc[b])

    def r3(self, a, b):
        cands = sorted(self.und[a] & self.inc[b])
        return any(not self.adjacent(c, d)
                   for n, c in enumerate(cands) for d in cands[n + 1:])

    def r4(self, a, b):
        for m in self.und[a] & self.inc[b]:
            for r in self.inc[m] & self.und[a]:
                if not self.adjacent(r, b):
                    return True
        return False


def apply_meek(pdag: Pdag, rules: Iterable[MeekRule] = ALL_RULES,
               log: Counter | None = None, shuffle_rng=None) -> Pdag:
    """Close the orientations of ``pdag`` under the given Meek rules.

    Rules are tried in id order over undirected edges in lexicographic order
    until a full pass orients nothing. ``log`` (a Counter) receives one count
    per firing, keyed by rule. ``shuffle_rng`` randomises both scan orders;
    the closure does not depend on it.
    """
    w = _Working(pdag)
    checks = {MeekRule.R1: w.r1, MeekRule.R2: w.r2, MeekRule.R3: w.r3, MeekRule.R4: w.r4}
    rules = sorted(set(rules))
    while True:
        changed = False
        order = list(rules)
        if shuffle_rng is not None:
            shuffle_rng.shuffle(order)
        for rule in order:
            edges = w.undirected_edges()
            if shuffle_rng is not None:
                shuffle_rng.shuffle(edges)
            check = checks[rule]
            for i, j in edges:
                if j not in w.und[i]:
                    continue
                pair = [(i, j), (j, i)]
                if shuffle_rng is not None:
                    shuffle_rng.shuffle(pair)
                for a, b in pair:
                    if check(a, b):
                        w.orient(a, b)
                        if log is not None:
                            log[rule] += 1
                        changed = True
                        break
        if not changed:
            return w.freeze()


def pattern(g: Dag) -> Pdag:
    """Skeleton of ``g`` with only unshielded-collider edges directed."""
    directed = set()
    for i, j, k in unshielded_colliders(g):
        directed.add((i, j))
        directed.add((k, j))
    undirected = [e for e in skeleton(g) if e not in directed and e[::-1] not in directed]
    return Pdag(g.p, directed, undirected)


def cpdag(g: Dag, pi: Partition | None = None, log: Counter | None = None,
          final_rules: Iterable[MeekRule] = (MeekRule.R1, MeekRule.R2)) -> Pdag:
    """CPDAG of the equivalence class of ``g`` under ``pi``.

    Pattern, closure under R1-R3, then every edge at a node sharing its block
    is oriented as in ``g``, then closure under ``final_rules``.
    """
    if pi is None:
        pi = Partition.minimal(g.p)
    if pi.p != g.p:
        raise DimensionMismatch(f"partition covers {pi.p} nodes, graph has {g.p}")
    g_star = apply_meek(pattern(g), (MeekRule.R1, MeekRule.R2, MeekRule.R3))
    constrained = pi.constrained_nodes()
    if not constrained:
        return g_star
    w = _Working(g_star)
    for i, j in sorted(g.edges):
        if i not in constrained and j not in constrained:
            continue
        if i in w.inc[j]:
            continue
        if j in w.inc[i]:
            raise InternalInconsistency(f"copied edge {i}->{j} contradicts {j}->{i}")
        w.orient(i, j)
    return apply_meek(w.freeze(), final_rules, log=log)


def union_pdag(p: int, dags: Iterable[Dag]) -> Pdag:
    """Edge union of DAGs, drawn with undirected edges where both
    orientations occur."""
    arcs = set()
    for d in dags:
        arcs |= d.edges
    directed = [(i, j) for i, j in arcs if (j, i) not in arcs]
    undirected = {(min(i, j), max(i, j)) for i, j in arcs if (j, i) in arcs}
    return Pdag(p, directed, undirected)


def enumerate_pi_class(g: Dag, pi: Partition | None = None,
                       cap: int = DEFAULT_CLASS_CAP) -> set[Dag]:
    """All DAGs equivalent to ``g`` under ``pi``, by brute force over
    orientations of the skeleton."""
    if pi is None:
        pi = Partition.minimal(g.p)
    sk = sorted(skeleton(g))
    if 2 ** len(sk) > cap:
        raise BudgetExceeded(f"{2 ** len(sk)} orientations exceed the cap {cap}")
    out = set()
    for mask in range(2 ** len(sk)):
        edges = [(i, j) if not (mask >> n) & 1 else (j, i) for n, (i, j) in enumerate(sk)]
        try:
            h = Dag(g.p, edges)
        except CyclicGraph:
            continue
        if pi_equivalent(g, h, pi):
            out.add(h)
    return out
