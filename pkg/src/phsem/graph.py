"""DAGs, partially directed graphs and variance partitions.

Nodes are dense integers ``0..p-1``. Every type here is immutable once
constructed; derived structure (parents, children, topological order) is
computed eagerly in the constructor.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import BudgetExceeded, CyclicGraph

Edge = tuple[int, int]

DEFAULT_TREK_CAP = 10**6


def _check_node(p: int, i: int) -> None:
    if not 0 <= i < p:
        raise IndexError(f"node {i} out of range for p={p}")


def _kahn(p: int, children: Sequence[Iterable[int]], indeg: list[int]) -> list[int]:
    ready = [v for v in range(p) if indeg[v] == 0]
    order = []
    while ready:
        # smallest ready node first keeps the order deterministic
        ready.sort(reverse=True)
        v = ready.pop()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return order


def _find_cycle(p: int, children: Sequence[Iterable[int]]) -> list[int]:
    color = [0] * p
    stack_path: list[int] = []

    def visit(v):
        color[v] = 1
        stack_path.append(v)
        for c in sorted(children[v]):
            if color[c] == 1:
                return stack_path[stack_path.index(c):] + [c]
            if color[c] == 0:
                cyc = visit(c)
                if cyc:
                    return cyc
        stack_path.pop()
        color[v] = 2
        return None

    for v in range(p):
        if color[v] == 0:
            cyc = visit(v)
            if cyc:
                return cyc
    return []


class Dag:
    """Directed acyclic graph on nodes ``0..p-1``.

    ``edges`` holds ordered pairs ``(i, j)`` meaning ``i -> j``. Construction
    fails with :class:`CyclicGraph` when the edges admit no topological order.
    """

    def __init__(self, p: int, edges: Iterable[Edge] = ()):
        if p < 1:
            raise ValueError("a graph needs at least one node")
        edges = frozenset((int(i), int(j)) for i, j in edges)
        pa: list[set[int]] = [set() for _ in range(p)]
        ch: list[set[int]] = [set() for _ in range(p)]
        for i, j in edges:
            _check_node(p, i)
            _check_node(p, j)
            if i == j:
                raise CyclicGraph([i, i])
            if (j, i) in edges:
                raise CyclicGraph([i, j, i])
            pa[j].add(i)
            ch[i].add(j)
        order = _kahn(p, ch, [len(s) for s in pa])
        if len(order) < p:
            raise CyclicGraph(_find_cycle(p, ch))
        self._p = p
        self._edges = edges
        self._pa = tuple(frozenset(s) for s in pa)
        self._ch = tuple(frozenset(s) for s in ch)
        self._order = tuple(order)

    @classmethod
    def from_adjacency(cls, adj) -> "Dag":
        adj = np.asarray(adj)
        rows, cols = np.nonzero(adj)
        return cls(adj.shape[0], zip(rows.tolist(), cols.tolist()))

    @property
    def p(self) -> int:
        return self._p

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    def parents(self, i: int) -> frozenset[int]:
        return self._pa[i]

    def children(self, i: int) -> frozenset[int]:
        return self._ch[i]

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self._edges

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self._edges or (j, i) in self._edges

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self._p, self._p), dtype=bool)
        for i, j in self._edges:
            a[i, j] = True
        return a

    @cached_property
    def _descendants(self) -> tuple[frozenset[int], ...]:
        de: list[frozenset[int]] = [frozenset()] * self._p
        for v in reversed(self._order):
            acc = {v}
            for c in self._ch[v]:
                acc |= de[c]
            de[v] = frozenset(acc)
        return tuple(de)

    @cached_property
    def _ancestors(self) -> tuple[frozenset[int], ...]:
        an: list[frozenset[int]] = [frozenset()] * self._p
        for v in self._order:
            acc: set[int] = set()
            for q in self._pa[v]:
                acc |= an[q]
                acc.add(q)
            an[v] = frozenset(acc)
        return tuple(an)

    def descendants(self, i: int) -> frozenset[int]:
        """Descendants of ``i``, including ``i`` itself."""
        return self._descendants[i]

    def ancestors(self, i: int) -> frozenset[int]:
        """Strict ancestors of ``i`` (``i`` is not its own ancestor)."""
        return self._ancestors[i]

    def with_edges(self, edges: Iterable[Edge]) -> "Dag":
        return Dag(self._p, edges)

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self._p == other._p and self._edges == other._edges

    def __hash__(self):
        return hash((self._p, self._edges))

    def __repr__(self):
        es = ", ".join(f"{i}->{j}" for i, j in sorted(self._edges))
        return f"Dag(p={self._p}, {{{es}}})"


class Relatives(NamedTuple):
    parents: frozenset[int]
    children: frozenset[int]
    ancestors: frozenset[int]
    descendants: frozenset[int]


def topological_order(g: Dag) -> tuple[int, ...]:
    """A topological order of ``g``; ties broken by smallest label."""
    return g._order


def relatives(g: Dag, i: int) -> Relatives:
    _check_node(g.p, i)
    return Relatives(g.parents(i), g.children(i), g.ancestors(i), g.descendants(i))


def skeleton(g: Dag) -> frozenset[Edge]:
    """Unordered adjacencies as sorted pairs ``(min, max)``."""
    return frozenset((min(i, j), max(i, j)) for i, j in g.edges)


def unshielded_colliders(g: Dag) -> frozenset[tuple[int, int, int]]:
    out = set()
    for j in range(g.p):
        for i, k in combinations(sorted(g.parents(j)), 2):
            if not g.adjacent(i, k):
                out.add((i, j, k))
    return frozenset(out)


def d_separated(g: Dag, i: int, j: int, s: Iterable[int] = ()) -> bool:
    """Whether ``i`` and ``j`` are d-separated by ``s`` in ``g``.

    Reachability over (node, direction) states: linear in the graph size.
    """
    s = frozenset(s)
    _check_node(g.p, i)
    _check_node(g.p, j)
    if i == j or i in s or j in s:
        raise ValueError("need distinct i, j outside the conditioning set")
    # nodes with a descendant in s; these open colliders
    opens = set(s)
    for v in s:
        opens |= g.ancestors(v)

    up, down = 0, 1
    seen = set()
    queue = deque([(i, up)])
    while queue:
        y, d = queue.popleft()
        if (y, d) in seen:
            continue
        seen.add((y, d))
        if y == j:
            return False
        if d == up and y not in s:
            queue.extend((z, up) for z in g.parents(y))
            queue.extend((z, down) for z in g.children(y))
        elif d == down:
            if y not in s:
                queue.extend((z, down) for z in g.children(y))
            if y in opens:
                queue.extend((z, up) for z in g.parents(y))
    return True


@dataclass(frozen=True)
class Trek:
    """Two directed paths leaving a common top node.

    ``left`` ends at the first endpoint and ``right`` at the second; both
    start at the top.
    """

    left: tuple[int, ...]
    right: tuple[int, ...]

    @property
    def top(self) -> int:
        return self.left[0]

    def edges(self) -> list[Edge]:
        """Edges of both sides, with multiplicity."""
        return list(zip(self.left, self.left[1:])) + list(zip(self.right, self.right[1:]))


def _directed_paths(g: Dag, src: int, dst: int) -> list[tuple[int, ...]]:
    if src == dst:
        return [(src,)]
    if dst not in g.descendants(src):
        return []
    out = []
    for c in sorted(g.children(src)):
        for rest in _directed_paths(g, c, dst):
            out.append((src,) + rest)
    return out


def enumerate_treks(g: Dag, i: int, j: int, cap: int = DEFAULT_TREK_CAP) -> set[Trek]:
    """All treks between ``i`` and ``j``. Meant as a small-graph oracle."""
    _check_node(g.p, i)
    _check_node(g.p, j)
    tops = (g.ancestors(i) | {i}) & (g.ancestors(j) | {j})
    treks: set[Trek] = set()
    for t in sorted(tops):
        lefts = _directed_paths(g, t, i)
        rights = _directed_paths(g, t, j)
        if len(treks) + len(lefts) * len(rights) > cap:
            raise BudgetExceeded(f"more than {cap} treks between {i} and {j}")
        for a in lefts:
            for b in rights:
                treks.add(Trek(a, b))
    return treks


class Pdag:
    """Mixed graph with directed and undirected edges.

    Undirected edges are stored as sorted pairs. A pair may appear in at most
    one of the two edge sets, in at most one orientation.
    """

    __slots__ = ("_p", "_directed", "_undirected")

    def __init__(self, p: int, directed: Iterable[Edge] = (), undirected: Iterable[Edge] = ()):
        directed = frozenset((int(i), int(j)) for i, j in directed)
        undirected = frozenset((min(int(i), int(j)), max(int(i), int(j))) for i, j in undirected)
        seen = set()
        for i, j in directed:
            _check_node(p, i)
            _check_node(p, j)
            key = (min(i, j), max(i, j))
            if i == j or key in seen:
                raise ValueError(f"invalid or duplicated directed edge {i}->{j}")
            seen.add(key)
        for i, j in undirected:
            _check_node(p, i)
            _check_node(p, j)
            if i == j or (i, j) in seen:
                raise ValueError(f"invalid or duplicated undirected edge {i}-{j}")
        self._p = p
        self._directed = directed
        self._undirected = undirected

    @classmethod
    def from_dag(cls, g: Dag) -> "Pdag":
        return cls(g.p, g.edges)

    @property
    def p(self) -> int:
        return self._p

    @property
    def directed(self) -> frozenset[Edge]:
        return self._directed

    @property
    def undirected(self) -> frozenset[Edge]:
        return self._undirected

    def skeleton(self) -> frozenset[Edge]:
        return frozenset((min(i, j), max(i, j)) for i, j in self._directed) | self._undirected

    def is_fully_directed(self) -> bool:
        return not self._undirected

    def to_dag(self) -> Dag:
        if self._undirected:
            raise ValueError("graph has undirected edges")
        return Dag(self._p, self._directed)

    def __eq__(self, other):
        if not isinstance(other, Pdag):
            return NotImplemented
        return (self._p, self._directed, self._undirected) == (
            other._p, other._directed, other._undirected)

    def __hash__(self):
        return hash((self._p, self._directed, self._undirected))

    def __repr__(self):
        parts = [f"{i}->{j}" for i, j in sorted(self._directed)]
        parts += [f"{i}-{j}" for i, j in sorted(self._undirected)]
        return f"Pdag(p={self._p}, {{{', '.join(parts)}}})"


class Partition:
    """Partition of ``0..p-1`` into blocks of equal error variance.

    Block indices are normalised to order of first appearance, so two
    partitions with the same blocks compare equal.
    """

    __slots__ = ("_block_of", "_blocks")

    def __init__(self, block_of: Sequence[int]):
        relabel: dict[int, int] = {}
        labels = []
        for b in block_of:
            labels.append(relabel.setdefault(b, len(relabel)))
        if not labels:
            raise ValueError("empty partition")
        self._block_of = tuple(labels)
        blocks: list[list[int]] = [[] for _ in relabel]
        for v, b in enumerate(labels):
            blocks[b].append(v)
        self._blocks = tuple(tuple(b) for b in blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], p: int | None = None) -> "Partition":
        blocks = [list(b) for b in blocks]
        nodes = [v for b in blocks for v in b]
        if p is None:
            p = len(nodes)
        if sorted(nodes) != list(range(p)):
            missing = sorted(set(range(p)) - set(nodes))
            raise ValueError(f"blocks do not partition 0..{p - 1} (missing {missing})")
        if any(not b for b in blocks):
            raise ValueError("blocks must be non-empty")
        label = [0] * p
        for k, b in enumerate(blocks):
            for v in b:
                label[v] = k
        return cls(label)

    @classmethod
    def minimal(cls, p: int) -> "Partition":
        """Every node alone: unconstrained error variances."""
        return cls(range(p))

    @classmethod
    def maximal(cls, p: int) -> "Partition":
        """One block: all error variances equal."""
        return cls([0] * p)

    @property
    def p(self) -> int:
        return len(self._block_of)

    @property
    def K(self) -> int:
        return len(self._blocks)

    @property
    def block_of(self) -> tuple[int, ...]:
        return self._block_of

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        return self._blocks

    def same_block(self, i: int, j: int) -> bool:
        return self._block_of[i] == self._block_of[j]

    def block_size(self, i: int) -> int:
        return len(self._blocks[self._block_of[i]])

    def constrained_nodes(self) -> frozenset[int]:
        """Nodes sharing their block with at least one other node."""
        return frozenset(v for b in self._blocks if len(b) >= 2 for v in b)

    def refines(self, other: "Partition") -> bool:
        """True if every block of ``self`` lies inside a block of ``other``."""
        return all(len({other.block_of[v] for v in b}) == 1 for b in self._blocks)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self._block_of == other._block_of

    def __hash__(self):
        return hash(self._block_of)

    def __repr__(self):
        return f"Partition({[list(b) for b in self._blocks]})"


def all_partitions(p: int):
    """Every set partition of ``0..p-1`` (restricted growth strings)."""
    def grow(prefix, k):
        if len(prefix) == p:
            yield Partition(prefix)
            return
        for b in range(k + 1):
            yield from grow(prefix + [b], max(k, b + 1))
    yield from grow([0], 1)


def all_dags(p: int):
    """Every DAG on ``0..p-1``; feasible for p <= 5."""
    pairs = list(combinations(range(p), 2))
    for code in range(3 ** len(pairs)):
        edges = []
        for i, j in pairs:
            code, r = divmod(code, 3)
            if r == 1:
                edges.append((i, j))
            elif r == 2:
                edges.append((j, i))
        try:
            yield Dag(p, edges)
        except CyclicGraph:
            continue
