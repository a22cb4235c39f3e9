"""Maximum likelihood, BIC and greedy DAG search for partitioned-variance SEMs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .equivalence import cpdag as make_cpdag
from .errors import DegenerateData, DimensionMismatch, SingularRegression
from .graph import Dag, Partition, Pdag

# relative size below which a pivot or residual counts as zero
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations, one row per sample."""

    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("data must be a non-empty n x p matrix")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class SampleCov:
    s: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True, eq=False)
class FitResult:
    lambda_hat: np.ndarray
    omega_hat: np.ndarray  # one entry per block
    loglik: float
    bic: float
    pi: Partition

    @property
    def node_omega(self) -> np.ndarray:
        return self.omega_hat[list(self.pi.block_of)]


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 5
    neighborhood_cap: int = 300
    seed: int = 0
    max_iters: int = 500
    slack: float = 1e-12

    def __post_init__(self):
        if self.restarts < 1 or self.neighborhood_cap < 1 or self.max_iters < 1:
            raise ValueError("restarts, neighborhood_cap and max_iters must be positive")


def sample_covariance(data: Dataset) -> SampleCov:
    """Centre the columns and return ``X^T X / n``."""
    if data.n < 2:
        raise DegenerateData("need at least two samples")
    xc = data.x - data.x.mean(axis=0)
    s = xc.T @ xc / data.n
    s = (s + s.T) / 2
    scale = np.maximum(np.abs(data.x).max(axis=0), 1.0)
    flat = np.flatnonzero(np.diag(s) <= (SINGULAR_RTOL * scale) ** 2)
    if flat.size:
        raise DegenerateData(f"column {int(flat[0])} has zero variance")
    return SampleCov(s, data.n)


def _regress(s: np.ndarray, i: int, pa) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of node ``i`` on ``pa`` and the residual
    variance, both from the covariance matrix."""
    s_ii = float(s[i, i])
    if not pa:
        resid = s_ii
        beta = np.zeros(0)
    else:
        gram = s[np.ix_(pa, pa)]
        try:
            c = cho_factor(gram, lower=True)
        except LinAlgError as exc:
            raise SingularRegression(f"parents {pa} of node {i} are collinear") from exc
        piv = np.diag(c[0]) ** 2
        if np.min(piv) <= SINGULAR_RTOL * np.max(np.diag(gram)):
            raise SingularRegression(f"parents {pa} of node {i} are collinear")
        beta = cho_solve(c, s[pa, i])
        resid = s_ii - float(s[pa, i] @ beta)
    if resid <= SINGULAR_RTOL * s_ii:
        raise SingularRegression(f"node {i} is a deterministic function of {pa}")
    return beta, resid


def _block_score(node_resid, pi: Partition, n_edges: int, n: int) -> tuple[float, np.ndarray]:
    omega = np.array([np.mean([node_resid[v] for v in b]) for b in pi.blocks])
    sizes = np.array([len(b) for b in pi.blocks])
    loglik_over_n = 0.5 * float(np.sum(-sizes * np.log(omega) - sizes))
    return loglik_over_n - math.log(n) / (2 * n) * n_edges, omega


def _check_dims(g: Dag, pi: Partition, s: SampleCov):
    if not g.p == pi.p == s.p:
        raise DimensionMismatch(f"graph p={g.p}, partition p={pi.p}, data p={s.p}")


def fit_mle(g: Dag, pi: Partition, s: SampleCov) -> FitResult:
    """Per-node regressions on parents, residuals pooled within each block."""
    _check_dims(g, pi, s)
    lam = np.zeros((g.p, g.p))
    resid = np.empty(g.p)
    for i in range(g.p):
        pa = sorted(g.parents(i))
        beta, resid[i] = _regress(s.s, i, pa)
        lam[pa, i] = beta
    bic, omega = _block_score(resid, pi, len(g.edges), s.n)
    sizes = np.array([len(b) for b in pi.blocks])
    loglik = s.n / 2 * float(np.sum(-sizes * np.log(omega) - sizes))
    return FitResult(lam, omega, loglik, bic, pi)


def bic_score(g: Dag, pi: Partition, s: SampleCov) -> float:
    """Per-sample BIC; larger is better."""
    return fit_mle(g, pi, s).bic


class Edit(NamedTuple):
    """One-edge move. ``kind`` orders ties: removal < addition < reversal.

    For removals and reversals ``(i, j)`` is the existing edge ``i -> j``.
    """

    kind: int
    i: int
    j: int

    def __str__(self):
        name = ("remove", "add", "reverse")[self.kind]
        return f"{name} {self.i}->{self.j}"


REMOVE, ADD, REVERSE = 0, 1, 2


def _edits(g: Dag, pi: Partition) -> list[Edit]:
    constrained = pi.constrained_nodes()
    out = [Edit(REMOVE, i, j) for i, j in g.edges]
    for i in range(g.p):
        for j in range(g.p):
            if i != j and not g.adjacent(i, j) and i not in g.descendants(j):
                out.append(Edit(ADD, i, j))
    for i, j in g.edges:
        if any(j in g.descendants(c) for c in g.children(i) if c != j):
            continue  # reversing would close a cycle
        covered = g.parents(j) == g.parents(i) | {i}
        if covered and i not in constrained and j not in constrained:
            continue  # same equivalence class
        out.append(Edit(REVERSE, i, j))
    out.sort()
    return out


def apply_edit(g: Dag, e: Edit) -> Dag:
    edges = set(g.edges)
    if e.kind == ADD:
        edges.add((e.i, e.j))
    else:
        edges.remove((e.i, e.j))
        if e.kind == REVERSE:
            edges.add((e.j, e.i))
    return Dag(g.p, edges)


def neighborhood(g: Dag, pi: Partition, cap: int = 300, rng=None) -> dict[Edit, Dag]:
    """Single-edge edits of ``g`` that stay acyclic and change the class.

    When more than ``cap`` edits qualify, a uniform subset of size ``cap`` is
    drawn without replacement from ``rng``. Keys come in edit order.
    """
    edits = _edits(g, pi)
    if len(edits) > cap:
        if rng is None:
            raise ValueError("a generator is required to subsample the neighborhood")
        keep = np.sort(rng.choice(len(edits), size=cap, replace=False))
        edits = [edits[k] for k in keep]
    return {e: apply_edit(g, e) for e in edits}


class _Scorer:
    """BIC from memoised per-node residual variances."""

    def __init__(self, s: SampleCov, pi: Partition):
        self.s = s
        self.pi = pi
        self.cache: dict[tuple[int, frozenset], float] = {}

    def resid(self, i, pa):
        key = (i, pa)
        if key not in self.cache:
            try:
                self.cache[key] = _regress(self.s.s, i, sorted(pa))[1]
            except SingularRegression:
                self.cache[key] = math.nan
        return self.cache[key]

    def __call__(self, g: Dag) -> float:
        r = [self.resid(i, g.parents(i)) for i in range(g.p)]
        if any(math.isnan(v) for v in r):
            return -math.inf
        return _block_score(r, self.pi, len(g.edges), self.s.n)[0]


@dataclass
class SearchResult:
    best: Dag
    cpdag: Pdag
    score: float
    trace: list = field(default_factory=list)


def _start_dag(p: int, restart: int, rng) -> Dag:
    if restart == 0 or p < 2:
        return Dag(p)
    from .simulation import random_dag
    return random_dag(p, "sparse", rng)


def greedy_search(data: Union[Dataset, SampleCov], pi: Partition,
                  cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Restarted best-improvement hill climbing on BIC over DAGs.

    Restart 0 starts from the empty graph, later restarts from random sparse
    DAGs. Each restart draws from its own substream of ``cfg.seed``, so the
    result depends only on the inputs.
    """
    s = data if isinstance(data, SampleCov) else sample_covariance(data)
    if pi.p != s.p:
        raise DimensionMismatch(f"partition covers {pi.p} nodes, data has {s.p}")
    score = _Scorer(s, pi)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    trace = []
    best, best_score = None, -math.inf
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        g = _start_dag(s.p, r, rng)
        cur = score(g)
        trace.append({"restart": r, "iter": 0, "edit": "start", "score": cur,
                      "edges": len(g.edges)})
        for it in range(1, cfg.max_iters + 1):
            nb = neighborhood(g, pi, cfg.neighborhood_cap, rng)
            step, step_score, step_dag = None, -math.inf, None
            for e, h in nb.items():
                sc = score(h)
                if sc > step_score + cfg.slack:
                    step, step_score, step_dag = e, sc, h
            if step is None or not step_score > cur + cfg.slack:
                break
            g, cur = step_dag, step_score
            trace.append({"restart": r, "iter": it, "edit": str(step), "score": cur,
                          "edges": len(g.edges)})
        if cur > best_score + cfg.slack or best is None:
            best, best_score = g, cur
    return SearchResult(best, make_cpdag(best, pi), best_score, trace)


def _as_pdag(g) -> Pdag:
    return Pdag.from_dag(g) if isinstance(g, Dag) else g


def shd(a: Union[Pdag, Dag], b: Union[Pdag, Dag]) -> int:
    """Structural Hamming distance charging 2 for a reversed edge.

    Per unordered pair: 1 if present in one graph only, 2 if directed
    opposite ways, 1 if directed in one and undirected in the other.
    """
    a, b = _as_pdag(a), _as_pdag(b)
    if a.p != b.p:
        raise DimensionMismatch(f"graphs have {a.p} and {b.p} nodes")

    def marks(g):
        m = {e: "-" for e in g.undirected}
        for i, j in g.directed:
            m[(min(i, j), max(i, j))] = (i, j)
        return m

    ma, mb = marks(a), marks(b)
    d = 0
    for pair in ma.keys() | mb.keys():
        x, y = ma.get(pair), mb.get(pair)
        if x is None or y is None:
            d += 1
        elif x == y:
            continue
        elif x == "-" or y == "-":
            d += 1
        else:
            d += 2
    return d
