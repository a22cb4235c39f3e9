"""Covariance algebra of linear Gaussian SEMs with partitioned error variances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.linalg import cho_factor, solve_triangular

from .errors import InvalidConditioningSet, SupportViolation
from .graph import DEFAULT_TREK_CAP, Dag, Partition, enumerate_treks, topological_order

CI_TOL = 1e-9
EQVAR_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SemParams:
    """Edge weights ``lam[i, j]`` for ``i -> j`` and error variances ``omega``."""

    lam: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        omega = np.array(self.omega, dtype=float)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1] or omega.shape != (lam.shape[0],):
            raise ValueError("lam must be p x p and omega length p")
        if np.any(omega <= 0):
            raise ValueError("error variances must be positive")
        lam.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "omega", omega)

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    def respects(self, pi: Partition, rtol: float = 0.0) -> bool:
        for block in pi.blocks:
            w = self.omega[list(block)]
            if np.max(w) - np.min(w) > rtol * np.mean(w):
                return False
        return True


def check_support(g: Dag, params: SemParams) -> None:
    if params.p != g.p:
        raise SupportViolation(f"parameters have p={params.p}, graph has p={g.p}")
    mask = ~g.adjacency()
    bad = np.argwhere((params.lam != 0) & mask)
    if bad.size:
        i, j = bad[0]
        raise SupportViolation(f"nonzero weight on {i}->{j}, which is not an edge")


def implied_covariance(g: Dag, params: SemParams) -> np.ndarray:
    """``(I - lam)^-T diag(omega) (I - lam)^-1`` via a triangular solve."""
    check_support(g, params)
    order = list(topological_order(g))
    p = g.p
    # in topological coordinates I - lam is unit upper triangular
    a = np.eye(p) - params.lam[np.ix_(order, order)]
    b = solve_triangular(a, np.eye(p), lower=False, unit_diagonal=True)
    w = params.omega[order]
    sig_perm = b.T @ (w[:, None] * b)
    inv = np.argsort(order)
    sigma = sig_perm[np.ix_(inv, inv)]
    return (sigma + sigma.T) / 2


def trek_covariance(g: Dag, params: SemParams, cap: int = DEFAULT_TREK_CAP) -> np.ndarray:
    """Covariance as a sum of trek monomials; exponential, small graphs only."""
    check_support(g, params)
    p = g.p
    sigma = np.zeros((p, p))
    for i in range(p):
        for j in range(i, p):
            total = 0.0
            for t in enumerate_treks(g, i, j, cap=cap):
                term = params.omega[t.top]
                for k, l in t.edges():
                    term *= params.lam[k, l]
                total += term
            sigma[i, j] = sigma[j, i] = total
    return sigma


def _as_list(a: Iterable[int]) -> list[int]:
    return sorted(set(a))


def conditional_variance(sigma: np.ndarray, i: int, a: Iterable[int]) -> float:
    """Residual variance of ``X_i`` after regressing on ``X_A`` (Schur complement)."""
    a = _as_list(a)
    if i in a:
        raise ValueError("i must not be in the conditioning set")
    s_ii = float(sigma[i, i])
    if not a:
        return s_ii
    c, lower = cho_factor(sigma[np.ix_(a, a)], lower=True)
    v = solve_triangular(c, sigma[a, i], lower=True)
    return s_ii - float(v @ v)


class ConditioningBounds(NamedTuple):
    lower: frozenset[int]
    upper: frozenset[int]

    def admits(self, a: Iterable[int]) -> bool:
        a = frozenset(a)
        return self.lower <= a <= self.upper


def conditioning_bounds(g: Dag, i: int) -> ConditioningBounds:
    """Smallest and largest conditioning sets that identify ``omega_i``."""
    return ConditioningBounds(g.parents(i), frozenset(range(g.p)) - g.descendants(i))


def recover_error_variance(g: Dag, sigma: np.ndarray, i: int, a: Iterable[int]) -> float:
    a = frozenset(a)
    bounds = conditioning_bounds(g, i)
    if not bounds.admits(a):
        missing = sorted(bounds.lower - a)
        extra = sorted(a - bounds.upper)
        raise InvalidConditioningSet(
            f"node {i}: conditioning set misses parents {missing} or contains descendants {extra}")
    return conditional_variance(sigma, i, a)


def normalized_det(sigma: np.ndarray, i: int, j: int, s: Iterable[int]) -> float:
    """``|det Sigma_{iS,jS}|`` divided by the product of its row norms."""
    s = _as_list(s)
    rows = [i] + s
    cols = [j] + s
    m = sigma[np.ix_(rows, cols)]
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        return 0.0
    return abs(float(np.linalg.det(m))) / float(np.prod(norms))


def ci_holds(sigma: np.ndarray, i: int, j: int, s: Iterable[int] = (), tol: float = CI_TOL) -> bool:
    """Gaussian conditional independence of ``X_i`` and ``X_j`` given ``X_S``."""
    s = _as_list(s)
    if i == j or i in s or j in s:
        raise ValueError("need distinct i, j outside the conditioning set")
    return normalized_det(sigma, i, j, s) <= tol


def equal_variance_holds(sigma, i, a_i, j, a_j, tol: float = EQVAR_TOL) -> bool:
    u = conditional_variance(sigma, i, a_i)
    v = conditional_variance(sigma, j, a_j)
    return abs(u - v) <= tol * (u + v) / 2


def is_member(sigma: np.ndarray, g: Dag, pi: Partition,
              tol: float = CI_TOL, var_tol: float = EQVAR_TOL) -> bool:
    """Whether ``sigma`` lies in the model of ``(g, pi)``.

    Checks the local Markov property (each node independent of its
    non-descendants given its parents) and, for every pair in a common block,
    equality of the error variances identified from the parent sets.
    """
    p = g.p
    for i in range(p):
        pa = g.parents(i)
        others = set(range(p)) - g.descendants(i) - pa
        for j in sorted(others):
            if not ci_holds(sigma, i, j, pa, tol):
                return False
    for block in pi.blocks:
        for i, j in zip(block, block[1:]):
            if not equal_variance_holds(sigma, i, g.parents(i), j, g.parents(j), var_tol):
                return False
    return True


def error_variances_from(sigma: np.ndarray, g: Dag) -> np.ndarray:
    """Recover every ``omega_i`` using the parent set as conditioning set."""
    return np.array([conditional_variance(sigma, i, g.parents(i)) for i in range(g.p)])


def path_witness(g: Dag, i: int, a: Iterable[int], weight: float = 0.8) -> np.ndarray:
    """Edge weights under which conditioning ``X_i`` on ``a`` misstates ``omega_i``.

    Expects ``a`` outside the admissible range for ``i``. If a parent ``k`` is
    missing from ``a``, only ``k -> i`` carries weight. Otherwise ``a`` holds
    a descendant; the weights sit on one directed path from ``i`` to its
    first node in ``a``.
    """
    a = frozenset(a)
    lam = np.zeros((g.p, g.p))
    missing = sorted(g.parents(i) - a)
    if missing:
        lam[missing[0], i] = weight
        return lam
    # breadth-first through nodes outside a; the first hit in a ends the path
    prev = {i: None}
    frontier = [i]
    target = None
    while frontier and target is None:
        nxt = []
        for v in frontier:
            for c in sorted(g.children(v)):
                if c in prev:
                    continue
                prev[c] = v
                if c in a:
                    target = c
                    break
                nxt.append(c)
            if target is not None:
                break
        frontier = nxt
    if target is None:
        raise ValueError(f"conditioning set {sorted(a)} is admissible for node {i}")
    v = target
    while prev[v] is not None:
        lam[prev[v], v] = weight
        v = prev[v]
    return lam


__all__ = [
    "SemParams", "ConditioningBounds", "implied_covariance", "trek_covariance",
    "conditional_variance", "conditioning_bounds", "recover_error_variance",
    "ci_holds", "equal_variance_holds", "is_member", "normalized_det",
    "error_variances_from", "path_witness", "check_support",
]
