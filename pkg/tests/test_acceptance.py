"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (the lines are also
collected into the terminal summary), or ``python3 tests/test_acceptance.py``.
"""
import csv
import itertools
import json
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phsem.cli import main
from phsem.equivalence import MeekRule, cpdag, enumerate_pi_class, pi_equivalent, union_pdag
from phsem.graph import Dag, Partition, all_dags, all_partitions
from phsem.io import graph_document, write_json
from phsem.sem import (SemParams, ci_holds, conditional_variance, conditioning_bounds,
                       implied_covariance, is_member, path_witness, trek_covariance)
from phsem.simulation import SimConfig, random_dag, random_sem, run_experiment, summarize

RESULTS: list[str] = []
SEED = 20240611


def report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_partition(rng, p):
    return Partition(rng.integers(0, p, size=p))


def subsets(items):
    items = sorted(items)
    for r in range(len(items) + 1):
        yield from (frozenset(c) for c in itertools.combinations(items, r))


# 1 ---------------------------------------------------------------------------

def test_criterion_1_trek_rule():
    rng = np.random.default_rng(SEED + 1)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(500):
        p = int(rng.integers(2, 9))
        g = random_dag(p, "dense" if k % 2 else "sparse", rng)
        params = random_sem(g, random_partition(rng, p), rng)
        a = implied_covariance(g, params)
        b = trek_covariance(g, params)
        rel = np.max(np.abs(a - b) / np.maximum(np.abs(b), np.abs(b).max() * 1e-300))
        worst = max(worst, float(rel))
    elapsed = time.perf_counter() - t0
    report(1, "trek rule vs matrix formula", worst <= 1e-10 and elapsed < 10,
           f"max rel deviation {worst:.2e}, {elapsed:.1f}s")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_error_variance_identification():
    rng = np.random.default_rng(SEED + 2)
    t0 = time.perf_counter()
    worst_ok, n_valid, n_invalid, n_broken = 0.0, 0, 0, 0
    for _ in range(100):
        p = int(rng.integers(2, 7))
        g = random_dag(p, "dense", rng)
        params = random_sem(g, random_partition(rng, p), rng)
        sigma = implied_covariance(g, params)
        for i in range(p):
            bounds = conditioning_bounds(g, i)
            for a in subsets(set(range(p)) - {i}):
                if bounds.admits(a):
                    got = conditional_variance(sigma, i, a)
                    worst_ok = max(worst_ok, abs(got - params.omega[i]) / params.omega[i])
                    n_valid += 1
                else:
                    w = SemParams(path_witness(g, i, a), params.omega)
                    got = conditional_variance(implied_covariance(g, w), i, a)
                    n_invalid += 1
                    n_broken += abs(got - params.omega[i]) > 1e-8 * params.omega[i]
    elapsed = time.perf_counter() - t0
    ok = worst_ok <= 1e-8 and n_broken == n_invalid and elapsed < 60
    report(2, "error variance identification", ok,
           f"{n_valid} valid sets (max rel err {worst_ok:.1e}), "
           f"{n_broken}/{n_invalid} invalid sets broken, {elapsed:.1f}s")


# 3 ---------------------------------------------------------------------------

def _statements(p):
    """Every CI statement (i, j, S) with i < j, indexed for bitmasks."""
    out = []
    for i, j in itertools.combinations(range(p), 2):
        for s in subsets(set(range(p)) - {i, j}):
            out.append((i, j, s))
    return {st: k for k, st in enumerate(out)}


def _requirements(g, index):
    """Bitmask of local Markov statements of ``g``."""
    mask = 0
    for i in range(g.p):
        pa = g.parents(i)
        for j in set(range(g.p)) - g.descendants(i) - pa:
            mask |= 1 << index[(min(i, j), max(i, j), pa)]
    return mask


def _generic_point(g, pi, rng, index):
    sigma = implied_covariance(g, random_sem(g, pi, rng))
    holds = 0
    for (i, j, s), k in index.items():
        if ci_holds(sigma, i, j, s):
            holds |= 1 << k
    cvar = {(i, a): conditional_variance(sigma, i, a)
            for i in range(g.p) for a in subsets(set(range(g.p)) - {i})}
    return holds, cvar


def _in_model(point, g, pi, req):
    holds, cvar = point
    if req & ~holds:
        return False
    for block in pi.blocks:
        for i, j in zip(block, block[1:]):
            u, v = cvar[i, g.parents(i)], cvar[j, g.parents(j)]
            if abs(u - v) > 1e-8 * (u + v) / 2:
                return False
    return True


@pytest.mark.slow
def test_criterion_3_exhaustive_equivalence():
    rng = np.random.default_rng(SEED + 3)
    t0 = time.perf_counter()
    bad_union, bad_membership, bad_model, cases = 0, 0, 0, 0
    for p in (3, 4):
        dags = list(all_dags(p))
        index = _statements(p)
        req = {g: _requirements(g, index) for g in dags}
        for pi in all_partitions(p):
            points = {g: _generic_point(g, pi, rng, index) for g in dags}
            for g in dags:
                cases += 1
                cls = enumerate_pi_class(g, pi)
                bad_union += cpdag(g, pi) != union_pdag(p, cls)
                for h in dags:
                    same_model = _in_model(points[g], h, pi, req[h]) and _in_model(points[h], g, pi, req[g])
                    verdict = pi_equivalent(g, h, pi)
                    bad_membership += verdict != (h in cls)
                    bad_model += verdict != same_model
    elapsed = time.perf_counter() - t0
    ok = bad_union == bad_membership == bad_model == 0 and elapsed < 300
    report(3, "exhaustive CPDAG and equivalence oracle (p = 3, 4)", ok,
           f"{cases} (g, partition) cases; union mismatches {bad_union}, class mismatches "
           f"{bad_membership}, model-level mismatches {bad_model}, {elapsed:.1f}s")


# 4 ---------------------------------------------------------------------------

def test_criterion_4_six_node_cpdag(tmp_path, capsys):
    names = ["1", "2", "3", "4", "5", "6"]
    drawn = [("1", "2"), ("1", "3"), ("2", "3"), ("1", "5"), ("2", "5"), ("3", "5"),
             ("2", "6"), ("6", "4")]
    pos = {v: k for k, v in enumerate(names)}
    g = Dag(6, [(pos[a], pos[b]) for a, b in drawn])
    labels = (1, 1, 2, 3, 4, 5)
    blocks = [[names[k] for k in range(6) if labels[k] == b] for b in sorted(set(labels))]
    write_json(tmp_path / "g.json", graph_document(names, g))
    write_json(tmp_path / "pi.json", blocks)
    code = main(["cpdag", str(tmp_path / "g.json"), "--partition", str(tmp_path / "pi.json")])
    doc = json.loads(capsys.readouterr().out)
    got = {(e["from"], e["to"], e["directed"]) for e in doc["edges"]}
    expected = {(a, b, True) for a, b in drawn if (a, b) != ("3", "5")} | {("3", "5", False)}
    report(4, "six-node CPDAG", code == 0 and got == expected,
           "directed: " + ", ".join(f"{a}->{b}" for a, b, d in sorted(got) if d)
           + "; undirected: " + ", ".join(f"{a}-{b}" for a, b, d in sorted(got) if not d))


# 5 ---------------------------------------------------------------------------

def test_criterion_5_three_chain_algebra():
    rng = np.random.default_rng(SEED + 5)
    g1 = Dag(3, [(0, 2), (2, 1)])
    g2 = Dag(3, [(2, 0), (1, 2)])
    pi = Partition.from_blocks([[0, 1], [2]], 3)
    worst, separated = 0.0, 0
    for _ in range(100):
        s = implied_covariance(g1, random_sem(g1, pi, rng))
        e1 = s[0, 2] * s[1, 2] - s[0, 1] * s[2, 2]
        e2 = s[0, 0] * s[2, 2] - s[1, 1] * s[2, 2] + s[1, 2] ** 2
        worst = max(worst, abs(e1), abs(e2))
        separated += is_member(s, g1, pi) and not is_member(s, g2, pi)
    report(5, "three-node chain constraints", worst <= 1e-10 and separated == 100,
           f"max |polynomial| {worst:.1e}, G1 vs G2 separated in {separated}/100")


# 6 ---------------------------------------------------------------------------

def test_criterion_6_final_phase_rules():
    rng = np.random.default_rng(SEED + 6)
    fired = Counter()
    mismatches = 0
    R1, R2, R3, R4 = MeekRule
    for k in range(1000):
        p = int(rng.integers(3, 9))
        g = random_dag(p, "dense" if k % 2 else "sparse", rng)
        pi = random_partition(rng, p)
        log = Counter()
        full = cpdag(g, pi, log=log, final_rules=(R1, R2, R3, R4))
        fired[R3] += log[R3]
        fired[R4] += log[R4]
        mismatches += full != cpdag(g, pi, final_rules=(R1, R2))
    ok = fired[R3] == 0 and fired[R4] == 0 and mismatches == 0
    report(6, "final closure needs only R1 and R2", ok,
           f"R3 fired {fired[R3]}x, R4 fired {fired[R4]}x, output mismatches {mismatches}/1000")


# 7 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_learning_recovery():
    t0 = time.perf_counter()
    small = run_experiment(SimConfig(p=5, n=10_000, regime="sparse", blocks="two_blocks",
                                     replicates=50, seed=SEED))
    exact = sum(r.shd_gev == 0 for r in small if not r.error)
    big = summarize(run_experiment(SimConfig(p=10, n=1000, regime="sparse",
                                             blocks="two_blocks", replicates=50, seed=SEED)))
    med_gev = big["shd_gev"]["median"]
    med_min = big["shd_baseline_pi_min"]["median"]
    elapsed = time.perf_counter() - t0
    ok = exact >= 40 and med_gev is not None and med_gev <= med_min and elapsed < 900
    report(7, "learning recovery", ok,
           f"p=5: exact recovery {exact}/50; p=10: median SHD {med_gev} with partition vs "
           f"{med_min} without ({big['failed']} failed), {elapsed:.0f}s")


# 8 ---------------------------------------------------------------------------

def _csv_without_runtime(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    drop = rows[0].index("runtime")
    return [[v for k, v in enumerate(r) if k != drop] for r in rows]


def test_criterion_8_experiment_determinism(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"p": [4, 6], "n": 300, "regime": ["sparse", "dense"],
                               "replicates": 4, "restarts": 2}))
    outs = []
    for run, threads in (("a", "1"), ("b", "1"), ("c", "2")):
        code = main(["experiment", str(cfg), "--out", str(tmp_path / run), "--seed", "5",
                     "--threads", threads])
        assert code == 0
        outs.append(_csv_without_runtime(tmp_path / run / "results.csv"))
    capsys.readouterr()
    ok = outs[0] == outs[1] == outs[2] and len(outs[0]) == 17
    report(8, "experiment determinism", ok,
           f"{len(outs[0]) - 1} rows identical across two runs and a 2-process run")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
