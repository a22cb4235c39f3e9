"""JSON graph documents, partitions and CSV data files.

A graph document looks like::

    {"nodes": ["A", "B", "C"],
     "edges": [{"from": "A", "to": "B", "directed": true}, ...],
     "partition": [["A", "B"], ["C"]]}

``partition`` is optional. Edges that are all directed and acyclic parse as
a :class:`Dag`, anything else as a :class:`Pdag`.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CyclicGraph
from .graph import Dag, Partition, Pdag
from .learning import Dataset
from .sem import SemParams


class InputError(ValueError):
    """Malformed or inconsistent user input."""


@dataclass
class GraphDocument:
    nodes: list[str]
    graph: Union[Dag, Pdag]
    partition: Optional[Partition] = None

    @property
    def p(self) -> int:
        return len(self.nodes)


def _index(names: Sequence[str]) -> dict[str, int]:
    idx = {}
    for k, name in enumerate(names):
        if not isinstance(name, str):
            raise InputError(f"node name {name!r} is not a string")
        if name in idx:
            raise InputError(f"duplicate node name {name!r}")
        idx[name] = k
    return idx


def parse_partition(blocks, names: Sequence[str]) -> Partition:
    """Partition from a list of lists of node names; must cover every node once."""
    if isinstance(blocks, dict):
        blocks = blocks.get("partition")
    if not isinstance(blocks, list) or not all(isinstance(b, list) for b in blocks):
        raise InputError("partition must be a list of lists of node names")
    idx = _index(names)
    label = [None] * len(names)
    for k, block in enumerate(blocks):
        if not block:
            raise InputError(f"partition block {k} is empty")
        for name in block:
            if name not in idx:
                raise InputError(f"partition names unknown node {name!r}")
            if label[idx[name]] is not None:
                raise InputError(f"node {name!r} appears in more than one block")
            label[idx[name]] = k
    missing = [names[v] for v, b in enumerate(label) if b is None]
    if missing:
        raise InputError(f"partition does not cover node {missing[0]!r}")
    return Partition(label)


def partition_blocks(pi: Partition, names: Sequence[str]) -> list[list[str]]:
    return [[names[v] for v in b] for b in pi.blocks]


def parse_graph_document(doc: dict) -> GraphDocument:
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise InputError("graph document needs a 'nodes' list")
    names = list(doc["nodes"])
    if not names:
        raise InputError("graph document declares no nodes")
    idx = _index(names)
    directed, undirected = [], []
    for e in doc.get("edges", []):
        try:
            a, b = idx[e["from"]], idx[e["to"]]
        except KeyError as exc:
            raise InputError(f"edge {e!r} references an undeclared node or lacks from/to") from exc
        (directed if e.get("directed", True) else undirected).append((a, b))
    graph: Union[Dag, Pdag]
    try:
        if undirected:
            raise CyclicGraph()
        graph = Dag(len(names), directed)
    except CyclicGraph:
        try:
            graph = Pdag(len(names), directed, undirected)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    pi = None
    if doc.get("partition") is not None:
        pi = parse_partition(doc["partition"], names)
    return GraphDocument(names, graph, pi)


def graph_document(names: Sequence[str], graph: Union[Dag, Pdag],
                   partition: Optional[Partition] = None) -> dict:
    """Canonical document: nodes as given, edges sorted by node index."""
    if isinstance(graph, Dag):
        directed, undirected = graph.edges, frozenset()
    else:
        directed, undirected = graph.directed, graph.undirected
    edges = [(i, j, True) for i, j in directed] + [(i, j, False) for i, j in undirected]
    edges.sort(key=lambda t: (min(t[0], t[1]), max(t[0], t[1])))
    doc = {
        "nodes": list(names),
        "edges": [{"from": names[i], "to": names[j], "directed": d} for i, j, d in edges],
    }
    if partition is not None:
        doc["partition"] = partition_blocks(partition, names)
    return doc


def read_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def load_graph(path) -> GraphDocument:
    return parse_graph_document(read_json(path))


def read_data_csv(path) -> tuple[list[str], Dataset]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    names = [h.strip() for h in rows[0]]
    _index(names)
    body = [r for r in rows[1:] if r]
    try:
        x = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if x.size == 0:
        raise InputError(f"{path}: no data rows")
    if x.shape[1] != len(names):
        raise InputError(f"{path}: rows have {x.shape[1]} fields, header has {len(names)}")
    return names, Dataset(x)


def write_data_csv(path, names: Sequence[str], data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data.x:
            w.writerow([repr(float(v)) for v in row])


def params_document(names: Sequence[str], g: Dag, params: SemParams) -> dict:
    return {
        "nodes": list(names),
        "weights": [{"from": names[i], "to": names[j], "weight": float(params.lam[i, j])}
                    for i, j in sorted(g.edges)],
        "omega": {names[i]: float(w) for i, w in enumerate(params.omega)},
    }
