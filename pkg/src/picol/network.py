"""Directed road graph with canonical edge indexing.

Edges are indexed in lexicographic ``(tail, head)`` order so that every
per-edge vector in the package (states, masks, policies' coverage) lines up
the same way across runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateEdge, EmptyGraph, GraphError, SelfLoop, UnknownEdge, UnknownNode

Edge = tuple[int, int]


def edge_name(edge: Edge) -> str:
    return f"{edge[0]}-{edge[1]}"


def parse_edge(name: str) -> Edge:
    try:
        tail, head = name.strip().split("-")
        return int(tail), int(head)
    except ValueError as exc:
        raise GraphError(f"bad edge name {name!r}, expected 'tail-head'") from exc


class RoadGraph:
    """Immutable directed graph over integer node ids."""

    __slots__ = ("_nodes", "_edges", "_index", "_tails", "_heads")

    def __init__(self, edges: Iterable[Edge], nodes: Iterable[int] | None = None):
        edges = [(int(t), int(h)) for t, h in edges]
        if not edges:
            raise EmptyGraph("edge list is empty")
        seen = set()
        for e in edges:
            if e[0] == e[1]:
                raise SelfLoop(f"self-loop on node {e[0]}")
            if e in seen:
                raise DuplicateEdge(f"duplicate edge {edge_name(e)}")
            seen.add(e)
        ordered = tuple(sorted(edges))
        node_set = {n for e in ordered for n in e}
        if nodes is not None:
            node_set |= {int(n) for n in nodes}
        self._nodes = frozenset(node_set)
        self._edges = ordered
        self._index = {e: k for k, e in enumerate(ordered)}
        self._tails = np.array([e[0] for e in ordered])
        self._heads = np.array([e[1] for e in ordered])

    @property
    def nodes(self) -> frozenset:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def edge_index(self) -> Mapping[Edge, int]:
        return dict(self._index)

    @property
    def E(self) -> int:
        return len(self._edges)

    @property
    def tails(self) -> np.ndarray:
        return self._tails.copy()

    @property
    def heads(self) -> np.ndarray:
        return self._heads.copy()

    @property
    def edge_names(self) -> list[str]:
        return [edge_name(e) for e in self._edges]

    def index_of(self, edge: Edge | str) -> int:
        if isinstance(edge, str):
            edge = parse_edge(edge)
        try:
            return self._index[(int(edge[0]), int(edge[1]))]
        except KeyError:
            raise UnknownEdge(f"edge {edge_name(edge)} not in graph") from None

    def edge_of(self, k: int) -> Edge:
        return self._edges[k]

    def has_edge(self, tail: int, head: int) -> bool:
        return (tail, head) in self._index

    def _check_node(self, node: int) -> None:
        if node not in self._nodes:
            raise UnknownNode(f"node {node} not in graph")

    def out_edges(self, node: int) -> list[Edge]:
        self._check_node(node)
        return [e for e in self._edges if e[0] == node]

    def in_edges(self, node: int) -> list[Edge]:
        self._check_node(node)
        return [e for e in self._edges if e[1] == node]

    def successors(self, node: int) -> list[int]:
        return [h for _, h in self.out_edges(node)]

    def neighbors(self, node: int) -> list[int]:
        """Nodes joined to ``node`` by an edge in either direction, sorted."""
        self._check_node(node)
        out = {h for t, h in self._edges if t == node}
        inc = {t for t, h in self._edges if h == node}
        return sorted(out | inc)

    def out_degree(self, node: int) -> int:
        return len(self.out_edges(node))

    def relabel(self, mapping: Mapping[int, int]) -> "RoadGraph":
        return RoadGraph(
            [(mapping[t], mapping[h]) for t, h in self._edges],
            nodes=[mapping[n] for n in self._nodes],
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadGraph):
            return NotImplemented
        return self._edges == other._edges and self._nodes == other._nodes

    def __hash__(self) -> int:
        return hash((self._edges, self._nodes))

    def __repr__(self) -> str:
        return f"RoadGraph(N={len(self._nodes)}, E={self.E})"


def build_graph(edge_list: Sequence[Edge]) -> RoadGraph:
    return RoadGraph(edge_list)


@dataclass(frozen=True)
class EdgeAdjacency:
    """Edge-to-edge adjacency with self-connections.

    ``matrix[e, f] == 1`` when ``f == e`` or edge ``e`` flows into ``f``
    (``head(e) == tail(f)``).
    """

    matrix: np.ndarray
    degree: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        """Row-stochastic ``D^-1 A``."""
        return self.matrix / self.degree[:, None]


def edge_adjacency(g: RoadGraph) -> EdgeAdjacency:
    heads = g.heads
    tails = g.tails
    a = (heads[:, None] == tails[None, :]).astype(float)
    np.fill_diagonal(a, 1.0)
    return EdgeAdjacency(matrix=a, degree=a.sum(axis=1))


@dataclass(frozen=True)
class CameraPlacement:
    camera_nodes: tuple[int, ...]

    def validate(self, g: RoadGraph) -> None:
        for n in self.camera_nodes:
            if n not in g.nodes:
                raise UnknownNode(f"camera node {n} not in graph")
            if not g.neighbors(n):
                raise GraphError(f"camera node {n} has no incident edge")
        if len(set(self.camera_nodes)) != len(self.camera_nodes):
            raise GraphError("duplicate camera node")


def default_placement(g: RoadGraph, n_cameras: int = 6) -> CameraPlacement:
    """Highest out-degree nodes first, ties broken by smaller node id."""
    ranked = sorted(g.nodes, key=lambda n: (-g.out_degree(n), n))
    chosen = [n for n in ranked if g.neighbors(n)][:n_cameras]
    return CameraPlacement(tuple(sorted(chosen)))


# -- file formats ----------------------------------------------------------


def read_graph_csv(path: str | Path) -> RoadGraph:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["tail", "head"]:
            raise GraphError(f"{path}: header must start with 'tail,head'")
        edges = []
        for row in reader:
            try:
                edges.append((int(row["tail"]), int(row["head"])))
            except (TypeError, ValueError) as exc:
                raise GraphError(f"{path}: bad row {row}") from exc
    return build_graph(edges)


def write_graph_csv(g: RoadGraph, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tail", "head"])
        w.writerows(g.edges)


def read_placement_csv(path: str | Path) -> CameraPlacement:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "node" not in reader.fieldnames:
            raise GraphError(f"{path}: header must contain 'node'")
        return CameraPlacement(tuple(int(r["node"]) for r in reader))


def write_placement_csv(placement: CameraPlacement, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"])
        w.writerows([n] for n in placement.camera_nodes)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("picol") / "data" / name))


def bundled_graph() -> RoadGraph:
    """The 19-edge, 13-node corridor network used by the bundled scenarios."""
    return read_graph_csv(bundled_path("network.csv"))
