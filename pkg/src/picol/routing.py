"""Shortest paths on travel-time states and en-route replanning."""

from __future__ import annotations

import csv
import heapq
import pathlib
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import Unreachable
from .network import RoadGraph
from .objectives import loss_route


@dataclass(frozen=True, eq=False)
class Path:
    nodes: tuple[int, ...]
    edge_mask: np.ndarray

    @property
    def label(self) -> str:
        return "-".join(map(str, self.nodes))

    def __eq__(self, other):
        return isinstance(other, Path) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)


def path_from_nodes(g: RoadGraph, nodes) -> Path:
    nodes = tuple(int(n) for n in nodes)
    mask = np.zeros(g.E, dtype=bool)
    for t, h in zip(nodes, nodes[1:]):
        mask[g.index_of((t, h))] = True
    return Path(nodes, mask)


def shortest_path(g: RoadGraph, travel_times, o: int, d: int) -> Path:
    """Dijkstra; equal-cost ties go to the lexicographically smallest node sequence."""
    tt = np.asarray(travel_times, dtype=float)
    if tt.shape != (g.E,):
        raise ValueError(f"travel times have shape {tt.shape}, expected ({g.E},)")
    if np.any(tt < 0):
        raise ValueError("travel times must be nonnegative")
    for n in (o, d):
        if n not in g.nodes:
            raise Unreachable(f"node {n} not in graph")
    out = {}
    for k, (t, h) in enumerate(g.edges):
        out.setdefault(t, []).append((h, k))
    best = {o: (0.0, (o,))}
    heap = [(0.0, (o,))]
    done = set()
    while heap:
        dist, nodes = heapq.heappop(heap)
        u = nodes[-1]
        if u in done or best[u] != (dist, nodes):
            continue
        done.add(u)
        if u == d:
            return path_from_nodes(g, nodes)
        for v, k in out.get(u, ()):
            if v in done or v in nodes:
                continue
            cand = (dist + tt[k], nodes + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    raise Unreachable(f"node {d} unreachable from {o}")


def simple_paths(g: RoadGraph, o: int, d: int) -> Iterator[tuple[int, ...]]:
    out = {}
    for t, h in g.edges:
        out.setdefault(t, []).append(h)
    stack = [(o,)]
    while stack:
        nodes = stack.pop()
        u = nodes[-1]
        if u == d:
            yield nodes
            continue
        for v in sorted(out.get(u, ()), reverse=True):
            if v not in nodes:
                stack.append(nodes + (v,))


def od_subgraph_mask(g: RoadGraph, o: int, d: int) -> np.ndarray:
    """Edges lying on at least one simple o->d path."""
    mask = np.zeros(g.E, dtype=bool)
    for nodes in simple_paths(g, o, d):
        mask |= path_from_nodes(g, nodes).edge_mask
    return mask


@dataclass(frozen=True, eq=False)
class RoutePlan:
    path: Path
    eta_seconds: float
    decided_at: int
    basis: str

    @property
    def node(self) -> int:
        return self.path.nodes[0]


@dataclass(frozen=True, eq=False)
class ReplanResult:
    plans: list[RoutePlan]
    completed: bool
    arrival_s: float | None
    reason: str = ""

    def plan_at(self, node: int) -> RoutePlan | None:
        for p in self.plans:
            if p.node == node:
                return p
        return None


def replan_loop(
    g: RoadGraph,
    true_travel_times: np.ndarray,
    state_at: Callable[[int], np.ndarray],
    o: int,
    d: int,
    start_min: int,
    basis: str = "truth",
) -> ReplanResult:
    """Drive one vehicle from ``o`` to ``d``, replanning at every node.

    Each hop takes the true travel time of the minute the vehicle enters the
    edge; plans use whatever ``state_at(minute)`` reports.
    """
    true_tt = np.asarray(true_travel_times, dtype=float)
    T = true_tt.shape[0]
    if not 0 <= start_min < T:
        raise ValueError(f"start_min {start_min} outside trace of length {T}")
    clock = start_min * 60.0
    node = o
    plans: list[RoutePlan] = []
    while node != d:
        t = int(clock // 60)
        if t >= T:
            return ReplanResult(plans, False, None, "trace ended before arrival")
        state = np.asarray(state_at(t), dtype=float)
        try:
            path = shortest_path(g, state, node, d)
        except Unreachable as exc:
            return ReplanResult(plans, False, None, f"unreachable: {exc}")
        plans.append(RoutePlan(path, loss_route(path.edge_mask, state), t, basis))
        nxt = path.nodes[1]
        clock += true_tt[t, g.index_of((node, nxt))]
        node = nxt
    if not plans:
        plans.append(RoutePlan(Path((o,), np.zeros(g.E, dtype=bool)), 0.0, start_min, basis))
    return ReplanResult(plans, True, clock)


def replan_rows(results: dict[str, ReplanResult]) -> list[dict]:
    return [
        {"decided_at": p.decided_at, "node": p.node, "basis": basis, "path": p.path.label,
         "eta_seconds": float(p.eta_seconds)}
        for basis, res in results.items() for p in res.plans
    ]


_REPLAN_FIELDS = ["decided_at", "node", "basis", "path", "eta_seconds"]


def write_replan_csv(path: str | pathlib.Path, rows: list[dict] | dict[str, ReplanResult]) -> None:
    if isinstance(rows, dict):
        rows = replan_rows(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_REPLAN_FIELDS)
        for r in rows:
            w.writerow([r["decided_at"], r["node"], r["basis"], r["path"], repr(r["eta_seconds"])])


def read_replan_csv(path: str | pathlib.Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"decided_at": int(r["decided_at"]), "node": int(r["node"]), "basis": r["basis"],
             "path": r["path"], "eta_seconds": float(r["eta_seconds"])}
            for r in csv.DictReader(fh)
        ]
