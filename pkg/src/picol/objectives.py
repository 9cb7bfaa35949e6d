"""Task losses for the three surveillance levels.

Every loss accepts a single coverage vector of shape ``(E,)`` or a stack of
candidates ``(M, E)`` and returns a float or an ``(M,)`` array accordingly,
so the controller can score all counterfactual actions in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NotAPath
from .network import RoadGraph

DELTA_FLOOR = 1.0
NORM_FLOOR = 1e-9


def _prep(a, s):
    a = np.asarray(a).astype(bool)
    s = np.asarray(s, dtype=float)
    if a.shape[-1] != s.shape[-1]:
        raise DimensionMismatch(f"coverage has {a.shape[-1]} edges, state has {s.shape[-1]}")
    return a, s


def _out(values, scalar):
    return float(values) if scalar else values


def loss_network(a, s, *, with_flag: bool = False):
    """Share of total volume sitting on uncovered edges."""
    a, s = _prep(a, s)
    total = np.abs(s).sum()
    if total == 0:
        zero = 0.0 if a.ndim == 1 else np.zeros(a.shape[0])
        return (zero, True) if with_flag else zero
    missed = (np.abs(s) * ~a).sum(axis=-1) / total
    missed = _out(missed, a.ndim == 1)
    return (missed, False) if with_flag else missed


def loss_link(a, delta, *, floor: float = NORM_FLOOR, with_flag: bool = False):
    """Share of absolute relative change sitting on uncovered edges."""
    a, d = _prep(a, delta)
    total = np.abs(d).sum()
    if total < floor:
        zero = 0.0 if a.ndim == 1 else np.zeros(a.shape[0])
        return (zero, True) if with_flag else zero
    missed = (np.abs(d) * ~a).sum(axis=-1) / total
    missed = _out(missed, a.ndim == 1)
    return (missed, False) if with_flag else missed


def path_edges(g: RoadGraph, a_path) -> list[int]:
    """Edge indices of ``a_path`` ordered along the path; raises NotAPath."""
    a = np.asarray(a_path).astype(bool)
    if a.shape != (g.E,):
        raise DimensionMismatch(f"path mask has shape {a.shape}, expected ({g.E},)")
    idx = [int(k) for k in np.flatnonzero(a)]
    if not idx:
        return []
    out_of = {}
    heads = set()
    for k in idx:
        t, h = g.edge_of(k)
        if t in out_of:
            raise NotAPath(f"node {t} has two outgoing path edges")
        out_of[t] = k
        heads.add(h)
    starts = [t for t in out_of if t not in heads]
    if len(starts) != 1:
        raise NotAPath("path mask is not a single simple chain")
    order, node, visited = [], starts[0], set()
    while node in out_of:
        if node in visited:
            raise NotAPath("path mask contains a cycle")
        visited.add(node)
        k = out_of[node]
        order.append(k)
        node = g.edge_of(k)[1]
    if len(order) != len(idx):
        raise NotAPath("path mask is disconnected")
    return order


def loss_route(a_path, s, graph: RoadGraph | None = None, origin=None, destination=None) -> float:
    """Travel time along a path: the inner product of its edge mask with ``s``.

    With ``graph`` given the mask is checked to be one connected simple path,
    optionally running from ``origin`` to ``destination``.
    """
    a, s = _prep(a_path, s)
    if graph is not None:
        order = path_edges(graph, a)
        if order:
            if origin is not None and graph.edge_of(order[0])[0] != origin:
                raise NotAPath(f"path does not start at {origin}")
            if destination is not None and graph.edge_of(order[-1])[1] != destination:
                raise NotAPath(f"path does not end at {destination}")
        elif origin is not None and origin != destination:
            raise NotAPath("empty path between distinct nodes")
    return float(np.dot(a.astype(float), s))


def unobserved_route_time(a, s, od_mask):
    """Travel time on OD-subgraph edges left uncovered by ``a``.

    Used as the camera loss in the route scenario: coverage that leaves less of
    the candidate routes' travel time to the predictor scores better.
    """
    a, s = _prep(a, s)
    od = np.asarray(od_mask).astype(bool)
    missed = (s * (od & ~a)).sum(axis=-1)
    return _out(missed, a.ndim == 1)


def relative_difference(s_prev, s_now, floor: float = DELTA_FLOOR) -> np.ndarray:
    if floor <= 0:
        raise ValueError("floor must be positive")
    s_prev = np.asarray(s_prev, dtype=float)
    s_now = np.asarray(s_now, dtype=float)
    if s_prev.shape != s_now.shape:
        raise DimensionMismatch("state shapes differ")
    return (s_now - s_prev) / np.maximum(s_prev, floor)


def _current(prev, cur):
    return cur


@dataclass(frozen=True)
class Task:
    """Binds a loss to the state it is evaluated on.

    ``loss_state(prev, cur)`` turns consecutive (fusion) states into the loss's
    state argument; ``loss(masks, state)`` scores coverage vectors.
    """

    name: str
    loss: Callable
    loss_state: Callable = _current
    channel: str = "volume"


def network_task() -> Task:
    return Task("network", loss_network)


def link_task(floor: float = DELTA_FLOOR) -> Task:
    return Task("link", loss_link, partial(relative_difference, floor=floor))


def route_task(od_mask: np.ndarray) -> Task:
    od = np.asarray(od_mask).astype(bool)
    return Task("route", partial(unobserved_route_time, od_mask=od), channel="traveltime")
