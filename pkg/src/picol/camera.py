"""Pan-tilt camera action sets, joint coverage, masking and fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, IsolatedNode
from .network import RoadGraph


@dataclass(frozen=True, eq=False)
class CameraActionSet:
    """Tilt options of the camera at ``camera``.

    Row ``k`` of ``actions`` is the coverage vector for pointing at
    ``neighbors[k]``: ones on whichever of ``(i, j)`` and ``(j, i)`` exist.
    """

    camera: int
    neighbors: tuple[int, ...]
    actions: np.ndarray

    def __len__(self) -> int:
        return len(self.neighbors)

    def labels(self) -> list[str]:
        return [str(j) for j in self.neighbors]

    def index(self, neighbor: int) -> int:
        return self.neighbors.index(neighbor)


def action_set(g: RoadGraph, camera_node: int) -> CameraActionSet:
    neighbors = g.neighbors(camera_node)
    if not neighbors:
        raise IsolatedNode(f"node {camera_node} has no incident edge")
    acts = np.zeros((len(neighbors), g.E), dtype=bool)
    for k, j in enumerate(neighbors):
        for e in ((camera_node, j), (j, camera_node)):
            if g.has_edge(*e):
                acts[k, g.index_of(e)] = True
    acts.setflags(write=False)
    return CameraActionSet(camera_node, tuple(neighbors), acts)


def action_sets(g: RoadGraph, camera_nodes: Sequence[int]) -> list[CameraActionSet]:
    return [action_set(g, n) for n in camera_nodes]


def join(actions: Sequence[np.ndarray]) -> np.ndarray:
    """Entry-wise OR of individual camera coverage vectors."""
    stacked = np.asarray(actions, dtype=bool)
    if stacked.ndim != 2:
        raise DimensionMismatch("join expects a sequence of equal-length vectors")
    return np.logical_or.reduce(stacked, axis=0)


def _check(*arrays: np.ndarray) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise DimensionMismatch(f"shape mismatch: {sorted(shapes)}")


def observe(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    a = np.asarray(a)
    _check(s, a)
    return s * a.astype(bool)


@dataclass(frozen=True, eq=False)
class FusionState:
    values: np.ndarray
    observed: np.ndarray  # True where the value came from a camera

    @property
    def provenance(self) -> list[str]:
        return ["observed" if o else "predicted" for o in self.observed]


def fuse(s_obs: np.ndarray, pred: np.ndarray, a: np.ndarray) -> FusionState:
    """Fill unobserved entries of ``s_obs`` with ``pred``: ``s_obs + pred * (1 - a)``."""
    s_obs = np.asarray(s_obs, dtype=float)
    pred = np.asarray(pred, dtype=float)
    a = np.asarray(a).astype(bool)
    _check(s_obs, pred, a)
    values = s_obs + pred * (1.0 - a)
    return FusionState(values, a.copy())
