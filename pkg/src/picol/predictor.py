"""Traffic-state predictors and graph/attention forward kernels.

A predictor maps the last ``window`` aggregated fusion states to the next
``window`` aggregated states. Three reference implementations are provided:
persistence, seasonal repetition, and a ridge-fitted graph-diffusion model
whose per-edge features are the current state propagated 0..h hops over the
row-normalized edge adjacency plus daily and half-daily harmonics.

The kernels at the bottom are plain forward passes of a graph-convolution
layer (optionally reweighted by a softmax spatial matrix) and scaled
dot-product attention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, SingularSystem, WindowTooShort
from .network import RoadGraph, build_graph, edge_adjacency, parse_edge

MINUTES_PER_DAY = 1440


@dataclass(frozen=True, eq=False)
class PredictionBatch:
    states: np.ndarray  # (K, E), one row per aggregation interval
    issued_at: int

    def __len__(self) -> int:
        return self.states.shape[0]


def aggregate(values: np.ndarray, minutes: int) -> np.ndarray:
    """Non-overlapping means over ``minutes``-long blocks; a ragged tail is dropped."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] // minutes
    return values[: n * minutes].reshape(n, minutes, *values.shape[1:]).mean(axis=1)


class Predictor:
    """Base class: subclasses implement ``_forecast``."""

    window: int = 12
    aggregation: int = 5
    clock_offset_min: int = 60

    def _validate(self, history) -> np.ndarray:
        h = np.asarray(history, dtype=float)
        if h.ndim != 2:
            raise DimensionMismatch(f"history must be (K, E), got shape {h.shape}")
        if h.shape[0] < self.window:
            raise WindowTooShort(f"need {self.window} past states, got {h.shape[0]}")
        return h[-self.window:]

    def predict(self, history, issued_at: int = 0) -> PredictionBatch:
        """Forecast ``window`` intervals starting at trace minute ``issued_at``."""
        h = self._validate(history)
        out = np.maximum(self._forecast(h, issued_at), 0.0)
        return PredictionBatch(out, issued_at)

    def _forecast(self, history: np.ndarray, issued_at: int) -> np.ndarray:
        raise NotImplementedError


class PersistencePredictor(Predictor):
    def __init__(self, window: int = 12, aggregation: int = 5):
        self.window = window
        self.aggregation = aggregation

    def _forecast(self, history, issued_at):
        return np.repeat(history[-1:], self.window, axis=0)


class SeasonalPredictor(Predictor):
    """Repeats the last ``period`` states of the window."""

    def __init__(self, period: int, window: int = 12, aggregation: int = 5):
        if not 1 <= period <= window:
            raise ValueError(f"period must lie in [1, window], got {period}")
        self.period = period
        self.window = window
        self.aggregation = aggregation

    def _forecast(self, history, issued_at):
        last = history[-self.period:]
        reps = -(-self.window // self.period)
        return np.tile(last, (reps, 1))[: self.window]


class OraclePredictor(Predictor):
    """Returns the true future; used to isolate controller behaviour.

    The harness reads ``truth`` directly at minute resolution.
    """

    exact = True

    def __init__(self, truth: np.ndarray, window: int = 12, aggregation: int = 5):
        self.truth = np.asarray(truth, dtype=float)
        self.window = window
        self.aggregation = aggregation

    def _forecast(self, history, issued_at):
        agg = self.aggregation
        out = np.empty((self.window, self.truth.shape[1]))
        for j in range(self.window):
            lo = min(issued_at + j * agg, self.truth.shape[0] - 1)
            out[j] = self.truth[lo: lo + agg].mean(axis=0)
        return out


def time_features(minute_of_day) -> np.ndarray:
    """Sine/cosine pairs with 24 h and 12 h periods."""
    m = np.asarray(minute_of_day, dtype=float)
    w = 2 * np.pi * m / MINUTES_PER_DAY
    return np.stack([np.sin(w), np.cos(w), np.sin(2 * w), np.cos(2 * w)], axis=-1)


def diffusion_features(states: np.ndarray, prop: np.ndarray, hops: int) -> np.ndarray:
    """``(..., E) -> (..., E, hops + 1)``: the state propagated 0..hops times."""
    feats = [states]
    cur = states
    for _ in range(hops):
        cur = cur @ prop.T
        feats.append(cur)
    return np.stack(feats, axis=-1)


class GraphDiffusionPredictor(Predictor):
    """Per-edge linear one-step model, iterated for multi-step forecasts.

    ``weights[e]`` holds ``hops + 1`` diffusion coefficients, four harmonic
    coefficients, then the intercept.
    """

    def __init__(self, graph: RoadGraph, weights: np.ndarray, hops: int = 2,
                 ridge: float = 1e-3, window: int = 12, aggregation: int = 5,
                 clock_offset_min: int = 60):
        self.graph = graph
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (graph.E, hops + 6):
            raise DimensionMismatch(f"weights shape {self.weights.shape}, expected {(graph.E, hops + 6)}")
        self.hops = hops
        self.ridge = ridge
        self.window = window
        self.aggregation = aggregation
        self.clock_offset_min = clock_offset_min
        self.prop = edge_adjacency(graph).normalized

    def _minute_of_day(self, t):
        return (np.asarray(t) + self.clock_offset_min) % MINUTES_PER_DAY

    def step(self, state: np.ndarray, target_minute) -> np.ndarray:
        """One-step forecast of the interval starting at ``target_minute``."""
        x = diffusion_features(state, self.prop, self.hops)
        tf = time_features(self._minute_of_day(target_minute))
        w = self.weights
        return (x * w[:, : self.hops + 1]).sum(axis=-1) + tf @ w[:, self.hops + 1: -1].T + w[:, -1]

    def _forecast(self, history, issued_at):
        if history.shape[1] != self.graph.E:
            raise DimensionMismatch(f"history has {history.shape[1]} edges, model has {self.graph.E}")
        out = np.empty((self.window, self.graph.E))
        cur = history[-1]
        for j in range(self.window):
            cur = np.maximum(self.step(cur, issued_at + j * self.aggregation), 0.0)
            out[j] = cur
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "graph_diffusion",
            "edges": self.graph.edge_names,
            "weights": {n: list(map(float, w)) for n, w in zip(self.graph.edge_names, self.weights)},
            "ridge": self.ridge,
            "hops": self.hops,
            "window": self.window,
            "aggregation": self.aggregation,
            "clock_offset_min": self.clock_offset_min,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "GraphDiffusionPredictor":
        g = build_graph([parse_edge(n) for n in d["edges"]])
        w = np.array([d["weights"][n] for n in g.edge_names])
        return cls(g, w, d["hops"], d["ridge"], d["window"], d["aggregation"],
                   d["clock_offset_min"])

    @classmethod
    def load(cls, path: str | Path) -> "GraphDiffusionPredictor":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_graph_diffusion(
    graph: RoadGraph,
    traces: Sequence[np.ndarray],
    ridge: float = 1e-3,
    hops: int = 2,
    window: int = 12,
    aggregation: int = 5,
    clock_offset_min: int = 60,
    aggregated: bool = False,
) -> GraphDiffusionPredictor:
    """Ridge least squares for every edge's one-step model.

    ``traces`` are per-minute ``(T, E)`` arrays (or already aggregated ones when
    ``aggregated`` is set). The intercept is not penalized, so a huge ``ridge``
    drives the forecast to the training mean of the targets.
    """
    if not traces:
        raise ValueError("need at least one training trace")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    prop = edge_adjacency(graph).normalized
    xs, ys, tfs = [], [], []
    for tr in traces:
        a = np.asarray(tr, dtype=float) if aggregated else aggregate(tr, aggregation)
        if a.shape[1] != graph.E:
            raise DimensionMismatch(f"trace has {a.shape[1]} edges, graph has {graph.E}")
        target_min = (np.arange(1, a.shape[0]) * aggregation + clock_offset_min) % MINUTES_PER_DAY
        xs.append(diffusion_features(a[:-1], prop, hops))
        ys.append(a[1:])
        tfs.append(time_features(target_min))
    X = np.concatenate(xs)  # (n, E, h+1)
    Y = np.concatenate(ys)  # (n, E)
    TF = np.concatenate(tfs)  # (n, 4)
    n, E = Y.shape
    feats = np.concatenate([X, np.broadcast_to(TF[:, None, :], (n, E, 4))], axis=-1)
    feats = feats.transpose(1, 0, 2)  # (E, n, p)
    mu_x = feats.mean(axis=1, keepdims=True)
    mu_y = Y.mean(axis=0)
    Xc = feats - mu_x
    Yc = (Y - mu_y).T  # (E, n)
    p = Xc.shape[-1]
    gram = Xc.transpose(0, 2, 1) @ Xc + ridge * np.eye(p)
    rhs = (Xc.transpose(0, 2, 1) @ Yc[..., None])[..., 0]
    if ridge == 0:
        ranks = np.linalg.matrix_rank(gram)
        if np.any(ranks < p):
            raise SingularSystem("normal equations are singular; use ridge > 0")
    try:
        beta = np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    intercept = mu_y - (beta * mu_x[:, 0, :]).sum(axis=-1)
    weights = np.concatenate([beta, intercept[:, None]], axis=1)
    return GraphDiffusionPredictor(graph, weights, hops, ridge, window, aggregation,
                                   clock_offset_min)


# -- forward kernels -------------------------------------------------------


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True, eq=False)
class GraphConvLayer:
    weights: np.ndarray  # (d_in, d_out)
    norm_adj: np.ndarray  # (E, E), row-stochastic

    @classmethod
    def from_graph(cls, g: RoadGraph, weights: np.ndarray) -> "GraphConvLayer":
        return cls(np.asarray(weights, dtype=float), edge_adjacency(g).normalized)


def identity(x):
    return x


def relu(x):
    return np.maximum(x, 0.0)


def graph_conv_forward(H: np.ndarray, layer: GraphConvLayer, spatial: np.ndarray | None = None,
                       activation: Callable = identity) -> np.ndarray:
    """``activation(((D^-1 A) * S) @ H @ W)``; without ``spatial`` the plain rule."""
    H = np.asarray(H, dtype=float)
    A = layer.norm_adj
    if H.ndim != 2 or H.shape[0] != A.shape[0] or H.shape[1] != layer.weights.shape[0]:
        raise DimensionMismatch(
            f"H {H.shape} incompatible with adjacency {A.shape} and weights {layer.weights.shape}")
    if spatial is not None:
        S = np.asarray(spatial, dtype=float)
        if S.shape != A.shape:
            raise DimensionMismatch(f"spatial matrix {S.shape}, expected {A.shape}")
        A = A * S
    return activation(A @ H @ layer.weights)


def spatial_weights(H: np.ndarray) -> np.ndarray:
    """Row-wise softmax of ``H H^T / sqrt(d)``."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] < 1:
        raise DimensionMismatch(f"H must be (E, d>=1), got {H.shape}")
    return softmax(H @ H.T / np.sqrt(H.shape[1]), axis=1)


def scaled_dot_attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray,
                         causal: bool = False) -> np.ndarray:
    Q, K, V = (np.asarray(x, dtype=float) for x in (Q, K, V))
    if Q.ndim != 2 or K.ndim != 2 or V.ndim != 2 or Q.shape[1] != K.shape[1] or K.shape[0] != V.shape[0]:
        raise DimensionMismatch(f"Q {Q.shape}, K {K.shape}, V {V.shape} do not agree")
    logits = Q @ K.T / np.sqrt(Q.shape[1])
    if causal:
        Lq, Lk = logits.shape
        hidden = np.arange(Lk)[None, :] > np.arange(Lq)[:, None]
        logits = np.where(hidden, -np.inf, logits)
    return softmax(logits, axis=1) @ V
