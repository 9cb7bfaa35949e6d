"""Seeded per-minute traffic generator and trace CSV I/O.

Volumes follow ``base(e) * diurnal(t) * noise``. The diurnal curve is a pair of
Gaussian bumps (morning and evening peaks) rescaled so the noiseless network
total sweeps exactly the configured band over a day. Travel times come from a
BPR curve on the generated volume. Lane closures cut the closed edge's volume
by ``severity`` and push a ramped queue onto the edges feeding it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    IncidentOutOfRange,
    InvalidIncident,
    LengthMismatch,
    MalformedRow,
    UnknownEdge,
)
from .network import Edge, RoadGraph, edge_name, parse_edge

MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class IncidentSpec:
    edge: Edge
    start_min: int
    duration_min: int
    severity: float = 1.0

    def __post_init__(self):
        if isinstance(self.edge, str):
            object.__setattr__(self, "edge", parse_edge(self.edge))
        else:
            object.__setattr__(self, "edge", (int(self.edge[0]), int(self.edge[1])))
        if int(self.duration_min) < 1:
            raise InvalidIncident(f"duration_min must be >= 1, got {self.duration_min}")
        if not 0.0 < float(self.severity) <= 1.0:
            raise InvalidIncident(f"severity must lie in (0, 1], got {self.severity}")
        if int(self.start_min) < 0:
            raise IncidentOutOfRange(f"start_min must be >= 0, got {self.start_min}")

    @property
    def end_min(self) -> int:
        return self.start_min + self.duration_min

    def active(self, t: int) -> bool:
        return self.start_min <= t < self.end_min


@dataclass(frozen=True)
class DiurnalProfile:
    band: tuple[float, float] = (7000.0, 18000.0)
    am_peak_hour: float = 8.0
    pm_peak_hour: float = 17.5
    am_width_hours: float = 1.5
    pm_width_hours: float = 2.0
    am_amplitude: float = 1.0
    pm_amplitude: float = 0.9
    clock_offset_min: int = 60  # minute 0 of a trace is 1 am
    noise_sigma: float = 0.1
    bpr_alpha: float = 0.15
    bpr_beta: float = 4.0
    spillback_factor: float = 0.5
    spillback_hops: int = 1
    spillback_ramp_min: int = 30
    closure_penalty_s: float = 1e7

    def __post_init__(self):
        lo, hi = self.band
        if not 0 < lo <= hi:
            raise ValueError(f"band must satisfy 0 < lo <= hi, got {self.band}")
        if self.am_width_hours <= 0 or self.pm_width_hours <= 0:
            raise ValueError("peak widths must be positive")
        if self.am_amplitude < 0 or self.pm_amplitude < 0:
            raise ValueError("peak amplitudes must be nonnegative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.spillback_hops < 0 or self.spillback_ramp_min < 1:
            raise ValueError("spillback_hops >= 0 and spillback_ramp_min >= 1 required")

    def shape(self, minute_of_day: np.ndarray) -> np.ndarray:
        m = np.asarray(minute_of_day, dtype=float)

        def bump(center_h, width_h):
            d = np.abs(m - center_h * 60.0)
            d = np.minimum(d, MINUTES_PER_DAY - d)
            return np.exp(-0.5 * (d / (width_h * 60.0)) ** 2)

        return (self.am_amplitude * bump(self.am_peak_hour, self.am_width_hours)
                + self.pm_amplitude * bump(self.pm_peak_hour, self.pm_width_hours))

    def network_total(self, t: np.ndarray) -> np.ndarray:
        """Noiseless network volume (veh/h) at trace minutes ``t``."""
        day = self.shape(np.arange(MINUTES_PER_DAY))
        lo, hi = self.band
        span = day.max() - day.min()
        g = self.shape((np.asarray(t) + self.clock_offset_min) % MINUTES_PER_DAY)
        scaled = (g - day.min()) / span if span > 0 else np.zeros_like(g)
        return lo + (hi - lo) * scaled


@dataclass(frozen=True)
class EdgeParams:
    base_volume: np.ndarray
    free_flow_s: np.ndarray
    capacity: np.ndarray

    @classmethod
    def uniform(cls, E: int, base=500.0, free_flow=300.0) -> "EdgeParams":
        return cls(np.full(E, float(base)), np.full(E, float(free_flow)),
                   np.full(E, 2.0 * base))

    def __post_init__(self):
        for name in ("base_volume", "free_flow_s", "capacity"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive")
            object.__setattr__(self, name, v)


def read_edge_params(path: str | Path, g: RoadGraph) -> EdgeParams:
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows[g.index_of(row["edge"])] = row
    missing = [g.edge_names[k] for k in range(g.E) if k not in rows]
    if missing:
        raise UnknownEdge(f"{path}: no parameters for edges {missing}")
    cols = {c: np.array([float(rows[k][c]) for k in range(g.E)])
            for c in ("base_volume", "free_flow_s", "capacity")}
    return EdgeParams(**cols)


@dataclass(eq=False)
class Trace:
    """Per-minute states for every edge; rows are trace minutes 0..T-1."""

    edges: list[str]
    volume: np.ndarray
    traveltime: np.ndarray | None = None
    seed: int | None = None
    incidents: tuple[IncidentSpec, ...] = field(default_factory=tuple)

    @property
    def T(self) -> int:
        return self.volume.shape[0]

    @property
    def E(self) -> int:
        return self.volume.shape[1]

    def channel(self, name: str) -> np.ndarray:
        if name == "volume":
            return self.volume
        if name == "traveltime":
            if self.traveltime is None:
                raise KeyError("trace has no travel-time channel")
            return self.traveltime
        raise KeyError(f"unknown channel {name!r}")

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        if self.edges != other.edges or not np.array_equal(self.volume, other.volume):
            return False
        if (self.traveltime is None) != (other.traveltime is None):
            return False
        if self.traveltime is not None and not np.array_equal(self.traveltime, other.traveltime):
            return False
        return tuple(self.incidents) == tuple(other.incidents)


def _upstream_levels(g: RoadGraph, k: int, hops: int) -> list[list[int]]:
    """Edges feeding edge ``k``, grouped by hop distance 1..hops."""
    tails, heads = g.tails, g.heads
    levels, seen, frontier = [], {k}, [k]
    for _ in range(hops):
        nxt = []
        for f in frontier:
            for j in np.flatnonzero(heads == tails[f]):
                j = int(j)
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
        if not nxt:
            break
        levels.append(sorted(nxt))
        frontier = nxt
    return levels


def bpr(volume, free_flow_s, capacity, alpha=0.15, beta=4.0):
    return free_flow_s * (1.0 + alpha * (volume / capacity) ** beta)


def generate_trace(
    g: RoadGraph,
    params: EdgeParams,
    profile: DiurnalProfile | None = None,
    incidents: Sequence[IncidentSpec] = (),
    seed: int = 0,
    T: int = MINUTES_PER_DAY,
) -> Trace:
    profile = profile or DiurnalProfile()
    E = g.E
    if params.base_volume.shape != (E,):
        raise ValueError(f"edge params cover {params.base_volume.shape[0]} edges, graph has {E}")
    for inc in incidents:
        if inc.edge not in g.edge_index:
            raise UnknownEdge(f"incident edge {edge_name(inc.edge)} not in graph")
        if not 0 <= inc.start_min < T:
            raise IncidentOutOfRange(f"incident start {inc.start_min} outside [0, {T})")

    t = np.arange(T)
    base = params.base_volume
    factor = profile.network_total(t) / base.sum()
    rng = np.random.default_rng(seed)
    sigma = profile.noise_sigma
    noise = np.exp(sigma * rng.standard_normal((T, E)) - 0.5 * sigma**2)
    volume = base[None, :] * factor[:, None] * noise
    demand = volume.copy()

    closures = []  # (edge index, window slice, severity)
    for inc in incidents:
        k = g.index_of(inc.edge)
        w = slice(inc.start_min, min(inc.end_min, T))
        s = float(inc.severity)
        volume[w, k] *= 1.0 - s
        ramp = np.minimum(1.0, (t[w] - inc.start_min + 1) / profile.spillback_ramp_min)
        for depth, level in enumerate(_upstream_levels(g, k, profile.spillback_hops), start=1):
            for f in level:
                extra = s * base[f] * profile.spillback_factor ** depth
                volume[w, f] += extra * ramp
        closures.append((k, w, s))

    tt = bpr(volume, params.free_flow_s[None, :], params.capacity[None, :],
             profile.bpr_alpha, profile.bpr_beta)
    for k, w, s in closures:
        if s >= 1.0:
            tt[w, k] = profile.closure_penalty_s
        else:
            cap = params.capacity[k] * (1.0 - s)
            slowed = bpr(demand[w, k], params.free_flow_s[k], cap,
                         profile.bpr_alpha, profile.bpr_beta)
            tt[w, k] = np.maximum(tt[w, k], np.minimum(slowed, profile.closure_penalty_s))

    return Trace(g.edge_names, volume, tt, seed, tuple(incidents))


# -- CSV I/O ---------------------------------------------------------------


def write_channel_csv(path: str | Path, edges: Sequence[str], values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *edges])
        for t, row in enumerate(values):
            w.writerow([t, *map(repr, row.tolist())])


def read_channel_csv(path: str | Path, edges: Sequence[str] | None = None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise MalformedRow(f"{path}: header must start with 't'")
        names = header[1:]
        if edges is not None and len(names) != len(edges):
            raise LengthMismatch(f"{path}: {len(names)} edge columns, expected {len(edges)}")
        if edges is not None and list(names) != list(edges):
            raise MalformedRow(f"{path}: edge columns {names} do not match {list(edges)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise LengthMismatch(f"{path}:{lineno}: {len(row)} fields, expected {len(header)}")
            try:
                t = int(row[0])
                vals = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
            if t != len(rows):
                raise MalformedRow(f"{path}:{lineno}: expected t={len(rows)}, got {t}")
            rows.append(vals)
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return names, values


def write_incidents_csv(path: str | Path, incidents: Sequence[IncidentSpec]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "start_min", "duration_min", "severity"])
        for inc in incidents:
            w.writerow([edge_name(inc.edge), inc.start_min, inc.duration_min, repr(float(inc.severity))])


def read_incidents_csv(path: str | Path) -> list[IncidentSpec]:
    with open(path, newline="") as fh:
        out = []
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                out.append(IncidentSpec(row["edge"], int(row["start_min"]),
                                        int(row["duration_min"]), float(row["severity"])))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, InvalidIncident):
                    raise
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
    return out


def write_trace(trace: Trace, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_channel_csv(d / "volume.csv", trace.edges, trace.volume)
    if trace.traveltime is not None:
        write_channel_csv(d / "traveltime.csv", trace.edges, trace.traveltime)
    if trace.incidents:
        write_incidents_csv(d / "incidents.csv", trace.incidents)
    return d


def replay_trace(path: str | Path, graph: RoadGraph | None = None) -> Trace:
    """Load a trace directory (``volume.csv`` plus optional ``traveltime.csv``).

    ``path`` may also point straight at a single channel CSV, which is read as
    the volume channel.
    """
    p = Path(path)
    expected = graph.edge_names if graph is not None else None
    if p.is_file():
        names, vol = read_channel_csv(p, expected)
        return Trace(names, vol)
    names, vol = read_channel_csv(p / "volume.csv", expected)
    tt = None
    if (p / "traveltime.csv").exists():
        tt_names, tt = read_channel_csv(p / "traveltime.csv", names)
        if tt.shape != vol.shape:
            raise LengthMismatch(f"{p}: channels have {tt.shape[0]} and {vol.shape[0]} rows")
    incidents = ()
    if (p / "incidents.csv").exists():
        incidents = tuple(read_incidents_csv(p / "incidents.csv"))
    return Trace(names, vol, tt, None, incidents)


def hourly_totals(volume: np.ndarray) -> np.ndarray:
    """Mean network total per hour (veh/h) from per-minute volumes."""
    T = volume.shape[0] - volume.shape[0] % 60
    return volume[:T].sum(axis=1).reshape(-1, 60).mean(axis=1)


__all__ = [
    "DiurnalProfile", "EdgeParams", "IncidentSpec", "Trace", "bpr", "generate_trace",
    "read_edge_params", "replay_trace", "write_trace", "read_incidents_csv",
    "write_incidents_csv", "hourly_totals", "read_channel_csv", "write_channel_csv",
]

