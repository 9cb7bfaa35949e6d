"""Evaluation scores computed from run logs."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import Misaligned
from .simulator import IncidentSpec


@dataclass(frozen=True)
class HourlyScore:
    hour: int
    obs_mae: float
    obs_mape: float
    fusion_mae: float
    fusion_mape: float
    skipped_steps: int = 0

    @property
    def captured_share(self) -> float:
        return 1.0 - self.obs_mape


@dataclass(frozen=True)
class EdgeScore:
    edge: str
    forecasting_mae: float
    reconstruction_mae: float


def _aligned(*arrays):
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 2:
        raise Misaligned(f"logs must share one (T, E) shape, got {sorted(shapes)}")
    return arrays


def hourly_scores(truth, observations, fusions, minutes_per_hour: int = 60) -> list[HourlyScore]:
    """Per-hour means of the L1 gap (and gap over per-step total) to the truth.

    Steps whose true total is zero are left out of the MAPE averages and counted
    in ``skipped_steps``.
    """
    s, obs, fus = _aligned(truth, observations, fusions)
    T = s.shape[0]
    if T % minutes_per_hour:
        raise Misaligned(f"T={T} is not a multiple of {minutes_per_hour}")
    obs_err = np.abs(obs - s).sum(axis=1)
    fus_err = np.abs(fus - s).sum(axis=1)
    total = np.abs(s).sum(axis=1)
    out = []
    for k in range(T // minutes_per_hour):
        w = slice(k * minutes_per_hour, (k + 1) * minutes_per_hour)
        ok = total[w] > 0
        n_ok = int(ok.sum())
        if n_ok:
            o_mape = float((obs_err[w][ok] / total[w][ok]).sum() / n_ok)
            f_mape = float((fus_err[w][ok] / total[w][ok]).sum() / n_ok)
        else:
            o_mape = f_mape = float("nan")
        out.append(HourlyScore(k, float(obs_err[w].sum() / minutes_per_hour), o_mape,
                               float(fus_err[w].sum() / minutes_per_hour), f_mape,
                               minutes_per_hour - n_ok))
    return out


def edge_scores(truth, predictions, fusions, edges: Sequence[str] | None = None) -> list[EdgeScore]:
    s, pred, fus = _aligned(truth, predictions, fusions)
    T, E = s.shape
    edges = list(edges) if edges is not None else [str(k) for k in range(E)]
    if len(edges) != E:
        raise Misaligned(f"{len(edges)} edge names for {E} columns")
    f_mae = np.abs(pred - s).sum(axis=0) / T
    r_mae = np.abs(fus - s).sum(axis=0) / T
    return [EdgeScore(n, float(f), float(r)) for n, f, r in zip(edges, f_mae, r_mae)]


def detection_delay(masks, incident: IncidentSpec, edge_index: int) -> int | None:
    """Minutes from incident start until the closed edge is first covered."""
    m = np.asarray(masks).astype(bool)
    end = min(incident.end_min, m.shape[0])
    hits = np.flatnonzero(m[incident.start_min:end, edge_index])
    return int(hits[0]) if hits.size else None


def hour_label(hour: int, clock_offset_min: int = 60) -> str:
    h = (hour + clock_offset_min // 60) % 24
    return f"{h:02d}:00"


def write_hourly_csv(path, rows: dict[int, list[HourlyScore]], clock_offset_min: int = 60) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "hour", "label", "obs_mae", "obs_mape", "fusion_mae",
                    "fusion_mape", "skipped_steps"])
        for seed, scores in rows.items():
            for h in scores:
                w.writerow([seed, h.hour, hour_label(h.hour, clock_offset_min), repr(h.obs_mae),
                            repr(h.obs_mape), repr(h.fusion_mae), repr(h.fusion_mape),
                            h.skipped_steps])


def write_edge_csv(path, rows: dict[int, list[EdgeScore]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "edge", "forecasting_mae", "reconstruction_mae"])
        for seed, scores in rows.items():
            for e in scores:
                w.writerow([seed, e.edge, repr(e.forecasting_mae), repr(e.reconstruction_mae)])


def _mean_std(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(np.nanmean(v)), "std": float(np.nanstd(v))}


def summarize(hourly: dict[int, list[HourlyScore]], edges: dict[int, list[EdgeScore]],
              clock_offset_min: int = 60, extra: dict | None = None) -> dict:
    """Mean and standard deviation across runs, per hour and per edge."""
    seeds = sorted(hourly)
    out = {"runs": len(seeds), "seeds": seeds, "hourly": [], "edges": []}
    if seeds:
        for k in range(len(hourly[seeds[0]])):
            row = {"hour": k, "label": hour_label(k, clock_offset_min)}
            for f in ("obs_mae", "obs_mape", "fusion_mae", "fusion_mape"):
                row[f] = _mean_std([getattr(hourly[s][k], f) for s in seeds])
            row["captured_share"] = _mean_std([hourly[s][k].captured_share for s in seeds])
            row["skipped_steps"] = int(sum(hourly[s][k].skipped_steps for s in seeds))
            out["hourly"].append(row)
    eseeds = sorted(edges)
    if eseeds:
        for j, e in enumerate(edges[eseeds[0]]):
            out["edges"].append({
                "edge": e.edge,
                "forecasting_mae": _mean_std([edges[s][j].forecasting_mae for s in eseeds]),
                "reconstruction_mae": _mean_std([edges[s][j].reconstruction_mae for s in eseeds]),
            })
    if extra:
        out.update(extra)
    return out


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=1))


def scores_as_dicts(scores) -> list[dict]:
    return [asdict(s) for s in scores]
