"""Scenario configs, the warm-up/control/prediction loop, run logs and run comparison.

Config schema (YAML; JSON works too). Paths are relative to the config file;
``bundled`` selects the packaged network data.

.. code-block:: yaml

    scenario: network            # network | route | link
    graph: bundled               # edge-list CSV (tail,head)
    cameras: bundled             # placement CSV (node), or "default"
    edge_params: bundled         # CSV edge,base_volume,free_flow_s,capacity
    trace:
      generate: {}               # DiurnalProfile overrides, e.g. {noise_sigma: 0.1}
      # replay: path/to/trace_dir
    controller: {gamma: 1.0, epsilon: 0.0, mode: picol}
    predictor: {kind: graph_diffusion, ridge: 0.001, hops: 2, train_days: 20, train_seed: 100000}
    T: 1440
    warmup: 60
    aggregation: 5
    K: 12
    seeds: [0, 19]
    route: {origin: 12, destination: 8, start_min: 290}   # route scenario only
    link: {floor: 1.0}                                    # link scenario only
    incidents:
      - {edge: 3-1, start_min: 300, duration_min: 120, severity: 1.0}
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from scipy.stats import binomtest

from . import metrics
from .camera import CameraActionSet, action_sets, fuse, observe
from .controller import ControllerConfig, PicolController, picol_step
from .errors import ConfigInvalid, IncompatibleRuns, PicolError, PredictorUnavailable
from .network import (RoadGraph, bundled_path, default_placement, read_graph_csv,
                      read_placement_csv)
from .objectives import link_task, network_task, route_task
from .predictor import (GraphDiffusionPredictor, OraclePredictor, PersistencePredictor,
                        Predictor, SeasonalPredictor, aggregate, fit_graph_diffusion)
from .routing import od_subgraph_mask, read_replan_csv, replan_loop, replan_rows, write_replan_csv
from .simulator import (DiurnalProfile, IncidentSpec, Trace, generate_trace, read_channel_csv,
                        read_edge_params, replay_trace, write_channel_csv)

SCENARIOS = ("network", "route", "link")
PREDICTORS = ("graph_diffusion", "persistence", "seasonal", "oracle")
_TOP_KEYS = {"scenario", "graph", "cameras", "edge_params", "trace", "controller", "predictor",
             "T", "warmup", "aggregation", "K", "seeds", "route", "link", "incidents"}
_DEFAULTS = {
    "graph": "bundled",
    "cameras": "bundled",
    "edge_params": "bundled",
    "trace": {"generate": {}},
    "controller": {"gamma": 1.0, "epsilon": 0.0, "mode": "picol"},
    "predictor": {"kind": "graph_diffusion"},
    "T": 1440,
    "warmup": 60,
    "aggregation": 5,
    "K": 12,
    "seeds": [0, 0],
    "incidents": [],
}
_PREDICTOR_DEFAULTS = {"ridge": 1e-3, "hops": 2, "train_days": 20, "train_seed": 100000,
                       "period": 12}
_BUNDLED = {"graph": "network.csv", "cameras": "cameras.csv", "edge_params": "edge_params.csv"}


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """A validated scenario; ``data`` holds the canonical dict with resolved paths."""

    data: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["data"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def seed_range(self) -> list[int]:
        a, b = self.data["seeds"]
        return list(range(a, b + 1))

    def config_hash(self) -> str:
        body = {k: v for k, v in self.data.items() if k != "seeds"}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def replace(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        for k, v in changes.items():
            if isinstance(v, dict) and isinstance(d.get(k), dict):
                d[k] = {**d[k], **v}
            else:
                d[k] = v
        return ScenarioConfig.from_dict(d)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path | None = None) -> "ScenarioConfig":
        return cls(_validate(raw, Path(base_dir) if base_dir else Path.cwd()))


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigInvalid([f"{p}: not valid YAML: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigInvalid([f"{p}: top level must be a mapping"])
    return ScenarioConfig.from_dict(raw, p.parent)


def bundled_config(name: str) -> ScenarioConfig:
    """One of the packaged scenario configs, e.g. ``network`` or ``link_picol0``."""
    return load_config(bundled_path(f"scenarios/{name}.yaml"))


def _resolve(value, key, base: Path, problems: list[str]) -> str:
    if value == "bundled" or (key == "cameras" and value == "default"):
        return value
    if not isinstance(value, str):
        problems.append(f"{key}: expected a path string, got {value!r}")
        return str(value)
    p = (base / value).resolve()
    if not p.exists():
        problems.append(f"{key}: {p} does not exist")
    return str(p)


def _int(d, key, problems, minimum=None, where=""):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        problems.append(f"{where}{key}: expected an integer, got {v!r}")
        return None
    if minimum is not None and v < minimum:
        problems.append(f"{where}{key}: must be >= {minimum}, got {v}")
    return v


def _validate(raw: dict, base: Path) -> dict:
    problems: list[str] = []
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        problems.append(f"unknown keys: {unknown}")
    d = copy.deepcopy(_DEFAULTS)
    d.update(copy.deepcopy(raw))

    if d.get("scenario") not in SCENARIOS:
        problems.append(f"scenario: must be one of {SCENARIOS}, got {d.get('scenario')!r}")
    for key in ("graph", "cameras", "edge_params"):
        d[key] = _resolve(d[key], key, base, problems)

    T = _int(d, "T", problems, 1)
    warm = _int(d, "warmup", problems, 0)
    agg = _int(d, "aggregation", problems, 1)
    K = _int(d, "K", problems, 1)
    if None not in (warm, agg, K) and warm < K * agg:
        problems.append(f"warmup: must be >= K*aggregation = {K * agg}, got {warm}")
    if None not in (T, warm) and T < warm:
        problems.append(f"T: must be >= warmup ({warm}), got {T}")

    seeds = d["seeds"]
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds, seeds]
    if (not isinstance(seeds, (list, tuple)) or len(seeds) != 2
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)
            or seeds[0] > seeds[1] or seeds[0] < 0):
        problems.append(f"seeds: expected [first, last] with 0 <= first <= last, got {d['seeds']!r}")
    else:
        d["seeds"] = [int(seeds[0]), int(seeds[1])]

    tr = d["trace"]
    if not isinstance(tr, dict) or len(set(tr) & {"generate", "replay"}) != 1 or len(tr) != 1:
        problems.append("trace: expected exactly one of 'generate' or 'replay'")
    elif "replay" in tr:
        tr["replay"] = _resolve(tr["replay"], "trace.replay", base, problems)
    else:
        gen = tr["generate"] or {}
        tr["generate"] = gen
        try:
            DiurnalProfile(**{k: tuple(v) if isinstance(v, list) else v for k, v in gen.items()})
        except (TypeError, ValueError) as exc:
            problems.append(f"trace.generate: {exc}")

    ctl = {**_DEFAULTS["controller"], **(d["controller"] or {})}
    d["controller"] = ctl
    if set(ctl) - {"gamma", "epsilon", "mode"}:
        problems.append(f"controller: unknown keys {sorted(set(ctl) - {'gamma', 'epsilon', 'mode'})}")
    else:
        try:
            ControllerConfig(float(ctl["gamma"]), float(ctl["epsilon"]), ctl["mode"])
        except (TypeError, ValueError) as exc:
            problems.append(f"controller: {exc}")

    pred = {**_PREDICTOR_DEFAULTS, **(d["predictor"] or {})}
    d["predictor"] = pred
    if pred.get("kind") not in PREDICTORS:
        problems.append(f"predictor.kind: must be one of {PREDICTORS}, got {pred.get('kind')!r}")
    if "weights" in pred:
        pred["weights"] = _resolve(pred["weights"], "predictor.weights", base, problems)
    if not isinstance(pred["ridge"], (int, float)) or pred["ridge"] < 0:
        problems.append(f"predictor.ridge: must be a nonnegative number, got {pred['ridge']!r}")
    for key, lo in (("hops", 0), ("train_days", 1), ("train_seed", 0), ("period", 1)):
        _int(pred, key, problems, lo, "predictor.")

    graph = None
    if not problems:
        try:
            graph = _graph(d["graph"])
        except (PicolError, OSError) as exc:
            problems.append(f"graph: {exc}")

    incidents = []
    for i, inc in enumerate(d["incidents"] or []):
        try:
            spec = IncidentSpec(inc["edge"], int(inc["start_min"]), int(inc["duration_min"]),
                                float(inc.get("severity", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"incidents[{i}]: {exc}")
            continue
        if graph is not None and spec.edge not in graph.edge_index:
            problems.append(f"incidents[{i}].edge: {inc['edge']} is not an edge of the graph")
        if T is not None and spec.start_min >= T:
            problems.append(f"incidents[{i}].start_min: {spec.start_min} is outside [0, {T})")
        incidents.append({"edge": f"{spec.edge[0]}-{spec.edge[1]}", "start_min": spec.start_min,
                          "duration_min": spec.duration_min, "severity": spec.severity})
    d["incidents"] = incidents

    if d.get("scenario") == "route":
        r = d.get("route")
        if not isinstance(r, dict):
            problems.append("route: required for the route scenario")
        else:
            for key in ("origin", "destination", "start_min"):
                _int(r, key, problems, 0, "route.")
            if graph is not None:
                for key in ("origin", "destination"):
                    if r.get(key) not in graph.nodes:
                        problems.append(f"route.{key}: node {r.get(key)!r} not in graph")
            if T is not None and isinstance(r.get("start_min"), int) and r["start_min"] >= T:
                problems.append(f"route.start_min: must be < T ({T})")
    elif "route" in d and d["route"] is not None:
        problems.append("route: only valid for the route scenario")
    if d.get("scenario") == "link":
        lk = {"floor": 1.0, **(d.get("link") or {})}
        if not isinstance(lk["floor"], (int, float)) or lk["floor"] <= 0:
            problems.append(f"link.floor: must be positive, got {lk['floor']!r}")
        d["link"] = lk
    elif "link" in d and d["link"] is not None:
        problems.append("link: only valid for the link scenario")
    d.setdefault("route", None)
    d.setdefault("link", None)

    if problems:
        raise ConfigInvalid(problems)
    return d


# -- environment -----------------------------------------------------------


def _graph(path: str) -> RoadGraph:
    return read_graph_csv(bundled_path(_BUNDLED["graph"]) if path == "bundled" else path)


@dataclass(frozen=True, eq=False)
class Environment:
    graph: RoadGraph
    sets: list[CameraActionSet]
    params: Any
    profile: DiurnalProfile | None


_ENV_CACHE: dict[str, Environment] = {}
_PREDICTOR_CACHE: dict[str, Predictor] = {}


def environment(cfg: ScenarioConfig) -> Environment:
    key = json.dumps([cfg.graph, cfg.cameras, cfg.edge_params, cfg.trace], sort_keys=True)
    if key in _ENV_CACHE:
        return _ENV_CACHE[key]
    g = _graph(cfg.graph)
    if cfg.cameras == "default":
        placement = default_placement(g)
    else:
        path = bundled_path(_BUNDLED["cameras"]) if cfg.cameras == "bundled" else cfg.cameras
        placement = read_placement_csv(path)
    placement.validate(g)
    sets = action_sets(g, placement.camera_nodes)
    ep = bundled_path(_BUNDLED["edge_params"]) if cfg.edge_params == "bundled" else cfg.edge_params
    params = read_edge_params(ep, g)
    profile = None
    if "generate" in cfg.trace:
        profile = DiurnalProfile(**{k: tuple(v) if isinstance(v, list) else v
                                    for k, v in cfg.trace["generate"].items()})
    env = Environment(g, sets, params, profile)
    _ENV_CACHE[key] = env
    return env


def incidents_of(cfg: ScenarioConfig) -> tuple[IncidentSpec, ...]:
    return tuple(IncidentSpec(i["edge"], i["start_min"], i["duration_min"], i["severity"])
                 for i in cfg.incidents)


def scenario_trace(cfg: ScenarioConfig, seed: int) -> Trace:
    env = environment(cfg)
    if "replay" in cfg.trace:
        trace = replay_trace(cfg.trace["replay"], env.graph)
        if trace.T < cfg.T:
            raise ConfigInvalid([f"trace.replay: {trace.T} rows, T={cfg.T} requested"])
        return Trace(trace.edges, trace.volume[: cfg.T],
                     None if trace.traveltime is None else trace.traveltime[: cfg.T],
                     trace.seed, trace.incidents)
    return generate_trace(env.graph, env.params, env.profile, incidents_of(cfg),
                          seed=np.random.SeedSequence([seed, 0]), T=cfg.T)


def scenario_task(cfg: ScenarioConfig):
    env = environment(cfg)
    if cfg.scenario == "network":
        return network_task()
    if cfg.scenario == "link":
        return link_task(cfg.link["floor"])
    r = cfg.route
    od = od_subgraph_mask(env.graph, r["origin"], r["destination"])
    covered = np.zeros(env.graph.E, dtype=bool)
    for s in env.sets:
        covered |= s.actions.any(axis=0)
    missing = [env.graph.edge_names[k] for k in np.flatnonzero(od & ~covered)]
    if missing:
        warnings.warn(f"OD edges {missing} cannot be covered by any camera", stacklevel=2)
    return route_task(od)


def scenario_predictor(cfg: ScenarioConfig, truth: np.ndarray, channel: str) -> Predictor:
    p = cfg.predictor
    kw = {"window": cfg.K, "aggregation": cfg.aggregation}
    if p["kind"] == "persistence":
        return PersistencePredictor(**kw)
    if p["kind"] == "seasonal":
        return SeasonalPredictor(min(p["period"], cfg.K), **kw)
    if p["kind"] == "oracle":
        return OraclePredictor(truth, **kw)
    if "weights" in p:
        return GraphDiffusionPredictor.load(p["weights"])
    env = environment(cfg)
    key = json.dumps([cfg.graph, cfg.edge_params, cfg.trace, p, cfg.K, cfg.aggregation, channel],
                     sort_keys=True)
    if key not in _PREDICTOR_CACHE:
        if env.profile is None:
            raise ConfigInvalid(["predictor: graph_diffusion with a replayed trace needs "
                                 "predictor.weights"])
        days = [generate_trace(env.graph, env.params, env.profile, (),
                               seed=p["train_seed"] + k).channel(channel)
                for k in range(p["train_days"])]
        _PREDICTOR_CACHE[key] = fit_graph_diffusion(
            env.graph, days, ridge=p["ridge"], hops=p["hops"], window=cfg.K,
            aggregation=cfg.aggregation, clock_offset_min=env.profile.clock_offset_min)
    return _PREDICTOR_CACHE[key]


# -- run logs --------------------------------------------------------------

_ARRAYS = ("truth", "masks", "observations", "fusions", "predictions")


@dataclass(eq=False)
class RunLog:
    """Everything one (config, seed) run produced, one row per minute."""

    seed: int
    config_hash: str
    scenario: str
    channel: str
    edges: list[str]
    cameras: list[int]
    truth: np.ndarray
    masks: np.ndarray
    observations: np.ndarray
    fusions: np.ndarray
    predictions: np.ndarray
    actions: np.ndarray  # (T, cameras) index into each camera's action set
    fallback: np.ndarray  # (T,) prediction came from the persistence fallback
    predictor_calls: np.ndarray  # minutes at which the predictor was invoked
    incidents: list[dict] = field(default_factory=list)
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    routes: list[dict] = field(default_factory=list)
    route_summary: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.truth.shape[0]

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.T)

    def _meta(self) -> dict:
        return {"seed": self.seed, "config_hash": self.config_hash, "scenario": self.scenario,
                "channel": self.channel, "edges": self.edges, "cameras": self.cameras,
                "incidents": self.incidents, "extras": sorted(self.extras),
                "predictor_calls": [int(x) for x in self.predictor_calls],
                "route_summary": self.route_summary}

    def __eq__(self, other):
        if not isinstance(other, RunLog):
            return NotImplemented
        if self._meta() != other._meta() or self.routes != other.routes:
            return False
        pairs = [(getattr(self, n), getattr(other, n)) for n in (*_ARRAYS, "actions", "fallback")]
        pairs += [(self.extras[k], other.extras[k]) for k in self.extras]
        return all(a.shape == b.shape and a.dtype == b.dtype and np.array_equal(a, b)
                   for a, b in pairs)

    def write(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in _ARRAYS:
            write_channel_csv(d / f"{name}.csv", self.edges, getattr(self, name).astype(float))
        for name, arr in self.extras.items():
            write_channel_csv(d / f"extra_{name}.csv", self.edges, arr)
        with open(d / "actions.csv", "w") as fh:
            fh.write(",".join(["t", *map(str, self.cameras), "fallback"]) + "\n")
            for t, (row, fb) in enumerate(zip(self.actions, self.fallback)):
                fh.write(",".join([str(t), *map(str, row.tolist()), str(int(fb))]) + "\n")
        if self.routes or self.scenario == "route":
            write_replan_csv(d / "routes.csv", self.routes)
        (d / "meta.json").write_text(json.dumps(self._meta(), indent=1))
        return d

    @classmethod
    def read(cls, directory: str | Path) -> "RunLog":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        arrays = {n: read_channel_csv(d / f"{n}.csv", meta["edges"])[1] for n in _ARRAYS}
        arrays["masks"] = arrays["masks"].astype(bool)
        extras = {n: read_channel_csv(d / f"extra_{n}.csv", meta["edges"])[1]
                  for n in meta["extras"]}
        raw = np.loadtxt(d / "actions.csv", delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        routes = read_replan_csv(d / "routes.csv") if (d / "routes.csv").exists() else []
        return cls(meta["seed"], meta["config_hash"], meta["scenario"], meta["channel"],
                   meta["edges"], meta["cameras"], actions=raw[:, 1:-1], fallback=raw[:, -1] == 1,
                   predictor_calls=np.array(meta["predictor_calls"], dtype=np.int64),
                   incidents=meta["incidents"], extras=extras, routes=routes,
                   route_summary=meta["route_summary"], **arrays)


# -- the loop --------------------------------------------------------------


def _prediction_at(predictor: Predictor, series: np.ndarray, t: int, cfg: ScenarioConfig):
    """Batch element in effect for the interval starting at ``t``; falls back to persistence."""
    window = aggregate(series[t - cfg.K * cfg.aggregation: t], cfg.aggregation)
    try:
        return predictor.predict(window, issued_at=t).states[0], False
    except PredictorUnavailable:
        return np.maximum(window[-1], 0.0), True


def run_scenario(cfg: ScenarioConfig, seed: int) -> RunLog:
    """One run: uniform warm-up, then one controller step per minute.

    The predictor is invoked at every ``aggregation``-minute boundary from the end
    of warm-up on, with the aggregated fusion states of the past ``K`` intervals;
    the first element of its batch is the prediction in effect for that interval.
    During warm-up each unobserved edge carries its last observed value.
    """
    env = environment(cfg)
    task = scenario_task(cfg)
    trace = scenario_trace(cfg, seed)
    truth = np.ascontiguousarray(trace.channel(task.channel))
    predictor = scenario_predictor(cfg, truth, task.channel)
    exact = getattr(predictor, "exact", False)
    c = cfg.controller
    controller = PicolController(env.sets, ControllerConfig(float(c["gamma"]), float(c["epsilon"]),
                                                            c["mode"]),
                                 np.random.SeedSequence([seed, 1]))
    T, E = truth.shape
    masks = np.zeros((T, E), dtype=bool)
    obs = np.zeros((T, E))
    fus = np.zeros((T, E))
    preds = np.zeros((T, E))
    actions = np.zeros((T, len(env.sets)), dtype=np.int64)
    fallback = np.zeros(T, dtype=bool)
    calls = []
    pred = np.zeros(E)
    flag = False
    for t in range(T):
        if t < cfg.warmup:
            act, mask = controller.sample(uniform=True)
            o = observe(truth[t], mask)
            pred = fus[t - 1] if t else np.zeros(E)
            fusion = fuse(o, pred, mask).values
        else:
            if exact:
                pred = truth[t]
            elif (t - cfg.warmup) % cfg.aggregation == 0:
                pred, flag = _prediction_at(predictor, fus, t, cfg)
                calls.append(t)
            prev = None
            if t:
                prev = truth[t - 1] if c["mode"] == "cew" else fus[t - 1]
            step = picol_step(controller, truth[t], pred, task, prev_state=prev)
            act, mask, o, fusion = step.actions, step.mask, step.observation, step.fusion.values
            fallback[t] = flag
        masks[t], obs[t], fus[t], preds[t], actions[t] = mask, o, fusion, pred, act

    log = RunLog(seed, cfg.config_hash(), cfg.scenario, task.channel, list(env.graph.edge_names),
                 [s.camera for s in env.sets], truth, masks, obs, fus, preds, actions, fallback,
                 np.array(calls, dtype=np.int64), list(cfg.incidents))
    if cfg.scenario == "route":
        _route_extras(cfg, env, log, predictor, exact)
    return log


def prediction_only(cfg: ScenarioConfig, predictor: Predictor, log: RunLog, exact: bool) -> np.ndarray:
    """Closed-loop forecast after warm-up that never sees a camera observation."""
    if exact:
        return log.truth.copy()
    series = log.fusions.copy()
    for t in range(cfg.warmup, log.T, cfg.aggregation):
        pred, _ = _prediction_at(predictor, series, t, cfg)
        series[t: t + cfg.aggregation] = pred
    return series


def _route_extras(cfg, env, log: RunLog, predictor, exact) -> None:
    r = cfg.route
    pred_only = prediction_only(cfg, predictor, log, exact)
    log.extras["pred_only"] = pred_only
    bases = {"truth": log.truth, "fusion": log.fusions, "prediction": pred_only}
    results = {name: replan_loop(env.graph, log.truth, lambda t, s=states: s[t], r["origin"],
                                 r["destination"], r["start_min"], name)
               for name, states in bases.items()}
    log.routes = replan_rows(results)
    log.route_summary = {
        name: {"completed": res.completed,
               "arrival_s": None if res.arrival_s is None else float(res.arrival_s),
               "reason": res.reason,
               "nodes": [p.node for p in res.plans],
               "paths": [p.path.label for p in res.plans]}
        for name, res in results.items()
    }


def route_choice_at(log: RunLog, basis: str, node: int) -> str | None:
    """Planned path (as ``a-b-c``) when the ``basis`` replanner stood at ``node``."""
    summary = log.route_summary.get(basis)
    if not summary:
        return None
    for n, path in zip(summary["nodes"], summary["paths"]):
        if n == node:
            return path
    return None


def _run_one(args):
    cfg_dict, seed = args
    return run_scenario(ScenarioConfig(cfg_dict), seed)


def run_many(cfg: ScenarioConfig, seeds=None, threads: int | None = None) -> dict[int, RunLog]:
    """Runs every seed; ``PICOL_THREADS`` caps the worker processes."""
    seeds = list(cfg.seed_range if seeds is None else seeds)
    if threads is None:
        threads = int(os.environ.get("PICOL_THREADS", "1") or 1)
    threads = max(1, min(threads, len(seeds)))
    if threads == 1:
        return {s: run_scenario(cfg, s) for s in seeds}
    with ProcessPoolExecutor(threads) as pool:
        logs = pool.map(_run_one, [(cfg.data, s) for s in seeds])
        return dict(zip(seeds, logs))


# -- persistence of a whole run directory ----------------------------------


def write_run(out: str | Path, cfg: ScenarioConfig, logs: dict[int, RunLog]) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.json").write_text(json.dumps(cfg.data, indent=1, sort_keys=True))
    for seed, log in logs.items():
        log.write(d / f"seed_{seed:04d}")
    write_metrics(d, logs)
    return d


def read_run(directory: str | Path) -> tuple[ScenarioConfig, dict[int, RunLog]]:
    d = Path(directory)
    cfg = ScenarioConfig(json.loads((d / "config.json").read_text()))
    logs = {}
    for sub in sorted(d.glob("seed_*")):
        log = RunLog.read(sub)
        logs[log.seed] = log
    return cfg, logs


def log_scores(logs: dict[int, RunLog]):
    hourly, edges = {}, {}
    for seed, log in sorted(logs.items()):
        if log.T % 60 == 0:
            hourly[seed] = metrics.hourly_scores(log.truth, log.observations, log.fusions)
        edges[seed] = metrics.edge_scores(log.truth, log.predictions, log.fusions, log.edges)
    return hourly, edges


def write_metrics(directory: str | Path, logs: dict[int, RunLog]) -> dict:
    d = Path(directory)
    hourly, edges = log_scores(logs)
    metrics.write_hourly_csv(d / "hourly_scores.csv", hourly)
    metrics.write_edge_csv(d / "edge_scores.csv", edges)
    extra = {}
    if logs and next(iter(logs.values())).scenario == "route":
        extra["routes"] = {s: log.route_summary for s, log in sorted(logs.items())}
    summary = metrics.summarize(hourly, edges, extra=extra)
    metrics.write_summary(d / "summary.json", summary)
    return summary


# -- comparison ------------------------------------------------------------


@dataclass(frozen=True)
class MetricComparison:
    name: str
    deltas: dict[int, float]  # per seed, A minus B
    a_better: int
    b_better: int
    ties: int
    p_value: float

    @property
    def a_not_worse_share(self) -> float:
        n = len(self.deltas)
        return (self.a_better + self.ties) / n if n else float("nan")


def _compare(name, a: dict[int, float], b: dict[int, float]) -> MetricComparison:
    deltas = {s: float(a[s] - b[s]) for s in sorted(a)}
    lo = sum(v < 0 for v in deltas.values())
    hi = sum(v > 0 for v in deltas.values())
    p = binomtest(lo, lo + hi, 0.5).pvalue if lo + hi else 1.0
    return MetricComparison(name, deltas, lo, hi, len(deltas) - lo - hi, float(p))


def compare_runs(logs_a: dict[int, RunLog], logs_b: dict[int, RunLog],
                 edges: list[str] | None = None) -> dict[str, MetricComparison]:
    """Paired per-seed deltas (A minus B, lower is better) with two-sided sign tests.

    Compares mean hourly ObsMAPE/FusionMAPE (when available) and per-edge
    reconstruction and forecasting MAE.
    """
    seeds = sorted(set(logs_a) & set(logs_b))
    if not seeds:
        raise IncompatibleRuns("no seeds in common")
    for s in seeds:
        a, b = logs_a[s], logs_b[s]
        if a.edges != b.edges:
            raise IncompatibleRuns(f"seed {s}: runs are on different graphs")
        if a.scenario != b.scenario or a.channel != b.channel or a.T != b.T:
            raise IncompatibleRuns(f"seed {s}: runs come from different scenarios")
    la = {s: logs_a[s] for s in seeds}
    lb = {s: logs_b[s] for s in seeds}
    ha, ea = log_scores(la)
    hb, eb = log_scores(lb)
    out = {}
    if ha and hb:
        for f in ("obs_mape", "fusion_mape"):
            out[f] = _compare(f, {s: float(np.nanmean([getattr(h, f) for h in ha[s]])) for s in seeds},
                              {s: float(np.nanmean([getattr(h, f) for h in hb[s]])) for s in seeds})
    names = la[seeds[0]].edges
    wanted = names if edges is None else edges
    for e in wanted:
        j = names.index(e)
        for f in ("reconstruction_mae", "forecasting_mae"):
            out[f"{f}:{e}"] = _compare(f"{f}:{e}", {s: getattr(ea[s][j], f) for s in seeds},
                                      {s: getattr(eb[s][j], f) for s in seeds})
    return out


def comparison_report(comp: dict[str, MetricComparison]) -> dict:
    return {k: {"mean_delta": float(np.mean(list(c.deltas.values()))), "a_better": c.a_better,
                "b_better": c.b_better, "ties": c.ties, "p_value": c.p_value,
                "deltas": {str(s): v for s, v in c.deltas.items()}}
            for k, c in comp.items()}
