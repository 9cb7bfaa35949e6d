"""Command-line entry point: run, replay, metrics and compare."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import PicolError


def parse_seeds(text: str) -> list[int]:
    """``"3"`` or ``"0..19"`` (inclusive)."""
    a, sep, b = text.partition("..")
    try:
        lo = int(a)
        hi = int(b) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must look like 'a..b', got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid seed range {text!r}")
    return list(range(lo, hi + 1))


def _print_hourly(summary: dict) -> None:
    if not summary["hourly"]:
        return
    print(f"{'hour':>5}  {'captured':>9}  {'obs_mape':>9}  {'fusion_mape':>11}")
    for row in summary["hourly"]:
        cap = row["captured_share"]
        print(f"{row['label']:>5}  {cap['mean']:9.3f}  {row['obs_mape']['mean']:9.3f}  "
              f"{row['fusion_mape']['mean']:11.3f}")


BUNDLED = ("network", "route", "link", "link_picol0")


def _config(name: str) -> harness.ScenarioConfig:
    """A config file path, or the name of a bundled scenario."""
    if name in BUNDLED and not Path(name).exists():
        return harness.bundled_config(name)
    return harness.load_config(name)


def cmd_run(args) -> int:
    cfg = _config(args.config)
    seeds = args.seeds or cfg.seed_range
    cfg = cfg.replace(seeds=[seeds[0], seeds[-1]])
    logs = harness.run_many(cfg, seeds)
    out = harness.write_run(args.out, cfg, logs)
    summary = json.loads((out / "summary.json").read_text())
    print(f"wrote {len(logs)} run(s) to {out}")
    _print_hourly(summary)
    return 0


def cmd_replay(args) -> int:
    cfg, logs = harness.read_run(args.log)
    bad = 0
    for seed, stored in sorted(logs.items()):
        fresh = harness.run_scenario(cfg, seed)
        same = fresh == stored and stored.config_hash == cfg.config_hash()
        bad += not same
        print(f"seed {seed}: {'identical' if same else 'MISMATCH'}")
    return 1 if bad else 0


def cmd_metrics(args) -> int:
    _, logs = harness.read_run(args.log)
    summary = harness.write_metrics(args.log, logs)
    _print_hourly(summary)
    return 0


def cmd_compare(args) -> int:
    _, a = harness.read_run(args.a)
    _, b = harness.read_run(args.b)
    report = harness.comparison_report(harness.compare_runs(a, b))
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    for name, r in report.items():
        print(f"{name:32s} mean_delta={r['mean_delta']:+.4g}  A<B {r['a_better']:3d}  "
              f"A>B {r['b_better']:3d}  p={r['p_value']:.3g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="picol", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario for a range of seeds")
    r.add_argument("--config", required=True,
                   help=f"YAML/JSON config path or a bundled scenario: {', '.join(BUNDLED)}")
    r.add_argument("--seeds", type=parse_seeds, help="a..b (inclusive); default from config")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)
    rp = sub.add_parser("replay", help="re-run a stored run and check it is bit-identical")
    rp.add_argument("--log", required=True)
    rp.set_defaults(func=cmd_replay)
    m = sub.add_parser("metrics", help="recompute scores from stored run logs")
    m.add_argument("--log", required=True)
    m.set_defaults(func=cmd_metrics)
    c = sub.add_parser("compare", help="paired per-seed comparison of two run directories")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--out", help="also write the report as JSON")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PicolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
