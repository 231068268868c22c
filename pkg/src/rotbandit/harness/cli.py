"""Command line entry point: ``rotbandit simulate|ingest|bound|verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..environments import SchemaError
from ..evaluation import BOUNDS, InputError, SizeError, theoretical_bound
from .config import ConfigError, load_config
from .ingest import DataError, ParseError, ingest_click_log, write_table_csv
from .output import emit_aggregate_csv, emit_runs_csv
from .runner import aggregate, run_experiment
from .svg import emit_svg

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _simulate(args) -> int:
    cfg = load_config(args.config)
    res = run_experiment(cfg, args.threads)
    agg = aggregate(res, cfg.quantiles)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.write_runs:
        emit_runs_csv(res.runs, out / "runs.csv")
    emit_aggregate_csv(agg, out / "aggregate.csv")
    emit_svg(agg, out / "regret.svg", log_axes=args.log_axes, title=cfg.name)
    for p in agg.policies:
        print(f"{p.policy}: final mean regret {p.mean[-1]:.6g} "
              f"[{p.q_lo[-1]:.6g}, {p.q_hi[-1]:.6g}] over {p.replications} runs, {p.wall_clock:.2f}s")
    print(f"wrote {out}")
    return EXIT_OK


def _ingest(args) -> int:
    span = tuple(args.span) if args.span else None
    rows = ingest_click_log(args.input, args.bucket_min, args.window, span)
    write_table_csv(rows, args.out)
    print(f"{len({r[0] for r in rows})} buckets x {len({r[1] for r in rows})} articles -> {args.out}")
    return EXIT_OK


def _bound(args) -> int:
    raw = args.params
    if raw.startswith("@"):
        raw = Path(raw[1:]).read_text(encoding="utf-8")
    try:
        params = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--params is not valid JSON ({e})") from None
    if not isinstance(params, dict):
        raise ConfigError("--params must be a JSON object")
    print(repr(theoretical_bound(args.setting, params)))
    return EXIT_OK


def _verify(args) -> int:
    from .suites import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        raise ConfigError(f"unknown suite {args.suite!r}; choose from all, {', '.join(SUITES)}")
    ok = True
    for n in names:
        res = run_suite(n)
        print(res.line(), flush=True)
        ok &= res.passed
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotbandit", description="Rotting bandit simulations and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment config and write CSV/SVG outputs")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output directory (defaults to the config's output_dir)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (overrides BANDIT_THREADS)")
    p.add_argument("--log-axes", action="store_true", help="log-log regret plot")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("ingest", help="turn a click log into a dataset table")
    p.add_argument("--input", required=True)
    p.add_argument("--bucket-min", type=float, default=5)
    p.add_argument("--window", type=int, default=30000)
    p.add_argument("--span", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_ingest)

    p = sub.add_parser("bound", help="evaluate a regret bound formula")
    p.add_argument("--setting", required=True, choices=sorted(BOUNDS))
    p.add_argument("--params", required=True, help="JSON object, or @file")
    p.set_defaults(func=_bound)

    p = sub.add_parser("verify", help="run acceptance suites")
    p.add_argument("--suite", default="all")
    p.set_defaults(func=_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, ParseError, DataError, SchemaError, SizeError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
