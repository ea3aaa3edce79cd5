"""Command-line entry point: ``run``, ``sweep``, ``verify`` and ``config export``.

Exit codes: 0 success, 1 verification or sweep failure, 2 configuration
error, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .. import __version__
from ..errors import ConfigError
from .config import PRESETS, dump_config, load_config, preset

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SIM = 0, 1, 2, 3

log = logging.getLogger("richards_sdre")


def _load(args):
    if args.config:
        return load_config(args.config)
    return preset(args.preset or "test1")


def cmd_run(args) -> int:
    from .run import SUMMARY_FILE, run_experiment

    cfg = _load(args)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.mode:
        cfg.control_mode = args.mode
    cfg.validate()
    out = Path(args.out) if args.out else Path(cfg.output.dir)
    summary = run_experiment(cfg, out_dir=out, figures=args.figures or None)
    for mode, status in summary.status.items():
        print(f"{cfg.name} {mode}: {status}")
    print(f"total_cost_uncontrolled={summary.total_cost_uncontrolled!r} "
          f"total_cost_controlled={summary.total_cost_controlled!r} "
          f"cost_ratio={summary.cost_ratio!r}")
    print(f"artifacts: {out} ({SUMMARY_FILE}, "
          + ", ".join(f"{m}.csv" for m in summary.status) + ")")
    return EXIT_OK if summary.ok else EXIT_SIM


def cmd_sweep(args) -> int:
    from .sweep import AGGREGATE_FILE, parse_grid, run_sweep

    cfg = load_config(args.config) if args.config else preset(args.preset)
    grid = parse_grid(args.grid)
    rows = run_sweep(cfg, grid, args.out, max_workers=args.workers)
    n_ok = sum(r["status"] == "ok" for r in rows)
    print(f"{n_ok}/{len(rows)} cells succeeded; aggregate: {Path(args.out) / AGGREGATE_FILE}")
    return EXIT_OK if n_ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from ..verification import run_checks

    checks = run_checks(args.filter)
    if not checks:
        print(f"no property matches {args.filter!r}", file=sys.stderr)
        return EXIT_FAIL
    lines = [json.dumps({k: (float(v) if isinstance(v, float) else v)
                         for k, v in c.as_dict().items()}) for c in checks]
    text = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_config_export(args) -> int:
    text = dump_config(preset(args.name))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="richards-sdre", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log ARE diagnostics to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a preset or configuration file")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", metavar="PATH")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--mode", choices=("controlled", "uncontrolled", "both"))
    r.add_argument("--figures", action="store_true", help="also render PNG figures")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter grid")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH")
    src.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--grid", required=True, metavar="SPEC",
                   help="e.g. 'seed=1..10;epsilon=0,1e-6' over lambda, epsilon, n_nodes, seed")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--workers", type=int, help="worker processes (default: cpu count)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the property suite")
    v.add_argument("--filter", metavar="NAME", help="substring of property names to run")
    v.add_argument("--report", metavar="PATH", help="also write the JSON-lines report here")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("config", help="configuration utilities")
    csub = c.add_subparsers(dest="config_command", required=True)
    e = csub.add_parser("export", help="print a built-in preset as YAML")
    e.add_argument("name", choices=sorted(PRESETS))
    e.add_argument("--out", metavar="PATH")
    e.set_defaults(func=cmd_config_export)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler()
    handler.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        logging.getLogger().removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
