"""Command-line interface.

Subcommands: run, budget, delay-scan, franson, presets.  When --out is
omitted, output directories are created under $HDQKD_OUTPUT_ROOT (default
./hdqkd-out).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .errors import InvalidParameterError
from .experiment import budget_breakdown, run
from .presets import preset_names, resolve_preset

OUTPUT_ROOT_ENV = "HDQKD_OUTPUT_ROOT"


def _load(args) -> dict:
    if args.config:
        return load_config(args.config)
    if args.preset:
        return resolve_preset(args.preset)
    raise InvalidParameterError("need --config or --preset")


def _out_dir(args, cfg) -> str:
    if args.out:
        return args.out
    root = os.environ.get(OUTPUT_ROOT_ENV, "hdqkd-out")
    name = cfg.get("meta", {}).get("name", cfg["run"]["kind"])
    return os.path.join(root, name)


def _cmd_run(args):
    cfg = _load(args)
    report = run(cfg, out_dir=_out_dir(args, cfg), seed=args.seed,
                 workers=args.workers)
    print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    print(f"wall time: {report.wall_time_s:.2f} s", file=sys.stderr)
    return 0


def _cmd_budget(args):
    cfg = _load(args)
    table = budget_breakdown(cfg)
    for side, data in table.items():
        print(f"{side}:")
        for item in data["items"]:
            print(f"  {item['component']:<28s} {item['loss_db']:6.3f} dB  "
                  f"T = {item['transmission']:.4f}")
        print(f"  {'total efficiency':<28s} {'':9s} "
              f"T = {data['total_efficiency']:.4f}")
    return 0


def _cmd_delay_scan(args):
    cfg = resolve_preset("fig2-delay-scan") if not (args.config or args.preset) \
        else _load(args)
    report = run(cfg, out_dir=_out_dir(args, cfg), seed=args.seed)
    print(json.dumps(report.results, indent=2, sort_keys=True))
    return 0


def _cmd_franson(args):
    cfg = resolve_preset("fig5-visibility") if not (args.config or args.preset) \
        else _load(args)
    report = run(cfg, out_dir=_out_dir(args, cfg), seed=args.seed)
    print(json.dumps(report.results, indent=2, sort_keys=True))
    return 0


def _cmd_presets(args):
    if args.action == "list":
        for name in preset_names():
            print(name)
    else:
        print(json.dumps(resolve_preset(args.action), indent=2, sort_keys=True))
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--preset", help="named preset")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdqkd",
        description="time-energy entanglement QKD desk simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute an experiment config")
    _add_common(p_run)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_budget = subs.add_parser("budget", help="per-channel loss breakdown")
    _add_common(p_budget)
    p_budget.set_defaults(func=_cmd_budget)

    p_ds = subs.add_parser("delay-scan", help="coincidence vs gate delay curves")
    _add_common(p_ds)
    p_ds.set_defaults(func=_cmd_delay_scan)

    p_fr = subs.add_parser("franson", help="Franson fringes and visibility")
    _add_common(p_fr)
    p_fr.set_defaults(func=_cmd_franson)

    p_pr = subs.add_parser("presets", help="list or show presets")
    p_pr.add_argument("action", nargs="?", default="list",
                      help="'list' or a preset name to dump")
    p_pr.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
