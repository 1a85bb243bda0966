"""Command-line interface.

Subcommands: simulate, tune, replay, dof, load-budget.  Exit codes:
0 success, 1 validation error (bad flags, bad config, bad input file),
2 runtime/model error (tuning inapplicable, simulation failure).
"""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, load_config
from .harness import (
    dof_breakdown,
    format_load_budget,
    load_budget,
    run_replay,
    run_simulation,
    run_tuning,
)
from .tuning import TuningError


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (validation), not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="platestab",
        description="Closed-loop simulator and tuning tools for a 3-leg "
        "parallel-manipulator payload stabilizer.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run the configured closed loop")
    sim.add_argument("--config", help="INI config file (omit for built-in defaults)")
    sim.add_argument("--out-dir", default="out", help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--quiet", action="store_true", help="suppress stdout summary")

    tune = sub.add_parser("tune", help="tune per-leg PID gains")
    tune.add_argument("--config", help="INI config file (omit for built-in defaults)")
    tune.add_argument(
        "--method",
        choices=("zn", "cc", "custom"),
        default="zn",
        help="zn: ultimate-gain rules; cc: step-response rules; "
        "custom: iterative adjustment",
    )
    tune.add_argument("--out-dir", default="out")
    tune.add_argument("--seed", type=int, default=None, help="override the config seed")
    tune.add_argument("--quiet", action="store_true")
    tune.add_argument(
        "--reference",
        action="append",
        default=[],
        metavar="LEG:KP[,TI[,TD]]",
        help="gains to diff against in the report; repeatable, one per leg",
    )

    replay = sub.add_parser("replay", help="analyze a flight-log CSV")
    replay.add_argument("log", help="CSV with header t,yaw,pitch,roll[,base_*]")
    replay.add_argument("--out-dir", default="out")
    replay.add_argument("--quiet", action="store_true")

    dof = sub.add_parser("dof", help="mobility of a linkage")
    dof.add_argument("--links", type=int, default=8, help="link count N (default 8)")
    dof.add_argument(
        "--joint",
        action="append",
        default=None,
        metavar="DOF:COUNT",
        help="joint group, repeatable (default: 1:6 and 3:3)",
    )

    budget = sub.add_parser("load-budget", help="torque-to-payload chain")
    budget.add_argument("--torque", type=float, default=1.0, help="N*m (default 1.0)")
    budget.add_argument("--crank", type=float, default=0.015, help="m (default 0.015)")
    budget.add_argument("--efficiency", type=float, default=0.85)
    budget.add_argument("--fos", type=float, default=1.5)
    budget.add_argument("--legs", type=int, default=3)
    return parser


def _parse_reference(items) -> dict:
    """--reference LEG:KP[,TI[,TD]] entries to {leg: (kp, ti, td)}."""
    ref = {}
    for item in items:
        try:
            leg_txt, vals_txt = item.split(":", 1)
            leg = int(leg_txt)
            vals = [float(v) for v in vals_txt.split(",")]
        except ValueError:
            raise ConfigError(
                f"--reference {item!r}: expected LEG:KP[,TI[,TD]]"
            ) from None
        if leg not in (1, 2, 3) or not 1 <= len(vals) <= 3:
            raise ConfigError(f"--reference {item!r}: leg 1-3 and one to three values")
        ref[leg] = tuple(vals + [None] * (3 - len(vals)))
    return ref


def _parse_joints(items) -> list:
    if not items:
        return [(1, 6), (3, 3)]
    joints = []
    for item in items:
        try:
            dof_txt, count_txt = item.split(":", 1)
            joints.append((int(dof_txt), int(count_txt)))
        except ValueError:
            raise ConfigError(f"--joint {item!r}: expected DOF:COUNT") from None
    return joints


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = load_config(args.config) if args.config else default_config()
            run_simulation(cfg, args.out_dir, seed_override=args.seed, quiet=args.quiet)
        elif args.command == "tune":
            cfg = load_config(args.config) if args.config else default_config()
            run_tuning(
                cfg,
                args.method,
                args.out_dir,
                quiet=args.quiet,
                reference=_parse_reference(args.reference),
            )
        elif args.command == "replay":
            run_replay(args.log, args.out_dir, quiet=args.quiet)
        elif args.command == "dof":
            value, text = dof_breakdown(args.links, _parse_joints(args.joint))
            print(text)
        else:
            budget = load_budget(
                torque=args.torque,
                crank=args.crank,
                efficiency=args.efficiency,
                fos=args.fos,
                legs=args.legs,
            )
            print(format_load_budget(budget))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TuningError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
