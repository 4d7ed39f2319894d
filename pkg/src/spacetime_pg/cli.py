"""Command line interface: ``spacetime {solve,sweep,compare-cn,diag}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ConfigError, ProblemConfig, load_config

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spacetime", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI problem file (defaults if omitted)")
    common.add_argument("--K", type=int)
    common.add_argument("--nref", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--maxit", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path)

    sub.add_parser("solve", parents=[common], help="solve and write report, solution, snapshots")
    sweep = sub.add_parser("sweep", parents=[common], help="iterations/conditioning/error sweep")
    sweep.add_argument("--K-list", type=_int_list, default=[8, 16, 32, 64])
    sweep.add_argument("--nref-list", type=_int_list, default=[0, 1, 2])
    sweep.add_argument("--no-cond", action="store_true", help="skip condition numbers")
    sweep.add_argument("--lanczos", action="store_true")
    compare = sub.add_parser("compare-cn", parents=[common], help="compare with Crank-Nicolson")
    compare.add_argument("--K-list", type=_int_list, default=None)
    diag = sub.add_parser("diag", parents=[common], help="condition number, kappa_h, CFL_h")
    diag.add_argument("--lanczos", action="store_true")
    return parser


def config_from_args(args) -> ProblemConfig:
    config = load_config(args.config) if args.config else ProblemConfig().validate()
    overrides = {k: getattr(args, k) for k in ("K", "nref", "tol", "maxit", "threads", "seed")
                 if getattr(args, k) is not None}
    if args.out is not None:
        overrides["out"] = str(args.out)
    return config.replace(**overrides) if overrides else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        out = Path(config.out)
        if args.command == "solve":
            result = experiments.run_solve(config, out)
            r = result.report
            print(f"iterations={r.iterations} residual={r.residual:.6e} converged={r.converged}")
            print(f"wrote {len(result.files)} files to {out}")
            return EXIT_OK if r.converged else EXIT_NOT_CONVERGED
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            path = out / "sweep.csv"
            experiments.run_condition_sweep(config, args.K_list, args.nref_list, path,
                                            with_cond=not args.no_cond, lanczos=args.lanczos)
        elif args.command == "compare-cn":
            path = out / "compare_cn.csv"
            experiments.run_compare_cn(config, args.K_list or [config.K], path)
        else:
            path = out / "diag.csv"
            row = experiments.run_diag(config, path, lanczos=args.lanczos)
            for key, value in row.items():
                print(f"{key} = {value}")
        print(f"wrote {path}")
        return EXIT_OK
    except (ConfigError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
