"""Command-line interface.

Subcommands: ratio, ratio-at, kl, ate, simulate, bench. Results are JSON on
stdout ({"manifest": ..., "result": ...}); errors are JSON on stderr. Exit
codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import runs
from .errors import MalformedInput, MatchkitError
from .io import dumps, read_causal_csv, read_points_csv, sha256_file, sha256_text

HIGH_DIM_WARN = 20


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchkit",
        description="Nearest-neighbor matching estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_m_alpha(p):
        p.add_argument("--m", type=int, default=None,
                       help="number of matches (overrides --alpha)")
        p.add_argument("--alpha", type=float, default=None,
                       help="constant for the M selection rule")

    p = sub.add_parser("ratio", help="density ratio at the sample points")
    p.add_argument("--x", required=True, help="CSV of the denominator sample")
    p.add_argument("--z", required=True, help="CSV of the numerator sample")
    add_m_alpha(p)

    p = sub.add_parser("ratio-at", help="density ratio at new points")
    p.add_argument("--x", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--points", required=True, help="CSV of evaluation points")
    p.add_argument("--baseline", default="matching",
                   choices=["matching", "two-step", "noshad"])
    add_m_alpha(p)

    p = sub.add_parser("kl", help="plug-in KL divergence estimate")
    p.add_argument("--x", required=True)
    p.add_argument("--z", required=True)
    add_m_alpha(p)

    p = sub.add_parser("ate", help="average treatment effect estimation")
    p.add_argument("--data", required=True, help="CSV with x1..xd,d,y columns")
    p.add_argument("--method", default="bc",
                   choices=["matching", "bc", "crossfit"])
    add_m_alpha(p)
    p.add_argument("--degree", type=int, default=None,
                   help="outcome polynomial degree (-1 for the zero model)")
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("simulate", help="Monte Carlo harness")
    p.add_argument("--task", required=True,
                   choices=["pw-risk", "l1-risk", "kl-bias", "coverage"])
    p.add_argument("--spec", required=True,
                   help="JSON spec (inline or a file path)")
    p.add_argument("--n-grid", type=_int_list, default=None)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-point", type=_float_list, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--method", default="bc", choices=["bc", "crossfit"])
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--folds", type=int, default=2)

    p = sub.add_parser("bench", help="matching path scaling benchmark")
    p.add_argument("--n-grid", type=_int_list, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _load_spec(text: str) -> dict:
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"invalid inline spec JSON: {exc}") from exc
    if not os.path.exists(text):
        raise MalformedInput(f"spec file not found: {text}")
    try:
        with open(text, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid spec JSON in {text}: {exc}") from exc


def _warn_high_dim(d: int) -> None:
    if d > HIGH_DIM_WARN:
        sys.stderr.write(
            f"warning: d={d} is high for spatial indexing; "
            "expect degraded query performance\n"
        )


def dispatch(args: argparse.Namespace) -> dict:
    t0 = time.perf_counter()
    cmd = args.command
    if cmd == "ratio":
        x = read_points_csv(args.x)
        z = read_points_csv(args.z)
        _warn_high_dim(x.d)
        result = runs.run_ratio(x, z, m=args.m, alpha=args.alpha)
        config = {"m": args.m, "alpha": args.alpha}
        inputs = {"x": sha256_file(args.x), "z": sha256_file(args.z)}
        return runs.finish(cmd, config, inputs, 0, result, t0)
    if cmd == "ratio-at":
        x = read_points_csv(args.x)
        z = read_points_csv(args.z)
        pts = read_points_csv(args.points)
        _warn_high_dim(x.d)
        result = runs.run_ratio_at(x, z, pts, baseline=args.baseline,
                                   m=args.m, alpha=args.alpha)
        config = {"baseline": args.baseline, "m": args.m, "alpha": args.alpha}
        inputs = {"x": sha256_file(args.x), "z": sha256_file(args.z),
                  "points": sha256_file(args.points)}
        return runs.finish(cmd, config, inputs, 0, result, t0)
    if cmd == "kl":
        x = read_points_csv(args.x)
        z = read_points_csv(args.z)
        _warn_high_dim(x.d)
        result = runs.run_kl(x, z, m=args.m, alpha=args.alpha)
        config = {"m": args.m, "alpha": args.alpha}
        inputs = {"x": sha256_file(args.x), "z": sha256_file(args.z)}
        return runs.finish(cmd, config, inputs, 0, result, t0)
    if cmd == "ate":
        ds = read_causal_csv(args.data)
        _warn_high_dim(ds.d)
        result = runs.run_ate(ds, method=args.method, m=args.m,
                              alpha=args.alpha, degree=args.degree,
                              folds=args.folds, seed=args.seed,
                              level=args.level)
        config = {"method": args.method, "m": args.m, "alpha": args.alpha,
                  "degree": args.degree, "folds": args.folds,
                  "level": args.level}
        inputs = {"data": sha256_file(args.data)}
        return runs.finish(cmd, config, inputs, args.seed, result, t0)
    if cmd == "simulate":
        spec_dict = _load_spec(args.spec)
        result = runs.run_simulate(
            args.task, spec_dict, n_grid=args.n_grid, reps=args.reps,
            alpha=args.alpha, seed=args.seed, eval_point=args.eval_point,
            n=args.n, method=args.method, degree=args.degree,
            folds=args.folds,
        )
        config = {"task": args.task, "spec": spec_dict, "n_grid": args.n_grid,
                  "reps": args.reps, "alpha": args.alpha,
                  "eval_point": args.eval_point, "n": args.n,
                  "method": args.method, "degree": args.degree,
                  "folds": args.folds}
        inputs = {"spec": sha256_text(json.dumps(spec_dict, sort_keys=True))}
        return runs.finish(cmd, config, inputs, args.seed, result, t0)
    if cmd == "bench":
        result = runs.run_bench(args.n_grid, args.d, m=args.m,
                                alpha=args.alpha, seed=args.seed)
        config = {"n_grid": args.n_grid, "d": args.d, "m": args.m,
                  "alpha": args.alpha}
        return runs.finish(cmd, config, {}, args.seed, result, t0)
    raise MalformedInput(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        out = dispatch(args)
    except MatchkitError as exc:
        sys.stderr.write(dumps({"error": {"code": exc.code,
                                          "message": exc.message}}) + "\n")
        return 3
    sys.stdout.write(dumps(out) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
