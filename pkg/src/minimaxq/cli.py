"""Command-line driver: ``minimaxq {solve,learn,verify,bounds,generate}``.

Exit codes: 0 success, 1 invariant or bound violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundParams, evaluate_all
from .errors import AssumptionViolation, LoadError, ParameterError
from .experiment import ExperimentConfig, initial_q, metadata_path, run_experiment, write_csv, write_metadata
from .game import (
    SamplingModel,
    generate_random_game,
    generate_random_model,
    matching_pennies,
    read_game_file,
    save_game,
)
from .learning import RNG_NAME, run_q_learning
from .value_iteration import greedy_policies, solve_optimal_q

OUT_DIR_ENV = "MINIMAXQ_OUT_DIR"


class UsageError(Exception):
    pass


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {value}")
    return value


def _fmt_vec(v) -> str:
    return "[" + ", ".join(format(float(x), ".12g") for x in v) + "]"


def _out_path(path: str | None, default_name: str) -> Path:
    if path is not None:
        return Path(path)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / default_name


def _load(path: str):
    spec, model = read_game_file(path)
    return spec, model if model is not None else SamplingModel.uniform(spec.dims)


def cmd_solve(args) -> int:
    spec, _ = _load(args.game)
    res = solve_optimal_q(spec, args.tol)
    pi, mu = greedy_policies(res.q_star, spec.dims)
    print(f"Q* = {_fmt_vec(res.q_star)}")
    print(f"pi* = {pi.tolist()}")
    print(f"mu* = {mu.tolist()}")
    print(f"iterations = {res.iterations}")
    print(f"error_certificate = {res.error_certificate:.3e}")
    return 0


def cmd_learn(args) -> int:
    spec, model = _load(args.game)
    cfg = ExperimentConfig(game_path=args.game, q0=args.q0, base_seed=args.seed)
    q0 = initial_q(cfg, spec.n)
    run = run_q_learning(spec, model, args.alpha, args.steps, args.seed, q0, stride=args.stride)
    q_star = solve_optimal_q(spec, 1e-12).q_star
    print(f"Q_final = {_fmt_vec(run.final)}")
    print(f"Q* = {_fmt_vec(q_star)}")
    print(f"error_inf = {np.max(np.abs(run.final - q_star)):.6g}")
    print(f"max_k |Q_k|_inf = {run.max_abs:.6g}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("k," + ",".join(f"q{i}" for i in range(spec.n)) + "\n")
            for k, snap in zip(run.steps, run.snapshots):
                fh.write(f"{k}," + ",".join(format(x, ".17g") for x in snap) + "\n")
    bound = max(1.0, float(np.max(np.abs(q0)))) / (1.0 - spec.discount)
    if run.max_abs > bound + 1e-12:
        print(f"VIOLATION: |Q_k|_inf reached {run.max_abs} > {bound}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    if (args.game is None) == (args.dims is None):
        raise UsageError("give exactly one of --game or --dims")
    cfg = ExperimentConfig(
        game_path=args.game,
        gen_dims=tuple(args.dims) if args.dims else None,
        gen_seed=args.gen_seed,
        gamma=args.gamma,
        alpha=args.alpha,
        steps=args.steps,
        trials=args.trials,
        base_seed=args.seed,
        stride=args.stride,
        q0=args.q0,
        exponent_variant=args.variant,
    )
    out = _out_path(args.out, "verify.csv")
    cfg.out = str(out)
    record = run_experiment(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(record, out)
    write_metadata(record, metadata_path(out))
    last = -1
    s = record.stats
    print(f"wrote {out} ({len(record.ks)} rows, {s.trials} trials, rng {RNG_NAME})")
    print(
        f"final mean errors: orig_inf={s.mean_inf['orig'][last]:.4g} L_inf={s.mean_inf['L'][last]:.4g} "
        f"U_inf={s.mean_inf['U'][last]:.4g} LU_2={s.mean_2['LU'][last]:.4g}"
    )
    if record.violations:
        for line in record.violations:
            print(f"VIOLATION: {line}", file=sys.stderr)
        return 1
    print("all ordering invariants, identities and bounds hold")
    return 0


def cmd_bounds(args) -> int:
    spec, model = _load(args.game)
    q_star = solve_optimal_q(spec, 1e-12).q_star
    q0 = np.zeros(spec.n)
    params = BoundParams.from_problem(spec, model, args.alpha, q0, q_star, args.variant)
    ks = np.unique(np.linspace(0, args.k_max, args.points).round().astype(int))
    table = evaluate_all(ks, params)
    print(f"rho = {params.rho!r}  d_min = {params.d_min!r}  d_max = {params.d_max!r}  n = {params.n}")
    print(f"Q_max = {params.q_max!r}  W_max = {params.w_max!r}")
    names = list(table)
    print("k," + ",".join(names))
    for j, k in enumerate(ks):
        print(f"{k}," + ",".join(format(table[name][j], ".12g") for name in names))
    return 0


def cmd_generate(args) -> int:
    if args.preset == "mp2":
        spec = matching_pennies(0.5 if args.gamma is None else args.gamma)
        model = SamplingModel.uniform(spec.dims)
    else:
        if args.dims is None:
            raise UsageError("generate needs --dims or --preset")
        spec = generate_random_game(tuple(args.dims), 0.9 if args.gamma is None else args.gamma, args.seed)
        model = generate_random_model(spec.dims, args.seed) if args.random_sampling else None
    out = _out_path(args.out, "game.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_game(spec, out, model)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minimaxq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve for Q* by value iteration")
    p.add_argument("--game", required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="run minimax Q-learning once")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--q0", choices=("zeros", "random"), default="zeros")
    p.add_argument("--out", default=None, help="optional CSV of snapshots")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("verify", help="coupled Monte Carlo verification of orderings and bounds")
    p.add_argument("--game", default=None)
    p.add_argument("--dims", type=int, nargs=3, metavar=("A", "B", "S"), default=None)
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--q0", choices=("zeros", "random"), default="zeros")
    p.add_argument("--variant", choices=("printed", "three_halves"), default="printed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="evaluate the closed-form bounds without simulation")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--k-max", type=int, default=10_000)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--variant", choices=("printed", "three_halves"), default="printed")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("generate", help="write a random or preset game file")
    p.add_argument("--dims", type=int, nargs=3, metavar=("A", "B", "S"), default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("mp2",), default=None)
    p.add_argument("--random-sampling", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ParameterError, AssumptionViolation, LoadError, ValueError) as exc:
        print(f"minimaxq {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
