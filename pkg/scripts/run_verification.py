"""Sweep coupled verification runs over games and step sizes, one CSV per run.

Example:
    python scripts/run_verification.py --out-dir runs --games 5 --alphas 0.05 0.1
"""

import argparse
import sys
import time
from pathlib import Path

from minimaxq import matching_pennies, save_game
from minimaxq.experiment import ExperimentConfig, metadata_path, run_experiment, write_csv, write_metadata


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--games", type=int, default=10, help="number of random (A,B,S) games besides mp2")
    parser.add_argument("--dims", type=int, nargs=3, default=(2, 2, 3))
    parser.add_argument("--gamma", type=float, default=0.8)
    parser.add_argument("--alphas", type=float, nargs="+", default=[0.05, 0.1])
    parser.add_argument("--steps", type=int, default=10_000)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--variant", choices=("printed", "three_halves"), default="printed")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mp2_path = out_dir / "mp2.json"
    save_game(matching_pennies(0.5), mp2_path)

    configs = []
    for alpha in args.alphas:
        configs.append(("mp2", ExperimentConfig(game_path=str(mp2_path), alpha=alpha)))
        for g in range(args.games):
            configs.append((f"game{g}", ExperimentConfig(gen_dims=tuple(args.dims), gen_seed=g, gamma=args.gamma, alpha=alpha)))

    failed = 0
    for name, cfg in configs:
        cfg.steps, cfg.trials, cfg.base_seed, cfg.exponent_variant = args.steps, args.trials, args.seed, args.variant
        path = out_dir / f"{name}_alpha{cfg.alpha:g}.csv"
        cfg.out = str(path)
        t0 = time.perf_counter()
        record = run_experiment(cfg)
        write_csv(record, path)
        write_metadata(record, metadata_path(path))
        status = "ok" if record.ok else "VIOLATION " + "; ".join(record.violations)
        print(f"{path.name}: {time.perf_counter() - t0:.1f}s {status}")
        failed += not record.ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
