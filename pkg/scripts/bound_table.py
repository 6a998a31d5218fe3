"""Print every finite-time bound next to the simulated mean errors for one game.

Example:
    python scripts/bound_table.py --preset mp2 --alpha 0.05 --steps 10000 --trials 50
"""

import argparse

import numpy as np

from minimaxq import SamplingModel, generate_random_game, generate_random_model, matching_pennies, solve_optimal_q
from minimaxq.bounds import BoundParams, evaluate_all
from minimaxq.comparison import run_coupled_batch
from minimaxq.learning import trial_seed


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--preset", choices=("mp2", "random"), default="mp2")
    parser.add_argument("--dims", type=int, nargs=3, default=(2, 2, 3))
    parser.add_argument("--gamma", type=float, default=0.8)
    parser.add_argument("--game-seed", type=int, default=0)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--steps", type=int, default=10_000)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--rows", type=int, default=11)
    parser.add_argument("--variant", choices=("printed", "three_halves"), default="printed")
    args = parser.parse_args(argv)

    if args.preset == "mp2":
        spec, model = matching_pennies(0.5), SamplingModel.uniform((2, 2, 1))
    else:
        spec = generate_random_game(tuple(args.dims), args.gamma, args.game_seed)
        model = generate_random_model(spec.dims, args.game_seed)
    q_star = solve_optimal_q(spec).q_star
    q0 = np.zeros(spec.n)
    seeds = [trial_seed(0, i) for i in range(args.trials)]
    stats = run_coupled_batch(spec, model, args.alpha, args.steps, seeds, q0, q_star, stride=max(1, args.steps // 1000))
    params = BoundParams.from_problem(spec, model, args.alpha, q0, q_star, args.variant)
    bounds = evaluate_all(stats.ks, params)

    print(f"rho={params.rho:.6g} d_min={params.d_min:.4g} d_max={params.d_max:.4g} n={params.n} variant={args.variant}")
    cols = [
        ("LU_2", stats.mean_2["LU"], "thm1"),
        ("L_inf", stats.mean_inf["L"], "thm2"),
        ("L_inf", stats.mean_inf["L"], "cor1_eq5"),
        ("U_inf", stats.mean_inf["U"], "thm4"),
        ("orig_inf", stats.mean_inf["orig"], "thm5"),
    ]
    print("k".rjust(8) + "".join(f"{emp + ' / ' + b:>24}" for emp, _, b in cols))
    for j in np.unique(np.linspace(0, len(stats.ks) - 1, args.rows).round().astype(int)):
        cells = "".join(f"{vals[j]:>11.4g} / {bounds[b][j]:<10.4g}" for _, vals, b in cols)
        print(f"{stats.ks[j]:>8}{cells}")


if __name__ == "__main__":
    main()
