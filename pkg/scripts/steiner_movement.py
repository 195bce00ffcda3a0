"""Steiner-chaser movement on random nested instances, per dimension.

Prints the mean and maximum total movement over a handful of seeds next to
the dimension, which bounds it.

Usage: python scripts/steiner_movement.py [--dims 2 4 8] [--seeds 5] [--cut 0.2]
"""
import argparse

import numpy as np

from nestchase.harness import run_and_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--T", type=int, default=50)
    ap.add_argument("--cut", type=float, default=0.2)
    ap.add_argument("--n-dirs", type=int, default=20000)
    args = ap.parse_args()
    print("d,mean_movement,max_movement,mean_width_budget")
    for d in args.dims:
        moves, budgets = [], []
        for s in range(args.seeds):
            cfg = {"dim": d, "norm": 2,
                   "chaser": {"kind": "steiner", "params": {"n_dirs": args.n_dirs}},
                   "adversary": {"kind": "random_nested",
                                 "params": {"T": args.T, "cut_fraction": args.cut}},
                   "seeds": {"chaser": 1000 * d + s, "adversary": s}}
            trace, rep = run_and_report(cfg)
            moves.append(trace.total_cost_l2)
            budgets.append(d * rep.diagnostics["half_width_drop"])
        print(f"{d},{np.mean(moves):.4f},{np.max(moves):.4f},{np.mean(budgets):.4f}")


if __name__ == "__main__":
    main()
