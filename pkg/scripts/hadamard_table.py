"""Movement, OPT and ratios on the adaptive Hadamard instance.

Usage: python scripts/hadamard_table.py [--dims 4 8 16] [--norms 1 2 inf]
"""
import argparse

from nestchase.harness import run_and_report

CHASERS = ("steiner", "lazy_steiner", "toward_steiner", "greedy_projection")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--norms", nargs="+", default=["1", "2", "inf"])
    args = ap.parse_args()
    print("d,p,chaser,total_cost,opt_cost,ratio,ratio_l2")
    for d in args.dims:
        for p in args.norms:
            for ch in CHASERS:
                cfg = {"dim": d, "norm": p if p == "inf" else float(p), "chaser": {"kind": ch},
                       "adversary": {"kind": "hadamard"}, "x0": "origin",
                       "seeds": {"chaser": d, "adversary": d}}
                _, rep = run_and_report(cfg)
                print(f"{d},{p},{ch},{rep.total_cost:.6f},{rep.opt_cost:.6f},"
                      f"{rep.competitive_ratio:.4f},{rep.competitive_ratio_l2:.4f}")


if __name__ == "__main__":
    main()
