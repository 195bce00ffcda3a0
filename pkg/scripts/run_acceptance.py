"""Run the acceptance criteria and print one line per criterion.

Usage: python scripts/run_acceptance.py [criterion numbers...]
With no arguments runs the full suite including the determinism rerun.
"""
import sys

from nestchase import validation


def main(argv):
    if not argv:
        results = validation.run_suite()
    else:
        numbers = sorted(int(a) for a in argv)
        results = []
        for k in numbers:
            r = validation.criterion_8(results) if k == 8 else validation.CRITERIA[k]()
            results.append(r)
            print(r.line())
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
