"""KS of the midpoint envelope height against c * chi_hat * e(1/2) for several c.

The interface spans 2N columns, so the Brownian scale seen at the midpoint
is sqrt(2 chi N) rather than sqrt(chi N).  Point this at an interface run
directory (or a trend run's N<size> subdirectory) to see which factor fits.

    python scripts/scale_check.py runs/repulsion-trend/N128 --factors 1 2
"""

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from potts_wall.excursion import marginal_compare


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run", type=Path)
    ap.add_argument("--factors", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--n-ref", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    summary = json.loads((args.run / "summary.json").read_text())
    with open(args.run / "reports.csv") as fh:
        vals = np.array([float(r["gamma_hat_t"]) for r in csv.DictReader(fh) if not r["error"]])
    chi = summary["chi_hat"]
    print(f"N={summary['N']} replicas={len(vals)} chi_hat={chi:.4f}")
    for c in args.factors:
        ks = marginal_compare(vals, c * chi, 0.5, args.n_ref, np.random.default_rng(args.seed))
        print(f"factor {c:g}: KS {ks:.4f}")


if __name__ == "__main__":
    main()
