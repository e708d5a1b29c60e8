"""GENERIC protocol sweep: cost and outcome against point density and fault alignment."""

import argparse
import csv
import os
import sys

from geocon.consensus import Behavior
from geocon.protocols import FaultModel, Refusal
from geocon.simulation import Metrics, PlacementStrategy, PointGenerator, Scenario, execute


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[40, 80, 120])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--behavior", default="equivocate")
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    args = ap.parse_args()
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("n", "alignment", "seed", "status") + Metrics.CSV_FIELDS)
    for n in args.sizes:
        side = max(4.0, (n / 1.6) ** 0.5)
        for alignment in ("axis", "any"):
            for seed in range(args.seeds):
                sc = Scenario(
                    FaultModel("square", 1.0, 1, alignment),
                    "generic",
                    generator=PointGenerator(n, (0, 0), (side, side), 0.25, seed),
                    placement=PlacementStrategy("greedy-max-leaders"),
                    behavior=Behavior(args.behavior, seed),
                    inputs={"pattern": "random", "seed": seed},
                )
                try:
                    m = execute(sc).metrics
                    w.writerow([n, alignment, seed, "ok"] + m.csv_row())
                except Refusal as e:
                    w.writerow([n, alignment, seed, "refused"] + [""] * len(Metrics.CSV_FIELDS))
                    print(f"n={n} {alignment} seed={seed}: {e.reason}", file=sys.stderr)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    os.environ.setdefault("GEOCON_THREADS", "1")
    main()
