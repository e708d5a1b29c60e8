"""Run every property suite and write one JSON report per suite."""

import argparse
import json
from pathlib import Path

from geocon.verify import SUITES, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/verify")
    ap.add_argument("--skip", nargs="*", default=[], choices=SUITES)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for name in SUITES:
        if name in args.skip:
            continue
        rep = run_suite(name, args.seed)
        (out / f"{name}.json").write_text(json.dumps(rep.to_dict(timing=True), sort_keys=True, indent=1) + "\n")
        print(f"{'PASS' if rep.passed else 'FAIL'} {name} ({rep.seconds:.1f}s)")
        if not rep.passed:
            failed.append(name)
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
