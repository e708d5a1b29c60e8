"""Monte-Carlo overlap maxima next to both bound tables, as a markdown table."""

import argparse

from geocon.verify import overlap_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rep = overlap_bounds(args.seed, args.samples)
    print("| row | observed max | implemented bound | published bound | cover areas |")
    print("|---|---|---|---|---|")
    for p in rep.properties:
        d = p.detail
        print(f"| {p.name.split(' ')[0]} | {d['observed_max']} | {d['implemented_bound']} | {d['published_bound']} | {d['cover_areas']} |")


if __name__ == "__main__":
    main()
