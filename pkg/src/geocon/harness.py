"""Command-line entry point: ``geocon {cover,leaders,run,sweep,verify}``.

Exit codes: 0 success, 2 usage or config error, 3 precondition refusal,
4 property violation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .covering import GREEDY, greedy_cover
from .geometry import GeometryError, PointSet
from .protocols import FaultModel, Refusal, generic_cover, select_leaders_basic, select_leaders_generic
from .simulation import Metrics, Scenario, execute, refusal_dict
from .verify import SUITES, run_suite

SCHEMA = "geocon/1"
EXIT_OK, EXIT_USAGE, EXIT_REFUSED, EXIT_VIOLATION = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def read_points(path: str | Path) -> PointSet:
    """One point per line, whitespace-separated coordinates, ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append(tuple(float(v) for v in line.split()))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a list of numbers: {line!r}") from None
    if not rows:
        raise ConfigError(f"{path}: no points")
    return PointSet(rows)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GEOCON_THREADS", "1")))
    except ValueError:
        return 1


# -- config handling -----------------------------------------------------------


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict) or cfg.get("schema") != SCHEMA:
        raise ConfigError(f"config must be a JSON object with \"schema\": \"{SCHEMA}\"")
    if ("scenario" in cfg) == ("sweep" in cfg):
        raise ConfigError("config needs exactly one of \"scenario\" or \"sweep\"")
    return cfg


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _grid_values(v) -> list:
    if isinstance(v, dict) and "range" in v:
        return list(range(*v["range"]))
    if isinstance(v, list):
        return v
    raise ConfigError(f"grid values must be a list or {{\"range\": [a, b]}}, got {v!r}")


def expand_sweep(sweep: dict) -> list[dict]:
    """Cartesian product of the grid over dotted scenario paths, keys in sorted order."""
    base = sweep.get("base")
    if not isinstance(base, dict):
        raise ConfigError("sweep needs a \"base\" scenario")
    grid = sweep.get("grid", {})
    keys = sorted(grid)
    cells = []
    for combo in itertools.product(*(_grid_values(grid[k]) for k in keys)):
        d = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_path(d, k, v)
        cells.append(d)
    return cells


def scenarios_from_config(cfg: dict, seed: int | None = None) -> list[Scenario]:
    """Scenario list; ``seed`` replaces the base generator seed (grid cells still override it)."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        base = cfg["scenario"] if "scenario" in cfg else cfg["sweep"].get("base", {})
        if "generator" in base:
            base["generator"]["seed"] = seed
    raw = [cfg["scenario"]] if "scenario" in cfg else expand_sweep(cfg["sweep"])
    out = []
    for i, d in enumerate(raw):
        try:
            out.append(Scenario.from_dict(d))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"scenario {i}: {e}") from None
    return out


def run_one(sc: Scenario, trace: bool = False) -> tuple[int, dict, Metrics | None]:
    """Execute one scenario; returns (exit code, JSON-ready record, metrics)."""
    try:
        rec = execute(sc)
    except Refusal as e:
        return EXIT_REFUSED, refusal_dict(sc, e), None
    return (EXIT_OK if rec.ok else EXIT_VIOLATION), rec.to_dict(trace), rec.metrics


def run_many(scenarios: list[Scenario], trace: bool = False) -> list[tuple[int, dict, Metrics | None]]:
    n = thread_count()
    if n == 1 or len(scenarios) < 2:
        return [run_one(sc, trace) for sc in scenarios]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda sc: run_one(sc, trace), scenarios))


def combine_codes(codes) -> int:
    codes = list(codes)
    if EXIT_VIOLATION in codes:
        return EXIT_VIOLATION
    if EXIT_REFUSED in codes:
        return EXIT_REFUSED
    return EXIT_OK


def _dumps(d: dict) -> str:
    return json.dumps(d, sort_keys=True)


# -- subcommands ---------------------------------------------------------------


def cmd_cover(args) -> int:
    ps = read_points(args.points)
    cs = greedy_cover(ps, args.shape, args.ell)
    print(f"areas: {len(cs)}")
    print(f"slabs: {len(cs.slabs)}")
    for j, members in enumerate(cs.members):
        pts = " ".join("(" + ", ".join(f"{v:g}" for v in ps[i]) + ")" for i in members)
        print(f"  A{j} slab {cs.area_slab[j]}: {pts}")
    if args.out:
        Path(args.out).write_text(_dumps(cs.to_dict()) + "\n")
    return EXIT_OK


def cmd_leaders(args) -> int:
    ps = read_points(args.points)
    fm = FaultModel(args.fault, args.size, args.M, args.alignment, args.cover, args.ratio)
    if ps.dim != fm.dim:
        raise GeometryError(f"{fm.shape} faults need {fm.dim}-D points")
    if args.protocol == "basic":
        ls = select_leaders_basic(ps, fm.diameter)
    else:
        ls = select_leaders_generic(generic_cover(ps, fm), ps)
    print(f"leaders ({ls.origin}): {len(ls.leaders)} slots, {len(ls.distinct)} distinct")
    for j, p in enumerate(ls.leaders):
        area = f" area {ls.areas[j]}" if ls.areas else ""
        print(f"  {p}{area}: {ps[p]}")
    if args.out:
        Path(args.out).write_text(_dumps(ls.to_dict()) + "\n")
    return EXIT_OK


def _write_results(results, out, trace_path, csv_path, jsonl: bool) -> None:
    records = [r for _, r, _ in results]
    if out:
        if jsonl:
            Path(out).write_text("".join(_dumps(r) + "\n" for r in records))
        else:
            Path(out).write_text(_dumps(records[0]) + "\n")
    if trace_path:
        lines = [_dumps({"cell": i, **t}) for i, r in enumerate(records) for t in r.get("trace", [])]
        Path(trace_path).write_text("".join(line + "\n" for line in lines))
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("cell", "status") + Metrics.CSV_FIELDS)
            for i, (_, r, m) in enumerate(results):
                w.writerow([i, r["status"]] + (m.csv_row() if m else [""] * len(Metrics.CSV_FIELDS)))


def _summarize(results) -> None:
    for i, (code, r, m) in enumerate(results):
        if r["status"] == "refused":
            print(f"[{i}] refused: {r['reason']}")
        else:
            v = r["verdicts"]
            print(
                f"[{i}] {'ok' if code == EXIT_OK else 'VIOLATION'}: rounds={m.rounds} messages={m.messages_total} "
                f"X={m.X} f={m.f} agreement={v['agreement']} validity={v['validity']} termination={v['termination']}"
            )


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    scenarios = scenarios_from_config(cfg, args.seed)
    results = run_many(scenarios, trace=bool(args.trace))
    _write_results(results, args.out, args.trace, args.csv, jsonl="sweep" in cfg)
    _summarize(results)
    return combine_codes(c for c, _, _ in results)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if "sweep" not in cfg:
        raise ConfigError("sweep needs a config with a \"sweep\" section")
    return cmd_run(args)


def cmd_verify(args) -> int:
    report = run_suite(args.suite, args.seed, args.samples)
    d = report.to_dict(timing=args.timing)
    for p in report.properties:
        extra = f" {p.detail}" if p.detail else ""
        print(f"{'PASS' if p.passed else 'FAIL'} {p.name} ({p.checked} checked){extra}")
    if args.out:
        Path(args.out).write_text(_dumps(d) + "\n")
    else:
        print(_dumps(d))
    return EXIT_OK if report.passed else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geocon", description="Byzantine geoconsensus simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cover", help="greedy cover of a points file")
    p.add_argument("points")
    p.add_argument("--shape", choices=sorted(GREEDY), default="axis-square")
    p.add_argument("--ell", type=float, required=True, help="cover area size (side or diameter)")
    p.add_argument("--out", help="write the cover as JSON")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("leaders", help="leader set for a points file")
    p.add_argument("points")
    p.add_argument("--protocol", choices=("basic", "generic"), default="basic")
    p.add_argument("--fault", choices=("square", "circle", "cube", "sphere"), default="square")
    p.add_argument("--size", type=float, required=True)
    p.add_argument("--alignment", choices=("axis", "any"), default="any")
    p.add_argument("--cover", choices=("square", "circle", "cube", "sphere"))
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("-M", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_leaders)

    for name, fn, help_ in (("run", cmd_run, "run a scenario or sweep config"), ("sweep", cmd_sweep, "run a sweep config")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--out", help="record JSON (JSON lines for sweeps)")
        p.add_argument("--trace", help="write per-round message traces as JSON lines")
        p.add_argument("--csv", help="write one metrics row per cell")
        p.add_argument("--seed", type=int, help="override the point generator seed")
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds in the report")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, GeometryError, KeyError, ValueError, OSError) as e:
        print(f"geocon: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
