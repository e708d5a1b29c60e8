"""Property suites behind ``geocon verify``.

Each suite returns a ``Report`` listing one ``PropertyResult`` per checked
property, with the first counterexample found (if any).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .consensus import Behavior, ConsensusInstance, psl_run
from .covering import (
    OverlapKey,
    gcircle,
    gcube,
    gsquare,
    gsphere,
    optimal_cover_oracle,
    overlap_bound,
    overlap_counts_batch,
)
from .geometry import (
    AXIS_CUBE,
    AXIS_SQUARE,
    CIRCLE,
    ORIENTED_CUBE,
    ORIENTED_SQUARE,
    SPHERE,
    PointSet,
)
from .protocols import FaultModel, Refusal
from .simulation import PlacementStrategy, PointGenerator, Scenario, execute, verify_message_bound

SUITES = ("approx-square", "approx-circle", "approx-cube", "overlap-bounds", "psl-exhaustive", "end-to-end")


@dataclass
class PropertyResult:
    name: str
    passed: bool
    checked: int
    detail: dict = field(default_factory=dict)
    counterexample: dict | None = None


@dataclass
class Report:
    suite: str
    seed: int
    properties: list[PropertyResult]
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        if not timing:
            del d["seconds"]
        return d


class _Check:
    def __init__(self, name: str):
        self.result = PropertyResult(name, True, 0)

    def __call__(self, ok: bool, example=None) -> None:
        self.result.checked += 1
        if not ok and self.result.passed:
            self.result.passed = False
            self.result.counterexample = example


def random_instance(rng: np.random.Generator, dim: int, n_max: int, extent: float = 4.0) -> PointSet:
    n = int(rng.integers(1, n_max + 1))
    # a coarse lattice makes ties and boundary contacts common
    pts = np.round(rng.uniform(0, extent, size=(n, dim)) * 4) / 4
    return PointSet({tuple(float(v) for v in p) for p in pts})


def approx_square(seed: int = 0, samples: int = 500, n_max: int = 12) -> Report:
    rng = np.random.default_rng(seed)
    ratio, slab = _Check("gsquare <= 2 * optimum"), _Check("slab count == slab optimum")
    worst = 0.0
    for _ in range(samples):
        ps = random_instance(rng, 2, n_max)
        ell = float(rng.choice([0.5, 1.0, 2.0]))
        cs = gsquare(ps, ell)
        opt = optimal_cover_oracle(ps, AXIS_SQUARE, ell)
        worst = max(worst, len(cs) / opt)
        ratio(len(cs) <= 2 * opt, {"points": ps.to_list(), "ell": ell, "greedy": len(cs), "opt": opt})
        for count, members in zip(cs.slab_counts(), cs.slab_members(ps)):
            sub = ps.subset(members)
            so = optimal_cover_oracle(sub, AXIS_SQUARE, ell)
            slab(count == so, {"points": sub.to_list(), "ell": ell, "greedy": count, "opt": so})
    ratio.result.detail = {"worst_ratio": worst}
    return Report("approx-square", seed, [ratio.result, slab.result])


def approx_circle(seed: int = 0, samples: int = 200, n_max: int = 8) -> Report:
    rng = np.random.default_rng(seed)
    chk = _Check("gcircle <= 8 * optimum")
    worst = 0.0
    for _ in range(samples):
        ps = random_instance(rng, 2, n_max)
        ell = float(rng.choice([0.5, 1.0, 2.0]))
        g = len(gcircle(ps, ell))
        opt = optimal_cover_oracle(ps, CIRCLE, ell)
        worst = max(worst, g / opt)
        chk(g <= 8 * opt, {"points": ps.to_list(), "ell": ell, "greedy": g, "opt": opt})
    chk.result.detail = {"worst_ratio": worst}
    return Report("approx-circle", seed, [chk.result])


def approx_cube(seed: int = 0, samples: int = 200, n_max: int = 8) -> Report:
    rng = np.random.default_rng(seed)
    chk = _Check("gcube <= 4 * optimum")
    worst = 0.0
    for _ in range(samples):
        ps = random_instance(rng, 3, n_max)
        ell = float(rng.choice([0.5, 1.0, 2.0]))
        g = len(gcube(ps, ell))
        opt = optimal_cover_oracle(ps, AXIS_CUBE, ell)
        worst = max(worst, g / opt)
        chk(g <= 4 * opt, {"points": ps.to_list(), "ell": ell, "greedy": g, "opt": opt})
    chk.result.detail = {"worst_ratio": worst}
    return Report("approx-cube", seed, [chk.result])


def _fault_kind(shape: str, alignment: str) -> str:
    return {
        ("square", "any"): ORIENTED_SQUARE,
        ("square", "axis"): AXIS_SQUARE,
        ("cube", "any"): ORIENTED_CUBE,
        ("cube", "axis"): AXIS_CUBE,
    }.get((shape, alignment), CIRCLE if shape == "circle" else SPHERE)


def overlap_bounds(seed: int = 0, samples: int = 100_000, batch: int = 1000) -> Report:
    """Monte-Carlo maximum overlap per table row over dense greedy covers.

    Each row asserts the implemented bound; the published figure is reported
    alongside.
    """
    rng = np.random.default_rng(seed)
    ell = 1.0
    ps2 = PointSet(rng.uniform(0, 12, size=(3000, 2)))
    ps3 = PointSet(rng.uniform(0, 7, size=(6000, 3)))
    covers = {
        "square": gsquare(ps2, ell),
        "circle": gcircle(ps2, ell),
        "cube": gcube(ps3, ell),
        "sphere": gsphere(ps3, ell),
    }
    results = []
    for key in OverlapKey:
        cs = covers[key.cover_shape]
        dim = 2 if key.cover_shape in ("square", "circle") else 3
        lo = np.array([a.anchor for a in cs.areas]).min(axis=0) + 2
        hi = np.array([a.anchor for a in cs.areas]).max(axis=0) - 2
        bound = overlap_bound(key, "implemented")
        for shape in key.fault_shapes:
            kind = _fault_kind(shape, key.alignment)
            size = key.ratio * ell
            chk = _Check(f"{key.name}[{shape}] <= {bound}")
            observed = 0
            for start in range(0, samples, batch):
                m = min(batch, samples - start)
                anchors = rng.uniform(lo, hi, size=(m, dim))
                rot = None
                if kind == ORIENTED_SQUARE:
                    rot = rng.uniform(0, math.pi / 2, m)
                elif kind == ORIENTED_CUBE:
                    q = rng.normal(size=(m, 4))
                    rot = q / np.linalg.norm(q, axis=1, keepdims=True)
                counts = overlap_counts_batch(cs, kind, size, anchors, rot)
                i = int(np.argmax(counts))
                observed = max(observed, int(counts[i]))
                ex = {"anchor": anchors[i].tolist(), "count": int(counts[i])}
                if rot is not None:
                    ex["rotation"] = np.atleast_1d(rot[i]).tolist()
                chk.result.checked += m - 1
                chk(int(counts[i]) <= bound, ex)
            chk.result.detail = {
                "observed_max": observed,
                "implemented_bound": bound,
                "published_bound": overlap_bound(key, "published"),
                "cover_areas": len(cs),
            }
            results.append(chk.result)
    return Report("overlap-bounds", seed, results)


def psl_exhaustive(seed: int = 0, samples: int | None = None) -> Report:
    """n = 4, t = 1: every faulty position, every scripted bit assignment, every correct input.

    Silence is stored as the default bit, so enumerating bits covers it.
    """
    P = [0, 1, 2, 3]
    agree, valid, rounds = _Check("agreement"), _Check("validity"), _Check("two gathering rounds")
    for F in P:
        correct = [p for p in P if p != F]
        slots = [(F, r, ()) for r in correct]
        slots += [(F, r, (j,)) for j in correct for r in correct]
        for bits in itertools.product((0, 1), repeat=len(slots)):
            beh = Behavior("scripted", 0, dict(zip(slots, bits)))
            for inp in itertools.product((0, 1), repeat=3):
                inputs = dict(zip(correct, inp))
                inputs[F] = 0
                res = psl_run(ConsensusInstance(P, 1, inputs, {F}, beh), engine="exact", record=False)
                dec = {res.decisions[p] for p in correct}
                ex = {"faulty": F, "inputs": inputs, "script": [list(s) + [b] for s, b in zip(slots, bits)]}
                agree(len(dec) == 1, ex)
                valid(len(set(inp)) > 1 or dec == {inp[0]}, ex)
                rounds(len(res.trace) == 2, ex)
    return Report("psl-exhaustive", seed, [agree.result, valid.result, rounds.result])


def end_to_end_scenarios(seed: int = 0, samples: int = 40) -> list[Scenario]:
    """Mixed BASIC/GENERIC scenarios with adversarial placements."""
    rng = np.random.default_rng(seed)
    policies = ["equivocate", "random", "silent"]
    out = []
    for i in range(samples):
        s = int(rng.integers(0, 2**31))
        beh = Behavior(policies[i % 3], s)
        inputs = {"pattern": "random", "seed": s}
        if i % 2 == 0:
            M = 1 + (i // 2) % 2
            fm = FaultModel("square", 1.0, M, "any")
            D = fm.diameter
            gen = PointGenerator(9 * M + 3, (0, 0), (8 * D * M, 8 * D), D + 0.7, s, per_cluster=3, cluster_radius=0.3)
            out.append(Scenario(fm, "basic", generator=gen, placement=PlacementStrategy("greedy-max-points"), behavior=beh, inputs=inputs))
        else:
            alignment = "any" if i % 4 == 1 else "axis"
            fm = FaultModel("square", 1.0, 1, alignment)
            gen = PointGenerator(80, (0, 0), (7, 7), 0.25, s)
            out.append(Scenario(fm, "generic", generator=gen, placement=PlacementStrategy("greedy-max-leaders"), behavior=beh, inputs=inputs))
    return out


def end_to_end(seed: int = 0, samples: int = 40) -> Report:
    verdict, bound, rounds = _Check("verdicts hold"), _Check("message bound"), _Check("round count")
    refused = 0
    for sc in end_to_end_scenarios(seed, samples):
        try:
            rec = execute(sc)
        except Refusal:
            refused += 1
            continue
        ex = {"scenario": sc.to_dict()}
        verdict(all(rec.verdicts.values()), ex)
        bound(verify_message_bound(rec), ex)
        rounds(rec.metrics.rounds == rec.metrics.t + 2, ex)
    verdict.result.detail = {"refused": refused}
    return Report("end-to-end", seed, [verdict.result, bound.result, rounds.result])


_RUNNERS = {
    "approx-square": approx_square,
    "approx-circle": approx_circle,
    "approx-cube": approx_cube,
    "overlap-bounds": overlap_bounds,
    "psl-exhaustive": psl_exhaustive,
    "end-to-end": end_to_end,
}


def run_suite(name: str, seed: int = 0, samples: int | None = None) -> Report:
    if name not in _RUNNERS:
        raise KeyError(f"unknown suite {name!r}; expected one of {SUITES}")
    t0 = time.perf_counter()
    fn = _RUNNERS[name]
    report = fn(seed) if samples is None else fn(seed, samples)
    report.seconds = time.perf_counter() - t0
    return report
