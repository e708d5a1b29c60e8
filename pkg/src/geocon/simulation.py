"""Scenarios, adversaries and run records.

A ``Scenario`` is a JSON-friendly description of one experiment.  ``execute``
turns it into a ``RunRecord``: points, cover (GENERIC), leaders, adversarial
placements, faulty set, protocol run, metrics.  Everything random is drawn
from per-scenario seeds, so a scenario always produces the same record.
"""

from __future__ import annotations

import json
import math
from itertools import combinations, product
from dataclasses import dataclass, field

import numpy as np

from .consensus import Behavior, trace_to_jsonl
from .covering import ORACLE_MAX_POINTS, _circle_centers, coverage_number
from .geometry import (
    AXIS_CUBE,
    AXIS_SQUARE,
    CIRCLE,
    EPS_GEOM,
    ORIENTED_CUBE,
    ORIENTED_SQUARE,
    SPHERE,
    GeometryError,
    PointSet,
    Shape,
    axis_angle_quaternion,
    contains_many,
    enclosing_rect,
    quaternion_matrix,
    rotation_2d,
)
from .protocols import (
    FaultModel,
    LeaderSet,
    ProtocolOutcome,
    Refusal,
    generic_cover,
    run_basic,
    run_generic,
    select_leaders_basic,
    select_leaders_generic,
)

PROTOCOLS = ("basic", "generic")
PLACEMENTS = ("random", "greedy-max-points", "greedy-max-leaders", "scripted")
INPUT_PATTERNS = ("all-zero", "all-one", "random", "split")
ROTATION_STEP = math.pi / 36
RETRY_FACTOR = 2000


# -- point generation ----------------------------------------------------------


@dataclass(frozen=True)
class PointGenerator:
    """Uniform points in a box, pairwise farther apart than ``min_sep``.

    With ``per_cluster > 1`` each generated site becomes a cluster: the site
    plus ``per_cluster - 1`` extra points within ``cluster_radius`` of it.
    """

    n: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    min_sep: float = 0.0
    seed: int = 0
    per_cluster: int = 1
    cluster_radius: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lo": list(self.lo),
            "hi": list(self.hi),
            "min_sep": self.min_sep,
            "seed": self.seed,
            "per_cluster": self.per_cluster,
            "cluster_radius": self.cluster_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PointGenerator":
        return cls(
            int(d["n"]),
            tuple(float(v) for v in d["lo"]),
            tuple(float(v) for v in d["hi"]),
            float(d.get("min_sep", 0.0)),
            int(d.get("seed", 0)),
            int(d.get("per_cluster", 1)),
            float(d.get("cluster_radius", 0.0)),
        )


def generate_points(gen: PointGenerator) -> PointSet:
    """Rejection-sample ``gen.n`` sites; raises ValueError if the retry cap is hit."""
    if gen.n < 1:
        raise ValueError("need at least one point")
    if len(gen.lo) != len(gen.hi) or len(gen.lo) not in (2, 3):
        raise ValueError("lo/hi must both be 2-D or 3-D")
    lo, hi = np.array(gen.lo), np.array(gen.hi)
    if np.any(hi < lo):
        raise ValueError("hi must not be below lo")
    rng = np.random.default_rng(gen.seed)
    sites: list[np.ndarray] = []
    budget = RETRY_FACTOR * gen.n
    while len(sites) < gen.n:
        if budget == 0:
            raise ValueError(
                f"could not place {gen.n} points with separation > {gen.min_sep} in "
                f"{list(gen.lo)}..{list(gen.hi)} (placed {len(sites)})"
            )
        budget -= 1
        p = rng.uniform(lo, hi)
        if sites and np.min(np.linalg.norm(np.array(sites) - p, axis=1)) <= gen.min_sep:
            continue
        sites.append(p)
    pts = [tuple(float(v) for v in p) for p in sites]
    if gen.per_cluster > 1:
        extra = []
        for p in sites:
            for _ in range(gen.per_cluster - 1):
                u = rng.normal(size=len(p))
                u /= np.linalg.norm(u)
                r = gen.cluster_radius * rng.uniform() ** (1 / len(p))
                extra.append(tuple(float(v) for v in p + r * u))
        pts.extend(extra)
    return PointSet(pts)


# -- adversarial placement ---------------------------------------------------


@dataclass
class PlacementStrategy:
    kind: str = "greedy-max-leaders"
    seed: int = 0
    shapes: list[Shape] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in PLACEMENTS:
            raise ValueError(f"unknown placement strategy {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.shapes:
            d["shapes"] = [s.to_dict() for s in self.shapes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementStrategy":
        return cls(d.get("kind", "greedy-max-leaders"), int(d.get("seed", 0)), [Shape.from_dict(s) for s in d.get("shapes", [])])


def _rotations(kind: str) -> list:
    if kind == ORIENTED_SQUARE:
        return [k * ROTATION_STEP for k in range(18)]
    if kind == ORIENTED_CUBE:
        rots = [axis_angle_quaternion((0, 0, 1), k * ROTATION_STEP) for k in range(18)]
        rots += [axis_angle_quaternion(ax, k * math.pi / 12) for ax in ((1, 0, 0), (0, 1, 0)) for k in range(1, 6)]
        rots.append(axis_angle_quaternion((1, -1, 0), math.atan(math.sqrt(2))))
        return rots
    return [0.0]


def _axes(kind: str, rot) -> np.ndarray:
    if kind == ORIENTED_SQUARE:
        return rotation_2d(rot)
    if kind == ORIENTED_CUBE:
        return quaternion_matrix(rot)
    return np.eye(3 if kind == AXIS_CUBE else 2)


def _best_box(arr: np.ndarray, w: np.ndarray, kind: str, size: float) -> tuple[float, Shape]:
    """Best single box over every discrete rotation.

    Any box covering a set S can slide until members of S touch each lower
    face, so anchors drawn from target coordinates (in the rotated frame)
    are exhaustive for that rotation.
    """
    eps = 0.0 if kind in (AXIS_SQUARE, AXIS_CUBE) else EPS_GEOM
    targets = np.flatnonzero(w > 0)
    best = (-1.0, None)
    for rot in _rotations(kind):
        axes = _axes(kind, rot)
        local = arr @ axes
        cands, member = [], []
        for a in range(arr.shape[1]):
            c = np.unique(local[targets, a])
            cands.append(c)
            x = local[:, a][None, :]
            member.append(((x >= c[:, None] - eps) & (x <= c[:, None] + size + eps)).astype(float))
        if arr.shape[1] == 2:
            counts = member[0] @ (member[1] * w).T
        else:
            counts = np.einsum("ip,jp,kp,p->ijk", member[0], member[1], member[2], w, optimize=True)
        idx = np.unravel_index(int(np.argmax(counts)), counts.shape)
        score = float(counts[idx])
        if score > best[0] + 1e-9:
            a_local = np.array([cands[a][i] for a, i in enumerate(idx)])
            best = (score, Shape(kind, size, tuple(axes @ a_local), rot))
    return best


def _ball_centers(arr: np.ndarray, r: float) -> np.ndarray:
    """Candidate centers: balls pinned by target points (exact in 2-D, sampled in 3-D)."""
    if arr.shape[1] == 2:
        return np.array(_circle_centers(arr, r))
    dirs = np.vstack([np.vstack([np.eye(3), -np.eye(3)]), np.array(list(product((-1, 1), repeat=3))) / math.sqrt(3)])
    out = [arr] + [arr - r * d for d in dirs]
    for i, j in combinations(range(len(arr)), 2):
        if np.linalg.norm(arr[i] - arr[j]) <= 2 * r:
            out.append(((arr[i] + arr[j]) / 2)[None, :])
    return np.vstack(out)


def _best_ball(arr: np.ndarray, w: np.ndarray, kind: str, size: float) -> tuple[float, Shape]:
    r = size / 2
    targets = arr[w > 0]
    centers = _ball_centers(targets, r)
    d2 = ((centers[:, None, :] - arr[None, :, :]) ** 2).sum(axis=2)
    counts = (d2 <= (r + EPS_GEOM) ** 2).astype(float) @ w
    i = int(np.argmax(counts))
    return float(counts[i]), Shape(kind, size, tuple(float(v) for v in centers[i]))


def _random_shape(rng: np.random.Generator, ps: PointSet, fm: FaultModel) -> Shape:
    rect = enclosing_rect(ps)
    lo, hi = np.array(rect.lo), np.array(rect.hi)
    if fm.kind in (CIRCLE, SPHERE):
        c = rng.uniform(lo - fm.size / 2, hi + fm.size / 2)
        return Shape(fm.kind, fm.size, tuple(float(v) for v in c))
    rot = 0.0
    if fm.kind == ORIENTED_SQUARE:
        rot = float(rng.uniform(0, math.pi / 2))
    elif fm.kind == ORIENTED_CUBE:
        q = rng.normal(size=4)
        rot = tuple(float(v) for v in q / np.linalg.norm(q))
    axes = _axes(fm.kind, rot)
    # anchor so that a uniform center lands near the points
    center = rng.uniform(lo - fm.size / 2, hi + fm.size / 2)
    anchor = center - axes @ np.full(ps.dim, fm.size / 2)
    return Shape(fm.kind, fm.size, tuple(float(v) for v in anchor), rot)


def place_faults(
    ps: PointSet,
    fm: FaultModel,
    strat: PlacementStrategy,
    leaders: LeaderSet | None = None,
) -> list[Shape]:
    """M placements of the fault template.

    ``greedy-max-points`` places each area to cover the most not-yet-covered
    processes; ``greedy-max-leaders`` does the same over leader slots of
    ``leaders`` (a process leading two cover areas weighs two).
    """
    if ps.dim != fm.dim:
        raise GeometryError(f"{fm.shape} faults need {fm.dim}-D points")
    if strat.kind == "scripted":
        if len(strat.shapes) != fm.M:
            raise ValueError(f"scripted placement lists {len(strat.shapes)} shapes, M is {fm.M}")
        return list(strat.shapes)
    if strat.kind == "random":
        rng = np.random.default_rng(strat.seed)
        return [_random_shape(rng, ps, fm) for _ in range(fm.M)]
    arr = ps.array
    w = np.zeros(len(ps))
    if strat.kind == "greedy-max-leaders":
        if leaders is None:
            raise ValueError("greedy-max-leaders needs the leader set")
        for p in leaders.leaders:
            w[p] += 1
    else:
        w[:] = 1
    best_fn = _best_ball if fm.kind in (CIRCLE, SPHERE) else _best_box
    out = []
    for _ in range(fm.M):
        if not np.any(w > 0):
            w = np.ones(len(ps))
        _, shape = best_fn(arr, w, fm.kind, fm.size)
        out.append(shape)
        w[contains_many(shape, arr)] = 0
    return out


# -- scenarios -----------------------------------------------------------------


def make_inputs(spec, n: int) -> dict[int, int]:
    """Inputs from a pattern name, ``{"pattern": ..., "seed": ...}`` or ``{"explicit": {...}}``."""
    if isinstance(spec, str):
        spec = {"pattern": spec}
    if "explicit" in spec:
        given = {int(k): int(v) for k, v in spec["explicit"].items()}
        return {i: given.get(i, 0) for i in range(n)}
    pattern = spec.get("pattern", "all-one")
    if pattern == "all-zero":
        return {i: 0 for i in range(n)}
    if pattern == "all-one":
        return {i: 1 for i in range(n)}
    if pattern == "split":
        return {i: int(i >= n // 2) for i in range(n)}
    if pattern == "random":
        bits = np.random.default_rng(int(spec.get("seed", 0))).integers(0, 2, size=n)
        return {i: int(b) for i, b in enumerate(bits)}
    raise ValueError(f"unknown input pattern {pattern!r}")


@dataclass
class Scenario:
    fault: FaultModel
    protocol: str = "basic"
    points: list | None = None
    generator: PointGenerator | None = None
    placement: PlacementStrategy = field(default_factory=PlacementStrategy)
    behavior: Behavior = field(default_factory=Behavior)
    inputs: object = "all-one"
    engine: str = "auto"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if (self.points is None) == (self.generator is None):
            raise ValueError("give exactly one of points or generator")

    def build_points(self) -> PointSet:
        if self.points is not None:
            return PointSet(self.points)
        return generate_points(self.generator)

    def to_dict(self) -> dict:
        d = {
            "fault": self.fault.to_dict(),
            "protocol": self.protocol,
            "placement": self.placement.to_dict(),
            "behavior": self.behavior.to_dict(),
            "inputs": self.inputs,
            "engine": self.engine,
        }
        if self.points is not None:
            d["points"] = [list(p) for p in self.points]
        else:
            d["generator"] = self.generator.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            fault=FaultModel.from_dict(d["fault"]),
            protocol=d.get("protocol", "basic"),
            points=[tuple(p) for p in d["points"]] if "points" in d else None,
            generator=PointGenerator.from_dict(d["generator"]) if "generator" in d else None,
            placement=PlacementStrategy.from_dict(d.get("placement", {})),
            behavior=Behavior.from_dict(d.get("behavior", {})),
            inputs=d.get("inputs", "all-one"),
            engine=d.get("engine", "auto"),
        )


@dataclass
class Metrics:
    rounds: int
    messages_total: int
    messages_per_round: list[int]
    X: int
    N: int
    f: int
    t: int
    verdicts: dict[str, bool]
    cover_areas: int | None = None

    CSV_FIELDS = ("rounds", "messages_total", "X", "N", "f", "t", "cover_areas", "agreement", "validity", "termination")

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "messages_total": self.messages_total,
            "messages_per_round": self.messages_per_round,
            "X": self.X,
            "N": self.N,
            "f": self.f,
            "t": self.t,
            "verdicts": self.verdicts,
            "cover_areas": self.cover_areas,
        }

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d.get(k, self.verdicts.get(k)) for k in self.CSV_FIELDS]


@dataclass
class RunRecord:
    scenario: dict
    points: list
    placements: list[Shape]
    faulty: list[int]
    leaders: LeaderSet
    decisions: dict[int, int | None]
    metrics: Metrics
    outcome: ProtocolOutcome | None = None

    @property
    def verdicts(self) -> dict[str, bool]:
        return self.metrics.verdicts

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values()) and verify_message_bound(self)

    def to_dict(self, trace: bool = False) -> dict:
        d = {
            "status": "ok",
            "scenario": self.scenario,
            "points": self.points,
            "placements": [s.to_dict() for s in self.placements],
            "faulty": self.faulty,
            "leaders": self.leaders.to_dict(),
            "decisions": {str(k): v for k, v in self.decisions.items()},
            "verdicts": self.verdicts,
            "metrics": self.metrics.to_dict(),
            "message_bound": verify_message_bound(self),
        }
        if trace and self.outcome is not None:
            d["trace"] = [
                {"round": rt.index, "messages": rt.message_count, "entries": rt.entries, "envelopes": [list(e) for e in rt.envelopes]}
                for rt in self.outcome.psl_trace
            ]
            d["trace"].append({"round": len(self.outcome.psl_trace) + 1, "messages": self.outcome.broadcast_messages, "broadcast": True})
        return d

    def to_json(self, trace: bool = False) -> str:
        return json.dumps(self.to_dict(trace), sort_keys=True)

    def trace_jsonl(self) -> str:
        return trace_to_jsonl(self.outcome.psl_trace) if self.outcome else ""


def refusal_dict(sc: Scenario, err: Refusal) -> dict:
    return {"status": "refused", "scenario": sc.to_dict(), "reason": err.reason, "diagnostics": _jsonable(err.diagnostics)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def check_coverage(ps: PointSet, fm: FaultModel) -> None:
    """Refuse when M·3 fault areas or fewer can cover every process."""
    cov = coverage_number(ps, fm.kind, fm.size)
    if cov.value <= 3 * fm.M:
        raise Refusal(
            f"coverage number {cov.value} is at most 3M = {3 * fm.M}; consensus is impossible",
            {"coverage_number": cov.value, "exact": cov.exact, "M": fm.M, "oracle_limit": ORACLE_MAX_POINTS},
        )


def execute(sc: Scenario) -> RunRecord:
    ps = sc.build_points()
    fm = sc.fault
    if ps.dim != fm.dim:
        raise GeometryError(f"{fm.shape} faults need {fm.dim}-D points, got {ps.dim}-D")
    check_coverage(ps, fm)
    cover = None
    if sc.protocol == "generic":
        cover = generic_cover(ps, fm)
        leaders = select_leaders_generic(cover, ps)
    else:
        leaders = select_leaders_basic(ps, fm.diameter)
    placements = place_faults(ps, fm, sc.placement, leaders)
    inputs = make_inputs(sc.inputs, len(ps))
    if sc.protocol == "generic":
        out = run_generic(ps, fm, placements, inputs, sc.behavior, sc.engine, cover=cover)
    else:
        out = run_basic(ps, fm, placements, inputs, sc.behavior, sc.engine)
    metrics = Metrics(
        rounds=out.rounds_used,
        messages_total=out.messages_total,
        messages_per_round=out.messages_per_round,
        X=len(out.leaders.distinct),
        N=len(ps),
        f=len(out.faulty),
        t=out.t,
        verdicts=out.verdicts,
        cover_areas=out.cover_size,
    )
    return RunRecord(sc.to_dict(), ps.to_list(), placements, out.faulty, out.leaders, out.decisions, metrics, out)


def verify_message_bound(rec: RunRecord) -> bool:
    """Per consensus round at most X² messages, broadcast at most X·N, total at most (t+1)X² + XN."""
    m = rec.metrics
    if not m.messages_per_round:
        return False
    *psl, broadcast = m.messages_per_round
    X2 = m.X * m.X
    return (
        all(c <= X2 for c in psl)
        and broadcast <= m.X * m.N
        and m.messages_total == sum(m.messages_per_round)
        and m.messages_total <= (m.t + 1) * X2 + m.X * m.N
    )
