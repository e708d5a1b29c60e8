"""BASIC and GENERIC geoconsensus: leader selection, precondition checks, runs.

Both protocols pick leaders without communicating, let the leaders agree with
EIG, then have the leaders broadcast the outcome.  A correct non-leader adopts
a value once enough leader slots vouch for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .consensus import (
    DEFAULT_BIT,
    Behavior,
    BehaviorSpec,
    ConsensusInstance,
    RoundTrace,
    apply_behavior,
    psl_run,
)
from .covering import (
    CoverSet,
    OverlapKey,
    greedy_cover,
    overlap_bound,
    resolve_key,
)
from .geometry import (
    AXIS_CUBE,
    AXIS_SQUARE,
    CIRCLE,
    ORIENTED_CUBE,
    ORIENTED_SQUARE,
    SPHERE,
    PointSet,
    Shape,
    covered_indices,
    shape_diameter,
)

FAULT_SHAPES = ("square", "circle", "cube", "sphere")
EXACT_INDEPENDENT_SET_MAX = 20

_FAULT_KIND = {
    ("square", "axis"): AXIS_SQUARE,
    ("square", "any"): ORIENTED_SQUARE,
    ("cube", "axis"): AXIS_CUBE,
    ("cube", "any"): ORIENTED_CUBE,
}
_COVER_KIND = {"square": AXIS_SQUARE, "circle": CIRCLE, "cube": AXIS_CUBE, "sphere": SPHERE}


class Refusal(Exception):
    """A theorem hypothesis does not hold for this input; nothing was run."""

    def __init__(self, reason: str, diagnostics: dict | None = None):
        super().__init__(reason)
        self.reason = reason
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FaultModel:
    """The fault template known to every process: shape, size, count M.

    ``ratio`` is the fault size divided by the cover-area size and ``cover``
    the cover shape; both only matter to GENERIC.
    """

    shape: str
    size: float
    M: int = 1
    alignment: str = "any"
    cover: str | None = None
    ratio: float = 1.0

    def __post_init__(self):
        if self.shape not in FAULT_SHAPES:
            raise ValueError(f"unknown fault shape {self.shape!r}")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if not self.size > 0:
            raise ValueError("fault size must be positive")
        if self.alignment not in ("axis", "any"):
            raise ValueError("alignment must be 'axis' or 'any'")
        if self.cover is None:
            object.__setattr__(self, "cover", self.shape)
        if self.cover not in FAULT_SHAPES:
            raise ValueError(f"unknown cover shape {self.cover!r}")

    @property
    def dim(self) -> int:
        return 3 if self.shape in ("cube", "sphere") else 2

    @property
    def kind(self) -> str:
        return _FAULT_KIND.get((self.shape, self.alignment), self.shape)

    @property
    def cover_kind(self) -> str:
        return _COVER_KIND[self.cover]

    @property
    def cover_size(self) -> float:
        return self.size / self.ratio

    @property
    def diameter(self) -> float:
        return shape_diameter(self.template((0.0,) * self.dim))

    @property
    def key(self) -> OverlapKey:
        return resolve_key(self.shape, self.ratio, self.alignment, self.cover)

    def template(self, anchor, rotation=0.0) -> Shape:
        return Shape(self.kind, self.size, tuple(anchor), rotation)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "size": self.size,
            "M": self.M,
            "alignment": self.alignment,
            "cover": self.cover,
            "ratio": self.ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultModel":
        return cls(
            d["shape"],
            float(d["size"]),
            int(d.get("M", 1)),
            d.get("alignment", "any"),
            d.get("cover"),
            float(d.get("ratio", 1.0)),
        )


@dataclass
class LeaderSet:
    """Leaders in slot order.

    For ``per-cover-area`` sets slot ``j`` belongs to cover area ``areas[j]``
    and the same process may fill several slots.
    """

    leaders: list[int]
    origin: str
    areas: list[int] = field(default_factory=list)

    @property
    def distinct(self) -> list[int]:
        return list(dict.fromkeys(self.leaders))

    def slots(self, pid: int) -> int:
        return self.leaders.count(pid)

    def to_dict(self) -> dict:
        d = {"leaders": self.leaders, "origin": self.origin}
        if self.areas:
            d["areas"] = self.areas
        return d


@dataclass
class PreconditionCheck:
    ok: bool
    diagnostics: dict

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class ProtocolOutcome:
    protocol: str
    decisions: dict[int, int | None]
    rounds_used: int
    messages_total: int
    verdicts: dict[str, bool]
    leaders: LeaderSet
    faulty: list[int]
    t: int
    threshold: int
    psl_trace: list[RoundTrace]
    broadcast_messages: int
    cover_size: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def messages_per_round(self) -> list[int]:
        return [rt.message_count for rt in self.psl_trace] + [self.broadcast_messages]


def compute_verdicts(decisions: Mapping[int, int | None], inputs: Mapping[int, int], correct: Sequence[int]) -> dict[str, bool]:
    """Agreement, validity and termination over the correct processes only."""
    decided = [decisions.get(p) for p in correct]
    termination = all(d is not None for d in decided)
    values = {d for d in decided if d is not None}
    agreement = termination and len(values) <= 1
    correct_inputs = {inputs.get(p, DEFAULT_BIT) for p in correct}
    if len(correct_inputs) == 1:
        (v,) = correct_inputs
        validity = all(d == v for d in decided)
    else:
        validity = True
    return {"agreement": agreement, "validity": validity, "termination": termination}


def faulty_set(ps: PointSet, placements: Sequence[Shape]) -> set[int]:
    out: set[int] = set()
    for f in placements:
        out.update(covered_indices(f, ps))
    return out


# -- BASIC -------------------------------------------------------------------


def select_leaders_basic(ps: PointSet, D: float) -> LeaderSet:
    """Greedy maximal set of processes pairwise farther apart than ``D``.

    Candidates are scanned in lexicographic coordinate order and admitted when
    they are more than ``D`` from every leader admitted so far.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    arr = ps.array
    chosen: list[int] = []
    for i in sorted(range(len(ps)), key=lambda i: ps[i]):
        if not chosen or np.min(np.linalg.norm(arr[chosen] - arr[i], axis=1)) > D:
            chosen.append(i)
    return LeaderSet(chosen, "distance-D")


def max_spread_subset(ps: PointSet, D: float) -> list[int]:
    """Largest subset with pairwise distance > D (exact; exponential in the worst case)."""
    g = nx.Graph()
    g.add_nodes_from(range(len(ps)))
    arr = ps.array
    for i in range(len(ps)):
        d = np.linalg.norm(arr[i + 1 :] - arr[i], axis=1)
        g.add_edges_from((i, i + 1 + int(j)) for j in np.flatnonzero(d > D))
    clique, _ = nx.max_weight_clique(g, weight=None)
    return sorted(clique)


def check_basic_precondition(ps: PointSet, fm: FaultModel) -> PreconditionCheck:
    """At least 9M + 3 processes pairwise farther apart than the fault diameter."""
    D = fm.diameter
    required = 9 * fm.M + 3
    witness = select_leaders_basic(ps, D).leaders
    exact = False
    if len(witness) < required and len(ps) <= EXACT_INDEPENDENT_SET_MAX:
        witness = max_spread_subset(ps, D)
        exact = True
    ok = len(witness) >= required
    return PreconditionCheck(
        ok,
        {
            "D": D,
            "required": required,
            "found": len(witness),
            "witness": witness,
            "exact": exact or ok,
        },
    )


def _broadcast(ps, leaders: LeaderSet, psl_decisions, faulty, inst_behavior: ConsensusInstance, threshold):
    """Leaders send their decision to every non-leader; returns (decisions, envelopes)."""
    leader_ids = set(leaders.leaders)
    senders = leaders.distinct
    decisions: dict[int, int | None] = {}
    envelopes = 0
    for r in range(len(ps)):
        if r in leader_ids:
            continue
        votes = [0, 0]
        for s in senders:
            honest = psl_decisions[s]
            if s in faulty:
                bit = apply_behavior(inst_behavior.policy(s), s, r, honest, "decide")
                if bit is None:
                    continue
            else:
                bit = honest
            envelopes += 1
            votes[bit] += leaders.slots(s)
        if r in faulty:
            continue
        ok = [v for v in (0, 1) if votes[v] >= threshold]
        decisions[r] = ok[0] if len(ok) == 1 else None
    return decisions, envelopes


def _run(protocol, ps, leaders, t, threshold, faulty, inputs, behavior, engine, cover_size=None, diagnostics=None):
    participants = leaders.distinct
    inst = ConsensusInstance(
        participants,
        t,
        {p: inputs.get(p, DEFAULT_BIT) for p in participants},
        frozenset(faulty & set(participants)),
        behavior,
    )
    psl = psl_run(inst, engine=engine)
    decisions = {p: psl.decisions[p] for p in participants if p not in faulty}
    adopted, envelopes = _broadcast(ps, leaders, psl.decisions, faulty, inst, threshold)
    decisions.update(adopted)
    decisions = dict(sorted(decisions.items()))
    correct = [p for p in range(len(ps)) if p not in faulty]
    psl_messages = sum(rt.message_count for rt in psl.trace)
    return ProtocolOutcome(
        protocol=protocol,
        decisions=decisions,
        rounds_used=len(psl.trace) + 1,
        messages_total=psl_messages + envelopes,
        verdicts=compute_verdicts(decisions, inputs, correct),
        leaders=leaders,
        faulty=sorted(faulty),
        t=t,
        threshold=threshold,
        psl_trace=psl.trace,
        broadcast_messages=envelopes,
        cover_size=cover_size,
        diagnostics=diagnostics or {},
    )


def _check_placements(fm: FaultModel, placements: Sequence[Shape]) -> None:
    if len(placements) != fm.M:
        raise ValueError(f"expected {fm.M} placements, got {len(placements)}")
    for f in placements:
        if f.kind != fm.kind or not math.isclose(f.size, fm.size):
            raise ValueError(f"placement {f} does not match the fault template {fm.kind} size {fm.size}")


def run_basic(
    ps: PointSet,
    fm: FaultModel,
    placements: Sequence[Shape],
    inputs: Mapping[int, int],
    behavior: BehaviorSpec = Behavior(),
    engine: str = "auto",
) -> ProtocolOutcome:
    _check_placements(fm, placements)
    check = check_basic_precondition(ps, fm)
    if not check:
        raise Refusal(f"fewer than {9 * fm.M + 3} processes pairwise farther apart than D", check.diagnostics)
    faulty = faulty_set(ps, placements)
    leaders = select_leaders_basic(ps, fm.diameter)
    if len(leaders.leaders) < 3 * fm.M + 1:
        raise Refusal("leader set smaller than 3M + 1", {"leaders": len(leaders.leaders)})
    return _run(
        "basic", ps, leaders, fm.M, 2 * fm.M + 1, faulty, inputs, behavior, engine, diagnostics=check.diagnostics
    )


# -- GENERIC -----------------------------------------------------------------


def select_leaders_generic(cs: CoverSet, ps: PointSet) -> LeaderSet:
    """One leader per cover area: lowest y, ties broken by lowest x (then z)."""
    leaders, areas = [], []
    for j, members in enumerate(cs.members):
        if not members:
            continue
        order = [1, 0] + list(range(2, ps.dim))
        best = min(members, key=lambda i: tuple(ps[i][a] for a in order))
        leaders.append(best)
        areas.append(j)
    return LeaderSet(leaders, "per-cover-area", areas)


def check_generic_precondition(cs: CoverSet, fm: FaultModel) -> PreconditionCheck:
    """At least (3 n(F) + 1) M cover areas."""
    key = fm.key
    n_f = overlap_bound(key, table="implemented")
    required = (3 * n_f + 1) * fm.M
    return PreconditionCheck(
        len(cs) >= required,
        {
            "key": key.name,
            "n_F": n_f,
            "n_F_published": overlap_bound(key, table="published"),
            "required": required,
            "areas": len(cs),
        },
    )


def tolerance_bound(fm: FaultModel, key: OverlapKey | str | None = None, table: str = "published") -> int:
    """(2 n(F) + 1) M: the number subtracted from N in the tolerated-fault bound."""
    key = fm.key if key is None else key
    return (2 * overlap_bound(key, table) + 1) * fm.M


def generic_cover(ps: PointSet, fm: FaultModel) -> CoverSet:
    return greedy_cover(ps, fm.cover_kind, fm.cover_size)


def run_generic(
    ps: PointSet,
    fm: FaultModel,
    placements: Sequence[Shape],
    inputs: Mapping[int, int],
    behavior: BehaviorSpec = Behavior(),
    engine: str = "auto",
    cover: CoverSet | None = None,
) -> ProtocolOutcome:
    _check_placements(fm, placements)
    cs = generic_cover(ps, fm) if cover is None else cover
    check = check_generic_precondition(cs, fm)
    if not check:
        raise Refusal(f"cover has {len(cs)} areas, need {check.diagnostics['required']}", check.diagnostics)
    n_f = check.diagnostics["n_F"]
    t = n_f * fm.M
    leaders = select_leaders_generic(cs, ps)
    if len(leaders.distinct) < 3 * t + 1:
        raise Refusal(
            "shared leaders leave fewer than 3t + 1 distinct PSL participants",
            dict(check.diagnostics, distinct_leaders=len(leaders.distinct), t=t),
        )
    faulty = faulty_set(ps, placements)
    return _run(
        "generic", ps, leaders, t, t + 1, faulty, inputs, behavior, engine, cover_size=len(cs), diagnostics=check.diagnostics
    )
