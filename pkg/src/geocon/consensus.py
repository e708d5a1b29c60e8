"""Oral-message Byzantine agreement by exponential information gathering (EIG).

Every participant keeps a tree indexed by paths of distinct participant ids.
In round ``k`` each participant relays, for every level ``k-1`` path not
containing itself, the value it stored there; the receiver files it under the
path extended by the sender.  After ``t + 1`` rounds the tree is resolved
bottom-up by strict majority.

Two engines compute the same decisions:

``exact``
    Materializes every tree and every relayed value.  Its cost grows like
    ``n**(t+2)``, so it is meant for small instances and for cross-checking.
``collapsed``
    Evaluates stored values lazily from their definition and stops resolving
    at any path whose last relay is correct: with ``n >= 3t + 1`` and at most
    ``t`` faulty participants, such a node resolves to its stored value at
    every participant.  Only paths made entirely of faulty ids are expanded,
    which keeps large ``t`` tractable.  Requires at most ``t`` faulty
    participants.  Its trace counts an envelope for every sender that is not
    wholly silent, so scripted per-message silences make it an upper bound.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Union

DEFAULT_BIT = 0
EXACT_ENTRY_LIMIT = 300_000

SILENT = "silent"
RANDOM = "random"
EQUIVOCATE = "equivocate"
SCRIPTED = "scripted"
POLICIES = (SILENT, RANDOM, EQUIVOCATE, SCRIPTED)


class PreconditionError(ValueError):
    """The instance violates n >= 3t + 1 or another structural requirement."""


@dataclass(frozen=True)
class Behavior:
    """How a faulty process chooses the bits it sends.

    ``scripted`` looks up ``script[(sender, receiver, path)]``; a missing key
    means the honest value is sent, ``None`` means silence.  ``path`` is the
    relayed EIG path (a tuple, empty in round 1) or the string ``"decide"``
    for the decision broadcast of the geoconsensus protocols.
    """

    kind: str = EQUIVOCATE
    seed: int = 0
    script: Mapping = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown behavior {self.kind!r}; expected one of {POLICIES}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.script:
            d["script"] = [
                {"sender": s, "receiver": r, "path": list(p) if isinstance(p, tuple) else p, "bit": b}
                for (s, r, p), b in sorted(self.script.items(), key=lambda kv: repr(kv[0]))
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Behavior":
        script = {}
        for e in d.get("script", []):
            path = e["path"]
            path = tuple(path) if isinstance(path, list) else path
            script[(e["sender"], e["receiver"], path)] = e["bit"]
        return cls(d.get("kind", EQUIVOCATE), d.get("seed", 0), script)


def _hash_bit(*key) -> int:
    return hashlib.blake2b(repr(key).encode(), digest_size=1).digest()[0] & 1


def apply_behavior(policy: Behavior, sender: int, receiver: int, honest_msg: int, path=()) -> int | None:
    """Bit a faulty ``sender`` sends to ``receiver`` in place of ``honest_msg``; None is silence."""
    if policy.kind == SILENT:
        return None
    if policy.kind == RANDOM:
        return _hash_bit(policy.seed, sender, receiver, path)
    if policy.kind == EQUIVOCATE:
        return receiver % 2
    return policy.script.get((sender, receiver, path), honest_msg)


BehaviorSpec = Union[Behavior, Mapping[int, Behavior]]


@dataclass
class ConsensusInstance:
    participants: list[int]
    t: int
    inputs: Mapping[int, int]
    faulty: frozenset = frozenset()
    behavior: BehaviorSpec = field(default_factory=Behavior)

    def __post_init__(self):
        self.participants = list(self.participants)
        self.faulty = frozenset(self.faulty)

    def policy(self, pid: int) -> Behavior:
        if isinstance(self.behavior, Behavior):
            return self.behavior
        return self.behavior.get(pid, Behavior())

    def validate(self) -> None:
        n = len(self.participants)
        if len(set(self.participants)) != n:
            raise PreconditionError("participants must be distinct")
        if self.t < 0:
            raise PreconditionError("t must be non-negative")
        if n < 3 * self.t + 1:
            raise PreconditionError(f"{n} participants cannot tolerate t={self.t}; need at least {3 * self.t + 1}")
        if not self.faulty <= set(self.participants):
            raise PreconditionError("faulty ids must be participants")
        for p in self.participants:
            if self.inputs.get(p, DEFAULT_BIT) not in (0, 1):
                raise PreconditionError(f"input of {p} is not a bit")


class Message(NamedTuple):
    round: int
    sender: int
    receiver: int
    path: tuple | None
    bit: int | None


@dataclass
class RoundTrace:
    """One synchronous round.

    ``envelopes`` are the (sender, receiver) pairs that carried anything this
    round; each counts as one message.  ``entries`` is the number of relayed
    (path, bit) items.  ``messages`` itemizes the entries when the exact
    engine recorded them.
    """

    index: int
    envelopes: list[tuple[int, int]]
    entries: int
    messages: list[Message] = field(default_factory=list)

    @property
    def message_count(self) -> int:
        return len(self.envelopes)


@dataclass
class EigTree:
    owner: int
    participants: tuple[int, ...]
    depth: int
    nodes: dict = field(default_factory=dict)

    def children(self, path: tuple) -> list[tuple]:
        if len(path) >= self.depth:
            return []
        return [path + (k,) for k in self.participants if k not in path]


def majority(bits: Iterable[int], default: int = DEFAULT_BIT) -> int:
    ones = zeros = 0
    for b in bits:
        if b:
            ones += 1
        else:
            zeros += 1
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return default


def resolve(tree: EigTree, path: tuple = (), default: int = DEFAULT_BIT) -> int:
    """Bottom-up strict-majority value of the subtree rooted at ``path``."""
    kids = tree.children(path)
    if not kids:
        return tree.nodes.get(path, default)
    return majority((resolve(tree, k, default) for k in kids), default)


class PslResult(NamedTuple):
    decisions: dict[int, int]
    trace: list[RoundTrace]


def _ordered_paths(participants, length):
    levels = [[()]]
    for _ in range(length):
        levels.append([p + (k,) for p in levels[-1] for k in participants if k not in p])
    return levels


def _run_exact(inst: ConsensusInstance, record: bool) -> tuple[PslResult, dict[int, EigTree]]:
    P = inst.participants
    depth = inst.t + 1
    faulty = inst.faulty
    trees = {p: EigTree(p, tuple(P), depth) for p in P}
    nodes = {p: trees[p].nodes for p in P}
    for p in P:
        nodes[p][()] = inst.inputs.get(p, DEFAULT_BIT)
    levels = _ordered_paths(P, depth - 1)
    trace = []
    for rnd in range(1, depth + 1):
        envelopes = []
        messages = []
        entries = 0
        for s in P:
            relay = [path for path in levels[rnd - 1] if s not in path]
            mine = nodes[s]
            is_faulty = s in faulty
            policy = inst.policy(s) if is_faulty else None
            for r in P:
                target = nodes[r]
                if r == s:
                    for path in relay:
                        target[path + (s,)] = mine[path]
                    continue
                sent = 0
                for path in relay:
                    bit = mine[path]
                    if is_faulty:
                        bit = apply_behavior(policy, s, r, bit, path)
                        if bit is None:
                            target[path + (s,)] = DEFAULT_BIT
                            continue
                    target[path + (s,)] = bit
                    sent += 1
                    if record:
                        messages.append(Message(rnd, s, r, path, bit))
                if sent:
                    envelopes.append((s, r))
                    entries += sent
        trace.append(RoundTrace(rnd, envelopes, entries, messages))
    decisions = {p: resolve(trees[p]) for p in P}
    return PslResult(decisions, trace), trees


def _run_collapsed(inst: ConsensusInstance) -> PslResult:
    P = inst.participants
    depth = inst.t + 1
    faulty = inst.faulty
    inputs = inst.inputs
    memo: dict = {}

    def val(q, path):
        key = (q, path)
        if key in memo:
            return memo[key]
        j = path[-1]
        prefix = path[:-1]
        honest = inputs.get(j, DEFAULT_BIT) if not prefix else val(j, prefix)
        if j == q or j not in faulty:
            out = honest
        else:
            out = apply_behavior(inst.policy(j), j, q, honest, prefix)
            if out is None:
                out = DEFAULT_BIT
        memo[key] = out
        return out

    # A correct child's value is the same at every participant, so the
    # resolution of an all-faulty path does not depend on who resolves it.
    resolved: dict = {}

    def res(path):
        if path in resolved:
            return resolved[path]
        ones = zeros = 0
        pending = []
        for k in P:
            if k in path:
                continue
            if k in faulty:
                pending.append(k)
            elif val(k, path) if path else inputs.get(k, DEFAULT_BIT):
                ones += 1
            else:
                zeros += 1
        # Faulty subtrees only matter if they can still swing the majority.
        if abs(ones - zeros) <= len(pending):
            for k in pending:
                if res(path + (k,)):
                    ones += 1
                else:
                    zeros += 1
        out = 1 if ones > zeros else 0 if zeros > ones else DEFAULT_BIT
        resolved[path] = out
        return out

    root = res(())
    decisions = {p: root for p in P}
    n = len(P)
    trace = []
    for rnd in range(1, depth + 1):
        per_envelope = math.perm(n - 1, rnd - 1)
        envelopes = [
            (s, r)
            for s in P
            if not (s in faulty and inst.policy(s).kind == SILENT)
            for r in P
            if r != s
        ]
        trace.append(RoundTrace(rnd, envelopes, len(envelopes) * per_envelope))
    return PslResult(decisions, trace)


def exact_entry_estimate(n: int, t: int) -> int:
    return n * n * math.perm(n - 1, t) if n > t else 0


def psl_run(inst: ConsensusInstance, engine: str = "auto", record: bool = True) -> PslResult:
    """Run t+1 EIG rounds and return every participant's decision plus the trace.

    Faulty participants get a decision too (their own honest resolution);
    callers apply their behavior when those values are sent on.
    """
    inst.validate()
    n_faulty = len(inst.faulty)
    if engine == "auto":
        small = exact_entry_estimate(len(inst.participants), inst.t) <= EXACT_ENTRY_LIMIT
        engine = "exact" if small or n_faulty > inst.t else "collapsed"
    if engine == "exact":
        if exact_entry_estimate(len(inst.participants), inst.t) > 50 * EXACT_ENTRY_LIMIT:
            raise PreconditionError("instance too large for the exact engine")
        return _run_exact(inst, record)[0]
    if engine == "collapsed":
        if n_faulty > inst.t:
            raise PreconditionError(
                f"collapsed engine needs at most t={inst.t} faulty participants, got {n_faulty}"
            )
        return _run_collapsed(inst)
    raise ValueError(f"unknown engine {engine!r}")


def eig_trees(inst: ConsensusInstance) -> dict[int, EigTree]:
    """Fully populated trees after the gathering rounds (exact engine)."""
    inst.validate()
    return _run_exact(inst, record=False)[1]


def trace_to_jsonl(trace: list[RoundTrace]) -> str:
    """One JSON object per message.  Rounds without itemized entries emit one line per envelope."""
    lines = []
    for rt in trace:
        if rt.messages:
            for m in rt.messages:
                lines.append(
                    json.dumps(
                        {"round": m.round, "sender": m.sender, "receiver": m.receiver, "path": list(m.path), "bit": m.bit},
                        sort_keys=True,
                    )
                )
        else:
            for s, r in rt.envelopes:
                lines.append(
                    json.dumps({"round": rt.index, "sender": s, "receiver": r, "path": None, "bit": None}, sort_keys=True)
                )
    return "\n".join(lines) + ("\n" if lines else "")
