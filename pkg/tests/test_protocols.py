import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geocon.consensus import Behavior
from geocon.covering import CoverSet, overlap_count
from geocon.geometry import AXIS_SQUARE, PointSet, Shape, covered_indices
from geocon.protocols import (
    FaultModel,
    Refusal,
    check_basic_precondition,
    check_generic_precondition,
    compute_verdicts,
    generic_cover,
    run_basic,
    run_generic,
    select_leaders_basic,
    select_leaders_generic,
    tolerance_bound,
)

SQ = FaultModel("square", 1.0, 1, "any")
D = SQ.diameter
FAR = (1000.0, 1000.0)


def grid(k, cols, spacing):
    return PointSet([(spacing * (i % cols), spacing * (i // cols)) for i in range(k)])


# -- leader selection --------------------------------------------------------


def test_basic_leaders_examples():
    assert select_leaders_basic(PointSet([(0, 0), (2 * D, 0), (4 * D, 0)]), D).leaders == [0, 1, 2]
    ps = PointSet([(0.1, 0.1), (0, 0.2), (0.2, 0)])
    assert select_leaders_basic(ps, D).leaders == [1]  # (0, 0.2) is lexicographically smallest
    with pytest.raises(ValueError):
        select_leaders_basic(ps, 0)


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_basic_leaders_lemma(x, seed):
    # 3x spread points plus clutter: greedy still finds at least x leaders
    rng = np.random.default_rng(seed)
    spread = [(3 * D * i, 0.0) for i in range(3 * x)]
    clutter = [tuple(v) for v in rng.uniform(-D, 3 * D * 3 * x, size=(int(rng.integers(0, 20)), 2))]
    ps = PointSet(dict.fromkeys(spread + clutter))
    leaders = select_leaders_basic(ps, D)
    assert len(leaders.leaders) >= x
    arr = ps.array[leaders.leaders]
    for a, b in itertools.combinations(range(len(arr)), 2):
        assert np.linalg.norm(arr[a] - arr[b]) > D
    # maximal: every other point is within D of some leader
    for i in range(len(ps)):
        assert i in leaders.leaders or np.min(np.linalg.norm(arr - ps.array[i], axis=1)) <= D


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=30, unique=True), st.randoms())
def test_leader_selection_pure(pts, rnd):
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    a, b = PointSet(pts), PointSet(shuffled)
    pick = lambda ps, ls: sorted(ps[i] for i in ls.leaders)
    assert pick(a, select_leaders_basic(a, D)) == pick(b, select_leaders_basic(b, D))
    assert pick(a, select_leaders_generic(generic_cover(a, SQ), a)) == pick(b, select_leaders_generic(generic_cover(b, SQ), b))


@given(st.integers(0, 10_000))
def test_distance_exclusion(seed):
    rng = np.random.default_rng(seed)
    ps = PointSet(rng.uniform(0, 8, size=(60, 2)))
    leaders = select_leaders_basic(ps, D).leaders
    sub = ps.subset(leaders)
    for _ in range(50):
        f = Shape("oriented-square", 1.0, tuple(rng.uniform(-1, 8, 2)), rng.uniform(0, math.pi / 2))
        assert len(covered_indices(f, sub)) <= 1


def test_generic_leaders_examples():
    ps = PointSet([(1, 5), (2, 3), (0, 3), (9, 9)])
    area = Shape(AXIS_SQUARE, 3, (0, 3))
    cs = CoverSet(AXIS_SQUARE, 3, [area, Shape(AXIS_SQUARE, 3, (9, 9))], [], [0, 0], [[0, 1, 2], [3]])
    ls = select_leaders_generic(cs, ps)
    assert ls.leaders == [2, 3] and ls.areas == [0, 1] and ls.origin == "per-cover-area"
    assert ps[ls.leaders[0]] == (0, 3)


# -- preconditions -----------------------------------------------------------


def test_basic_precondition_examples():
    assert check_basic_precondition(grid(12, 4, 2 * D), SQ)
    bad = check_basic_precondition(grid(11, 4, 2 * D), SQ)
    assert not bad and bad.diagnostics["found"] == 11 and bad.diagnostics["exact"]
    assert check_basic_precondition(grid(25, 5, 2 * D), FaultModel("square", 1.0, 2))
    assert check_basic_precondition(grid(12, 4, 2 * D), SQ).diagnostics["witness"]


def test_generic_precondition_examples():
    cs = generic_cover(PointSet([(0, 0)]), SQ)
    assert check_generic_precondition(cs, SQ).diagnostics["required"] == 22
    assert check_generic_precondition(cs, FaultModel("square", 1.0, 1, "axis")).diagnostics["required"] == 13
    assert check_generic_precondition(cs, FaultModel("circle", 1.0, 1, cover="circle")).diagnostics["required"] == 85
    with pytest.raises(KeyError):
        check_generic_precondition(cs, FaultModel("circle", 1.0, 1, cover="circle", ratio=3.0))


def test_tolerance_bound_examples():
    assert tolerance_bound(SQ) == 15
    assert tolerance_bound(FaultModel("circle", 1.0, 2, cover="circle")) == 114
    assert tolerance_bound(FaultModel("cube", 1.0, 1, "axis")) == 17


def test_fault_model_validation():
    with pytest.raises(ValueError):
        FaultModel("square", 1.0, 0)
    with pytest.raises(ValueError):
        FaultModel("square", -1.0)
    with pytest.raises(ValueError):
        FaultModel("hexagon", 1.0)
    assert FaultModel.from_dict(SQ.to_dict()) == SQ
    assert FaultModel("cube", 1.0, alignment="any").kind == "oriented-cube"


# -- BASIC runs --------------------------------------------------------------


def test_basic_no_faults_all_ones():
    ps = grid(12, 4, 2 * D)
    out = run_basic(ps, SQ, [SQ.template(FAR)], {i: 1 for i in range(12)})
    assert set(out.decisions.values()) == {1}
    assert out.rounds_used == 3
    assert all(out.verdicts.values())


def test_basic_refuses_eleven():
    with pytest.raises(Refusal) as e:
        run_basic(grid(11, 4, 2 * D), SQ, [SQ.template(FAR)], {})
    assert e.value.diagnostics["required"] == 12


def test_basic_wrong_placements():
    with pytest.raises(ValueError):
        run_basic(grid(12, 4, 2 * D), SQ, [], {})
    with pytest.raises(ValueError):
        run_basic(grid(12, 4, 2 * D), SQ, [Shape("circle", 1.0, FAR)], {})


def basic_with_followers():
    # 12 spread leaders, each with two followers inside its fault-sized neighbourhood
    pts = []
    for i in range(12):
        x, y = 3 * D * (i % 4), 3 * D * (i // 4)
        pts += [(x, y), (x + 0.3, y + 0.2), (x + 0.5, y + 0.6)]
    return PointSet(pts)


def test_basic_one_faulty_leader_every_round1_script():
    ps = basic_with_followers()
    f = SQ.template((-0.1, -0.1), 0.0)
    faulty = covered_indices(f, ps)
    assert faulty == [0, 1, 2]
    leaders = select_leaders_basic(ps, D).leaders
    others = [p for p in leaders if p != 0]
    inputs = {i: i % 2 for i in range(len(ps))}
    for bits in itertools.product((0, 1), repeat=len(others)):
        script = {(0, r, ()): b for r, b in zip(others, bits)}
        script.update({(0, r, "decide"): r % 2 for r in range(len(ps))})
        out = run_basic(ps, SQ, [f], inputs, Behavior("scripted", 0, script), engine="collapsed")
        assert all(out.verdicts.values()), bits


def test_basic_equivocating_leader_mixed_inputs():
    ps = basic_with_followers()
    out = run_basic(ps, SQ, [SQ.template((-0.1, -0.1))], {i: i % 2 for i in range(len(ps))}, Behavior("equivocate"))
    assert out.faulty == [0, 1, 2]
    assert all(out.verdicts.values())
    assert out.rounds_used == 3


def test_basic_heavy_faults():
    # nearly every process sits in the fault areas; only the other leaders stay correct
    M = 2
    fm = FaultModel("square", 1.0, M, "axis")
    D2 = fm.diameter
    leaders = [(4 * D2 * (i % 7), 4 * D2 * (i // 7)) for i in range(21)]
    crowd = [(0.05 * i, 0.05 * j) for i in range(1, 20) for j in range(1, 20)]
    crowd += [(4 * D2 + 0.05 * i, 0.05 * j) for i in range(1, 20) for j in range(1, 20)]
    ps = PointSet(leaders + crowd)
    f = [fm.template((0, 0)), fm.template((4 * D2, 0))]
    out = run_basic(ps, fm, f, {i: i % 2 for i in range(len(ps))}, Behavior("equivocate"))
    assert len(out.faulty) == len(ps) - 19
    assert len(out.faulty) <= len(ps) - (2 * M + 1)
    assert all(out.verdicts.values())
    assert out.rounds_used == M + 2


# -- GENERIC runs ------------------------------------------------------------


def clusters(k, per=3, gap=3.0):
    cols = math.ceil(math.sqrt(k))
    pts = []
    for c in range(k):
        x, y = gap * (c % cols), gap * (c // cols)
        pts += [(x + 0.2 * j, y + 0.1 * j) for j in range(per)]
    return PointSet(pts)


def test_generic_separated_clusters():
    ps = clusters(22)
    cs = generic_cover(ps, SQ)
    assert len(cs) == 22
    f = SQ.template((2.9, 2.9), 0.2)
    out = run_generic(ps, SQ, [f], {i: 1 for i in range(len(ps))}, Behavior("equivocate"))
    assert all(out.verdicts.values()) and set(out.decisions.values()) == {1}
    assert out.rounds_used == 7 + 2 and out.threshold == 8


def test_generic_no_faults_all_zero():
    ps = clusters(25)
    out = run_generic(ps, SQ, [SQ.template(FAR)], {i: 0 for i in range(len(ps))})
    assert set(out.decisions.values()) == {0} and out.faulty == []


def test_generic_dense_adversary():
    from geocon.simulation import PlacementStrategy, place_faults

    rng = np.random.default_rng(4)
    ps = PointSet(rng.uniform(0, 7, size=(120, 2)))
    cs = generic_cover(ps, SQ)
    leaders = select_leaders_generic(cs, ps)
    f = place_faults(ps, SQ, PlacementStrategy("greedy-max-leaders"), leaders)
    hit = set(covered_indices(f[0], ps)) & set(leaders.leaders)
    assert 1 <= len(hit) <= 7
    assert overlap_count(cs, f[0]) <= 7
    out = run_generic(ps, SQ, f, {i: int(rng.integers(0, 2)) for i in range(len(ps))}, Behavior("equivocate"), cover=cs)
    assert all(out.verdicts.values())


def test_generic_refuses_small_cover():
    with pytest.raises(Refusal) as e:
        run_generic(clusters(21), SQ, [SQ.template(FAR)], {})
    assert e.value.diagnostics["areas"] == 21


def test_generic_refuses_shared_leaders():
    ps = clusters(22)
    cs = generic_cover(ps, SQ)
    shared = CoverSet(cs.kind, cs.size, cs.areas, cs.slabs, cs.area_slab, [[0]] * 11 + cs.members[11:])
    with pytest.raises(Refusal) as e:
        run_generic(ps, SQ, [SQ.template(FAR)], {}, cover=shared)
    assert e.value.diagnostics["distinct_leaders"] == 12


def test_verdicts_forced_disagreement():
    v = compute_verdicts({0: 0, 1: 1, 2: 1}, {0: 1, 1: 1, 2: 1}, [0, 1, 2])
    assert v == {"agreement": False, "validity": False, "termination": True}
    v = compute_verdicts({0: None, 1: 1}, {0: 0, 1: 1}, [0, 1])
    assert v["termination"] is False and v["agreement"] is False and v["validity"] is True
    # faulty processes are ignored
    assert all(compute_verdicts({0: 1, 1: 1}, {0: 1, 1: 1, 2: 0}, [0, 1]).values())
