from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpa.linear import ABS_TIME, AffineForm, clock
from dpa.model import Event, GlobalState, model_from_dict
from dpa.polytope import Polytope, eq, ge, le
from dpa.zones import SymbolicNode, build_tree, post_end, post_start, post_time, root, time_sweep

from generators import corpus, random_model
from oracles import chebyshev_center, end_orders

V = AffineForm.var
x1, x2 = clock(0, 0), clock(1, 0)


def two(a1, b1, a2, b2, steps2=1, absolute=False):
    return model_from_dict({
        "processes": [{"name": "P1", "steps": [{"lo": a1, "hi": b1}]},
                      {"name": "P2", "steps": [{"lo": a2, "hi": b2}] * steps2}],
        "options": {"absolute_time_clock": absolute}})


def node(m, locs, cons, vs):
    return SymbolicNode(GlobalState(locs), (), Polytope.build(vs, cons))


def test_post_time_diagonal_from_origin():
    m = two(0, 2, 0, 3)
    z = post_time(m, node(m, (1, 1), [eq(x1, 0), eq(x2, 0)], [x1, x2])).zone
    assert z == Polytope.build([x1, x2], [eq(x1, x2), ge(x1, 0), le(x1, 2)])


def test_post_time_keeps_differences():
    m = two(0, 20, 0, 30)
    z = post_time(m, node(m, (1, 1), [eq(V(x1) - V(x2), 5), ge(x2, 0), le(x2, 1)], [x1, x2])).zone
    assert z.bounds(V(x1) - V(x2)) == (5, 5)
    assert z.bounds(V(x1)) == (5, 20)


def test_post_time_without_slack():
    m = two(0, 2, 0, 3)
    s = node(m, (1, 1), [eq(x1, 2), eq(x2, 3)], [x1, x2])
    assert post_time(m, s).zone == s.zone


def test_post_start_examples():
    m = corpus()["M2"]
    r = root(m)
    s = post_start(m, r, (Event("s", 0, 0), Event("s", 1, 0)), GlobalState((1, 1)))
    assert s.history == (Event("s", 0, 0), Event("s", 1, 0))
    assert s.zone.dimension == 0 and ABS_TIME in s.zone.variables   # corpus models track time
    assert s.zone.bounds(V(x1)) == (0, 0) and s.zone.bounds(V(x2)) == (0, 0)
    assert s.zone.bounds(V(ABS_TIME)) == (0, 0)


def test_post_start_mid_race_pins_new_clock_only():
    m = two(0, 10, 0, 1, steps2=2, absolute=True)
    x22 = clock(1, 1)
    s = node(m, (1, 2), [ge(x1, 0), le(x1, 1), eq(ABS_TIME, x1)], [x1, ABS_TIME])
    out = post_start(m, s, (Event("s", 1, 1),), GlobalState((1, 3)))
    assert out.zone.bounds(V(x22)) == (0, 0)
    assert out.zone.bounds(V(x1)) == (0, 1)
    assert out.zone.bounds(V(ABS_TIME) - V(x1)) == (0, 0)


def test_post_end_examples():
    m = two(0, 2, 1, 3)
    s = node(m, (1, 1), [eq(x1, 0), eq(x2, 0)], [x1, x2])
    z = post_end(m, s, 0, GlobalState((2, 1))).zone
    assert z == Polytope.build([x2], [ge(x2, 0), le(x2, 2)])
    slow = two(3, 4, 0, 2)
    s = node(slow, (1, 1), [eq(x1, 0), eq(x2, 0)], [x1, x2])
    assert post_end(slow, s, 0, GlobalState((2, 1))).zone.empty
    assert not post_end(slow, s, 1, GlobalState((1, 2))).zone.empty


def test_boundary_touch_is_pruned():
    # P1 ends exactly when P2 may start ending: ordering e2 before e1 has measure zero
    m = two(0, 1, 1, 2)
    s = node(m, (1, 1), [eq(x1, 0), eq(x2, 0)], [x1, x2])
    assert post_end(m, s, 1, GlobalState((1, 2))).zone.empty


def _labels(m, hs):
    return {m.history_label(h) for h in hs}


def test_build_tree_examples():
    c = corpus()
    assert _labels(c["M2"], build_tree(c["M2"]).complete_histories()) == {
        "P1.s1 P2.s1 P1.e1 P2.e1", "P1.s1 P2.s1 P2.e1 P1.e1"}
    assert _labels(c["M4"], build_tree(c["M4"]).complete_histories()) == {"P1.s1 P1.e1 P2.s1 P2.e1"}
    assert _labels(c["M1"], build_tree(c["M1"]).complete_histories()) == {"P1.s1 P1.e1"}


def test_horizon_limits_depth():
    m = corpus()["M3"]
    t = build_tree(m, horizon=2)
    assert max(len(h) for h in t.nodes) == 2
    assert not t.complete_histories()


def _liberal_history(m, order):
    """Full history of a liberal run whose ends occur in ``order``."""
    h = []
    seen = [0] * m.n
    h += [Event("s", i, 0) for i in m.priority]
    for i in order:
        h.append(Event("e", i, seen[i]))
        seen[i] += 1
        if seen[i] < m.processes[i].k:
            h.append(Event("s", i, seen[i]))
    return tuple(h)


def _feasible(m, order) -> bool:
    cols = {(i, j): c for c, (i, j) in enumerate((i, j) for i, p in enumerate(m.processes)
                                                 for j in range(p.k))}
    d = len(cols)
    A, b = [], []
    for (i, j), c in cols.items():
        e = np.eye(d)[c]
        A += [e, -e]
        b += [float(m.step(i, j).hi), -float(m.step(i, j).lo)]
    seen = [0] * m.n
    ends = []
    for i in order:
        ends.append(sum(np.eye(d)[cols[(i, j)]] for j in range(seen[i] + 1)))
        seen[i] += 1
    for u, w in zip(ends, ends[1:]):
        A.append(u - w)
        b.append(0.0)
    cc = chebyshev_center(np.array(A), np.array(b))
    return cc is not None and cc[1] > 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_tree_matches_brute_force_interleavings(seed):
    m = random_model(seed, absolute_time=False)
    if m.scheduler.policy != "liberal":
        m = model_from_dict({**m.to_dict(), "resources": [], "scheduler": {"policy": "liberal"},
                             "processes": [{"name": p.name, "steps": [{"lo": str(s.lo), "hi": str(s.hi)}
                                                                      for s in p.steps]}
                                           for p in m.processes]})
    tree = build_tree(m)
    expected = {_liberal_history(m, o) for o in end_orders(m) if _feasible(m, o)}
    assert tree.complete_histories() == expected
    # the initial compound start is a single edge, so its inner prefixes are not nodes
    prefixes = {h[:k] for h in expected for k in range(len(h) + 1) if k == 0 or k >= m.n}
    assert set(tree.nodes) == prefixes


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_tree_invariants(seed):
    m = random_model(seed)
    tree = build_tree(m)
    for s in tree:
        # local order of every process is a legal prefix of s1 e1 s2 e2 ...
        for i, p in enumerate(m.processes):
            mine = [e for e in s.history if e.proc == i]
            legal = [Event(kind, i, j) for j in range(p.k) for kind in "se"]
            assert mine == legal[:len(mine)]
        assert not s.zone.empty
        active = {clock(i, s.q.step_of(i)) for i in s.q.active()}
        assert s.zone.variables == active | {ABS_TIME}
        # time elapse preserves every clock difference
        moving = sorted(active) + [ABS_TIME]
        swept = time_sweep(s.zone, moving)
        for a, b in itertools.combinations(moving, 2):
            assert swept.bounds(V(a) - V(b)) == s.zone.bounds(V(a) - V(b))
