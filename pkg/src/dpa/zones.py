"""Set-theoretic semantics: symbolic states (q, h, Z) and the zone tree.

Zones live over the clocks active in ``q`` (plus the absolute-time clock
when enabled).  ``post_end`` folds the time step into the discrete step, so
the tree has no separate time-successor nodes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .linear import ABS_TIME, TAU, AffineForm, Var, clock
from .model import DpaModel, Event, GlobalState, product_successors
from .polytope import Constraint, Polytope, ge, le


@dataclass(eq=False)
class SymbolicNode:
    q: GlobalState
    history: tuple[Event, ...]
    zone: Polytope
    parent: "SymbolicNode | None" = None
    label: tuple[Event, ...] = ()
    children: list["SymbolicNode"] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.history)


def active_clocks(m: DpaModel, q: GlobalState) -> list[Var]:
    return [clock(i, q.step_of(i)) for i in q.active()]


def _tracked(m: DpaModel, q: GlobalState) -> list[Var]:
    vs = active_clocks(m, q)
    if m.absolute_time_clock:
        vs.append(ABS_TIME)
    return vs


def time_sweep(z: Polytope, moving: list[Var]) -> Polytope:
    """``{v + tau*1 : v in z, tau >= 0}`` along the listed variables."""
    if z.empty:
        return z
    tau = AffineForm.var(TAU)
    moves = {s: AffineForm.var(s) - tau for s in moving if s not in z.pins}
    rows = [g.substitute_all({s: f for s, f in moves.items() if s in g.coeffs}) for g in z.inequalities]
    rows.append(-tau)
    pins = []
    for w, r in sorted(z.pins.items()):
        r = r.substitute_all({s: f for s, f in moves.items() if s in r.coeffs})
        pins.append((w, r + tau if w in moving else r))
    swept = Polytope.build(z.variables | {TAU}, [Constraint(g) for g in rows], pins,
                           prefer=[w for w, _ in pins])
    return swept.eliminate(TAU)


def post_time(m: DpaModel, s: SymbolicNode) -> SymbolicNode:
    z = time_sweep(s.zone, _tracked(m, s.q))
    bounds = [le(clock(i, s.q.step_of(i)), m.step(i, s.q.step_of(i)).hi) for i in s.q.active()]
    return SymbolicNode(s.q, s.history, z.intersect(bounds), s.parent, s.label)


def post_start(m: DpaModel, s: SymbolicNode, events: tuple[Event, ...], target: GlobalState) -> SymbolicNode:
    new = [clock(e.proc, e.step) for e in events]
    z = s.zone.add_variables(new).intersect([Constraint(AffineForm.var(v), "==") for v in new])
    return SymbolicNode(target, s.history + events, z, s, events)


def post_end(m: DpaModel, s: SymbolicNode, i: int, target: GlobalState) -> SymbolicNode:
    """Time step, guard ``a_i <= x_i <= b_i``, then drop ``x_i``.

    A guard that only touches the zone on its boundary yields an empty zone:
    such orderings have probability zero.
    """
    j = s.q.step_of(i)
    x = clock(i, j)
    step = m.step(i, j)
    z = post_time(m, s).zone.intersect([ge(x, step.lo), le(x, step.hi)], flat_ok=False)
    if not z.empty:
        z = z.forget(x)
    else:
        z = Polytope.empty_set(z.variables - {x})
    ev = Event("e", i, j)
    return SymbolicNode(target, s.history + (ev,), z, s, (ev,))


def root(m: DpaModel) -> SymbolicNode:
    vs = [ABS_TIME] if m.absolute_time_clock else []
    z = Polytope.build(vs, [Constraint(AffineForm.var(v), "==") for v in vs])
    return SymbolicNode(GlobalState.initial(m), (), z)


def successors(m: DpaModel, s: SymbolicNode) -> list[SymbolicNode]:
    out = []
    for t in product_successors(m, s.q):
        if t.kind == "start":
            child = post_start(m, s, t.events, t.target)
        else:
            child = post_end(m, s, t.proc, t.target)
        if not child.zone.empty:
            out.append(child)
    return out


@dataclass
class ZoneTree:
    model: DpaModel
    root: SymbolicNode
    nodes: dict[tuple[Event, ...], SymbolicNode]

    def leaves(self) -> list[SymbolicNode]:
        return [n for n in self.nodes.values() if not n.children]

    def complete_histories(self) -> set[tuple[Event, ...]]:
        return {n.history for n in self.nodes.values() if n.q.is_final(self.model)}

    def __iter__(self) -> Iterator[SymbolicNode]:
        return iter(self.nodes.values())

    def __len__(self) -> int:
        return len(self.nodes)


def build_tree(m: DpaModel, horizon: int | None = None) -> ZoneTree:
    """Breadth-first zone tree; ``horizon`` caps the history length."""
    if horizon is None:
        horizon = m.total_events()
    r = root(m)
    nodes = {(): r}
    queue = deque([r])
    while queue:
        s = queue.popleft()
        if s.depth >= horizon:
            continue
        kids = successors(m, s)
        kids.sort(key=lambda c: c.label)
        for c in kids:
            if c.depth > horizon:
                continue
            s.children.append(c)
            nodes[c.history] = c
            queue.append(c)
    return ZoneTree(m, r, nodes)
