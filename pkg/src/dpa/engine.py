"""Probabilistic reachability tree: nodes (q, h, Z, psi) and exact queries.

``psi`` is the partial density of the active clocks and durations upon
*entering* the extended state ``(q, h)``; its mass is the probability of
the history ``h``.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from . import zones
from .density import (PiecewiseDensity, integrate_out, marginal, mass, pin_constants,
                      scale_and_extend, shift_integrate)
from .errors import UnknownHistory, UnsupportedQuery
from .linear import ABS_TIME, AffineForm, Var, clock, duration
from .model import DpaModel, Event, GlobalState, Step, product_successors
from .polynomial import Polynomial
from .polytope import Polytope, eq, le

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# density transformers
# ---------------------------------------------------------------------------

def dt_start(psi: PiecewiseDensity, started: Iterable[tuple[int, int, Step]]) -> PiecewiseDensity:
    """Reset the new clocks to zero and multiply by their duration densities."""
    started = list(started)
    out = pin_constants(psi, {clock(i, j): 0 for i, j, _ in started})
    return scale_and_extend(out, [(duration(i, j), s.lo, s.hi) for i, j, s in started])


def dt_race(psi: PiecewiseDensity, winner: tuple[int, int],
            losers: Iterable[tuple[int, int]]) -> PiecewiseDensity:
    """Clock density at the instant ``winner`` completes before every loser.

    Processes are given as ``(process, step)`` pairs of active steps.
    """
    losers = list(losers)
    i, j = winner
    shifted = [clock(i, j)] + [clock(a, b) for a, b in losers]
    if ABS_TIME in psi.variables:
        shifted.append(ABS_TIME)
    extra = [eq(clock(i, j), duration(i, j))]
    extra += [le(clock(a, b), duration(a, b)) for a, b in losers]
    return shift_integrate(psi, shifted, extra)


def dt_deactivate(psi_i: PiecewiseDensity, proc: tuple[int, int]) -> PiecewiseDensity:
    i, j = proc
    out = integrate_out(psi_i, clock(i, j))
    return integrate_out(out, duration(i, j))


# ---------------------------------------------------------------------------
# tree
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ProbNode:
    q: GlobalState
    history: tuple[Event, ...]
    zone: Polytope
    psi: PiecewiseDensity
    prob: Fraction
    label: tuple[Event, ...] = ()
    children: list["ProbNode"] = field(default_factory=list)
    race_masses: dict[int, Fraction] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.history)


@dataclass
class ProbTree:
    model: DpaModel
    root: ProbNode
    nodes: dict[tuple[Event, ...], ProbNode]
    discarded_mass: Fraction = Fraction(0)
    prune_eps: Fraction = Fraction(0)

    def __iter__(self) -> Iterator[ProbNode]:
        return iter(self.nodes.values())

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> list[ProbNode]:
        return [n for n in self.nodes.values() if n.q.is_final(self.model)]

    def history_distribution(self) -> dict[tuple[Event, ...], Fraction]:
        return {n.history: n.prob for n in self.leaves()}

    def stats(self) -> dict[str, int]:
        return {
            "nodes": len(self.nodes),
            "leaves": len(self.leaves()),
            "max_pieces": max(len(n.psi.pieces) for n in self.nodes.values()),
            "max_degree": max(n.psi.max_degree for n in self.nodes.values()),
        }


def _expand(m: DpaModel, node: ProbNode):
    """Children of one node as plain data (picklable for worker processes)."""
    out = []
    race = {}
    for t in product_successors(m, node.q):
        if t.kind == "start":
            started = [(e.proc, e.step, m.step(e.proc, e.step)) for e in t.events]
            psi = dt_start(node.psi, started)
            zchild = zones.post_start(m, _as_symbolic(node), t.events, t.target)
            out.append((t.events, t.target, zchild.zone, psi, node.prob))
        else:
            i = t.proc
            winner = (i, node.q.step_of(i))
            losers = [(a, node.q.step_of(a)) for a in node.q.active() if a != i]
            raced = dt_race(node.psi, winner, losers)
            race[i] = mass(raced)
            psi = dt_deactivate(raced, winner)
            p = mass(psi)
            zchild = zones.post_end(m, _as_symbolic(node), i, t.target)
            out.append((t.events, t.target, zchild.zone, psi, p))
    return out, race


def _as_symbolic(node: ProbNode) -> zones.SymbolicNode:
    return zones.SymbolicNode(node.q, node.history, node.zone)


def _root(m: DpaModel) -> ProbNode:
    z = zones.root(m)
    psi = PiecewiseDensity.point_mass({ABS_TIME: 0} if m.absolute_time_clock else None)
    return ProbNode(z.q, (), z.zone, psi, Fraction(1))


def build_prob_tree(m: DpaModel, prune_eps=0, horizon: int | None = None,
                    workers: int = 1) -> ProbTree:
    """Breadth-first probabilistic tree.

    Children lighter than ``prune_eps`` are discarded and their mass is
    accumulated in ``discarded_mass``.  ``workers > 1`` expands each level
    in a process pool; the result does not depend on it.
    """
    prune_eps = Fraction(prune_eps)
    if not 0 <= prune_eps < 1:
        raise ValueError("prune_eps must lie in [0, 1)")
    if horizon is None:
        horizon = m.total_events()
    r = _root(m)
    nodes = {(): r}
    discarded = Fraction(0)
    level = [r]
    pool: Executor | None = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while level:
            todo = [n for n in level if n.depth < horizon]
            if pool is not None:
                results = list(pool.map(_expand, [m] * len(todo), todo))
            else:
                results = [_expand(m, n) for n in todo]
            nxt = []
            for node, (kids, race) in zip(todo, results):
                node.race_masses = race
                for events, target, zone, psi, p in sorted(kids, key=lambda k: k[0]):
                    h = node.history + events
                    if len(h) > horizon:
                        continue
                    if p == 0:
                        continue
                    if p < prune_eps:
                        discarded += p
                        continue
                    child = ProbNode(target, h, zone, psi, p, events)
                    node.children.append(child)
                    nodes[h] = child
                    nxt.append(child)
            level = nxt
    finally:
        if pool is not None:
            pool.shutdown()
    return ProbTree(m, r, nodes, discarded, prune_eps)


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def _as_history(tree: ProbTree, h) -> tuple[Event, ...]:
    if isinstance(h, str):
        return tuple(tree.model.parse_event(tok) for tok in h.split())
    return tuple(h)


def history_probability(tree: ProbTree, h) -> Fraction:
    key = _as_history(tree, h)
    node = tree.nodes.get(key)
    if node is None:
        raise UnknownHistory(h)
    return node.prob


def event_precedes(tree: ProbTree, a, b) -> Fraction:
    """Probability over complete histories that ``a`` occurs before ``b``.

    Histories missing either event contribute nothing (in acyclic models every
    complete history contains every event).
    """
    m = tree.model
    a = m.parse_event(a) if isinstance(a, str) else a
    b = m.parse_event(b) if isinstance(b, str) else b
    known = set(m.events())
    for e in (a, b):
        if e not in known:
            from .errors import UnknownEvent
            raise UnknownEvent(str(e))
    total = Fraction(0)
    for leaf in tree.leaves():
        h = leaf.history
        if a in h and b in h and h.index(a) < h.index(b):
            total += leaf.prob
    return total


@dataclass
class PiecewisePolynomial1D:
    """Density on consecutive intervals ``[breaks[k], breaks[k+1]]``."""

    var: Var
    breaks: list[Fraction]
    polys: list[Polynomial]

    def _cumulative(self) -> list[Fraction]:
        acc = [Fraction(0)]
        for k, p in enumerate(self.polys):
            prim = p.antiderivative(self.var)
            acc.append(acc[-1] + prim.evaluate({self.var: self.breaks[k + 1]})
                       - prim.evaluate({self.var: self.breaks[k]}))
        return acc

    def total(self) -> Fraction:
        return self._cumulative()[-1]

    def density(self, t) -> Fraction:
        t = Fraction(t)
        for k, p in enumerate(self.polys):
            if self.breaks[k] <= t < self.breaks[k + 1]:
                return p.evaluate({self.var: t})
        return Fraction(0)

    def cdf(self, t) -> Fraction:
        t = Fraction(t)
        if not self.polys or t <= self.breaks[0]:
            return Fraction(0)
        acc = self._cumulative()
        for k, p in enumerate(self.polys):
            if t <= self.breaks[k + 1]:
                prim = p.antiderivative(self.var)
                return acc[k] + prim.evaluate({self.var: t}) - prim.evaluate({self.var: self.breaks[k]})
        return acc[-1]

    def moment(self, order: int = 1) -> Fraction:
        tk = Polynomial({((self.var, order),): 1}) if order else Polynomial.constant(1)
        total = Fraction(0)
        for k, p in enumerate(self.polys):
            prim = (p * tk).antiderivative(self.var)
            total += prim.evaluate({self.var: self.breaks[k + 1]}) - prim.evaluate({self.var: self.breaks[k]})
        return total


def univariate(d: PiecewiseDensity, v: Var) -> PiecewisePolynomial1D:
    """Collect one-variable pieces into a density on elementary intervals."""
    segs = []
    for p in d.pieces:
        if v in p.domain.pins:
            raise UnsupportedQuery(f"{v} carries a point mass; no density exists")
        lo, hi = p.domain.bounds(AffineForm.var(v))
        segs.append((lo, hi, p.value))
    breaks = sorted({b for lo, hi, _ in segs for b in (lo, hi)})
    polys = []
    for a, b in zip(breaks, breaks[1:]):
        acc = Polynomial()
        for lo, hi, val in segs:
            if lo <= a and b <= hi:
                acc = acc + val
        polys.append(acc)
    return PiecewisePolynomial1D(v, breaks, polys)


@dataclass
class MakespanResult:
    density: PiecewisePolynomial1D
    expectation: Fraction
    support: tuple[Fraction, Fraction]
    total: Fraction

    def cdf(self, t) -> Fraction:
        """Normalized termination-time distribution function."""
        if self.total == 0:
            return Fraction(0)
        return self.density.cdf(t) / self.total

    def grid(self, points: int) -> list[tuple[Fraction, Fraction]]:
        lo, hi = self.support
        if points < 2:
            return [(hi, self.cdf(hi))]
        step = (hi - lo) / (points - 1)
        return [(lo + k * step, self.cdf(lo + k * step)) for k in range(points)]


def makespan(tree: ProbTree) -> MakespanResult:
    if not tree.model.absolute_time_clock:
        raise UnsupportedQuery("makespan needs the absolute-time clock (options.absolute_time_clock)")
    pieces = []
    for leaf in tree.leaves():
        pieces.extend(marginal(leaf.psi, {ABS_TIME}).pieces)
    dens = univariate(PiecewiseDensity({ABS_TIME}, pieces), ABS_TIME)
    total = dens.total()
    expectation = dens.moment(1) / total
    return MakespanResult(dens, expectation, (dens.breaks[0], dens.breaks[-1]), total)
