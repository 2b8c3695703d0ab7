"""Piecewise-polynomial (partial) densities over polytope pieces.

A piece ``(domain, value)`` stands for the measure ``value(F) dF`` on the
free variables ``F`` of ``domain``, pushed forward along the pins of the
domain.  A pin ``x := 0`` is therefore a point mass in ``x``; a pin
``x := y`` puts the mass on the diagonal.  All operations are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InvalidSupport, NonIntegrable
from .linear import TAU, AffineForm, Var, as_fraction, solve_for
from .polynomial import Polynomial
from .polytope import Constraint, Polytope, _canonical_rows, _Empty


@dataclass(frozen=True)
class Piece:
    domain: Polytope
    value: Polynomial

    def key(self):
        return (self.domain.structure_key(), self.value.key())


def _raw_piece(variables, rows, pins, value) -> Piece | None:
    """Canonicalize a raw (rows, pins) description; ``None`` if it has no mass."""
    if value.is_zero():
        return None
    try:
        clean = _canonical_rows(rows, pins)
    except _Empty:
        return None
    base = Polytope(variables, (), pins, _trusted=True)
    dom = base._extend([Constraint(f) for f in clean], flat_ok=False)
    if dom.empty:
        return None
    return Piece(dom, value)


class PiecewiseDensity:
    """A finite sum of pieces over a common variable set."""

    __slots__ = ("variables", "pieces")

    def __init__(self, variables: Iterable[Var], pieces: Iterable[Piece] = ()):
        self.variables: frozenset[Var] = frozenset(variables)
        self.pieces: tuple[Piece, ...] = _merge(pieces)

    @classmethod
    def point_mass(cls, pins: dict[Var, object] | None = None) -> "PiecewiseDensity":
        """Unit mass at a point (the empty density on zero variables by default)."""
        pins = {v: AffineForm.constant(c) for v, c in (pins or {}).items()}
        dom = Polytope(pins.keys(), (), pins, _trusted=True)
        return cls(pins.keys(), [Piece(dom, Polynomial.constant(1))])

    @classmethod
    def uniform(cls, v: Var, lo, hi) -> "PiecewiseDensity":
        return scale_and_extend(cls.point_mass(), [(v, lo, hi)])

    def __repr__(self) -> str:
        return f"PiecewiseDensity({sorted(self.variables)}, {len(self.pieces)} pieces)"

    def key(self):
        return (tuple(sorted(self.variables)), tuple(p.key() for p in self.pieces))

    @property
    def max_degree(self) -> int:
        return max((p.value.degree for p in self.pieces), default=0)

    def is_zero(self) -> bool:
        return not self.pieces


def _merge(pieces: Iterable[Piece]) -> tuple[Piece, ...]:
    """Sum pieces with identical domains; order pieces canonically."""
    acc: dict = {}
    doms: dict = {}
    for p in pieces:
        if p is None:
            continue
        k = p.domain.structure_key()
        if k in acc:
            acc[k] = acc[k] + p.value
        else:
            acc[k] = p.value
            doms[k] = p.domain
    out = [Piece(doms[k], v) for k, v in acc.items() if not v.is_zero()]
    out.sort(key=lambda p: repr(p.key()))
    return tuple(out)


# ---------------------------------------------------------------------------
# single-piece primitives
# ---------------------------------------------------------------------------

def _swap_target(pins: dict[Var, AffineForm], v: Var) -> Var | None:
    deps = sorted(w for w, r in pins.items() if v in r.coeffs)
    if not deps:
        return None
    # clocks before the absolute-time clock: keeps the time clock derived
    clocks = [w for w in deps if w.kind == "x"]
    return (clocks or deps)[0]


def _marginalize_piece(piece: Piece, v: Var) -> list[Piece]:
    dom, val = piece.domain, piece.value
    variables = dom.variables - {v}
    if v in dom.pins:
        pins = dict(dom.pins)
        del pins[v]
        return [Piece(Polytope(variables, dom.inequalities, pins, _trusted=True), val)]
    w = _swap_target(dom.pins, v)
    if w is not None:
        # change of variables: w becomes free, v := (w - rest)/c, density / |c|
        c = dom.pins[w].coeff(v)
        rhs = solve_for(AffineForm.var(w) - dom.pins[w], v)
        pins = {u: r.substitute(v, rhs) for u, r in dom.pins.items() if u != w}
        rows = [g.substitute(v, rhs) for g in dom.inequalities]
        value = val.substitute(v, rhs) * (1 / abs(c))
        p = _raw_piece(variables, rows, pins, value)
        return [p] if p else []
    return _integrate_piece(piece, v)


def _integrate_piece(piece: Piece, v: Var) -> list[Piece]:
    dom, val = piece.domain, piece.value
    variables = dom.variables - {v}
    lowers, uppers, rest = [], [], []
    for g in dom.inequalities:
        a = g.coeff(v)
        if not a:
            rest.append(g)
            continue
        r = AffineForm._raw({u: b for u, b in g.coeffs.items() if u != v}, g.const)
        bound = r * (-1 / a)
        (uppers if a > 0 else lowers).append(bound)
    if val.is_zero():
        return []
    if not lowers or not uppers:
        raise NonIntegrable(f"{v} is unbounded on a piece with value {val}")
    prim = val.antiderivative(v)
    out = []
    for i, lo in enumerate(lowers):
        for j, hi in enumerate(uppers):
            rows = list(rest)
            rows += [other - lo for k, other in enumerate(lowers) if k != i]
            rows += [hi - other for k, other in enumerate(uppers) if k != j]
            rows.append(lo - hi)
            value = prim.substitute(v, hi) - prim.substitute(v, lo)
            p = _raw_piece(variables, rows, dict(dom.pins), value)
            if p:
                out.append(p)
    return out


def _slice_raw(variables, rows, pins, val, c: Constraint, prefer: Sequence[Var]):
    """Restrict to the hyperplane ``c.form == 0`` keeping density w.r.t. the
    remaining coordinates (``c.pivot`` is the coordinate sliced away).

    Works on raw (rows, pins, value) triples; ``None`` when the slice misses.
    """
    form = c.form
    if c.pivot is not None:
        form = form / form.coeff(c.pivot)
    e = form.substitute_all({w: r for w, r in pins.items() if w in form.coeffs})
    if e.is_constant():
        if e.const:
            return None
        raise NonIntegrable(f"slice {c.form} = 0 is degenerate on this piece")
    order = ([c.pivot] if c.pivot is not None else []) + list(prefer)
    u = next((w for w in order if w in e.coeffs), None) or max(e.coeffs)
    cu = e.coeffs[u]
    rhs = solve_for(e, u)
    pins = {w: r.substitute(u, rhs) for w, r in pins.items()}
    pins[u] = rhs
    rows = [g.substitute(u, rhs) for g in rows]
    value = val.substitute(u, rhs) * (1 / abs(cu))
    return rows, pins, value


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def integrate_out(d: PiecewiseDensity, v: Var) -> PiecewiseDensity:
    """Marginal of ``d`` with ``v`` projected away.

    Free variables are integrated piece by piece, splitting the remaining
    domain into chambers on which one lower and one upper bound are active.
    A pinned ``v`` is simply forgotten; a free ``v`` that determines a pinned
    variable is first traded for it (with the Jacobian factor).
    """
    if v not in d.variables:
        raise ValueError(f"{v} is not a variable of the density")
    out = []
    for p in d.pieces:
        out.extend(_marginalize_piece(p, v))
    return PiecewiseDensity(d.variables - {v}, out)


def restrict(d: PiecewiseDensity, constraints: Iterable[Constraint],
             prefer: Sequence[Var] = ()) -> PiecewiseDensity:
    """Apply inequalities (truncation) and equalities (slices)."""
    return PiecewiseDensity(d.variables, _restrict_pieces(d.variables, d.pieces, constraints, prefer))


def _restrict_pieces(variables, pieces, constraints, prefer):
    constraints = list(constraints)
    ineqs = [c.form for c in constraints if c.op == "<="]
    slices = [c for c in constraints if c.op == "=="]
    out = []
    for p in pieces:
        raw = (list(p.domain.inequalities), dict(p.domain.pins), p.value)
        for c in slices:
            raw = _slice_raw(variables, *raw, c, prefer)
            if raw is None:
                break
        if raw is None:
            continue
        rows, pins, value = raw
        q = _raw_piece(variables, rows + ineqs, pins, value)
        if q is not None:
            out.append(q)
    return out


def shift_integrate(d: PiecewiseDensity, shifted: Iterable[Var],
                    extra: Iterable[Constraint]) -> PiecewiseDensity:
    """``integral over tau >= 0 of d(shifted - tau, rest)``, restricted to ``extra``.

    The variables in ``shifted`` advance together by ``tau``; ``extra`` is
    applied in the advanced coordinates and then ``tau`` is projected away
    (by substitution when it is pinned, by integration otherwise).
    """
    shifted = sorted(set(shifted))
    unknown = set(shifted) - d.variables
    if unknown:
        raise ValueError(f"cannot shift unknown variables {sorted(unknown)}")
    extra = list(extra)
    variables = d.variables | {TAU}
    tau = AffineForm.var(TAU)
    moved = []
    for p in d.pieces:
        dom, val = p.domain, p.value
        free_moves = {s: AffineForm.var(s) - tau for s in shifted if s not in dom.pins}
        rows = [g.substitute_all({s: f for s, f in free_moves.items() if s in g.coeffs})
                for g in dom.inequalities]
        rows.append(-tau)
        pins = {}
        for w, r in dom.pins.items():
            r = r.substitute_all({s: f for s, f in free_moves.items() if s in r.coeffs})
            pins[w] = r + tau if w in shifted else r
        value = val.substitute_all(free_moves)
        moved.append(Piece(Polytope(variables, rows, pins, _trusted=True), value))
    cut = PiecewiseDensity(variables, _restrict_pieces(variables, moved, extra, (TAU,)))
    return integrate_out(cut, TAU)


def scale_and_extend(d: PiecewiseDensity, factors: Sequence[tuple[Var, object, object]]) -> PiecewiseDensity:
    """Multiply by independent uniform densities on new variables."""
    new = []
    rows = []
    weight = Fraction(1)
    for v, lo, hi in factors:
        lo, hi = as_fraction(lo), as_fraction(hi)
        if lo >= hi:
            raise InvalidSupport(f"uniform support [{lo}, {hi}] for {v} is empty")
        if v in d.variables:
            raise ValueError(f"{v} already belongs to the density")
        new.append(v)
        rows.append(AffineForm({v: 1}, -hi))
        rows.append(AffineForm({v: -1}, lo))
        weight /= hi - lo
    variables = d.variables | set(new)
    out = []
    for p in d.pieces:
        ineqs = sorted(list(p.domain.inequalities) + rows, key=lambda f: f.key())
        dom = Polytope(variables, ineqs, p.domain.pins, _trusted=True)
        out.append(Piece(dom, p.value * weight))
    return PiecewiseDensity(variables, out)


def pin_constants(d: PiecewiseDensity, values: dict[Var, object]) -> PiecewiseDensity:
    """Add new variables carrying point masses (e.g. clocks reset to zero)."""
    variables = d.variables | set(values)
    out = []
    for p in d.pieces:
        pins = dict(p.domain.pins)
        for v, c in values.items():
            if v in d.variables:
                raise ValueError(f"{v} already belongs to the density")
            pins[v] = AffineForm.constant(c)
        out.append(Piece(Polytope(variables, p.domain.inequalities, pins, _trusted=True), p.value))
    return PiecewiseDensity(variables, out)


def _piece_mass(piece: Piece) -> Fraction:
    p = piece
    for v in sorted(p.domain.pins):
        (p,) = _marginalize_piece(p, v)
    parts = [p]
    for v in p.domain.free:
        nxt = []
        for q in parts:
            nxt.extend(_integrate_piece(q, v))
        parts = nxt
    return sum((q.value.constant_value() for q in parts), Fraction(0))


def mass(d: PiecewiseDensity) -> Fraction:
    """Exact total integral."""
    return sum((_piece_mass(p) for p in d.pieces), Fraction(0))


def marginal(d: PiecewiseDensity, keep: Iterable[Var]) -> PiecewiseDensity:
    keep = set(keep)
    out = d
    for v in sorted(d.variables - keep, key=lambda v: (v.kind != "y", v)):
        out = integrate_out(out, v)
    return out


def support_projection(d: PiecewiseDensity, keep: Iterable[Var]) -> list[Polytope]:
    """Projections of the piece domains onto ``keep`` (deduplicated as sets)."""
    keep = set(keep)
    seen = {}
    for p in d.pieces:
        proj = p.domain.project(keep)
        if not proj.empty:
            seen.setdefault(proj.set_key(), proj)
    return list(seen.values())
