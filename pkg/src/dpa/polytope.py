"""Exact convex polyhedra over named variables.

A :class:`Polytope` is stored as

* ``pins``: substitutions ``v := form`` whose right-hand sides mention only
  free variables (degenerate directions, e.g. a clock reset to zero);
* ``inequalities``: forms meaning ``form <= 0`` over the free variables.

Every constructed polytope is canonical: rows scaled to integral coefficient
vectors with gcd 1, redundant rows removed, implicit equalities turned into
pins, rows sorted.  Non-empty polytopes are therefore full-dimensional in
their free variables.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import MalformedConstraint
from .linear import AffineForm, Var, farkas, maximize, solve_for


class Constraint(NamedTuple):
    """``form <= 0`` (op ``"<="``) or ``form == 0`` (op ``"=="``).

    ``pivot`` names the coordinate an equality removes when it slices a density.
    """

    form: AffineForm
    op: str = "<="
    pivot: Var | None = None


def _form(x) -> AffineForm:
    if isinstance(x, AffineForm):
        return x
    if isinstance(x, Var):
        return AffineForm.var(x)
    return AffineForm.constant(x)


def le(lhs, rhs) -> Constraint:
    return Constraint(_form(lhs) - _form(rhs), "<=")


def ge(lhs, rhs) -> Constraint:
    return Constraint(_form(rhs) - _form(lhs), "<=")


def eq(lhs, rhs) -> Constraint:
    return Constraint(_form(lhs) - _form(rhs), "==", lhs if isinstance(lhs, Var) else None)


def _pick(form: AffineForm, prefer: Sequence[Var]) -> Var:
    for v in prefer:
        if v in form.coeffs:
            return v
    return max(form.coeffs)


class _Empty(Exception):
    pass


class _Flat(Exception):
    pass


def _box_redundant(row: AffineForm, lo: Mapping[Var, Fraction], hi: Mapping[Var, Fraction]) -> bool:
    total = row.const
    for v, a in row.coeffs.items():
        b = hi.get(v) if a > 0 else lo.get(v)
        if b is None:
            return False
        total += a * b
    return total <= 0


def _canonical_rows(ineqs: Iterable[AffineForm], pins: Mapping[Var, AffineForm]) -> list[AffineForm]:
    best: dict = {}
    for f in ineqs:
        if pins:
            f = f.substitute_all({v: r for v, r in pins.items() if v in f.coeffs})
        if f.is_constant():
            if f.const > 0:
                raise _Empty
            continue
        f = f.normalized()
        k = tuple(sorted(f.coeffs.items()))
        old = best.get(k)
        if old is None or f.const > old.const:
            best[k] = f
    return list(best.values())


def _reduce(free: Sequence[Var], rows: list[AffineForm], pins: dict[Var, AffineForm],
            prefer: Sequence[Var], flat_ok: bool):
    """Fold implicit equalities and drop redundant rows.  Mutates ``pins``."""
    while True:
        # cheap opposite-pair test before the LP
        index = {tuple(sorted(f.coeffs.items())): f for f in rows}
        flat_row = None
        for k, f in index.items():
            neg = tuple((v, -a) for v, a in k)
            g = index.get(neg)
            if g is not None:
                s = f.const + g.const
                if s > 0:
                    raise _Empty
                if s == 0:
                    flat_row = f
                    break
        if flat_row is None:
            order = sorted({v for f in rows for v in f.coeffs})
            status, lam = farkas(rows, order)
            if status == "empty":
                raise _Empty
            if status == "flat":
                flat_row = next(f for f, w in zip(rows, lam) if w > 0)
        if flat_row is None:
            break
        if not flat_ok:
            raise _Flat
        v = _pick(flat_row, prefer)
        rhs = solve_for(flat_row, v)
        for w in list(pins):
            if v in pins[w].coeffs:
                pins[w] = pins[w].substitute(v, rhs)
        pins[v] = rhs
        rows = _canonical_rows(rows, {v: rhs})
    # redundancy: box test first, LP only when inconclusive
    lo: dict[Var, Fraction] = {}
    hi: dict[Var, Fraction] = {}
    for f in rows:
        if len(f.coeffs) == 1:
            (v, a), = f.coeffs.items()
            b = -f.const / a
            if a > 0:
                hi[v] = b
            else:
                lo[v] = b
    kept = [f for f in rows if len(f.coeffs) == 1]
    multi = [f for f in rows if len(f.coeffs) > 1 and not _box_redundant(f, lo, hi)]
    # tightest-looking rows first keeps the LP work small
    candidates = kept + multi
    i = len(kept)
    while i < len(candidates):
        f = candidates[i]
        others = candidates[:i] + candidates[i + 1:]
        order = sorted({v for g in candidates for v in g.coeffs})
        top = maximize(AffineForm._raw(dict(f.coeffs), Fraction(0)), others, order) if others else None
        if top is not None and top + f.const <= 0:
            candidates.pop(i)
        else:
            i += 1
    # single-variable rows may also be implied by multi-variable ones
    i = 0
    while i < len(candidates):
        f = candidates[i]
        if len(f.coeffs) == 1 and len(candidates) > 1:
            others = candidates[:i] + candidates[i + 1:]
            order = sorted({v for g in candidates for v in g.coeffs})
            top = maximize(AffineForm._raw(dict(f.coeffs), Fraction(0)), others, order)
            if top is not None and top + f.const <= 0:
                candidates.pop(i)
                continue
        i += 1
    return candidates


def _sort_key(f: AffineForm):
    return f.key()


class Polytope:
    """Canonical exact polyhedron.  Treat instances as immutable values."""

    __slots__ = ("variables", "inequalities", "pins", "empty", "_set_key")

    def __init__(self, variables: Iterable[Var], inequalities: Iterable[AffineForm] = (),
                 pins: Mapping[Var, AffineForm] | None = None, *, empty: bool = False,
                 _trusted: bool = False):
        self.variables: frozenset[Var] = frozenset(variables)
        self._set_key = None
        if _trusted or empty:
            self.inequalities: tuple[AffineForm, ...] = tuple(inequalities)
            self.pins: dict[Var, AffineForm] = dict(pins or {})
            self.empty = empty
            if empty:
                self.inequalities = ()
                self.pins = {}
            return
        p = Polytope.build(self.variables, [Constraint(f) for f in inequalities],
                           [(v, f) for v, f in (pins or {}).items()])
        self.inequalities = p.inequalities
        self.pins = p.pins
        self.empty = p.empty

    # ------------------------------------------------------------------ build
    @classmethod
    def universe(cls, variables: Iterable[Var]) -> "Polytope":
        return cls(variables, (), {}, _trusted=True)

    @classmethod
    def empty_set(cls, variables: Iterable[Var]) -> "Polytope":
        return cls(variables, empty=True)

    @classmethod
    def build(cls, variables: Iterable[Var], constraints: Iterable[Constraint] = (),
              pins: Iterable[tuple[Var, AffineForm]] = (), *, prefer: Sequence[Var] = (),
              flat_ok: bool = True) -> "Polytope":
        variables = frozenset(variables)
        p = cls.universe(variables)
        return p._extend(constraints, pins, prefer=prefer, flat_ok=flat_ok)

    def _extend(self, constraints: Iterable[Constraint], new_pins: Iterable[tuple[Var, AffineForm]] = (),
                *, prefer: Sequence[Var] = (), flat_ok: bool = True) -> "Polytope":
        if self.empty:
            return self
        pins = dict(self.pins)
        rows = list(self.inequalities)
        eqs: list[AffineForm] = []
        for v, f in new_pins:
            eqs.append(AffineForm.var(v) - f)
        for c in constraints:
            unknown = c.form.variables - self.variables
            if unknown:
                raise MalformedConstraint(f"unknown variables {sorted(unknown)} in {c.form}")
            if c.op == "==":
                eqs.append(c.form)
            elif c.op == "<=":
                rows.append(c.form)
            else:
                raise MalformedConstraint(f"unknown operator {c.op!r}")
        for e in eqs:
            unknown = e.variables - self.variables
            if unknown:
                raise MalformedConstraint(f"unknown variables {sorted(unknown)} in {e}")
        try:
            for e in eqs:
                e = e.substitute_all({v: r for v, r in pins.items() if v in e.coeffs})
                if e.is_constant():
                    if e.const:
                        raise _Empty
                    continue
                v = _pick(e, prefer)
                rhs = solve_for(e, v)
                for w in list(pins):
                    if v in pins[w].coeffs:
                        pins[w] = pins[w].substitute(v, rhs)
                pins[v] = rhs
            rows = _canonical_rows(rows, pins)
            free = sorted(self.variables - pins.keys())
            rows = _reduce(free, rows, pins, prefer, flat_ok)
        except (_Empty, _Flat):
            return Polytope.empty_set(self.variables)
        rows.sort(key=_sort_key)
        return Polytope(self.variables, rows, pins, _trusted=True)

    # -------------------------------------------------------------- queries
    @property
    def free(self) -> list[Var]:
        return sorted(self.variables - self.pins.keys())

    @property
    def dimension(self) -> int:
        return -1 if self.empty else len(self.variables) - len(self.pins)

    def is_empty(self) -> bool:
        return self.empty

    def contains(self, point: Mapping[Var, object]) -> bool:
        if self.empty:
            return False
        for v, f in self.pins.items():
            if point[v] != f.evaluate(point):
                return False
        return all(f.evaluate(point) <= 0 for f in self.inequalities)

    def bounds(self, form: AffineForm) -> tuple[Fraction | None, Fraction | None]:
        """Exact (min, max) of ``form`` over the polytope; ``None`` = unbounded."""
        if self.empty:
            raise ValueError("bounds of an empty polytope")
        f = form.substitute_all({v: r for v, r in self.pins.items() if v in form.coeffs})
        order = sorted({v for g in self.inequalities for v in g.coeffs} | f.variables)
        hi = maximize(f, self.inequalities, order)
        lo = maximize(-f, self.inequalities, order)
        return (None if lo is None else -lo), hi

    # ----------------------------------------------------------- operations
    def intersect(self, constraints: Iterable[Constraint], *, prefer: Sequence[Var] = (),
                  flat_ok: bool = True) -> "Polytope":
        """Conjunction with more constraints; equalities become pins.

        With ``flat_ok=False`` a result without interior is reported empty.
        """
        return self._extend(list(constraints), prefer=prefer, flat_ok=flat_ok)

    def add_variables(self, vs: Iterable[Var]) -> "Polytope":
        return Polytope(self.variables | set(vs), self.inequalities, self.pins,
                        empty=self.empty, _trusted=True)

    def substitute(self, v: Var, f: AffineForm) -> "Polytope":
        """Preimage under ``v := f``; variables of ``f`` join the variable set."""
        variables = self.variables | f.variables
        if self.empty:
            return Polytope.empty_set(variables)
        if v in self.pins:
            pins = dict(self.pins)
            old = pins.pop(v)
            base = Polytope(variables, self.inequalities, pins, _trusted=True)
            return base._extend([Constraint(f - old, "==")], prefer=(v,))
        rows = [g.substitute(v, f) for g in self.inequalities]
        pins = {w: r.substitute(v, f) for w, r in self.pins.items()}
        base = Polytope(variables, (), {}, _trusted=True)
        return base._extend([Constraint(g) for g in rows],
                            [(w, r) for w, r in sorted(pins.items())], prefer=sorted(pins))

    def eliminate(self, v: Var) -> "Polytope":
        """Orthogonal projection along the free variable ``v`` (Fourier-Motzkin)."""
        if v in self.pins:
            raise ValueError(f"{v} is pinned; unfold its equality before eliminating")
        if v not in self.variables:
            raise MalformedConstraint(f"unknown variable {v}")
        variables = self.variables - {v}
        if self.empty:
            return Polytope.empty_set(variables)
        dependents = sorted(w for w, r in self.pins.items() if v in r.coeffs)
        if dependents:
            # v is determined by a pinned variable: swap roles, then forget v
            w = dependents[-1]
            rhs = solve_for(AffineForm.var(w) - self.pins[w], v)
            pins = {u: r.substitute(v, rhs) for u, r in self.pins.items() if u != w}
            rows = [g.substitute(v, rhs) for g in self.inequalities]
            base = Polytope(variables, (), {}, _trusted=True)
            return base._extend([Constraint(g) for g in rows], sorted(pins.items()),
                                prefer=sorted(pins))
        pos, neg, rest = [], [], []
        for g in self.inequalities:
            a = g.coeff(v)
            if a > 0:
                pos.append(g / a)
            elif a < 0:
                neg.append(g / (-a))
            else:
                rest.append(g)
        for p in pos:
            for n in neg:
                rest.append(p + n)
        base = Polytope(variables, (), {}, _trusted=True)
        return base._extend([Constraint(g) for g in rest], sorted(self.pins.items()),
                            prefer=sorted(self.pins))

    def forget(self, v: Var) -> "Polytope":
        """Projection along any variable: pinned ones are dropped, free ones eliminated."""
        if v in self.pins:
            pins = dict(self.pins)
            del pins[v]
            return Polytope(self.variables - {v}, self.inequalities, pins,
                            empty=self.empty, _trusted=True)
        return self.eliminate(v)

    def project(self, keep: Iterable[Var]) -> "Polytope":
        keep = set(keep)
        p = self
        for v in sorted(p.pins):
            if v not in keep:
                p = p.forget(v)
        for v in sorted(p.variables - keep):
            p = p.forget(v)
        return p

    # ------------------------------------------------------------ equality
    def normalized(self) -> "Polytope":
        """Representative with pins chosen by a fixed rule (largest variable leads)."""
        if self.empty or not self.pins:
            return self
        eqs = [AffineForm.var(w) - r for w, r in self.pins.items()]
        pins: dict[Var, AffineForm] = {}
        for v in sorted(self.variables, reverse=True):
            src = next((e for e in eqs if v in e.coeffs), None)
            if src is None:
                continue
            eqs.remove(src)
            rhs = solve_for(src, v)
            eqs = [e.substitute(v, rhs) for e in eqs]
            for w in list(pins):
                pins[w] = pins[w].substitute(v, rhs)
            pins[v] = rhs
        rows = _canonical_rows(self.inequalities, {})
        # inequalities are over the old free variables; rewrite over the new ones
        rows = _canonical_rows([g.substitute_all({v: r for v, r in pins.items() if v in g.coeffs})
                                for g in rows], {})
        base = Polytope(self.variables, (), {}, _trusted=True)
        return base._extend([Constraint(g) for g in rows], sorted(pins.items()),
                            prefer=sorted(self.variables, reverse=True))

    def set_key(self):
        if self._set_key is None:
            if self.empty:
                self._set_key = (self.variables, "empty")
            else:
                n = self.normalized()
                self._set_key = (self.variables,
                                 tuple(f.key() for f in n.inequalities),
                                 tuple(sorted((v, r.key()) for v, r in n.pins.items())))
        return self._set_key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polytope):
            return NotImplemented
        return self.set_key() == other.set_key()

    def __hash__(self) -> int:
        return hash(self.set_key())

    def structure_key(self):
        """Bit-level identity of the stored representation."""
        return (self.variables, self.empty, tuple(f.key() for f in self.inequalities),
                tuple(sorted((v, r.key()) for v, r in self.pins.items())))

    def __repr__(self) -> str:
        if self.empty:
            return f"Polytope(empty over {sorted(self.variables)})"
        parts = [f"{v} = {r}" for v, r in sorted(self.pins.items())]
        parts += [f"{f} <= 0" for f in self.inequalities]
        return "Polytope{" + ", ".join(parts) + "}"
