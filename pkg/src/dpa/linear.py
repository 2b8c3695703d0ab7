"""Variables, affine forms and a small exact simplex solver.

Everything here works over :class:`fractions.Fraction`; nothing is ever
rounded.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, NamedTuple, Sequence

CLOCK = "x"
DURATION = "y"
ABSOLUTE = "t"
AUX = "tau"

_KIND_NAMES = {CLOCK: "clock", DURATION: "duration", ABSOLUTE: "absolute-time", AUX: "auxiliary"}


class Var(NamedTuple):
    """A named real variable: ``kind`` is one of x, y, t, tau."""

    kind: str
    proc: int = 0
    step: int = 0

    def __repr__(self) -> str:
        if self.kind in (ABSOLUTE, AUX):
            return self.kind
        return f"{self.kind}{self.proc}.{self.step}"

    __str__ = __repr__


def clock(proc: int, step: int) -> Var:
    return Var(CLOCK, proc, step)


def duration(proc: int, step: int) -> Var:
    return Var(DURATION, proc, step)


ABS_TIME = Var(ABSOLUTE)
TAU = Var(AUX)


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # floats are only accepted when they are exactly representable decimals
        return Fraction(str(value))
    return Fraction(value)


class AffineForm:
    """``sum(coeff[v] * v) + const`` with no zero coefficients stored."""

    __slots__ = ("coeffs", "const", "_key")

    def __init__(self, coeffs: Mapping[Var, object] | None = None, const=0):
        c = {}
        if coeffs:
            for v, a in coeffs.items():
                a = as_fraction(a)
                if a:
                    c[v] = a
        self.coeffs: dict[Var, Fraction] = c
        self.const = as_fraction(const)
        self._key = None

    @classmethod
    def _raw(cls, coeffs: dict, const: Fraction) -> "AffineForm":
        f = cls.__new__(cls)
        f.coeffs = coeffs
        f.const = const
        f._key = None
        return f

    @classmethod
    def var(cls, v: Var, coeff=1) -> "AffineForm":
        return cls({v: coeff})

    @classmethod
    def constant(cls, value) -> "AffineForm":
        return cls(None, value)

    # --- structure -------------------------------------------------------
    @property
    def variables(self) -> frozenset[Var]:
        return frozenset(self.coeffs)

    def coeff(self, v: Var) -> Fraction:
        return self.coeffs.get(v, Fraction(0))

    def is_constant(self) -> bool:
        return not self.coeffs

    def key(self):
        if self._key is None:
            self._key = (tuple(sorted(self.coeffs.items())), self.const)
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffineForm):
            return NotImplemented
        return self.const == other.const and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        parts = []
        for v, a in sorted(self.coeffs.items()):
            if a == 1:
                parts.append(f"+{v}")
            elif a == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{'+' if a > 0 else '-'}{abs(a)}*{v}")
        if self.const or not parts:
            parts.append(f"{'+' if self.const >= 0 else '-'}{abs(self.const)}")
        s = "".join(parts)
        return s[1:] if s.startswith("+") else s

    # --- arithmetic ------------------------------------------------------
    def __add__(self, other) -> "AffineForm":
        if not isinstance(other, AffineForm):
            return AffineForm._raw(dict(self.coeffs), self.const + as_fraction(other))
        c = dict(self.coeffs)
        for v, a in other.coeffs.items():
            s = c.get(v, 0) + a
            if s:
                c[v] = s
            else:
                c.pop(v, None)
        return AffineForm._raw(c, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "AffineForm":
        return AffineForm._raw({v: -a for v, a in self.coeffs.items()}, -self.const)

    def __sub__(self, other) -> "AffineForm":
        if not isinstance(other, AffineForm):
            return self + (-as_fraction(other))
        return self + (-other)

    def __rsub__(self, other) -> "AffineForm":
        return (-self) + other

    def __mul__(self, k) -> "AffineForm":
        k = as_fraction(k)
        if not k:
            return AffineForm()
        return AffineForm._raw({v: a * k for v, a in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k) -> "AffineForm":
        return self * (1 / as_fraction(k))

    def substitute(self, v: Var, form: "AffineForm") -> "AffineForm":
        a = self.coeffs.get(v)
        if a is None:
            return self
        c = dict(self.coeffs)
        del c[v]
        rest = AffineForm._raw(c, self.const)
        return rest + form * a

    def substitute_all(self, mapping: Mapping[Var, "AffineForm"]) -> "AffineForm":
        out = self
        for v, f in mapping.items():
            if v in out.coeffs:
                out = out.substitute(v, f)
        return out

    def evaluate(self, point: Mapping[Var, object]):
        total = self.const
        for v, a in self.coeffs.items():
            total = total + a * point[v]
        return total

    def normalized(self) -> "AffineForm":
        """Positive rescaling making the coefficient vector integral with gcd 1."""
        if not self.coeffs:
            return self
        den = 1
        for a in self.coeffs.values():
            den = den * a.denominator // gcd(den, a.denominator)
        num = 0
        for a in self.coeffs.values():
            num = gcd(num, abs(a.numerator * (den // a.denominator)))
        scale = Fraction(den, num)
        if scale == 1:
            return self
        return self * scale


def solve_for(form: AffineForm, v: Var) -> AffineForm:
    """Rewrite ``form == 0`` as ``v == result``."""
    a = form.coeffs[v]
    c = dict(form.coeffs)
    del c[v]
    return AffineForm._raw(c, form.const) * (-1 / a)


# --------------------------------------------------------------------------
# simplex
# --------------------------------------------------------------------------

def simplex_min(cost: Sequence[Fraction], rows: Sequence[Sequence[Fraction]],
                rhs: Sequence[Fraction]):
    """Minimise ``cost . lam`` subject to ``rows @ lam == rhs`` and ``lam >= 0``.

    Returns ``(value, lam)``; ``None`` if infeasible; ``(None, None)`` if
    unbounded below.  Two-phase tableau method with Bland's rule.
    """
    m = len(rows)
    n = len(cost)
    # tableau rows: [coeffs(n) | artificials(m) | rhs]
    tab = []
    for i in range(m):
        r = [Fraction(a) for a in rows[i]]
        b = Fraction(rhs[i])
        if b < 0:
            r = [-a for a in r]
            b = -b
        art = [Fraction(0)] * m
        art[i] = Fraction(1)
        tab.append(r + art + [b])
    basis = [n + i for i in range(m)]
    width = n + m

    def pivot(pr, pc):
        prow = tab[pr]
        p = prow[pc]
        if p != 1:
            inv = 1 / p
            prow = [a * inv for a in prow]
            tab[pr] = prow
        for i in range(m):
            if i != pr:
                f = tab[i][pc]
                if f:
                    row = tab[i]
                    tab[i] = [a - f * b if b else a for a, b in zip(row, prow)]
        basis[pr] = pc

    def run(obj, allowed):
        # obj: list over width of cost coefficients; reduced costs recomputed each round
        while True:
            red = list(obj)
            zval = Fraction(0)
            for i in range(m):
                cb = obj[basis[i]]
                if cb:
                    row = tab[i]
                    for j in range(width):
                        if row[j]:
                            red[j] -= cb * row[j]
            enter = -1
            for j in range(width):
                if allowed[j] and red[j] < 0 and j not in basis:
                    enter = j
                    break
            if enter < 0:
                return True
            best = None
            leave = -1
            for i in range(m):
                a = tab[i][enter]
                if a > 0:
                    ratio = tab[i][-1] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best = ratio
                        leave = i
            if leave < 0:
                return False
            pivot(leave, enter)

    # phase 1
    obj1 = [Fraction(0)] * n + [Fraction(1)] * m
    run(obj1, [True] * width)
    infeas = sum(tab[i][-1] for i in range(m) if basis[i] >= n)
    if infeas > 0:
        return None
    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if tab[i][j] and j not in basis:
                    pivot(i, j)
                    break
    obj2 = [Fraction(a) for a in cost] + [Fraction(0)] * m
    allowed = [True] * n + [False] * m
    if not run(obj2, allowed):
        return (None, None)
    lam = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            lam[basis[i]] = tab[i][-1]
    value = sum((cost[j] * lam[j] for j in range(n)), Fraction(0))
    return value, lam


def farkas(ineqs: Sequence[AffineForm], order: Sequence[Var]):
    """Classify the system ``f <= 0`` for ``f`` in ``ineqs``.

    Returns ``(status, weights)`` with status ``"empty"``, ``"flat"`` (non-empty
    but without interior) or ``"full"``.  For ``"flat"``, rows with positive
    weight hold with equality everywhere on the set.
    """
    m = len(ineqs)
    if m == 0:
        return "full", None
    # Farkas: exists lam>=0, sum lam = 1, A^T lam = 0; min b.lam with b = -const
    rows = [[f.coeff(v) for f in ineqs] for v in order]
    rows.append([Fraction(1)] * m)
    rhs = [Fraction(0)] * len(order) + [Fraction(1)]
    cost = [-f.const for f in ineqs]
    res = simplex_min(cost, rows, rhs)
    if res is None:
        return "full", None
    value, lam = res
    if value < 0:
        return "empty", lam
    if value == 0:
        return "flat", lam
    return "full", lam


def maximize(objective: AffineForm, ineqs: Sequence[AffineForm], order: Sequence[Var]):
    """Exact ``max objective`` over ``{f <= 0}``; ``None`` when unbounded.

    Solved through the dual ``min b.lam`` s.t. ``A^T lam = c``, ``lam >= 0``;
    the caller guarantees the primal is feasible.
    """
    m = len(ineqs)
    rows = [[f.coeff(v) for f in ineqs] for v in order]
    rhs = [objective.coeff(v) for v in order]
    if m == 0:
        return objective.const if not any(rhs) else None
    cost = [-f.const for f in ineqs]
    res = simplex_min(cost, rows, rhs)
    if res is None:
        return None
    value, _ = res
    if value is None:  # dual unbounded means primal infeasible; caller's contract
        raise ValueError("maximize called on an empty system")
    return value + objective.const


def ordered(vars_: Iterable[Var]) -> list[Var]:
    return sorted(vars_)


def kind_name(v: Var) -> str:
    return _KIND_NAMES[v.kind]
