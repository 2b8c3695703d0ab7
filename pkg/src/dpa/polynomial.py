"""Sparse multivariate polynomials with rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .linear import AffineForm, Var, as_fraction

# a monomial is a sorted tuple of (Var, exponent > 0); () is the unit monomial
Monomial = tuple


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


class Polynomial:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        t = {}
        if terms:
            for m, c in terms.items():
                c = as_fraction(c)
                if c:
                    t[m] = c
        self.terms: dict[Monomial, Fraction] = t

    @classmethod
    def _raw(cls, terms: dict) -> "Polynomial":
        p = cls.__new__(cls)
        p.terms = terms
        return p

    @classmethod
    def constant(cls, c) -> "Polynomial":
        return cls({(): c})

    @classmethod
    def from_affine(cls, f: AffineForm) -> "Polynomial":
        t = {((v, 1),): a for v, a in f.coeffs.items()}
        if f.const:
            t[()] = f.const
        return cls._raw(t)

    # ------------------------------------------------------------ structure
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def variables(self) -> frozenset[Var]:
        return frozenset(v for m in self.terms for v, _ in m)

    @property
    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def degree_in(self, v: Var) -> int:
        return max((e for m in self.terms for w, e in m if w == v), default=0)

    def key(self):
        return tuple(sorted(self.terms.items()))

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == ({(): Fraction(other)} if other else {})
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda kv: (-len(kv[0]), kv[0])):
            mono = "*".join(f"{v}^{e}" if e > 1 else str(v) for v, e in m)
            parts.append(f"{c}*{mono}" if mono else str(c))
        return " + ".join(parts)

    # ----------------------------------------------------------- arithmetic
    def __add__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            s = t.get(m, 0) + c
            if s:
                t[m] = s
            else:
                t.pop(m, None)
        return Polynomial._raw(t)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            k = as_fraction(other)
            if not k:
                return Polynomial()
            return Polynomial._raw({m: c * k for m, c in self.terms.items()})
        t: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                s = t.get(m, 0) + c1 * c2
                if s:
                    t[m] = s
                else:
                    t.pop(m, None)
        return Polynomial._raw(t)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "Polynomial":
        out = Polynomial.constant(1)
        for _ in range(e):
            out = out * self
        return out

    # ------------------------------------------------------------ calculus
    def substitute(self, v: Var, f: AffineForm) -> "Polynomial":
        """Compose with ``v := f``."""
        if not any(w == v for m in self.terms for w, _ in m):
            return self
        fp = Polynomial.from_affine(f)
        powers = [Polynomial.constant(1)]
        out = Polynomial()
        for m, c in self.terms.items():
            e = 0
            rest = []
            for w, k in m:
                if w == v:
                    e = k
                else:
                    rest.append((w, k))
            if not e:
                out = out + Polynomial._raw({m: c})
                continue
            while len(powers) <= e:
                powers.append(powers[-1] * fp)
            out = out + powers[e] * Polynomial._raw({tuple(rest): c})
        return out

    def substitute_all(self, mapping: Mapping[Var, AffineForm]) -> "Polynomial":
        out = self
        for v, f in mapping.items():
            out = out.substitute(v, f)
        return out

    def antiderivative(self, v: Var) -> "Polynomial":
        t: dict = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(v, 0) + 1
            d[v] = e
            t[tuple(sorted(d.items()))] = c / e
        return Polynomial._raw(t)

    def derivative(self, v: Var) -> "Polynomial":
        t: dict = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(v, 0)
            if not e:
                continue
            if e == 1:
                del d[v]
            else:
                d[v] = e - 1
            t[tuple(sorted(d.items()))] = c * e
        return Polynomial._raw(t)

    def evaluate(self, point: Mapping[Var, object]):
        total = 0
        for m, c in self.terms.items():
            term = c
            for v, e in m:
                term = term * point[v] ** e
            total = total + term
        return total

    def constant_value(self) -> Fraction:
        if any(m for m in self.terms):
            raise ValueError(f"polynomial {self} is not constant")
        return self.terms.get((), Fraction(0))
