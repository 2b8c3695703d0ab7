"""Independent oracles used by the test-suite.

Nothing here calls the package's LP, elimination or integration code: the
geometry is redone with plain Fourier-Motzkin on Fractions or with floating
point (Qhull, scipy.optimize) and simplex cubature.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, HalfspaceIntersection

Row = tuple[tuple[Fraction, ...], Fraction]   # sum a_i x_i + c <= 0


# ---------------------------------------------------------------------------
# exact Fourier-Motzkin
# ---------------------------------------------------------------------------

def _norm(row: Row) -> Row:
    a, c = row
    scale = max([abs(v) for v in a] + [Fraction(0)])
    if scale == 0:
        return a, c
    return tuple(v / scale for v in a), c / scale


def fm_eliminate(rows: Sequence[Row], k: int) -> list[Row]:
    """Project out coordinate ``k`` (the coordinate stays, with zero coefficients)."""
    pos, neg, out = [], [], []
    for a, c in rows:
        if a[k] > 0:
            pos.append((a, c))
        elif a[k] < 0:
            neg.append((a, c))
        else:
            out.append((a, c))
    for (ap, cp), (an, cn) in itertools.product(pos, neg):
        lp, ln = -an[k], ap[k]
        out.append((tuple(lp * x + ln * y for x, y in zip(ap, an)), lp * cp + ln * cn))
    return list({_norm(r) for r in out})


def fm_feasible(rows: Sequence[Row], dim: int) -> bool:
    rows = list({_norm(r) for r in rows})
    for k in range(dim):
        rows = fm_eliminate(rows, k)
        if any(all(v == 0 for v in a) and c > 0 for a, c in rows):
            return False
    return all(c <= 0 for _, c in rows)


def fm_lift_feasible(rows: Sequence[Row], point: dict[int, Fraction], k: int) -> bool:
    """Is there a value of coordinate ``k`` making ``point`` satisfy every row?"""
    lo, hi = -math.inf, math.inf
    for a, c in rows:
        rest = c + sum(a[i] * v for i, v in point.items() if i != k)
        if a[k] == 0:
            if rest > 0:
                return False
        elif a[k] > 0:
            hi = min(hi, -rest / a[k])
        else:
            lo = max(lo, -rest / a[k])
    return lo <= hi


# ---------------------------------------------------------------------------
# floating point polytope geometry
# ---------------------------------------------------------------------------

def chebyshev_center(A: np.ndarray, b: np.ndarray):
    """Deepest interior point of ``A x <= b``; returns (point, radius) or None."""
    norms = np.linalg.norm(A, axis=1)
    d = A.shape[1]
    res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.c_[A, norms], b_ub=b,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0:
        return None
    return res.x[:d], res.x[d]


def vertices(A: np.ndarray, b: np.ndarray):
    """Vertices of a bounded full-dimensional ``A x <= b`` or None if it is thin."""
    cc = chebyshev_center(A, b)
    if cc is None or cc[1] <= 1e-9:
        return None
    x0, _ = cc
    d = A.shape[1]
    if d == 1:
        a = A[:, 0]
        ub = min(bi / ai for ai, bi in zip(a, b) if ai > 0)
        lb = max(bi / ai for ai, bi in zip(a, b) if ai < 0)
        return np.array([[lb], [ub]])
    hs = HalfspaceIntersection(np.c_[A, -b], x0)
    return hs.intersections


def volume(A: np.ndarray, b: np.ndarray) -> float:
    V = vertices(A, b)
    if V is None:
        return 0.0
    if V.shape[1] == 1:
        return float(V[1, 0] - V[0, 0])
    return float(ConvexHull(V).volume)


# ---------------------------------------------------------------------------
# Grundmann-Moeller simplex cubature
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def gm_rule(n: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric nodes and weights averaging a degree ``2s+1`` polynomial over an n-simplex."""
    d = 2 * s + 1
    nodes, weights = [], []
    for i in range(s + 1):
        w = (-1) ** i * 2.0 ** (-2 * s) * (d + n - 2 * i) ** d / (math.factorial(i) * math.factorial(d + n - i))
        w *= math.factorial(n)
        for beta in _compositions(s - i, n + 1):
            nodes.append([(2 * bj + 1) / (d + n - 2 * i) for bj in beta])
            weights.append(w)
    return np.array(nodes), np.array(weights)


def _simplex_integral(f, S: np.ndarray, rule) -> float:
    n = S.shape[1]
    vol = abs(np.linalg.det(S[1:] - S[0])) / math.factorial(n)
    if vol == 0.0:
        return 0.0
    nodes, w = rule
    pts = nodes @ S
    return vol * float(np.dot(w, f(pts)))


def integrate_simplex(f, S: np.ndarray, degree: int, tol: float = 1e-13, depth: int = 0) -> float:
    """Adaptive: compare two rule orders, bisect the longest edge when they disagree."""
    n = S.shape[1]
    s = max(0, (degree + 1) // 2)
    lo = _simplex_integral(f, S, gm_rule(n, s))
    hi = _simplex_integral(f, S, gm_rule(n, s + 1))
    if abs(hi - lo) <= tol * max(1.0, abs(hi)) or depth >= 8:
        return hi
    i, j = max(itertools.combinations(range(n + 1), 2), key=lambda e: np.linalg.norm(S[e[0]] - S[e[1]]))
    mid = (S[i] + S[j]) / 2
    A, B = S.copy(), S.copy()
    A[i], B[j] = mid, mid
    return (integrate_simplex(f, A, degree, tol, depth + 1)
            + integrate_simplex(f, B, degree, tol, depth + 1))


def integrate_polytope(f: Callable[[np.ndarray], np.ndarray], A: np.ndarray, b: np.ndarray,
                       degree: int) -> float:
    """Integral of ``f`` (vectorized over rows of points) on ``A x <= b``."""
    d = A.shape[1]
    if d == 0:
        return float(f(np.zeros((1, 0)))[0]) if np.all(b >= -1e-12) else 0.0
    V = vertices(A, b)
    if V is None:
        return 0.0
    if d == 1:
        return integrate_simplex(f, V, degree)
    tri = Delaunay(V)
    return math.fsum(integrate_simplex(f, V[simplex], degree) for simplex in tri.simplices)


# ---------------------------------------------------------------------------
# bridges to package objects (read-only use of their data)
# ---------------------------------------------------------------------------

def piece_system(piece):
    """``(free variables, A, b, f, degree)`` describing one density piece in floats."""
    free = piece.domain.free
    pos = {v: k for k, v in enumerate(free)}
    A = np.zeros((len(piece.domain.inequalities), len(free)))
    b = np.zeros(len(piece.domain.inequalities))
    for r, g in enumerate(piece.domain.inequalities):
        for v, c in g.coeffs.items():
            A[r, pos[v]] = float(c)
        b[r] = -float(g.const)
    terms = [(float(c), [(pos[v], e) for v, e in mono]) for mono, c in piece.value.terms.items()]

    def f(X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0])
        for c, mono in terms:
            t = np.full(X.shape[0], c)
            for k, e in mono:
                t = t * X[:, k] ** e
            out += t
        return out

    degree = max((sum(e for _, e in mono) for _, mono in terms), default=0)
    return free, A, b, f, degree


def density_mass(d) -> float:
    total = []
    for p in d.pieces:
        _, A, b, f, deg = piece_system(p)
        total.append(integrate_polytope(f, A, b, deg))
    return math.fsum(total)


# ---------------------------------------------------------------------------
# product-density oracle for liberal schedulers
# ---------------------------------------------------------------------------

def end_orders(model) -> list[tuple[int, ...]]:
    """Every interleaving of end events compatible with each process's local order."""
    seq = [i for i, p in enumerate(model.processes) for _ in range(p.k)]
    return sorted(set(itertools.permutations(seq)))


def order_probability(model, order: Sequence[int]) -> float:
    """Mass of the product of uniform duration densities where ends occur in ``order``.

    Under the liberal scheduler step ``j`` of process ``i`` ends at
    ``y_i^1 + ... + y_i^j``; the region is a polytope in duration space.
    """
    cols = {}
    for i, p in enumerate(model.processes):
        for j in range(p.k):
            cols[(i, j)] = len(cols)
    d = len(cols)
    rows, rhs = [], []
    for (i, j), c in cols.items():
        s = model.step(i, j)
        e = np.zeros(d)
        e[c] = 1.0
        rows.append(e.copy()); rhs.append(float(s.hi))
        rows.append(-e); rhs.append(-float(s.lo))
    seen = [0] * model.n
    ends = []
    for i in order:
        vec = np.zeros(d)
        for j in range(seen[i] + 1):
            vec[cols[(i, j)]] = 1.0
        seen[i] += 1
        ends.append(vec)
    for a, b in zip(ends, ends[1:]):
        rows.append(a - b); rhs.append(0.0)
    box = math.prod(float(model.step(i, j).hi - model.step(i, j).lo) for i, j in cols)
    return volume(np.array(rows), np.array(rhs)) / box


# ---------------------------------------------------------------------------
# exact polyhedral cover (uses Polytope only as a data structure + intersect)
# ---------------------------------------------------------------------------

def contained(inner, outer) -> bool:
    """closure(inner) within outer, via exact bounds of outer's constraints on inner."""
    from dpa.linear import AffineForm

    if inner.empty:
        return True
    if outer.empty:
        return False
    for g in outer.inequalities:
        hi = inner.bounds(g)[1]
        if hi is None or hi > 0:
            return False
    for v, r in outer.pins.items():
        lo, hi = inner.bounds(AffineForm.var(v) - r)
        if lo != 0 or hi != 0:
            return False
    return True


def covered(zone, parts: list) -> bool:
    """Is ``zone`` contained in the union of ``parts`` up to a null set of its own dimension?"""
    from dpa.linear import AffineForm
    from dpa.polytope import Constraint

    if zone.empty:
        return True
    if not parts:
        return False
    p, rest = parts[0], parts[1:]
    if p.empty:
        return covered(zone, rest)
    on_hull = zone.intersect([Constraint(AffineForm.var(v) - r, "==") for v, r in p.pins.items()])
    if on_hull.empty or on_hull.dimension < zone.dimension:
        return covered(zone, rest)
    done = []
    for g in p.inequalities:
        outside = zone.intersect([Constraint(-g)] + [Constraint(h) for h in done], flat_ok=False)
        if not covered(outside, rest):
            return False
        done.append(g)
    return True
