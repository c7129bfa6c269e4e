"""Rational cones in the space of symmetric bilinear forms.

Conventions. A form ``b`` on ``X = Z^g`` is stored as the vector of its
entries ``b_kl``, ``k <= l`` (row-major over the upper triangle). A character
``u`` in ``Sym^2(X)`` is stored in the monomial basis ``x_k x_l``, ``k <= l``.
The pairing is the plain dot product, so ``x (x) x`` has coordinates
``x_k^2`` and ``2 x_k x_l`` and ``<b, x (x) x> = b(x, x)``.

An integral structure ``S`` is a full-rank lattice in ``Sym^2(X) (x) Q``,
given by rational basis rows in monomial coordinates. Its dual lattice
``S*`` consists of the forms with integral pairings against that basis; the
``S*``-coordinates of a form are exactly these pairings.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import floor, lcm, prod
from typing import Iterable, Sequence

from .exact_lattice import (
    IntMatrix, complete_basis, elementary_divisors, inverse_unimodular,
    kernel, primitive, saturated_rows, snf,
)

Vec = tuple[int, ...]


# --------------------------------------------------------------------------
# coordinates


def sym_pairs(g: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(g) for l in range(k, g)]


def sym_rank(g: int) -> int:
    return g * (g + 1) // 2


def genus_of(n: int) -> int:
    g = 0
    while sym_rank(g) < n:
        g += 1
    if sym_rank(g) != n:
        raise ValueError(f"{n} is not a triangular number")
    return g


def form_to_vec(b: Sequence[Sequence[int]]) -> Vec:
    return tuple(b[k][l] for k, l in sym_pairs(len(b)))


def vec_to_form(v: Sequence, g: int | None = None) -> list[list]:
    g = genus_of(len(v)) if g is None else g
    b = [[0] * g for _ in range(g)]
    for (k, l), x in zip(sym_pairs(g), v):
        b[k][l] = b[l][k] = x
    return b


def square(x: Sequence[int]) -> Vec:
    """The rank-one form ``x x^T``."""
    return tuple(x[k] * x[l] for k, l in sym_pairs(len(x)))


def sym2_vector(x: Sequence[int]) -> Vec:
    """Monomial coordinates of ``x (x) x`` in ``Sym^2(X)``."""
    return tuple(x[k] * x[l] * (1 if k == l else 2) for k, l in sym_pairs(len(x)))


def dot(u: Sequence, v: Sequence):
    return sum(a * b for a, b in zip(u, v))


def transform_form(v: Sequence[int], A: Sequence[Sequence[int]]) -> Vec:
    """Pull back the form ``v`` along ``A``: ``b -> A^T b A``."""
    g = len(A)
    b = vec_to_form(v, g)
    Ab = [[sum(A[i][k] * b[i][j] for i in range(g)) for j in range(g)] for k in range(g)]
    return form_to_vec([[sum(Ab[k][j] * A[j][l] for j in range(g)) for l in range(g)]
                        for k in range(g)])


def _minor_dets(b: Sequence[Sequence]) -> Iterable:
    g = len(b)
    for size in range(1, g + 1):
        for idx in itertools.combinations(range(g), size):
            yield _det_q([[b[i][j] for j in idx] for i in idx])


def is_psd(v: Sequence) -> bool:
    """All principal minors non-negative."""
    return all(d >= 0 for d in _minor_dets(vec_to_form(v)))


def is_positive_definite(v: Sequence) -> bool:
    b = vec_to_form(v)
    return all(_det_q([row[:k] for row in b[:k]]) > 0 for k in range(1, len(b) + 1))


# --------------------------------------------------------------------------
# exact rational helpers


def _det_q(A: Sequence[Sequence]) -> Fraction:
    n = len(A)
    M = [[Fraction(x) for x in row] for row in A]
    d = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            d = -d
        d *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return d


def _nullspace_q(rows: Sequence[Sequence], n: int) -> list[list[Fraction]]:
    M = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, c in enumerate(pivots):
            v[c] = -M[i][f]
        basis.append(v)
    return basis


def rank_q(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    return len(rows[0]) - len(_nullspace_q(rows, len(rows[0])))


def primitive_q(v: Sequence) -> Vec:
    """Primitive integer vector on the ray through a rational vector."""
    v = [Fraction(x) for x in v]
    L = lcm(*(x.denominator for x in v)) if v else 1
    return primitive([int(x * L) for x in v])


def _ray_normal(v: Sequence) -> Vec:
    """Primitive, keeping direction (``primitive`` may flip the sign)."""
    w = primitive_q(v)
    first = next((x for x in v if x != 0), 0)
    lead = next((x for x in w if x != 0), 0)
    if (first > 0) != (lead > 0):
        w = tuple(-x for x in w)
    return w


def solve_q(rows: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve ``y A = b`` for a square invertible ``A`` given by rows."""
    n = len(rows)
    A = [[Fraction(rows[j][i]) for j in range(n)] + [Fraction(b[i])] for i in range(n)]
    for c in range(n):
        piv = next(i for i in range(c, n) if A[i][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for i in range(n):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * bb for a, bb in zip(A[i], A[c])]
    return [A[i][n] for i in range(n)]


# --------------------------------------------------------------------------
# H- and V-descriptions


@dataclass(frozen=True)
class DualCone:
    """``{x : <x, r> >= 0}`` presented as extreme rays plus a lineality basis.

    The rays lie in the row space of the constraints, so they are canonical
    representatives modulo the lineality space.
    """

    rays: tuple[Vec, ...]
    lineality: tuple[Vec, ...]

    def to_json(self) -> dict:
        return {"rays": [list(r) for r in self.rays],
                "lineality": [list(r) for r in self.lineality]}


def dual_of_generators(gens: Sequence[Sequence[int]], n: int) -> DualCone:
    """Extreme rays of ``{x in Q^n : <x, v> >= 0 for v in gens}``.

    Works in the row space of the generators, where the cone is pointed;
    extreme rays are the one-dimensional solutions of ``k - 1`` independent
    tight constraints that satisfy the others.
    """
    A = [list(v) for v in gens if any(v)]
    if not A:
        return DualCone((), tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))
    K = kernel(IntMatrix.from_rows(A, n))
    lineality = tuple(sorted(_ray_normal(c) for c in K.columns()))
    Q = saturated_rows(A, n)
    k = len(Q)
    M = [[dot(a, q) for q in Q] for a in A]
    rays = set()
    if k == 1:
        y = [1] if all(row[0] >= 0 for row in M) else ([-1] if all(row[0] <= 0 for row in M) else None)
        cands = [y] if y else []
    else:
        cands = []
        seen = set()
        for sub in itertools.combinations(range(len(M)), k - 1):
            ns = _nullspace_q([M[i] for i in sub], k)
            if len(ns) != 1:
                continue
            y = ns[0]
            vals = [dot(row, y) for row in M]
            if all(v >= 0 for v in vals):
                pass
            elif all(v <= 0 for v in vals):
                y = [-x for x in y]
            else:
                continue
            yi = primitive_q(y)
            if yi in seen:
                continue
            seen.add(yi)
            cands.append(yi)
    for y in cands:
        x = [sum(y[i] * Q[i][j] for i in range(k)) for j in range(n)]
        rays.add(_ray_normal(x))
    return DualCone(tuple(sorted(rays)), lineality)


# --------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class RationalCone:
    """Cone generated by primitive integer rays in ``Z^n``.

    ``from_generators`` normalises: primitive rays, redundant generators
    dropped (pointed case), sorted. Non-pointed cones keep all generators
    and report ``is_pointed = False``.
    """

    ambient: int
    rays: tuple[Vec, ...]

    @classmethod
    def from_generators(cls, gens: Iterable[Sequence[int]], ambient: int | None = None) -> "RationalCone":
        gens = [tuple(int(x) for x in v) for v in gens]
        n = ambient if ambient is not None else (len(gens[0]) if gens else 0)
        rays = sorted({_ray_normal(v) for v in gens if any(v)})
        cone = cls(n, tuple(rays))
        if not cone.is_pointed or len(rays) <= 1:
            return cone
        keep = []
        for i, v in enumerate(rays):
            others = rays[:i] + rays[i + 1:]
            if not _in_cone(v, dual_of_generators(others, n)):
                keep.append(v)
        return cls(n, tuple(keep))

    @classmethod
    def zero(cls, n: int) -> "RationalCone":
        return cls(n, ())

    @property
    def dim(self) -> int:
        return rank_q(self.rays)

    @cached_property
    def dual(self) -> DualCone:
        return dual_of_generators(self.rays, self.ambient)

    @property
    def is_pointed(self) -> bool:
        # pointed iff the dual is full-dimensional
        if not self.rays:
            return True
        d = self.dual
        return rank_q(list(d.rays)) + len(d.lineality) == self.ambient

    @property
    def is_simplicial(self) -> bool:
        return len(self.rays) == self.dim

    def contains(self, x: Sequence) -> bool:
        return _in_cone(x, self.dual)

    def in_relative_interior(self, x: Sequence) -> bool:
        if not self.contains(x):
            return False
        return all(dot(f, x) > 0 for f in self.dual.rays)

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "rays": [list(r) for r in self.rays]}

    @classmethod
    def from_json(cls, d: dict) -> "RationalCone":
        return cls.from_generators(d["rays"], d["ambient"])

    def transform(self, A: Sequence[Sequence[int]]) -> "RationalCone":
        return RationalCone.from_generators([transform_form(r, A) for r in self.rays], self.ambient)


def _in_cone(x: Sequence, H: DualCone) -> bool:
    """Membership in the cone whose dual is H (the double dual)."""
    return all(dot(f, x) >= 0 for f in H.rays) and all(dot(l, x) == 0 for l in H.lineality)


# --------------------------------------------------------------------------
# integral structures


@dataclass(frozen=True)
class IntegralStructure:
    """Full-rank lattice in ``Sym^2(X) (x) Q``; rows are a basis."""

    basis: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if _det_q(self.basis) == 0:
            raise ValueError("integral structure must have full rank")

    @classmethod
    def standard(cls, n: int) -> "IntegralStructure":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "IntegralStructure":
        return cls(tuple(tuple(Fraction(x) for x in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.basis)

    def dual_coords(self, b: Sequence) -> list[Fraction]:
        """Pairings of a form with the basis of S."""
        return [dot(row, b) for row in self.basis]

    def dual_primitive(self, b: Sequence) -> Vec:
        """Primitive vector of ``S*`` on the ray of b, in ``S*``-coordinates."""
        return primitive_q(self.dual_coords(b))

    def form_from_dual(self, c: Sequence) -> list[Fraction]:
        """Inverse of ``dual_coords``."""
        n = self.n
        cols = [[self.basis[i][j] for i in range(n)] for j in range(n)]
        return solve_q(cols, c)

    def coords(self, u: Sequence) -> list[Fraction]:
        """S-coordinates of a monomial vector."""
        return solve_q(self.basis, u)

    def to_monomial(self, y: Sequence) -> list[Fraction]:
        return [sum(Fraction(y[i]) * self.basis[i][j] for i in range(self.n)) for j in range(self.n)]

    def index_over_standard(self) -> Fraction:
        """``[S : Sym^2(X)]`` when S contains it (the inverse otherwise)."""
        return 1 / abs(_det_q(self.basis))

    def contains(self, u: Sequence) -> bool:
        return all(x.denominator == 1 for x in self.coords(u))

    def transform(self, A: Sequence[Sequence[int]]) -> "IntegralStructure":
        """Image under ``x -> A x`` acting on ``Sym^2(X)``."""
        g = len(A)
        out = []
        for row in self.basis:
            M = vec_to_form([x if k == l else x / 2 for (k, l), x in zip(sym_pairs(g), row)], g)
            N = [[sum(A[i][k] * M[k][l] * A[j][l] for k in range(g) for l in range(g))
                  for j in range(g)] for i in range(g)]
            out.append([N[k][l] * (1 if k == l else 2) for k, l in sym_pairs(g)])
        return IntegralStructure.from_rows(out)

    def same_lattice(self, other: "IntegralStructure") -> bool:
        return all(other.contains(r) for r in self.basis) and all(self.contains(r) for r in other.basis)

    def to_json(self) -> dict:
        return {"basis": [[str(x) for x in row] for row in self.basis]}


def dual_cone(sigma: RationalCone, S: IntegralStructure | None = None) -> DualCone:
    """Rays and lineality of ``sigma^vee`` in S-coordinates."""
    S = S or IntegralStructure.standard(sigma.ambient)
    gens = [S.dual_primitive(r) for r in sigma.rays]
    return dual_of_generators(gens, sigma.ambient)


# --------------------------------------------------------------------------
# faces


@dataclass(frozen=True)
class Face:
    rays: tuple[Vec, ...]
    dim: int

    def cone(self, n: int) -> RationalCone:
        return RationalCone(n, self.rays)


@dataclass(frozen=True)
class FaceLattice:
    faces: tuple[Face, ...]  # sorted by (dim, rays)
    covers: tuple[tuple[int, int], ...]  # (i, j): face i is a facet of face j

    def by_dim(self, d: int) -> list[Face]:
        return [f for f in self.faces if f.dim == d]


def faces(sigma: RationalCone) -> FaceLattice:
    """All faces, ``{0}`` and sigma included, with the covering relation.

    A face tau indexes the stratum ``E^tau``; larger faces give smaller
    strata, so the covering relation read backwards is the closure order.
    """
    if not sigma.is_pointed:
        raise ValueError("faces() needs a pointed cone")
    rays = sigma.rays
    sets = {frozenset(range(len(rays))), frozenset()}
    for f in sigma.dual.rays:
        sets.add(frozenset(i for i, r in enumerate(rays) if dot(f, r) == 0))
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(sets), 2):
            c = a & b
            if c not in sets:
                sets.add(c)
                changed = True
    fl = sorted((Face(tuple(rays[i] for i in sorted(s)), rank_q([rays[i] for i in s])) for s in sets),
                key=lambda f: (f.dim, f.rays))
    covers = []
    for i, a in enumerate(fl):
        for j, b in enumerate(fl):
            if b.dim == a.dim + 1 and set(a.rays) <= set(b.rays):
                covers.append((i, j))
    return FaceLattice(tuple(fl), tuple(covers))


# --------------------------------------------------------------------------
# X_sigma


@dataclass(frozen=True)
class QuotientLattice:
    rank: int
    projection: tuple[Vec, ...]  # r x g, rows; surjective onto Z^r
    section: tuple[Vec, ...]  # g x r with projection . section = I
    radical: tuple[Vec, ...]  # saturated basis of the common radical

    def push_forward(self, v: Sequence[int]) -> Vec:
        """The form on ``X_sigma`` inducing the form v on X."""
        s = self.section
        g = len(s)
        b = vec_to_form(v, g)
        r = self.rank
        M = [[sum(s[k][i] * b[k][l] * s[l][j] for k in range(g) for l in range(g))
              for j in range(r)] for i in range(r)]
        return form_to_vec(M)


def quotient_lattice(sigma: RationalCone) -> QuotientLattice:
    """``X_sigma = X / radical``, the radical saturated."""
    g = genus_of(sigma.ambient)
    for r in sigma.rays:
        if not is_psd(r):
            raise ValueError(f"generator {r} is not positive semi-definite")
    rows = [row for r in sigma.rays for row in vec_to_form(r, g)]
    if rows:
        K = kernel(IntMatrix.from_rows(rows, g))
        radical = [tuple(c) for c in K.columns()]
    else:
        radical = [tuple(int(i == j) for j in range(g)) for i in range(g)]
    if radical:
        P = kernel(IntMatrix.from_rows([list(v) for v in radical], g))
        proj = [tuple(c) for c in P.columns()]
    else:
        proj = [tuple(int(i == j) for j in range(g)) for i in range(g)]
    r = len(proj)
    if r:
        full = complete_basis([list(v) for v in proj], g)
        inv = inverse_unimodular(full)
        section = [tuple(inv[i][j] for j in range(r)) for i in range(g)]
    else:
        section = [() for _ in range(g)]
    return QuotientLattice(r, tuple(proj), tuple(section), tuple(radical))


# --------------------------------------------------------------------------
# Hilbert bases


@dataclass(frozen=True)
class HilbertBasis:
    elements: tuple[Vec, ...]  # pointed part, in the given coordinates
    lineality: tuple[Vec, ...]  # Z-basis of the unit group (use +-)
    facets: tuple[Vec, ...]  # inequalities cutting out the cone

    def to_json(self) -> dict:
        return {"elements": [list(v) for v in self.elements],
                "lineality": [list(v) for v in self.lineality]}


def _lattice_coords(rows: Sequence[Sequence[int]], v: Sequence[int]) -> list[int]:
    y = solve_q_rect(rows, v)
    if any(x.denominator != 1 for x in y):
        raise ValueError("vector not in lattice")
    return [int(x) for x in y]


def solve_q_rect(rows: Sequence[Sequence], v: Sequence) -> list[Fraction]:
    """Coefficients of v in the span of independent rows (exact)."""
    k, n = len(rows), len(v)
    M = [[Fraction(rows[i][j]) for i in range(k)] + [Fraction(v[j])] for j in range(n)]
    pivots = []
    r = 0
    for c in range(k):
        piv = next((i for i in range(r, n) if M[i][c] != 0), None)
        if piv is None:
            raise ValueError("rows are dependent")
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(n):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    if any(M[i][k] != 0 for i in range(r, n)):
        raise ValueError("vector not in span")
    return [M[i][k] for i in range(k)]


def parallelepiped_points(rays: Sequence[Sequence[int]]) -> list[tuple[Vec, tuple[Fraction, ...]]]:
    """Lattice points ``sum lambda_i v_i`` with ``0 <= lambda_i < 1``.

    ``rays`` must be a basis of a full-rank sublattice of ``Z^k``. Returns
    pairs (point, lambda). The origin is included.
    """
    k = len(rays)
    A = IntMatrix.from_rows([list(v) for v in rays], k)
    s = snf(A)
    d = s.diagonal
    Vinv = s.V_inv.to_rows()
    out = []
    for y in itertools.product(*[range(x) for x in d]):
        x = [sum(y[i] * Vinv[i][j] for i in range(k)) for j in range(k)]
        lam = solve_q(rays, x)
        fl = [floor(t) for t in lam]
        x = [xj - sum(fl[i] * rays[i][j] for i in range(k)) for j, xj in enumerate(x)]
        lam = tuple(t - f for t, f in zip(lam, fl))
        out.append((tuple(x), lam))
    return sorted(out)


def _facets_full(rays: Sequence[Vec], k: int) -> tuple[Vec, ...]:
    return dual_of_generators(rays, k).rays


def triangulate(rays: Sequence[Vec]) -> list[tuple[int, ...]]:
    """Pulling triangulation of a pointed cone given by its extreme rays."""
    k = len(rays[0]) if rays else 0

    def rec(idx):
        pts = [rays[i] for i in idx]
        d = rank_q(pts)
        if len(idx) == d:
            return [tuple(idx)]
        v0 = idx[0]
        out = []
        for f in dual_of_generators(pts, k).rays:
            if dot(f, rays[v0]) > 0:
                F = [i for i in idx if dot(f, rays[i]) == 0]
                out.extend((v0,) + simp for simp in rec(F))
        return out

    return rec(list(range(len(rays)))) if rays else []


def monoid_hilbert_basis(rays: Sequence[Sequence[int]]) -> HilbertBasis:
    """Hilbert basis of ``cone(rays) cap Z^n`` for a pointed cone.

    Candidates are the rays together with the lattice points of the half-open
    parallelepipeds of a triangulation; the irreducible candidates form the
    Hilbert basis.
    """
    rays = [tuple(v) for v in rays]
    if not rays:
        return HilbertBasis((), (), ())
    n = len(rays[0])
    cone = RationalCone.from_generators(rays, n)
    if not cone.is_pointed:
        raise ValueError("monoid_hilbert_basis needs a pointed cone")
    L = saturated_rows([list(r) for r in cone.rays], n)
    k = len(L)
    local = [tuple(_lattice_coords(L, r)) for r in cone.rays]
    cands = set(local)
    for simp in triangulate(local):
        for x, _ in parallelepiped_points([local[i] for i in simp]):
            if any(x):
                cands.add(x)
    facets = _facets_full(local, k)

    def in_cone(x):
        return all(dot(f, x) >= 0 for f in facets)

    basis = sorted(x for x in cands
                   if not any(y != x and in_cone([a - b for a, b in zip(x, y)]) for y in cands))
    to_ambient = [tuple(sum(x[i] * L[i][j] for i in range(k)) for j in range(n)) for x in basis]
    return HilbertBasis(tuple(sorted(to_ambient)), (), cone.dual.rays)


def hilbert_basis(sigma: RationalCone, S: IntegralStructure | None = None) -> HilbertBasis:
    """Hilbert basis of ``S cap sigma^vee`` in S-coordinates.

    When sigma is not full-dimensional the monoid has units ``S cap
    sigma^perp``; their basis is returned as ``lineality`` and the
    elements generate the monoid modulo units.
    """
    S = S or IntegralStructure.standard(sigma.ambient)
    n = sigma.ambient
    C = [S.dual_primitive(r) for r in sigma.rays]
    if not C:
        unit = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        return HilbertBasis((), unit, ())
    Kc = kernel(IntMatrix.from_rows([list(c) for c in C], n))
    lin = [list(c) for c in Kc.columns()]
    full = complete_basis(lin, n) if lin else [[int(i == j) for j in range(n)] for i in range(n)]
    comp = full[len(lin):]
    # cone on the complement coordinates z: u = sum z_i comp_i
    M = [[dot(c, v) for v in comp] for c in C]
    k = len(comp)
    D = dual_of_generators(M, k)
    hb = monoid_hilbert_basis(D.rays)
    elems = [tuple(sum(z[i] * comp[i][j] for i in range(k)) for j in range(n)) for z in hb.elements]
    return HilbertBasis(tuple(sorted(elems)), tuple(tuple(v) for v in lin), tuple(tuple(c) for c in C))


def in_monoid(x: Sequence[int], basis: Sequence[Sequence[int]], facets: Sequence[Sequence[int]]) -> bool:
    """Is x an N-combination of ``basis`` modulo units? (exact, memoised).

    ``facets`` cut out the cone; points on which all of them vanish are
    units, which is just the origin for a pointed cone.
    """
    basis = [tuple(b) for b in basis]
    memo: dict[tuple, bool] = {}

    def rec(y):
        if all(dot(f, y) == 0 for f in facets):  # a unit (zero when pointed)
            return True
        if y in memo:
            return memo[y]
        ok = False
        for b in basis:
            z = tuple(a - c for a, c in zip(y, b))
            if all(dot(f, z) >= 0 for f in facets) and rec(z):
                ok = True
                break
        memo[y] = ok
        return ok

    return rec(tuple(x))


def bounded_points(facets: Sequence[Sequence[int]], n: int, bound: int,
                   equations: Sequence[Sequence[int]] = ()) -> list[Vec]:
    """Lattice points with ``|coord| <= bound`` satisfying the constraints."""
    return [x for x in itertools.product(range(-bound, bound + 1), repeat=n)
            if all(dot(f, x) >= 0 for f in facets) and all(dot(e, x) == 0 for e in equations)]


# --------------------------------------------------------------------------
# strata and divisors


@dataclass(frozen=True)
class Stratum:
    face: Face
    label: str
    lattice: tuple[Vec, ...]  # basis of S cap tau^perp in S-coordinates

    @property
    def rank(self) -> int:
        return len(self.lattice)


def strata_monoids(sigma: RationalCone, S: IntegralStructure | None = None) -> list[Stratum]:
    """For each face tau the group ``S cap tau^perp`` of the stratum ``E^tau``."""
    S = S or IntegralStructure.standard(sigma.ambient)
    n = sigma.ambient
    out = []
    for f in faces(sigma).faces:
        C = [list(S.dual_primitive(r)) for r in f.rays]
        if C:
            K = kernel(IntMatrix.from_rows(C, n))
            lat = tuple(tuple(c) for c in K.columns())
        else:
            lat = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        if not f.rays:
            label = "open"
        elif f.dim == sigma.dim:
            label = "closed"
        else:
            label = "E^<" + ",".join(str(list(r)) for r in f.rays) + ">"
        out.append(Stratum(f, label, lat))
    return out


def divisor_of_character(sigma: RationalCone, u: Sequence[int]) -> tuple[int, ...]:
    """Order of vanishing of the character u along the divisor of each ray."""
    return tuple(dot(r, u) for r in sigma.rays)


# --------------------------------------------------------------------------
# smoothness


def multiplicity(sigma: RationalCone, S: IntegralStructure | None = None) -> int:
    """Index of the generators in the lattice they span saturated (0 if dependent)."""
    S = S or IntegralStructure.standard(sigma.ambient)
    C = [list(S.dual_primitive(r)) for r in sigma.rays]
    if not C:
        return 1
    ed = elementary_divisors(C, sigma.ambient)
    if len(ed) < len(C):
        return 0
    return prod(ed)


def is_smooth(sigma: RationalCone, S: IntegralStructure | None = None) -> bool:
    """The rays, as primitive vectors of ``S*``, are part of a Z-basis."""
    return multiplicity(sigma, S) == 1


# --------------------------------------------------------------------------
# decompositions


GL2_GENERATORS = (((0, 1), (1, 0)), ((1, 1), (0, 1)), ((-1, 0), (0, 1)))


@dataclass(frozen=True)
class Decomposition:
    """A fan in ``Q^ambient`` (the form space when ``g`` is set).

    ``cones`` is a finite list closed under faces. ``kind = "principal"``
    marks the (infinite) GL_g(Z)-invariant principal decomposition, whose
    stored cones are one maximal cone with its faces; membership of other
    cones is decided by ``contains_cone``. ``generators`` act on forms by
    pull-back.
    """

    ambient: int
    cones: tuple[RationalCone, ...]
    generators: tuple[tuple[tuple[int, ...], ...], ...] = ()
    kind: str = "finite"
    g: int | None = None

    @classmethod
    def from_maximal(cls, ambient: int, maximal: Iterable[RationalCone], generators=(),
                     kind: str = "finite", g: int | None = None) -> "Decomposition":
        seen = {(): None}
        for c in maximal:
            for f in faces(c).faces:
                seen[f.rays] = None
        cones = sorted((RationalCone(ambient, r) for r in seen), key=lambda c: (c.dim, c.rays))
        return cls(ambient, tuple(cones), tuple(generators), kind, g)

    @property
    def maximal(self) -> list[RationalCone]:
        sets = [set(c.rays) for c in self.cones]
        return [c for c, s in zip(self.cones, sets) if not any(s < t for t in sets)]

    def contains_cone(self, cone: RationalCone) -> bool:
        if self.kind == "principal":
            return is_principal_cone(cone, self.g)
        return cone.rays in {c.rays for c in self.cones}

    def to_json(self) -> dict:
        idx = {c.rays: i for i, c in enumerate(self.cones)}
        edges = []
        for c in self.cones:
            for f in faces(c).faces:
                if f.dim == c.dim - 1:
                    edges.append([idx[f.rays], idx[c.rays]])
        return {"ambient": self.ambient, "g": self.g, "kind": self.kind,
                "cones": [c.to_json() for c in self.cones],
                "face_edges": sorted(edges),
                "generators": [[list(r) for r in A] for A in self.generators]}


def principal_decomposition(g: int) -> Decomposition:
    if g == 1:
        return Decomposition.from_maximal(1, [RationalCone(1, ((1,),))], (((-1,),),), "principal", 1)
    if g == 2:
        sigma = RationalCone.from_generators([square((1, 0)), square((0, 1)), square((1, 1))], 3)
        return Decomposition.from_maximal(3, [sigma], GL2_GENERATORS, "principal", 2)
    raise ValueError("the principal decomposition is built in for g <= 2 only")


def _root_of_square(v: Sequence[int], g: int) -> Vec | None:
    """u with ``u u^T = v`` (u primitive), if v is a primitive rank-one form."""
    b = vec_to_form(v, g)
    if any(b[k][k] < 0 for k in range(g)):
        return None
    k0 = next((k for k in range(g) if b[k][k]), None)
    if k0 is None:
        return None
    a = b[k0][k0]
    r = int(round(a ** 0.5))
    while r * r > a:
        r -= 1
    while (r + 1) ** 2 <= a:
        r += 1
    if r * r != a:
        return None
    u = []
    for l in range(g):
        if b[k0][l] % r:
            return None
        u.append(b[k0][l] // r)
    return tuple(u) if square(u) == tuple(v) else None


def is_principal_cone(cone: RationalCone, g: int) -> bool:
    """Membership in the principal decomposition (g <= 2)."""
    if g == 1:
        return cone.rays in ((), ((1,),))
    if g != 2:
        raise ValueError("g <= 2 only")
    roots = [_root_of_square(r, 2) for r in cone.rays]
    if any(u is None for u in roots):
        return False
    for u, v in itertools.combinations(roots, 2):
        if abs(u[0] * v[1] - u[1] * v[0]) != 1:
            return False
    return len(roots) <= 3


def minimal_containing_cone(b: Sequence[int], F: Decomposition) -> RationalCone:
    """The stored cone whose relative interior contains b."""
    if not is_psd(b):
        raise ValueError("b is not positive semi-definite")
    for c in sorted(F.cones, key=lambda c: (c.dim, c.rays)):
        if c.contains(b):
            return c
    raise ValueError("b lies outside the support of the decomposition")


# --------------------------------------------------------------------------
# smooth refinement


@dataclass(frozen=True)
class RefinementStep:
    face: tuple[Vec, ...]
    points: tuple[Vec, ...]
    multiplicity: int
    # True when the inserted points do not depend on how the rays are ordered
    canonical: bool


@dataclass(frozen=True)
class Refinement:
    decomposition: Decomposition
    steps: tuple[RefinementStep, ...]


class SubdivisionBudgetExceeded(RuntimeError):
    pass


def _simplicial_pieces(cone: RationalCone) -> list[tuple[Vec, ...]]:
    if cone.is_simplicial:
        return [cone.rays]
    return [tuple(cone.rays[i] for i in simp) for simp in triangulate(list(cone.rays))]


def subdivision_points(face: Sequence[Vec], S: IntegralStructure) -> tuple[list[Vec], bool]:
    """Points of the half-open parallelepiped with least coordinate sum.

    Coordinates are taken for the primitive ``S*`` generators of the face.
    All minimisers are returned. Inserting all of them is independent of the
    ray order for faces of dimension <= 2; beyond that the flag is False when
    more than one point ties.
    """
    n = S.n
    C = [S.dual_primitive(r) for r in face]
    L = saturated_rows([list(c) for c in C], n)
    local = [_lattice_coords(L, c) for c in C]
    pts = [(x, lam) for x, lam in parallelepiped_points(local) if any(x)]
    if not pts:
        raise ValueError("face is smooth")
    best = min(sum(lam) for _, lam in pts)
    chosen = sorted(x for x, lam in pts if sum(lam) == best)
    out = []
    for x in chosen:
        c = [sum(x[i] * L[i][j] for i in range(len(L))) for j in range(n)]
        out.append(primitive_q(S.form_from_dual(c)))
    return out, len(out) == 1 or len(face) <= 2


def _stellar(maximal: set[tuple[Vec, ...]], v: Vec) -> set[tuple[Vec, ...]]:
    """Star subdivision of a simplicial fan at v."""
    carrier = None
    for m in maximal:
        lam = _simplex_coords(m, v)
        if lam is not None:
            carrier = tuple(r for r, t in zip(m, lam) if t > 0)
            break
    if carrier is None:
        raise ValueError("point outside the fan")
    if carrier == (v,):
        return maximal
    new = set()
    for m in maximal:
        if set(carrier) <= set(m):
            for rho in carrier:
                new.add(tuple(sorted([r for r in m if r != rho] + [v])))
        else:
            new.add(m)
    return new


def _simplex_coords(rays: Sequence[Vec], v: Sequence[int]) -> list[Fraction] | None:
    try:
        lam = solve_q_rect(rays, v)
    except ValueError:
        return None
    return lam if all(t >= 0 for t in lam) else None


def refine_to_smooth(F: Decomposition, S: IntegralStructure | None = None,
                     budget: int = 200) -> Refinement:
    """Iterated stellar subdivision until every cone is smooth for S.

    Each round picks a non-smooth cone of least dimension (ties: by rays)
    and star-subdivides the fan at ``subdivision_points`` of that face. The
    choice depends only on the face and S, so faces shared between cones are
    subdivided alike and the rule commutes with lattice automorphisms that
    preserve S whenever the step is flagged canonical.
    """
    S = S or IntegralStructure.standard(F.ambient)
    n = F.ambient
    maximal: set[tuple[Vec, ...]] = set()
    for c in F.maximal:
        for piece in _simplicial_pieces(c):
            maximal.add(tuple(sorted(piece)))
    steps = []
    while True:
        bad = None
        for m in sorted(maximal):
            for size in range(2, len(m) + 1):
                for sub in itertools.combinations(m, size):
                    cand = (size, sub)
                    if (bad is None or cand < bad) and not is_smooth(RationalCone(n, sub), S):
                        bad = cand
        if bad is None:
            break
        if len(steps) == budget:
            raise SubdivisionBudgetExceeded(f"still singular after {budget} subdivisions")
        face = bad[1]
        pts, canonical = subdivision_points(face, S)
        steps.append(RefinementStep(face, tuple(pts), multiplicity(RationalCone(n, face), S), canonical))
        for v in pts:
            maximal = _stellar(maximal, v)
    out = Decomposition.from_maximal(n, [RationalCone(n, m) for m in sorted(maximal)],
                                     F.generators, "finite", F.g)
    return Refinement(out, tuple(steps))


def locate(x: Sequence, F: Decomposition) -> list[RationalCone]:
    """Maximal cones of F containing x."""
    return [c for c in F.maximal if c.contains(x)]


def refines(fine: Decomposition, coarse: Decomposition) -> bool:
    """Every cone of ``fine`` lies in some cone of ``coarse``."""
    return all(any(all(C.contains(r) for r in c.rays) for C in coarse.maximal)
               for c in fine.maximal)


def same_support(fine: Decomposition, coarse: Decomposition, samples: int = 50, seed: int = 0) -> bool:
    """Sampled points of each coarse cone are covered by the fine cones, and
    never by the interiors of two of them."""
    import random
    rnd = random.Random(seed)
    for C in coarse.maximal:
        for _ in range(samples):
            w = [rnd.randint(1, 1000) for _ in C.rays]
            x = [sum(wi * r[j] for wi, r in zip(w, C.rays)) for j in range(C.ambient)]
            if not any(c.contains(x) for c in fine.maximal):
                return False
            if sum(1 for c in fine.maximal if c.dim == C.dim and c.in_relative_interior(x)) > 1:
                return False
    return True
