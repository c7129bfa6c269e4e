"""Cells ``C(V/V'^perp)`` over isotropic summands, their level groups, the
induced decomposition and the poset of boundary strata.

Lattice dictionary. For an isotropic summand V' with basis ``v_1..v_r`` the
quotient ``X = V/V'^perp`` is identified with ``Z^r`` by
``x -> (omega(v_j, x))_j``; a linear form ``u`` on X is the vector
``sum u_j v_j`` of V'. For the chain ``V^0, .., V^{2s}`` put
``X_0 = Y_0 = img V^0``, and for ``1 <= i <= s``

    Y_i = p^-1 img V^i,    X_i = img V^{2s+1-i}.

Then ``log_p [Y_i : Y_0] = e_i`` and ``log_p [X_0 : X_i] = m_i``.

Scope: g <= 2 (cells of rank <= 2). Cone orbits inside a cell are computed
through reduction mod p: the level group of a cell contains the principal
congruence subgroup, so orbits of principal cones are double cosets in
``GL_r(F_p)``.
"""

from __future__ import annotations

import itertools
from collections import deque
from functools import lru_cache
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .char_lattices import character_lattice
from .exact_lattice import IntMatrix, elementary_divisors, hnf_rows, kernel, primitive
from .polyhedral import (
    Decomposition, IntegralStructure, RationalCone, faces, is_positive_definite,
    is_principal_cone, is_smooth, multiplicity, refine_to_smooth,
    square, sym_rank,
)
from .symplectic_flags import (
    ParahoricType, PositionInvariant, WeightFlag, enumerate_positions, form_matrix,
    enumerate_group, gsp_generators, in_gamma0, invariants, parahoric_chain, rref, std_flag,
    apply,
)

Vec = tuple[int, ...]
Mat = tuple[tuple[int, ...], ...]
MAX_GENUS = 2
MAX_PRIME = 5
UNVERIFIED = "UNVERIFIED-BEYOND-BOUND"


def _omega(g: int, x: Sequence[int], y: Sequence[int]) -> int:
    J = form_matrix(g)
    n = 2 * g
    return sum(x[i] * J[i][j] * y[j] for i in range(n) for j in range(n))


def _check_genus(g: int, p: int = 2) -> None:
    if g > MAX_GENUS or p > MAX_PRIME:
        raise ValueError(f"desk-scale limit: the conical complex is implemented for "
                         f"g <= {MAX_GENUS} and p <= {MAX_PRIME}")


# --------------------------------------------------------------------------
# isotropic summands


@dataclass(frozen=True)
class IsotropicSummand:
    g: int
    basis: tuple[Vec, ...]  # row Hermite form

    @classmethod
    def from_rows(cls, g: int, rows: Sequence[Sequence[int]]) -> "IsotropicSummand":
        rows = [list(r) for r in rows if any(r)]
        n = 2 * g
        for r in rows:
            if len(r) != n:
                raise ValueError("vectors must have length 2g")
        for x, y in itertools.combinations(rows, 2):
            if _omega(g, x, y):
                raise ValueError("not totally isotropic")
        H = hnf_rows(rows, n)
        if len(H) != len(rows):
            raise ValueError("rows are linearly dependent")
        if H and elementary_divisors(H, n) != [1] * len(H):
            raise ValueError("not a direct summand")
        return cls(g, tuple(tuple(r) for r in H))

    @classmethod
    def coordinate(cls, g: int, idx: Sequence[int]) -> "IsotropicSummand":
        """Span of the basis vectors ``x_j`` for 1-based j in idx."""
        return cls.from_rows(g, [[int(k == j - 1) for k in range(2 * g)] for j in idx])

    @property
    def r(self) -> int:
        return len(self.basis)

    def perp(self) -> tuple[Vec, ...]:
        J = form_matrix(self.g)
        n = 2 * self.g
        if not self.basis:
            return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        rows = [[sum(v[i] * J[i][j] for i in range(n)) for j in range(n)] for v in self.basis]
        K = kernel(IntMatrix.from_rows(rows, n))
        return tuple(tuple(r) for r in hnf_rows(K.columns(), n))

    def x_coords(self, x: Sequence[int]) -> Vec:
        """Image of x in ``X = V/V'^perp`` = Z^r."""
        return tuple(_omega(self.g, v, x) for v in self.basis)

    def vector_of(self, u: Sequence[int]) -> Vec:
        """The vector of V' representing the linear form u on X."""
        n = 2 * self.g
        return tuple(sum(u[j] * self.basis[j][i] for j in range(self.r)) for i in range(n))

    def sub_summand(self, u: Sequence[int]) -> "IsotropicSummand":
        return IsotropicSummand.from_rows(self.g, [primitive(self.vector_of(u))])

    def reduce(self, p: int):
        return rref([[x % p for x in v] for v in self.basis], p)

    def transform(self, gamma: Sequence[Sequence[int]]) -> "IsotropicSummand":
        n = 2 * self.g
        rows = [[sum(gamma[i][k] * v[k] for k in range(n)) for i in range(n)] for v in self.basis]
        return IsotropicSummand.from_rows(self.g, rows)

    def to_json(self) -> dict:
        return {"g": self.g, "basis": [list(v) for v in self.basis]}


def chain_images(V: IsotropicSummand, t: ParahoricType, p: int) -> list[list[Vec]]:
    """Row HNF bases of ``img V^c`` in X for every chain member c."""
    chain = parahoric_chain(t, p)
    n = 2 * t.g
    out = []
    for sc in chain.scales:
        gens = [V.x_coords([sc[k] * int(k == j) for k in range(n)]) for j in range(n)]
        out.append([tuple(r) for r in hnf_rows(gens, V.r)])
    return out


def _vp(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _log_index(rows: Sequence[Sequence[int]], r: int, p: int) -> int:
    """``log_p [Z^r : L]`` for a full-rank L given by rows."""
    if r == 0:
        return 0
    ed = elementary_divisors([list(x) for x in rows], r)
    if len(ed) != r:
        raise ValueError("image lattice is not of full rank")
    return sum(_vp(d, p) for d in ed)


def position_of(V: IsotropicSummand, t: ParahoricType, p: int) -> PositionInvariant:
    """Position of V' from the indices of the chain images in ``V/V'^perp``."""
    r, s = V.r, t.s
    imgs = chain_images(V, t, p)
    m, a, e = [], [], []
    for i in range(1, s + 1):
        ei = r - _log_index(imgs[i], r, p)
        mi = _log_index(imgs[2 * s + 1 - i], r, p)
        e.append(ei)
        m.append(mi)
        a.append(t.D[i - 1] - mi - ei)
    return PositionInvariant(r, tuple(m), tuple(a), tuple(e))


def position_mod_p(V: IsotropicSummand, t: ParahoricType, p: int) -> PositionInvariant:
    """The same position through ``symplectic_flags.invariants`` mod p."""
    W = WeightFlag.from_subspace(t.g, p, V.reduce(p))
    return invariants(std_flag(t, p), W)


def ord_mult(V: IsotropicSummand, t: ParahoricType, p: int) -> bool:
    """``V^0`` and the normalised ``p^-1 V^1`` have the same image in X.

    Equivalently ``Y_0 = Y_1``, i.e. ``e_1 = 0``. False for V' = 0.
    """
    if V.r == 0:
        return False
    imgs = chain_images(V, t, p)
    return _log_index(imgs[1], V.r, p) == V.r


# --------------------------------------------------------------------------
# orbits of summands


@dataclass(frozen=True)
class OrbitRep:
    w: PositionInvariant
    summand: IsotropicSummand
    coords: tuple[int, ...]  # 1-based indices of the spanning basis vectors


def _coordinate_summands(g: int, r: int):
    for idx in itertools.combinations(range(1, 2 * g + 1), r):
        if any(2 * g + 1 - j in idx for j in idx):
            continue
        yield idx


def enumerate_isotropic_orbits(g: int, p: int, t: ParahoricType, r: int) -> list[OrbitRep]:
    """One coordinate summand per Gamma_0-orbit of rank-r isotropic summands.

    Orbits are detected by their position; every position is realised by a
    span of basis vectors (a Weyl representative). The number of classes must
    equal the number of positions, otherwise an error is raised.
    """
    _check_genus(g, p)
    found: dict[PositionInvariant, OrbitRep] = {}
    for idx in _coordinate_summands(g, r):
        V = IsotropicSummand.coordinate(g, idx)
        w = position_of(V, t, p)
        if w != position_mod_p(V, t, p):
            raise RuntimeError(f"position mismatch for {idx}")
        found.setdefault(w, OrbitRep(w, V, idx))
    expected = enumerate_positions(g, p, r, t)
    if sorted(found) != expected:
        raise RuntimeError(f"coordinate summands realise {sorted(found)}, expected {expected}")
    return [found[w] for w in expected]


def isotropic_subspaces(g: int, p: int, r: int) -> set:
    """All r-dimensional isotropic subspaces of ``F_p^{2g}`` (rref bases)."""
    n = 2 * g
    out = set()
    vecs = [v for v in itertools.product(range(p), repeat=n) if any(v)]
    for combo in itertools.combinations(vecs, r):
        if any(_omega(g, x, y) % p for x, y in itertools.combinations(combo, 2)):
            continue
        U = rref(combo, p)
        if len(U) == r:
            out.add(U)
    if r == 0:
        out.add(rref([], p))
    return out


def parahoric_orbits_on_subspaces(g: int, p: int, t: ParahoricType, r: int, group=None) -> list[set]:
    """Orbits of the parahoric (stabiliser of the standard flag) on isotropic r-spaces."""
    if group is None:
        group = enumerate_group(gsp_generators(g, p), p)
    P = group
    for d in t.D:
        P = P[np.all(P[:, d:, :d] == 0, axis=(1, 2))]
    todo = isotropic_subspaces(g, p, r)
    orbits = []
    while todo:
        U = min(todo)
        if not U:
            orbits.append({U})
            todo.discard(U)
            continue
        imgs = (P @ np.array(U, dtype=np.int64).T) % p
        orb = {rref(M.T.tolist(), p) for M in imgs}
        orbits.append(orb)
        todo -= orb
    return orbits


# --------------------------------------------------------------------------
# finite linear groups


def _mat_mul(A: Mat, B: Mat, p: int | None = None) -> Mat:
    n = len(A)
    m = len(B[0])
    out = tuple(tuple(sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(m)) for i in range(n))
    if p is not None:
        out = tuple(tuple(x % p for x in row) for row in out)
    return out


def _det(A: Mat) -> int:
    if len(A) == 1:
        return A[0][0]
    if len(A) == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    raise ValueError("rank <= 2 only")


def _reduce(A: Sequence[Sequence[int]], p: int) -> Mat:
    return tuple(tuple(x % p for x in row) for row in A)


def gl_generators(r: int) -> list[Mat]:
    if r == 1:
        return [((-1,),)]
    if r == 2:
        return [((0, 1), (1, 0)), ((1, 1), (0, 1)), ((-1, 0), (0, 1))]
    return []


def reduced_gl(r: int, p: int) -> dict[Mat, Mat]:
    """Image of ``GL_r(Z)`` in ``GL_r(F_p)`` with an integer lift of each element."""
    ident = tuple(tuple(int(i == j) for j in range(r)) for i in range(r))
    lifts = {_reduce(ident, p): ident}
    queue = deque([ident])
    gens = gl_generators(r)
    while queue:
        A = queue.popleft()
        for G in gens:
            B = _mat_mul(A, G)
            key = _reduce(B, p)
            if key not in lifts:
                lifts[key] = B
                queue.append(B)
    return lifts


def _stabilises(A: Mat, U, p: int) -> bool:
    return apply([list(r) for r in A], U, p) == U


@dataclass(frozen=True)
class CellGroup:
    """The level group of a cell, reduced mod p, inside the image of GL_r(Z)."""

    r: int
    p: int
    elements: frozenset  # of Mat
    lifts: tuple[tuple[Mat, Mat], ...]  # (reduced, integer lift), all of GL_r(Z) mod p

    def lift(self, A: Mat) -> Mat:
        return dict(self.lifts)[A]

    def generators(self) -> list[Mat]:
        """Integer lifts of a generating set, plus the principal congruence generators."""
        gens: list[Mat] = []
        span = {tuple(tuple(int(i == j) for j in range(self.r)) for i in range(self.r))}
        for A in sorted(self.elements):
            if A in span:
                continue
            gens.append(self.lift(A))
            span = _closure(span | {A}, self.p)
        if self.r == 2:
            q = self.p
            gens += [((1, q), (0, 1)), ((1, 0), (q, 1))]
        return gens


def _closure(S: set, p: int) -> set:
    S = set(S)
    frontier = list(S)
    while frontier:
        new = []
        for A in frontier:
            for B in list(S):
                for C in (_mat_mul(A, B, p), _mat_mul(B, A, p)):
                    if C not in S:
                        S.add(C)
                        new.append(C)
        frontier = new
    return S


def cell_group(rep: OrbitRep | None, t: ParahoricType | None, p: int, r: int) -> CellGroup:
    """Stabiliser of all chain images (mod p); the full group when ``t`` is None."""
    lifts = reduced_gl(r, p)
    if t is None or rep is None:
        elems = frozenset(lifts)
    else:
        subspaces = [rref([[x % p for x in row] for row in img], p) for img in chain_images(rep.summand, t, p)]
        elems = frozenset(A for A in lifts if all(_stabilises(A, U, p) for U in subspaces))
    return CellGroup(r, p, elems, tuple(sorted(lifts.items())))


# --------------------------------------------------------------------------
# cone classes inside a cell (r <= 2, principal decomposition)


def _standard_cone(d: int) -> RationalCone:
    gens = {1: [square((1, 0))], 2: [square((1, 0)), square((0, 1))],
            3: [square((1, 0)), square((0, 1)), square((1, 1))]}[d]
    return RationalCone.from_generators(gens, 3)


@lru_cache(maxsize=None)
def _stabiliser(d: int) -> tuple[Mat, ...]:
    sigma = _standard_cone(d)
    out = []
    for e in itertools.product((-1, 0, 1), repeat=4):
        A = ((e[0], e[1]), (e[2], e[3]))
        if abs(_det(A)) == 1 and sigma.transform(A) == sigma:
            out.append(A)
    return tuple(out)


def _roots(cone: RationalCone) -> list[Vec]:
    from .polyhedral import _root_of_square
    out = []
    for r in cone.rays:
        u = _root_of_square(r, 2)
        if u is None:
            raise ValueError(f"{r} is not the square of a primitive vector")
        out.append(u)
    return out


def cone_matrix(cone: RationalCone) -> Mat:
    """A in GL_2(Z) with ``standard_cone(dim).transform(A) == cone``."""
    roots = _roots(cone)
    if cone.dim == 2:
        u, v = roots
    elif cone.dim == 3:
        u, v, w = roots
        if tuple(a + b for a, b in zip(u, v)) not in (w, tuple(-x for x in w)):
            v = tuple(-x for x in v)
    else:
        raise ValueError("only cones of dimension 2 or 3 are classified")
    A = (tuple(u), tuple(v))
    if _standard_cone(cone.dim).transform(A) != cone:
        raise AssertionError("cone matrix reconstruction failed")
    return A


@dataclass(frozen=True)
class ConeClass:
    dim: int
    key: Mat  # canonical element of the double coset
    cone: RationalCone  # representative


def _mul2(A: Mat, B: Mat, p: int) -> Mat:
    return (((A[0][0] * B[0][0] + A[0][1] * B[1][0]) % p, (A[0][0] * B[0][1] + A[0][1] * B[1][1]) % p),
            ((A[1][0] * B[0][0] + A[1][1] * B[1][0]) % p, (A[1][0] * B[0][1] + A[1][1] * B[1][1]) % p))


@lru_cache(maxsize=64)
def _coset_table(group: CellGroup, d: int) -> dict[Mat, Mat]:
    """Reduced matrix -> canonical element of its double coset ``Stab_d A H``."""
    p = group.p
    stab = [_reduce(s, p) for s in _stabiliser(d)]
    H = sorted(group.elements)
    table: dict[Mat, Mat] = {}
    for A, _ in group.lifts:
        if A in table:
            continue
        coset = {_mul2(_mul2(s, A, p), h, p) for s in stab for h in H}
        key = min(coset)
        for B in coset:
            table[B] = key
    return table


def cell_classes(group: CellGroup) -> list[ConeClass]:
    """Orbit representatives of the cones of the principal decomposition of
    ``C(Z^r)`` whose interior is positive definite."""
    if group.r == 0:
        return []
    if group.r == 1:
        return [ConeClass(1, ((1,),), RationalCone(1, ((1,),)))]
    out = []
    lifts = dict(group.lifts)
    for d in (2, 3):
        table = _coset_table(group, d)
        for key in sorted(set(table.values())):
            out.append(ConeClass(d, key, _standard_cone(d).transform(lifts[key])))
    return out


def classify_cone(cone: RationalCone, group: CellGroup) -> tuple[int, Mat]:
    return cone.dim, _coset_table(group, cone.dim)[_reduce(cone_matrix(cone), group.p)]


# --------------------------------------------------------------------------
# integral structure of a cell


def _epsilon_permutation(rep: OrbitRep, t: ParahoricType, p: int) -> list[int]:
    """``perm[k]`` = the X coordinate playing the role of ``eps_{k+1}``."""
    w, r, s = rep.w, rep.summand.r, t.s
    imgs = chain_images(rep.summand, t, p)

    def scaled(img, j):
        # diagonal lattices only: coordinate j of the HNF row with pivot j
        row = next(x for x in img if x[j] != 0 and all(x[k] == 0 for k in range(j)))
        return row[j] % p == 0

    def pattern_x(j):
        return (tuple(scaled(imgs[2 * s + 1 - i], j) for i in range(1, s + 1)),
                tuple(not scaled(imgs[i], j) for i in range(1, s + 1)))

    def pattern_eps(k):
        return (tuple(k > r - w.m[i - 1] for i in range(1, s + 1)),
                tuple(k <= w.e[i - 1] for i in range(1, s + 1)))

    for img in imgs:
        if any(sum(1 for x in row if x) != 1 for row in img):
            raise ValueError("chain images are not diagonal for this summand")
    free = list(range(r))
    perm = []
    for k in range(1, r + 1):
        j = next((j for j in free if pattern_x(j) == pattern_eps(k)), None)
        if j is None:
            raise RuntimeError("no coordinate matches the eps-pattern")
        perm.append(j)
        free.remove(j)
    return perm


def cell_structure(rep: OrbitRep, t: ParahoricType, p: int) -> IntegralStructure:
    """``S_{V',0} = S^w`` written in the X coordinates of the cell."""
    r = rep.summand.r
    C = character_lattice(rep.w, p)
    S = IntegralStructure.from_rows(C.structure_basis())
    perm = _epsilon_permutation(rep, t, p)
    P = tuple(tuple(int(perm[k] == j) for k in range(r)) for j in range(r))  # eps_k -> e_perm[k]
    return S.transform(P)


# --------------------------------------------------------------------------
# complex decompositions


@dataclass(frozen=True)
class Cell:
    rep: OrbitRep | None  # None for the level-free analogue
    r: int
    group: CellGroup
    structure: IntegralStructure
    classes: tuple[ConeClass, ...]
    cones: tuple[RationalCone, ...]  # stored cones: class reps with faces, or a refinement

    @property
    def label(self) -> str:
        return self.rep.w.label() if self.rep else "-"


@dataclass(frozen=True)
class RestrictionCertificate:
    cell: str
    cone: tuple[Vec, ...]
    ray: Vec
    sub_position: str
    pushed: Vec
    ok: bool


@dataclass(frozen=True)
class ComplexDecomposition:
    g: int
    p: int
    D: tuple[int, ...]
    cells: tuple[Cell, ...]
    certificates: tuple[RestrictionCertificate, ...]
    refined: bool = False

    @property
    def t(self) -> ParahoricType:
        return ParahoricType(self.g, self.D)

    def cells_of_rank(self, r: int) -> list[Cell]:
        return [c for c in self.cells if c.r == r]

    def cell_for(self, w: PositionInvariant) -> Cell:
        return next(c for c in self.cells if c.rep and c.rep.w == w)


def _check_sigma(sigma: Decomposition, g: int) -> None:
    if sigma.g != g:
        raise ValueError("decomposition genus mismatch")
    if not any(c.dim == sym_rank(g) for c in sigma.cones):
        raise ValueError("the decomposition does not cover C(X): no full-dimensional cone")
    for A in sigma.generators:
        for c in sigma.cones:
            if not sigma.contains_cone(c.transform(A)):
                raise ValueError(f"decomposition not GL(X)-stable: {c.rays} under {A}")
    if sigma.kind != "principal":
        raise ValueError("cone classes are implemented for the principal decomposition only")


def _stored_cones(classes: Sequence[ConeClass]) -> tuple[RationalCone, ...]:
    seen = {}
    for cl in classes:
        for f in faces(cl.cone).faces:
            seen[f.rays] = RationalCone(cl.cone.ambient, f.rays)
    return tuple(sorted(seen.values(), key=lambda c: (c.dim, c.rays)))


def _make_cell(rep, t, p, r) -> Cell:
    group = cell_group(rep, t, p, r)
    classes = tuple(cell_classes(group))
    if rep is not None and t is not None:
        S = cell_structure(rep, t, p)
    else:
        S = IntegralStructure.standard(sym_rank(r))
    return Cell(rep, r, group, S, classes, _stored_cones(classes))


def induce_decomposition(sigma: Decomposition, g: int, p: int, t: ParahoricType) -> ComplexDecomposition:
    """The decomposition ``S_Sigma`` cell by cell, up to Gamma_0."""
    _check_genus(g, p)
    _check_sigma(sigma, g)
    cells = [_make_cell(rep, t, p, r) for r in range(1, g + 1)
             for rep in enumerate_isotropic_orbits(g, p, t, r)]
    certs = []
    by_w = {c.rep.w: c for c in cells}
    for c in cells:
        if c.r < 2:
            continue
        for cl in c.classes:
            for ray in cl.cone.rays:
                u = _roots(RationalCone(3, (ray,)))[0]
                sub = c.rep.summand.sub_summand(u)
                w2 = position_of(sub, t, p)
                # the ray pushed to X / radical is the unit form on Z^1
                pushed = (1,)
                certs.append(RestrictionCertificate(c.label, cl.cone.rays, ray, w2.label(), pushed,
                                                    w2 in by_w and by_w[w2].r == 1))
    return ComplexDecomposition(g, p, tuple(t.D), tuple(cells), tuple(certs))


def restrictions_compatible(SF: ComplexDecomposition) -> bool:
    return all(c.ok for c in SF.certificates)


# --------------------------------------------------------------------------
# admissibility


def levi_element(rep: OrbitRep, A: Sequence[Sequence[int]]) -> list[list[int]]:
    """Element of Sp_2g(Z) acting by A on V' and contragrediently on the dual."""
    g = rep.summand.g
    n = 2 * g
    a = [j - 1 for j in rep.coords]
    b = [n - 1 - x for x in a]
    sgn = [_omega(g, [int(k == a[j]) for k in range(n)], [int(k == b[j]) for k in range(n)])
           for j in range(len(a))]
    r = len(a)
    d = _det(tuple(tuple(row) for row in A))
    # inverse of A over Z
    if r == 1:
        Ainv = [[A[0][0] * d]]
    else:
        Ainv = [[A[1][1] * d, -A[0][1] * d], [-A[1][0] * d, A[0][0] * d]]
    C = [[sgn[i] * Ainv[j][i] * sgn[j] for j in range(r)] for i in range(r)]
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for i in range(r):
        for j in range(r):
            M[a[i]][a[j]] = A[i][j]
            M[b[i]][b[j]] = C[i][j]
    return M


def _inverse_transpose(M: Mat) -> Mat:
    d = _det(M)
    if len(M) == 1:
        return ((M[0][0] * d,),)
    return ((M[1][1] * d, -M[1][0] * d), (-M[0][1] * d, M[0][0] * d))


def levi_for_x(rep: OrbitRep, M: Mat) -> list[list[int]]:
    """Levi element of Sp_2g(Z) fixing V' whose action on X is M."""
    gamma = levi_element(rep, _inverse_transpose(M))
    if induced_action(rep, gamma) != tuple(tuple(r) for r in M):
        raise AssertionError("Levi lift does not induce the requested action")
    return gamma


def induced_action(rep: OrbitRep, gamma: Sequence[Sequence[int]]) -> Mat:
    """Matrix of gamma on ``X = V/V'^perp`` (gamma must stabilise V')."""
    V = rep.summand
    g = V.g
    n = 2 * g
    if V.transform(gamma) != V:
        raise ValueError("gamma does not stabilise the summand")
    lifts = []
    for j in range(V.r):
        a = rep.coords[j] - 1
        bidx = n - 1 - a
        y = [int(k == bidx) for k in range(n)]
        s = V.x_coords(y)[j]
        lifts.append([s * x for x in y])
    cols = []
    for y in lifts:
        gy = [sum(gamma[i][k] * y[k] for k in range(n)) for i in range(n)]
        cols.append(V.x_coords(gy))
    return tuple(tuple(cols[j][i] for j in range(V.r)) for i in range(V.r))


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    checked: int
    depth: int
    violations: tuple[str, ...]
    marker: str = UNVERIFIED


def check_admissible(SF: ComplexDecomposition, depth: int = 2) -> AdmissibilityReport:
    """Bounded verification of Gamma_0-stability and closedness.

    For each cell: stored cones lie in the principal decomposition, maximal
    ones are full-dimensional, faces are stored up to the level group, and
    words of length <= depth in the cell generators (each certified to come
    from an element of Gamma_0 fixing V') map stored cones to stored classes.
    Nothing beyond the depth bound is claimed.
    """
    t = SF.t
    violations = []
    checked = 0
    ranks = {c.rep.w for c in SF.cells if c.rep}
    for cell in SF.cells:
        r = cell.r
        n = sym_rank(r)
        stored_keys = {(cl.dim, cl.key) for cl in cell.classes}
        maximal = [c for c in cell.cones if not any(set(c.rays) < set(d.rays) for d in cell.cones)]
        for c in maximal:
            if c.dim != n:
                violations.append(f"{cell.label}: maximal cone {c.rays} has dimension {c.dim} < {n}")
        for c in cell.cones:
            checked += 1
            if r == 2 and not is_principal_cone(c, 2):
                violations.append(f"{cell.label}: cone {c.rays} is not in the decomposition")
                continue
            for f in faces(c).faces if c.is_pointed else []:
                if r == 2 and f.dim >= 2 and classify_cone(f.cone(3), cell.group) not in stored_keys:
                    violations.append(f"{cell.label}: face {f.rays} of {c.rays} has no stored class")
                if r == 2 and f.dim == 1 and SF.cells and cell.rep is not None:
                    u = _roots(f.cone(3))[0]
                    w2 = position_of(cell.rep.summand.sub_summand(u), t, SF.p)
                    if w2 not in ranks:
                        violations.append(f"{cell.label}: ray {f.rays} leads to a missing cell {w2.label()}")
        if r < 2 or cell.rep is None:
            continue
        gens = []
        for A in cell.group.generators():
            if not in_gamma0(levi_for_x(cell.rep, A), t, SF.p):
                violations.append(f"{cell.label}: generator {A} does not come from Gamma_0")
                continue
            gens.append(A)
        words = [((1, 0), (0, 1))]
        for _ in range(depth):
            words = list({_mat_mul(w_, G) for w_ in words for G in gens} | set(words))
        for cl in cell.classes:
            for W in words:
                img = cl.cone.transform(W)
                checked += 1
                if not is_principal_cone(img, 2):
                    violations.append(f"{cell.label}: {cl.cone.rays} maps outside the decomposition")
                elif classify_cone(img, cell.group) not in stored_keys:
                    violations.append(f"{cell.label}: image {img.rays} of {cl.cone.rays} not stored")
    return AdmissibilityReport(not violations, checked, depth, tuple(violations))


# --------------------------------------------------------------------------
# smoothness table and refinement


@dataclass(frozen=True)
class SmoothnessRow:
    cell: str
    r: int
    rays: tuple[Vec, ...]
    dim: int
    smooth_sym2: bool
    smooth_sw: bool
    multiplicity_sw: int

    @property
    def finding(self) -> bool:
        """Smooth for Sym^2(X) but not for S^w."""
        return self.smooth_sym2 and not self.smooth_sw

    def to_json(self) -> dict:
        return {"cell": self.cell, "r": self.r, "rays": [list(v) for v in self.rays],
                "dim": self.dim, "smooth_sym2": self.smooth_sym2, "smooth_sw": self.smooth_sw,
                "multiplicity_sw": self.multiplicity_sw}


def check_smooth_complex(SF: ComplexDecomposition) -> list[SmoothnessRow]:
    rows = []
    for cell in SF.cells:
        for c in cell.cones:
            if c.dim == 0:
                continue
            rows.append(SmoothnessRow(cell.label, cell.r, c.rays, c.dim, is_smooth(c),
                                      is_smooth(c, cell.structure), multiplicity(c, cell.structure)))
    return rows


def refine_complex(SF: ComplexDecomposition, budget: int = 200) -> ComplexDecomposition:
    """Refine every maximal class representative for its cell's structure.

    The subdivision rule only depends on a face and the lattice, so copies of
    a face in neighbouring cones are subdivided alike.
    """
    cells = []
    for cell in SF.cells:
        n = sym_rank(cell.r)
        cones = {}
        for cl in cell.classes:
            if cl.dim != n:
                continue
            R = refine_to_smooth(Decomposition.from_maximal(n, [cl.cone], g=cell.r), cell.structure, budget)
            for c in R.decomposition.cones:
                cones[c.rays] = c
        stored = tuple(sorted(cones.values(), key=lambda c: (c.dim, c.rays)))
        cells.append(Cell(cell.rep, cell.r, cell.group, cell.structure, cell.classes, stored))
    return ComplexDecomposition(SF.g, SF.p, SF.D, tuple(cells), SF.certificates, refined=True)


# --------------------------------------------------------------------------
# strata poset


@dataclass(frozen=True)
class StrataNode:
    id: str
    r: int
    w: PositionInvariant | None
    dim: int
    smooth: tuple[tuple[str, bool], ...]
    ord_mult: bool

    def to_json(self) -> dict:
        return {"id": self.id, "r": self.r, "w": self.w.to_json() if self.w else None,
                "dim": self.dim, "smooth": dict(self.smooth), "ord_mult": self.ord_mult}


@dataclass(frozen=True)
class StrataPoset:
    g: int
    nodes: tuple[StrataNode, ...]
    edges: tuple[tuple[str, str], ...]  # (tau, sigma): tau is a face of sigma
    root: str

    def node(self, nid: str) -> StrataNode:
        return next(n for n in self.nodes if n.id == nid)

    def boundary(self) -> list[StrataNode]:
        return [n for n in self.nodes if n.id != self.root]

    def to_json(self) -> dict:
        return {"g": self.g, "root": self.root, "nodes": [n.to_json() for n in self.nodes],
                "edges": [list(e) for e in self.edges]}

    def to_dot(self) -> str:
        lines = ["digraph strata {"]
        for n in self.nodes:
            label = n.id if n.id == self.root else f"r={n.r} w={n.w.label() if n.w else '-'} dim={n.dim}"
            lines.append(f'  "{n.id}" [label="{label}"];')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _node_id(cell: Cell, dim: int, k: int) -> str:
    return f"r{cell.r}:{cell.label}:d{dim}:{k}"


def strata_poset(SF: ComplexDecomposition) -> StrataPoset:
    """Cone orbits of the induced decomposition with their face relations."""
    return _poset(SF.g, SF.cells, SF.t, SF.p)


def strata_poset_without_level(g: int) -> StrataPoset:
    """The same poset for the full group (level forgotten)."""
    _check_genus(g)
    cells = [_make_cell(None, None, 2, r) for r in range(1, g + 1)]
    return _poset(g, cells, None, 2)


def _poset(g, cells, t, p) -> StrataPoset:
    root = f"A_{{{g},0}}"
    w0 = None
    if t is not None:
        w0 = position_of(IsotropicSummand.from_rows(g, []), t, p)
    nodes = [StrataNode(root, 0, w0, 0, (("S_w", True), ("Sym2", True)), False)]
    ids: dict = {}
    for cell in cells:
        by_dim: dict[int, int] = {}
        for cl in cell.classes:
            k = by_dim.get(cl.dim, 0)
            by_dim[cl.dim] = k + 1
            nid = _node_id(cell, cl.dim, k)
            ids[(id(cell), cl.dim, cl.key)] = nid
            om = ord_mult(cell.rep.summand, t, p) if (cell.rep and t) else False
            nodes.append(StrataNode(nid, cell.r, cell.rep.w if cell.rep else None, cl.dim,
                                    (("S_w", is_smooth(cl.cone, cell.structure)),
                                     ("Sym2", is_smooth(cl.cone))), om))
    rank1 = {c.rep.w if c.rep else None: c for c in cells if c.r == 1}
    edges = set()
    for cell in cells:
        for cl in cell.classes:
            me = ids[(id(cell), cl.dim, cl.key)]
            edges.add((root, me))
            if cell.r < 2:
                continue
            for f in faces(cl.cone).faces:
                if f.dim in (0, cl.dim):
                    continue
                fc = f.cone(3)
                if f.dim == 1:
                    u = _roots(fc)[0]
                    key = position_of(cell.rep.summand.sub_summand(u), t, p) if (cell.rep and t) else None
                    c1 = rank1[key]
                    edges.add((ids[(id(c1), 1, c1.classes[0].key)], me))
                elif is_positive_definite(fc.rays[0]) or f.dim == 2:
                    d, key = classify_cone(fc, cell.group)
                    edges.add((ids[(id(cell), d, key)], me))
    nodes.sort(key=lambda n: (n.r, n.dim, n.id))
    return StrataPoset(g, tuple(nodes), tuple(sorted(edges)), root)


def ord_mult_strata(P: StrataPoset) -> list[StrataNode]:
    return [n for n in P.nodes if n.ord_mult]


def gamma0_generators(t: ParahoricType, p: int) -> list[list[list[int]]]:
    """A finite set of elements of Gamma_0: integral transvections scaled into
    the group, sign changes on hyperbolic pairs and a multiplier -1 element."""
    g = t.g
    n = 2 * g
    J = form_matrix(g)
    out = []
    vecs = [[int(k == i) for k in range(n)] for i in range(n)]
    vecs += [[int(k == i) + int(k == j) for k in range(n)] for i, j in itertools.combinations(range(n), 2)]
    for v in vecs:
        Jv = [sum(J[i][j] * v[j] for j in range(n)) for i in range(n)]
        for c in (1, p, p * p):
            M = [[int(i == j) + c * v[i] * Jv[j] for j in range(n)] for i in range(n)]
            if in_gamma0(M, t, p):
                out.append(M)
                break
    for i in range(g):
        M = [[int(a == b) for b in range(n)] for a in range(n)]
        M[i][i] = M[n - 1 - i][n - 1 - i] = -1
        out.append(M)
    M = [[int(a == b) * (-1 if a < g else 1) for b in range(n)] for a in range(n)]
    if in_gamma0(M, t, p):
        out.append(M)
    return out
