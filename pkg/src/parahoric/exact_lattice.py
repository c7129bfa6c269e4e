"""Exact integer linear algebra.

Smith and Hermite normal forms, integer kernels and cokernels, saturation,
and limits/colimits of small diagrams of finitely generated abelian groups.
Everything uses Python integers, so there is no overflow anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd, prod
from typing import Iterable, Sequence

Rows = list[list[int]]


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class IntMatrix:
    rows: int
    cols: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError("entries length must be rows*cols")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int | None = None) -> "IntMatrix":
        rows = [list(r) for r in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        for r in rows:
            if len(r) != cols:
                raise ValueError("ragged rows")
        return cls(len(rows), cols, tuple(int(x) for r in rows for x in r))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls.from_rows(identity(n), n)

    @classmethod
    def zeros(cls, m: int, n: int) -> "IntMatrix":
        return cls(m, n, (0,) * (m * n))

    @classmethod
    def diag(cls, values: Sequence[int]) -> "IntMatrix":
        n = len(values)
        return cls.from_rows([[values[i] if i == j else 0 for j in range(n)] for i in range(n)], n)

    def to_rows(self) -> Rows:
        c = self.cols
        return [list(self.entries[i * c:(i + 1) * c]) for i in range(self.rows)]

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.entries[i * self.cols + j]

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        return IntMatrix.from_rows(matmul(self.to_rows(), other.to_rows(), self.cols, other.cols),
                                   other.cols)

    @property
    def T(self) -> "IntMatrix":
        return IntMatrix.from_rows(transpose(self.to_rows(), self.cols), self.rows)

    def column(self, j: int) -> list[int]:
        return [self[i, j] for i in range(self.rows)]

    def columns(self) -> list[list[int]]:
        return [self.column(j) for j in range(self.cols)]

    def to_json(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "entries": list(self.entries)}

    @classmethod
    def from_json(cls, d: dict) -> "IntMatrix":
        return cls(int(d["rows"]), int(d["cols"]), tuple(int(x) for x in d["entries"]))


def identity(n: int) -> Rows:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def transpose(A: Rows, cols: int | None = None) -> Rows:
    if not A:
        return [[] for _ in range(cols or 0)]
    return [list(c) for c in zip(*A)]


def matmul(A: Rows, B: Rows, inner: int | None = None, cols: int | None = None) -> Rows:
    if not A:
        return []
    if inner is None:
        inner = len(A[0])
    if cols is None:
        cols = len(B[0]) if B else 0
    Bt = transpose(B, cols) if B else [[] for _ in range(cols)]
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def matvec(A: Rows, v: Sequence[int]) -> list[int]:
    return [sum(a * b for a, b in zip(row, v)) for row in A]


def det(A: Rows) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = len(A)
    if n == 0:
        return 1
    M = [list(r) for r in A]
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def primitive(v: Sequence[int]) -> tuple[int, ...]:
    """Divide by the gcd of the entries; zero stays zero."""
    g = 0
    for x in v:
        g = gcd(g, x)
    if g == 0:
        return tuple(v)
    return tuple(x // g for x in v)


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    x, nx, y, ny = 1, 0, 0, 1
    while b:
        q = a // b
        a, b = b, a - q * b
        x, nx = nx, x - q * nx
        y, ny = ny, y - q * ny
    if a < 0:
        a, x, y = -a, -x, -y
    return x, y, a


# --------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithDecomposition:
    """``U @ A @ V == D`` with U, V unimodular and D in Smith form."""

    A: IntMatrix
    U: IntMatrix
    D: IntMatrix
    V: IntMatrix
    U_inv: IntMatrix = field(repr=False)
    V_inv: IntMatrix = field(repr=False)

    @property
    def diagonal(self) -> list[int]:
        return [self.D[i, i] for i in range(min(self.D.rows, self.D.cols))]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d)


def _smith(A: Rows, m: int, n: int):
    D = [list(r) for r in A]
    U, Ui = identity(m), identity(m)
    V, Vi = identity(n), identity(n)

    def row_swap(i, j):
        D[i], D[j] = D[j], D[i]
        U[i], U[j] = U[j], U[i]
        for r in Ui:
            r[i], r[j] = r[j], r[i]

    def col_swap(i, j):
        for M in (D, V):
            for r in M:
                r[i], r[j] = r[j], r[i]
        Vi[i], Vi[j] = Vi[j], Vi[i]

    def row_add(dst, src, q):
        # row_dst += q * row_src
        if q == 0:
            return
        for M in (D, U):
            rs, rd = M[src], M[dst]
            for k in range(len(rd)):
                rd[k] += q * rs[k]
        for r in Ui:
            r[src] -= q * r[dst]

    def col_add(dst, src, q):
        # col_dst += q * col_src
        if q == 0:
            return
        for M in (D, V):
            for r in M:
                r[dst] += q * r[src]
        rd, rs = Vi[dst], Vi[src]
        for k in range(len(rd)):
            rs[k] -= q * rd[k]

    def row_neg(i):
        D[i] = [-x for x in D[i]]
        U[i] = [-x for x in U[i]]
        for r in Ui:
            r[i] = -r[i]

    t = 0
    while t < min(m, n):
        # pivot = entry of minimal nonzero absolute value
        best = None
        for i in range(t, m):
            for j in range(t, n):
                x = D[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        _, i, j = best
        if i != t:
            row_swap(i, t)
        if j != t:
            col_swap(j, t)
        while True:
            piv = D[t][t]
            dirty = False
            for i in range(t + 1, m):
                if D[i][t]:
                    row_add(i, t, -(D[i][t] // piv))
                    if D[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if D[t][j]:
                    col_add(j, t, -(D[t][j] // piv))
                    if D[t][j]:
                        dirty = True
            if dirty:
                best = None
                for i in range(t, m):
                    if D[i][t] and (best is None or abs(D[i][t]) < best[0]):
                        best = (abs(D[i][t]), i, "r")
                for j in range(t, n):
                    if D[t][j] and (best is None or abs(D[t][j]) < best[0]):
                        best = (abs(D[t][j]), j, "c")
                _, k, kind = best
                if kind == "r" and k != t:
                    row_swap(k, t)
                elif kind == "c" and k != t:
                    col_swap(k, t)
                continue
            # divisibility of the remaining block
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if D[i][j] % piv:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            row_add(t, bad, 1)
        if D[t][t] < 0:
            row_neg(t)
        t += 1
    return D, U, V, Ui, Vi


def snf(A: IntMatrix) -> SmithDecomposition:
    """Smith normal form with unimodular transforms, ``U @ A @ V == D``."""
    D, U, V, Ui, Vi = _smith(A.to_rows(), A.rows, A.cols)
    return SmithDecomposition(
        A=A,
        U=IntMatrix.from_rows(U, A.rows),
        D=IntMatrix.from_rows(D, A.cols),
        V=IntMatrix.from_rows(V, A.cols),
        U_inv=IntMatrix.from_rows(Ui, A.rows),
        V_inv=IntMatrix.from_rows(Vi, A.cols),
    )


def elementary_divisors(rows: Rows, ncols: int | None = None) -> list[int]:
    if not rows:
        return []
    n = ncols if ncols is not None else len(rows[0])
    D, *_ = _smith(rows, len(rows), n)
    return [D[i][i] for i in range(min(len(rows), n)) if D[i][i]]


def is_smith_form(D: IntMatrix) -> bool:
    diag = [D[i, i] for i in range(min(D.rows, D.cols))]
    for i in range(D.rows):
        for j in range(D.cols):
            if i != j and D[i, j]:
                return False
    if any(d < 0 for d in diag):
        return False
    for a, b in zip(diag, diag[1:]):
        if a == 0 and b != 0:
            return False
        if a and b % a:
            return False
    return True


# --------------------------------------------------------------------------
# Hermite normal form (row style)


def hnf_rows(gens: Iterable[Sequence[int]], n: int | None = None) -> Rows:
    """Row Hermite normal form of the lattice spanned by ``gens``.

    Returns the nonzero rows: echelon, positive pivots, entries above each
    pivot reduced into ``[0, pivot)``.
    """
    M = [list(g) for g in gens]
    if not M:
        return []
    if n is None:
        n = len(M[0])
    r = 0
    pivots = []
    for c in range(n):
        rows = [i for i in range(r, len(M)) if M[i][c]]
        if not rows:
            continue
        # gcd-combine all entries of column c into row r
        k = rows[0]
        M[r], M[k] = M[k], M[r]
        for i in range(r + 1, len(M)):
            if M[i][c] == 0:
                continue
            a, b = M[r][c], M[i][c]
            x, y, g = xgcd(a, b)
            ra, rb = M[r], M[i]
            new_r = [x * u + y * v for u, v in zip(ra, rb)]
            new_i = [(a // g) * v - (b // g) * u for u, v in zip(ra, rb)]
            M[r], M[i] = new_r, new_i
        if M[r][c] < 0:
            M[r] = [-x for x in M[r]]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    M = M[:r]
    for i, c in enumerate(pivots):
        piv = M[i][c]
        for k in range(i):
            q = M[k][c] // piv
            if q:
                M[k] = [u - q * v for u, v in zip(M[k], M[i])]
    return M


def hnf(A: IntMatrix) -> IntMatrix:
    rows = hnf_rows(A.to_rows(), A.cols)
    return IntMatrix.from_rows(rows, A.cols) if rows else IntMatrix.zeros(0, A.cols)


def solve_in_lattice(basis: Rows, v: Sequence[int]) -> list[int] | None:
    """Integer coefficients ``c`` with ``sum c_i basis_i == v``, or None.

    ``basis`` must be in row Hermite form (as returned by ``hnf_rows``).
    """
    v = list(v)
    coeffs = []
    for row in basis:
        c = next(j for j, x in enumerate(row) if x)
        q, rem = divmod(v[c], row[c])
        if rem:
            return None
        coeffs.append(q)
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    if any(v):
        return None
    return coeffs


def in_lattice(gens: Iterable[Sequence[int]], v: Sequence[int]) -> bool:
    basis = hnf_rows(gens, len(v))
    return solve_in_lattice(basis, v) is not None


# --------------------------------------------------------------------------
# kernels, cokernels, saturation


@dataclass(frozen=True)
class FinAbGroup:
    """A finitely generated abelian group by invariant factors.

    ``factors`` is a divisibility chain ``n_1 | n_2 | ...``; a factor 0 is a
    free summand, and factors equal to 1 are dropped.
    """

    factors: tuple[int, ...]

    def __post_init__(self):
        for a, b in zip(self.factors, self.factors[1:]):
            if a == 0 and b != 0 or (a and b % a):
                raise ValueError(f"not a divisibility chain: {self.factors}")
        if any(f == 1 or f < 0 for f in self.factors):
            raise ValueError("factors must be 0 or > 1")

    @classmethod
    def from_diagonal(cls, diag: Iterable[int]) -> "FinAbGroup":
        """Canonical form from any list of cyclic orders (0 = free)."""
        diag = [abs(d) for d in diag if abs(d) != 1]
        free = sum(1 for d in diag if d == 0)
        tors = [d for d in diag if d]
        if not tors:
            return cls((0,) * free)
        D = IntMatrix.diag(tors)
        inv = [d for d in snf(D).diagonal if d != 1]
        return cls(tuple(inv) + (0,) * free)

    @property
    def free_rank(self) -> int:
        return sum(1 for f in self.factors if f == 0)

    @property
    def torsion(self) -> tuple[int, ...]:
        return tuple(f for f in self.factors if f)

    @property
    def is_free(self) -> bool:
        return not self.torsion

    @property
    def is_finite(self) -> bool:
        return self.free_rank == 0

    @property
    def order(self) -> int | None:
        return prod(self.factors) if self.is_finite else None

    def __str__(self) -> str:
        if not self.factors:
            return "0"
        return " + ".join("Z" if f == 0 else f"Z/{f}" for f in self.factors)


def kernel(A: IntMatrix) -> IntMatrix:
    """Columns form a Z-basis of the (automatically saturated) kernel."""
    s = snf(A)
    k = s.rank
    V = s.V.to_rows()
    cols = [[V[i][j] for i in range(A.cols)] for j in range(k, A.cols)]
    if not cols:
        return IntMatrix.zeros(A.cols, 0)
    return IntMatrix.from_rows(transpose(cols), len(cols))


def cokernel(A: IntMatrix) -> FinAbGroup:
    """``Z^rows / image(A)``."""
    s = snf(A)
    diag = s.diagonal
    return FinAbGroup.from_diagonal(list(diag[: s.rank]) + [0] * (A.rows - s.rank))


@dataclass(frozen=True)
class Saturation:
    basis: IntMatrix  # rows
    index: int  # [saturation : lattice spanned by the input], 0 if input is degenerate


def saturate(gens: IntMatrix) -> Saturation:
    """Saturation of the row lattice of ``gens`` inside Z^n.

    ``index`` is the index of the input lattice in its saturation.
    """
    n = gens.cols
    if gens.rows == 0:
        return Saturation(IntMatrix.zeros(0, n), 1)
    s = snf(gens)
    r = s.rank
    Vi = s.V_inv.to_rows()
    basis = hnf_rows(Vi[:r], n)
    idx = prod(s.diagonal[:r])
    return Saturation(IntMatrix.from_rows(basis, n) if basis else IntMatrix.zeros(0, n), idx)


def saturated_rows(gens: Rows, n: int) -> Rows:
    if not gens:
        return []
    return saturate(IntMatrix.from_rows(gens, n)).basis.to_rows()


def complete_basis(rows: Rows, n: int) -> Rows:
    """Extend a basis of a saturated sublattice to a basis of Z^n.

    The first ``len(rows)`` output rows are the input rows.
    """
    if not rows:
        return identity(n)
    A = IntMatrix.from_rows(rows, n)
    s = snf(A)
    if any(d != 1 for d in s.diagonal[: s.rank]) or s.rank != len(rows):
        raise ValueError("rows are not a basis of a saturated sublattice")
    # rows = U^-1 [I 0] V^-1, so the last rows of V^-1 complete them
    Vi = s.V_inv.to_rows()
    return [list(r) for r in rows] + Vi[len(rows):]


def inverse_unimodular(A: Rows) -> Rows:
    n = len(A)
    s = snf(IntMatrix.from_rows(A, n))
    if s.diagonal != [1] * n:
        raise ValueError("matrix is not unimodular")
    # U A V = I  =>  A^-1 = V U
    return matmul(s.V.to_rows(), s.U.to_rows())


# --------------------------------------------------------------------------
# diagrams


@dataclass(frozen=True)
class LatticeDiagram:
    """Free modules Z^{nodes[i]} and maps between them.

    Each edge is ``(source, target, M)`` with M of shape target x source.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, IntMatrix], ...] = ()

    def __post_init__(self):
        for s, t, M in self.edges:
            if (M.rows, M.cols) != (self.nodes[t], self.nodes[s]):
                raise ValueError(f"edge {s}->{t} has shape {M.rows}x{M.cols}, "
                                 f"expected {self.nodes[t]}x{self.nodes[s]}")


@dataclass(frozen=True)
class Colimit:
    group: FinAbGroup
    is_free: bool
    # node_maps[i]: images of node i's generators in the coordinates of
    # ``group`` (torsion coordinates first, then free ones; torsion
    # coordinates reduced modulo their factor)
    node_maps: tuple[IntMatrix, ...]


def colimit(d: LatticeDiagram) -> Colimit:
    """Colimit ``(sum of nodes) / <x - f(x)>`` via one Smith normal form."""
    offsets = [0]
    for n in d.nodes:
        offsets.append(offsets[-1] + n)
    total = offsets[-1]
    rel_cols = []
    for s, t, M in d.edges:
        Mr = M.to_rows()
        for j in range(d.nodes[s]):
            col = [0] * total
            col[offsets[s] + j] += 1
            for i in range(d.nodes[t]):
                col[offsets[t] + i] -= Mr[i][j]
            rel_cols.append(col)
    if rel_cols:
        R = IntMatrix.from_rows(transpose(rel_cols), len(rel_cols))
        sm = snf(R)
        diag = sm.diagonal
        rank = sm.rank
        U = sm.U.to_rows()
    else:
        diag, rank, U = [], 0, identity(total)
    keep = [i for i in range(total) if i >= rank or diag[i] != 1]
    mods = [diag[i] if i < rank else 0 for i in keep]
    group = FinAbGroup.from_diagonal(mods)
    node_maps = []
    for k, n in enumerate(d.nodes):
        rows = []
        for i, mod in zip(keep, mods):
            row = U[i][offsets[k]:offsets[k] + n]
            rows.append([x % mod for x in row] if mod else row)
        node_maps.append(IntMatrix.from_rows(rows, n) if rows else IntMatrix.zeros(0, n))
    # keep's ordering already lists torsion (rank part) before free part
    return Colimit(group, group.is_free, tuple(node_maps))


@dataclass(frozen=True)
class Limit:
    group: FinAbGroup
    basis: IntMatrix  # rows: generators of the limit lattice in (Z^n)^{nodes}
    projections: tuple[IntMatrix, ...]  # basis coordinates -> node coordinates


def _subgroup_rows(factors: Sequence[int], gens: Sequence[Sequence[int]]) -> Rows:
    n = len(factors)
    rows = [[f if i == j else 0 for j in range(n)] for i, f in enumerate(factors)]
    rows += [list(g) for g in gens]
    return rows


def quotient_limit(factors: Sequence[int], subgroups: Sequence[Sequence[Sequence[int]]],
                   edges: Sequence[tuple[int, int]]) -> Limit:
    """Inverse limit of quotients ``B/K_j`` of a finite group B.

    ``B = sum Z/factors[i]``; ``subgroups[j]`` lists generators of K_j; each
    edge ``(j, k)`` is the map ``B/K_j -> B/K_k`` induced by the identity of
    B, which is only defined when ``K_j`` is inside ``K_k``.
    """
    n = len(factors)
    if any(f <= 0 for f in factors):
        raise ValueError("B must be finite")
    rel = [hnf_rows(_subgroup_rows(factors, K), n) for K in subgroups]
    for j, k in edges:
        for v in subgroups[j]:
            if solve_in_lattice(rel[k], v) is None:
                raise ValueError(f"edge {j}->{k} is not well defined: K_{j} not in K_{k}")
    J = len(subgroups)
    N = n * J
    # x in Z^N lies in the limit iff x_j - x_k is in the relation lattice of
    # node k for every edge; solve for the lattice of such x
    E = len(edges)
    # block matrix [Phi | -RelT] acting on (x, y)
    rel_t = []
    for e, (j, k) in enumerate(edges):
        for r in rel[k]:
            rel_t.append((e, r))
    width = N + len(rel_t)
    rows = [[0] * width for _ in range(E * n)]
    for e, (j, k) in enumerate(edges):
        for i in range(n):
            rows[e * n + i][j * n + i] += 1
            rows[e * n + i][k * n + i] -= 1
    for c, (e, r) in enumerate(rel_t):
        for i in range(n):
            rows[e * n + i][N + c] -= r[i]
    if E:
        K = kernel(IntMatrix.from_rows(rows, width)).to_rows()
        gens = [[K[i][c] for i in range(N)] for c in range(len(K[0]) if K else 0)]
    else:
        gens = identity(N)
    L = hnf_rows(gens, N)
    # relations of the product of the quotients
    src_rel = []
    for j in range(J):
        for r in rel[j]:
            v = [0] * N
            v[j * n:(j + 1) * n] = r
            src_rel.append(v)
    coeffs = []
    for v in src_rel:
        c = solve_in_lattice(L, v)
        if c is None:
            raise AssertionError("relation lattice not contained in the limit lattice")
        coeffs.append(c)
    group = cokernel(IntMatrix.from_rows(transpose(coeffs), len(coeffs)))
    projections = []
    for j in range(J):
        proj = [[row[j * n + i] for row in L] for i in range(n)]
        projections.append(IntMatrix.from_rows(proj, len(L)))
    return Limit(group, IntMatrix.from_rows(L, N), tuple(projections))


def subgroup_order(factors: Sequence[int], gens: Sequence[Sequence[int]]) -> int:
    """Order of the subgroup of ``sum Z/factors`` generated by ``gens``."""
    n = len(factors)
    full = prod(factors)
    quot = cokernel(IntMatrix.from_rows(transpose(_subgroup_rows(factors, gens)),
                                        n + len(gens))) if n else FinAbGroup(())
    return full // quot.order


def square_limit(factors: Sequence[int], H1, H2, H, Hp) -> Limit:
    """Limit of ``B/H1 -> B/H' <- B/H2`` and ``B/H1 -> B/H <- B/H2``."""
    return quotient_limit(factors, [H1, H2, H, Hp], [(0, 2), (0, 3), (1, 2), (1, 3)])


def subgroup_sum(factors: Sequence[int], *gens_lists) -> list[list[int]]:
    """Generators of a sum of subgroups."""
    return [list(v) for gens in gens_lists for v in gens]


def subgroup_meet(factors: Sequence[int], A, B) -> list[list[int]]:
    """Generators of the intersection of two subgroups of ``sum Z/factors``.

    Solves ``sum x_i a_i - sum y_j b_j`` in the relation lattice.
    """
    n = len(factors)
    rel = _subgroup_rows(factors, [])
    cols = [list(a) for a in A] + [[-x for x in b] for b in B] + [list(r) for r in rel]
    if not cols:
        return []
    M = IntMatrix.from_rows(transpose(cols, n), len(cols))
    K = kernel(M).to_rows()
    out = []
    for c in range(len(K[0]) if K else 0):
        v = [0] * n
        for i, a in enumerate(A):
            for t in range(n):
                v[t] += K[i][c] * a[t]
        out.append([x % f for x, f in zip(v, factors)])
    return out
