"""Character lattices of boundary tori with parahoric level.

For a position ``w = (m_i, a_i, e_i)`` of torus rank r, every lattice
``Y_i, X_i`` (0 <= i <= s) is identified with ``Z^r`` (basis eps_1..eps_r) and
all maps are diagonal. Index ``i = 0`` is the normalised level with
``m_0 = e_0 = 0``. On level i call ``[e_i + 1, r - m_i]`` the middle range:

* ``phi_i : Y_i -> X_i`` is ``p`` on the middle range and 1 outside,
* ``psi_i : X_i -> Y_i`` is ``p / phi_i`` so both composites are ``p``,
* ``Y_{i-1} -> Y_i`` is ``p`` on ``[e_{i-1} + 1, e_i]``,
* ``X_i -> X_{i-1}`` is ``p`` on ``[r - m_i + 1, r - m_{i-1}]``.

The character lattice ``S^w`` is the colimit of the diagram with nodes
``X_i (x) X_i``, ``Y_i (x) X_i``, ``Y_i (x) Y_i`` and ``Y_{i-1} (x) X_i``;
each symmetrisation arrow appears twice, once composed with the flip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, prod
from typing import Sequence

from .exact_lattice import (
    FinAbGroup, IntMatrix, LatticeDiagram, colimit, det,
    square_limit, transpose,
)
from .symplectic_flags import PositionInvariant


@dataclass(frozen=True)
class LevelDiagram:
    r: int
    s: int
    p: int
    w: PositionInvariant
    # diagonal entries, indexed by level
    phi: tuple[tuple[int, ...], ...]  # Y_i -> X_i, i = 0..s
    psi: tuple[tuple[int, ...], ...]  # X_i -> Y_i
    y_step: tuple[tuple[int, ...], ...]  # Y_{i-1} -> Y_i, i = 1..s (index i-1)
    x_step: tuple[tuple[int, ...], ...]  # X_i -> X_{i-1}, i = 1..s (index i-1)

    def middle(self, i: int) -> range:
        """0-based indices of the middle range on level i."""
        e, m = self._em(i)
        return range(e, self.r - m)

    def _em(self, i: int) -> tuple[int, int]:
        if i == 0:
            return 0, 0
        return self.w.e[i - 1], self.w.m[i - 1]

    def y_from_0(self, i: int) -> tuple[int, ...]:
        """Diagonal of ``Y_0 -> Y_i``."""
        out = [1] * self.r
        for j in range(i):
            out = [a * b for a, b in zip(out, self.y_step[j])]
        return tuple(out)

    def x_to_0(self, i: int) -> tuple[int, ...]:
        """Diagonal of ``X_i -> X_0``."""
        out = [1] * self.r
        for j in range(i):
            out = [a * b for a, b in zip(out, self.x_step[j])]
        return tuple(out)


def build_level_diagram(w: PositionInvariant, p: int) -> LevelDiagram:
    r, s = w.r, len(w.m)
    for seq in (w.m, w.a, w.e):
        if any(b < a for a, b in zip(seq, seq[1:])):
            raise ValueError(f"position is not monotone: {w}")
    if any(m + e > r for m, e in zip(w.m, w.e)) or min(w.m + w.a + w.e, default=0) < 0:
        raise ValueError(f"position out of range for r={r}: {w}")
    e = (0,) + tuple(w.e)
    m = (0,) + tuple(w.m)
    phi, psi = [], []
    for i in range(s + 1):
        f = tuple(p if e[i] <= k < r - m[i] else 1 for k in range(r))
        phi.append(f)
        psi.append(tuple(p // x for x in f))
    y_step = tuple(tuple(p if e[i - 1] <= k < e[i] else 1 for k in range(r)) for i in range(1, s + 1))
    x_step = tuple(tuple(p if r - m[i] <= k < r - m[i - 1] else 1 for k in range(r))
                   for i in range(1, s + 1))
    D = LevelDiagram(r, s, p, w, tuple(phi), tuple(psi), y_step, x_step)
    _check_level_diagram(D)
    return D


def _check_level_diagram(D: LevelDiagram) -> None:
    p = D.p
    for i in range(D.s + 1):
        if any(a * b != p for a, b in zip(D.phi[i], D.psi[i])):
            raise AssertionError("composites through X_i must be p")
    for i in range(1, D.s + 1):
        # Y_{i-1} -> Y_i -> X_i -> X_{i-1} equals phi_{i-1}
        comp = [a * b * c for a, b, c in zip(D.y_step[i - 1], D.phi[i], D.x_step[i - 1])]
        if tuple(comp) != D.phi[i - 1]:
            raise AssertionError(f"level square {i} does not commute")
        # X_i -> X_{i-1} -> Y_{i-1} -> Y_i equals psi_i
        comp = [a * b * c for a, b, c in zip(D.x_step[i - 1], D.psi[i - 1], D.y_step[i - 1])]
        if tuple(comp) != D.psi[i]:
            raise AssertionError(f"dual level square {i} does not commute")
    if D.phi and any(x != p for x in D.phi[0]):
        raise AssertionError("level 0 must be normalised to Y -p-> X -id-> Y")
    for i in range(1, D.s + 1):
        e, m = D.w.e[i - 1], D.w.m[i - 1]
        if prod(D.y_from_0(i)) != p ** e or prod(D.x_to_0(i)) != p ** m:
            raise AssertionError("cokernel orders of transition maps disagree with w")


# --------------------------------------------------------------------------
# the colimit


def _tensor_diag(a: Sequence[int], b: Sequence[int]) -> list[list[int]]:
    """Matrix of ``diag(a) (x) diag(b)`` on basis pairs (k, l) in row-major order."""
    r = len(a)
    n = r * r
    M = [[0] * n for _ in range(n)]
    for k in range(r):
        for l in range(r):
            M[k * r + l][k * r + l] = a[k] * b[l]
    return M


def _flip_after(M: list[list[int]], r: int) -> list[list[int]]:
    """Compose with the flip ``u (x) v -> v (x) u`` on the target."""
    out = [None] * (r * r)
    for k in range(r):
        for l in range(r):
            out[l * r + k] = M[k * r + l]
    return out


@dataclass(frozen=True)
class CharacterLattice:
    w: PositionInvariant
    p: int
    rank: int
    is_free: bool
    node_names: tuple[str, ...]
    # images of node generators (pairs (k, l) row-major) in the S^w basis
    node_maps: tuple[IntMatrix, ...]
    # columns: images of the Sym^2(X_0) basis [kl], k <= l, in the S^w basis
    embedding: IntMatrix
    index: int
    group: FinAbGroup = field(repr=False)

    def node(self, name: str) -> IntMatrix:
        return self.node_maps[self.node_names.index(name)]

    def image(self, name: str, k: int, l: int) -> tuple[int, ...]:
        """Image of ``eps_k (x) eps_l`` (1-based) of a node in S^w."""
        M = self.node(name)
        return tuple(M.column((k - 1) * self.w.r + (l - 1)))

    def structure_basis(self) -> list[list[Fraction]]:
        """Basis of S^w in Sym^2(X_0) (x) Q coordinates [kl], k <= l.

        Rows; obtained by inverting the embedding matrix.
        """
        return inverse_rational(self.embedding.to_rows()) if self.rank else []


class TorsionInColimit(RuntimeError):
    pass


def sym2_pairs(r: int) -> list[tuple[int, int]]:
    """Basis indices ``(k, l)``, ``k <= l``, 0-based, of Sym^2 of rank r."""
    return [(k, l) for k in range(r) for l in range(k, r)]


def level_diagram_lattices(D: LevelDiagram, upto: int | None = None) -> tuple[list[str], LatticeDiagram]:
    r = D.r
    n = r * r
    s = D.s if upto is None else upto
    names: list[str] = []

    def node(name):
        names.append(name)
        return len(names) - 1

    edges = []
    for i in range(s + 1):
        xx, yx, yy = node(f"XX{i}"), node(f"YX{i}"), node(f"YY{i}")
        ident = [1] * r
        # Y (x) Y -> Y (x) X : u (x) v -> u (x) phi(v), and v (x) phi(u)
        edges.append((yy, yx, _tensor_diag(ident, D.phi[i])))
        edges.append((yy, yx, _flip_after(_tensor_diag(D.phi[i], ident), r)))
        # X (x) X -> Y (x) X : u (x) v -> psi(u) (x) v, and psi(v) (x) u
        B = _tensor_diag(D.psi[i], ident)
        edges.append((xx, yx, B))
        edges.append((xx, yx, _flip_after(_tensor_diag(ident, D.psi[i]), r)))
    for i in range(1, s + 1):
        mid = node(f"YX{i - 1},{i}")
        ident = [1] * r
        edges.append((mid, names.index(f"YX{i - 1}"), _tensor_diag(ident, D.x_step[i - 1])))
        edges.append((mid, names.index(f"YX{i}"), _tensor_diag(D.y_step[i - 1], ident)))
    ld = LatticeDiagram(tuple([n] * len(names)),
                        tuple((a, b, IntMatrix.from_rows(M, n)) for a, b, M in edges))
    return names, ld


def character_lattice(w: PositionInvariant, p: int, upto: int | None = None) -> CharacterLattice:
    """Colimit S^w with the embedding of Sym^2(X_0) and its index.

    ``upto`` truncates to levels ``<= upto``. Raises ``TorsionInColimit`` if
    the colimit is not free.
    """
    D = build_level_diagram(w, p)
    r = w.r
    if r == 0:
        z = IntMatrix.zeros(0, 0)
        return CharacterLattice(w, p, 0, True, (), (), z, 1, FinAbGroup(()))
    names, ld = level_diagram_lattices(D, upto)
    c = colimit(ld)
    if not c.is_free:
        raise TorsionInColimit(f"colimit for {w} (p={p}) has torsion {c.group}")
    rank = c.group.free_rank
    xx0 = c.node_maps[names.index("XX0")].to_rows()
    cols = [[xx0[t][k * r + l] for t in range(rank)] for k, l in sym2_pairs(r)]
    emb = IntMatrix.from_rows(transpose(cols, rank), len(cols))
    if emb.rows == emb.cols:
        index = abs(det(emb.to_rows()))
    else:
        index = 0
    if index == 0:
        raise AssertionError("Sym^2(X_0) does not embed with finite index")
    return CharacterLattice(w, p, rank, True, tuple(names), c.node_maps, emb, index, c.group)


def inverse_rational(A: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    """Transpose of the inverse: rows are the dual-coordinate images.

    For an embedding matrix E (columns = images of old basis in new basis)
    the new basis vectors in old coordinates are the columns of ``E^-1``;
    they are returned as rows.
    """
    n = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(A)]
    for c in range(n):
        piv = next(i for i in range(c, n) if M[i][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    Ainv = [row[n:] for row in M]
    return [[Ainv[i][j] for i in range(n)] for j in range(n)]


def verify_symmetry_identification(w: PositionInvariant, p: int) -> bool:
    """Check that ``eps_k (x) eps_l`` and ``eps_l (x) eps_k`` in ``Y_i (x) X_i``
    have the same image, for k, l in the middle range, in every truncation
    ``S_i`` and in ``S^w``."""
    if w.r == 0:
        return True
    D = build_level_diagram(w, p)
    for i in range(D.s + 1):
        C = character_lattice(w, p, upto=i)
        mid = D.middle(i)
        for k in mid:
            for l in mid:
                if C.image(f"YX{i}", k + 1, l + 1) != C.image(f"YX{i}", l + 1, k + 1):
                    return False
    return True


# --------------------------------------------------------------------------
# finite model of the abelian part


@dataclass(frozen=True)
class SquareReport:
    level: int
    kind: str  # "level" (square on Hom(Y_i, A_i)) or "transition" (on Hom(Y_i, A_0))
    order: int
    predicted_order: int
    surjective: bool
    kernel_matches: bool
    # per-coordinate divisors of H1, H2, H, H' inside (Z/N)^n
    subgroups: tuple[tuple[int, ...], ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class AbelianModelReport:
    N: int
    k: int
    group: FinAbGroup  # the level-0 limit P'_0 = P_0
    squares: tuple[SquareReport, ...]

    @property
    def surjective(self) -> bool:
        return all(q.surjective for q in self.squares)

    @property
    def ok(self) -> bool:
        return all(q.surjective and q.kernel_matches and q.order == q.predicted_order
                   for q in self.squares)


def _pre(d: int, c: int) -> int:
    """Divisor of ``{a : c a in dZ/N}`` for the subgroup ``dZ/N`` (d | N)."""
    return d // gcd(d, c)


def _as_gens(N: int, divs: Sequence[int]) -> list[list[int]]:
    n = len(divs)
    return [[d if t == c else 0 for t in range(n)] for c, d in enumerate(divs) if d % N]


def _coord_order(N: int, divs: Sequence[int]) -> int:
    return prod(N // d for d in divs)


def abelian_limit_model(w: PositionInvariant, p: int, g: int, N: int) -> AbelianModelReport:
    """Limits of the squares built on ``Hom(Y_i, A_i)`` and ``Hom(Y_i, A_0)``.

    Model: ``A_i = (Z/N)^{2k}``, ``k = g - r``, with the symplectic pairing
    of coordinates j and 2k+1-j. ``Ker(A_0 -> A_i)`` is spanned by
    ``(N/p) e_j`` for ``j <= a_i``, ``Ker(A_0 -> A_i^t)`` by ``(N/p) e_j``
    for ``j <= 2k - a_i`` and ``Ker(A_i -> A_i^t)`` by ``(N/p) e_j`` for
    ``a_i < j <= 2k - a_i``. Every subgroup involved is a product of cyclic
    subgroups of the coordinates, stored as one divisor per coordinate.
    """
    k = g - w.r
    if k < 0:
        raise ValueError("torus rank exceeds genus")
    if N < 1 or (N != 1 and N % p):
        raise ValueError("model needs p | N (or the trivial model N = 1)")
    if max(w.a, default=0) > k:
        raise ValueError("a_i exceeds the abelian rank")
    D = build_level_diagram(w, p)
    r, s = w.r, D.s
    a = (0,) + tuple(w.a)
    q = N // p if N % p == 0 else N  # generator divisor of A[p]; N=1 gives 0
    A_p = [q] * (2 * k)

    def ker_quot(i):  # Ker(A_0 -> A_i)
        return [q if j < a[i] else N for j in range(2 * k)]

    def ker_dual(i):  # Ker(A_0 -> A_i^t)
        return [q if j < 2 * k - a[i] else N for j in range(2 * k)]

    def ker_pol(i):  # Ker(A_i -> A_i^t) inside A_i
        return [q if a[i] <= j < 2 * k - a[i] else N for j in range(2 * k)]

    def per_eps(fn):
        return [d for kk in range(r) for d in fn(kk)]

    reports = []
    level0 = None
    for i in range(s + 1):
        mid = set(D.middle(i))
        K = ker_pol(i)
        ps = D.psi[i]
        H1 = per_eps(lambda kk: [_pre(N, p)] * (2 * k))
        H2 = per_eps(lambda kk: [_pre(d, ps[kk]) for d in K])
        H = per_eps(lambda kk: [_pre(d, p) for d in K])
        Hp = per_eps(lambda kk: [_pre(d, ps[kk]) for d in A_p])
        expect = per_eps(lambda kk: K if kk in mid else A_p)
        rep, grp = _square_report(N, i, "level", H1, H2, H, Hp, expect, [])
        reports.append(rep)
        if i == 0:
            level0 = grp
    for i in range(1, s + 1):
        y = D.y_step[i - 1]
        ps = D.psi[i]
        mid_prev = set(D.middle(i - 1))
        Q, T = ker_quot(i), ker_dual(i - 1)
        H1 = per_eps(lambda kk: [_pre(N, y[kk])] * (2 * k))
        H2 = per_eps(lambda kk: Q)
        H = per_eps(lambda kk: [_pre(d, y[kk]) for d in Q])
        Hp = per_eps(lambda kk: [_pre(d, ps[kk]) for d in T])
        R = per_eps(lambda kk: [_pre(d, y[kk]) for d in (T if kk in mid_prev else [N] * (2 * k))])
        rep, _ = _square_report(N, i, "transition", H1, H2, H, Hp, None, R)
        reports.append(rep)
    return AbelianModelReport(N, k, level0 if level0 is not None else FinAbGroup(()), tuple(reports))


def _square_report(N, i, kind, H1, H2, H, Hp, expect, R):
    n = len(H1)
    lcm = lambda x, y: x * y // gcd(x, y)
    meet_top = [lcm(x, y) for x, y in zip(H, Hp)]
    sum_bot = [gcd(x, y) for x, y in zip(H1, H2)]
    if any(b % t for b, t in zip(sum_bot, meet_top)):
        raise ValueError(f"H1 + H2 not inside H cap H' on {kind} square {i}")
    if n:
        lim = square_limit([N] * n, _as_gens(N, H1), _as_gens(N, H2),
                           _as_gens(N, H), _as_gens(N, Hp)).group
        order = lim.order
    else:
        lim, order = FinAbGroup(()), 1
    meet_bot = [lcm(x, y) for x, y in zip(H1, H2)]
    predicted = (N ** n // _coord_order(N, meet_bot)) * (
        _coord_order(N, meet_top) // _coord_order(N, sum_bot))
    target = [gcd(x, y) for x, y in zip(sum_bot, R)] if R else sum_bot
    surjective = all(t % c == 0 for t, c in zip(meet_top, target))
    kernel_matches = expect is None or meet_bot == list(expect)
    subs = tuple(tuple(x) for x in (H1, H2, H, Hp))
    return SquareReport(i, kind, order, predicted, surjective, kernel_matches, subs), lim
