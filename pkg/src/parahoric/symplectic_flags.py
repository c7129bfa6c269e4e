"""Isotropic flags in (F_p)^{2g}, their relative position to a weight flag,
and the finite set of positions.

The symplectic form is ``J = [[0, J'], [-J', 0]]`` with ``J'`` the g x g
anti-diagonal matrix of ones, so ``x_j`` pairs with ``x_{2g+1-j}``.
Subspaces are stored as row-reduced echelon bases (rows are vectors), which
makes flags hashable and comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .exact_lattice import IntMatrix, hnf_rows, solve_in_lattice

Vec = tuple[int, ...]
Subspace = tuple[Vec, ...]
Flag = tuple[Subspace, ...]


# --------------------------------------------------------------------------
# linear algebra over F_p


def rref(rows: Iterable[Sequence[int]], p: int) -> Subspace:
    """Canonical (reduced row echelon) basis of the span of ``rows`` mod p."""
    M = [[x % p for x in r] for r in rows]
    if not M:
        return ()
    n = len(M[0])
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = pow(M[r][c], -1, p)
        M[r] = [(x * inv) % p for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [(a - f * b) % p for a, b in zip(M[i], M[r])]
        r += 1
        if r == len(M):
            break
    return tuple(tuple(row) for row in M[:r])


def dim_sum(U: Subspace, W: Subspace, p: int) -> int:
    return len(rref(list(U) + list(W), p))


def dim_meet(U: Subspace, W: Subspace, p: int) -> int:
    return len(U) + len(W) - dim_sum(U, W, p)


def apply(gamma: Sequence[Sequence[int]], U: Subspace, p: int) -> Subspace:
    """Image of a subspace under a matrix acting on column vectors."""
    return rref([[sum(g * x for g, x in zip(row, v)) for row in gamma] for v in U], p)


# --------------------------------------------------------------------------
# the symplectic space


@lru_cache(maxsize=None)
def form_matrix(g: int) -> tuple[tuple[int, ...], ...]:
    n = 2 * g
    J = [[0] * n for _ in range(n)]
    for i in range(g):
        J[i][n - 1 - i] = 1
        J[n - 1 - i][i] = -1
    return tuple(tuple(r) for r in J)


def omega(g: int, x: Sequence[int], y: Sequence[int]) -> int:
    J = form_matrix(g)
    return sum(x[i] * J[i][j] * y[j] for i in range(2 * g) for j in range(2 * g) if J[i][j])


@dataclass(frozen=True)
class SymplecticSpace:
    g: int
    p: int

    @property
    def dim(self) -> int:
        return 2 * self.g

    @property
    def J(self) -> tuple[tuple[int, ...], ...]:
        return form_matrix(self.g)

    def basis_vector(self, j: int) -> Vec:
        """``x_j`` for 1 <= j <= 2g."""
        return tuple(int(k == j - 1) for k in range(self.dim))

    def span(self, *indices: int) -> Subspace:
        return rref([self.basis_vector(j) for j in indices], self.p)

    def is_isotropic(self, U: Subspace) -> bool:
        return all(omega(self.g, u, v) % self.p == 0 for u in U for v in U)

    def perp(self, U: Subspace) -> Subspace:
        """Orthogonal of U for the symplectic form (mod p)."""
        J = self.J
        # rows u^T J; perp is their kernel
        A = [[sum(u[i] * J[i][j] for i in range(self.dim)) % self.p for j in range(self.dim)]
             for u in U]
        return nullspace_mod_p(A, self.dim, self.p)

    def is_similitude(self, gamma: Sequence[Sequence[int]]) -> int | None:
        """The multiplier nu if gamma^T J gamma = nu J mod p (nu != 0)."""
        n, p, J = self.dim, self.p, self.J
        G = [list(r) for r in gamma]
        JG = [[sum(J[i][k] * G[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        M = [[sum(G[k][i] * JG[k][j] for k in range(n)) % p for j in range(n)] for i in range(n)]
        nu = M[0][n - 1] % p
        if nu == 0:
            return None
        for i in range(n):
            for j in range(n):
                if M[i][j] != (nu * J[i][j]) % p:
                    return None
        return nu


def nullspace_mod_p(A: Sequence[Sequence[int]], n: int, p: int) -> Subspace:
    R = rref(A, p)
    pivots = [next(j for j, x in enumerate(r) if x) for r in R]
    free = [j for j in range(n) if j not in pivots]
    basis = []
    for f in free:
        v = [0] * n
        v[f] = 1
        for r, c in zip(R, pivots):
            v[c] = (-r[f]) % p
        basis.append(v)
    return rref(basis, p)


# --------------------------------------------------------------------------
# parahoric types, flags, weight flags


@dataclass(frozen=True)
class ParahoricType:
    g: int
    D: tuple[int, ...]

    def __post_init__(self):
        D = tuple(self.D)
        if not D:
            raise ValueError("D must be nonempty")
        if any(b <= a for a, b in zip(D, D[1:])):
            raise ValueError(f"D must be strictly increasing: {D}")
        if D[0] < 1 or D[-1] > self.g:
            raise ValueError(f"D must lie in 1..{self.g}: {D}")

    @property
    def s(self) -> int:
        return len(self.D)


@dataclass(frozen=True)
class IsotropicFlag:
    p: int
    g: int
    spaces: Flag

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(H) for H in self.spaces)


@dataclass(frozen=True)
class WeightFlag:
    """``W_1`` isotropic, ``W_2 = W_1^perp``, ``W_3 = V``."""

    g: int
    p: int
    r: int
    W1: Subspace
    W2: Subspace

    @classmethod
    def standard(cls, g: int, p: int, r: int) -> "WeightFlag":
        if not 0 <= r <= g:
            raise ValueError("need 0 <= r <= g")
        V = SymplecticSpace(g, p)
        W1 = V.span(*range(1, r + 1))
        return cls(g, p, r, W1, V.perp(W1) if r else V.span(*range(1, 2 * g + 1)))

    @classmethod
    def from_subspace(cls, g: int, p: int, W1: Subspace) -> "WeightFlag":
        V = SymplecticSpace(g, p)
        if not V.is_isotropic(W1):
            raise ValueError("W_1 must be totally isotropic")
        W2 = V.perp(W1) if W1 else V.span(*range(1, 2 * g + 1))
        return cls(g, p, len(W1), W1, W2)


@dataclass(frozen=True, order=True)
class PositionInvariant:
    r: int
    m: tuple[int, ...]
    a: tuple[int, ...]
    e: tuple[int, ...]

    def validate(self, g: int, D: Sequence[int]) -> None:
        if not (len(self.m) == len(self.a) == len(self.e) == len(D)):
            raise ValueError("sequence lengths must equal s")
        for i, d in enumerate(D):
            if self.m[i] + self.a[i] + self.e[i] != d:
                raise ValueError(f"m+a+e != d at index {i}")
        for seq in (self.m, self.a, self.e):
            if any(y < x for x, y in zip(seq, seq[1:])):
                raise ValueError(f"sequence not non-decreasing: {seq}")
        if min(self.m + self.a + self.e, default=0) < 0:
            raise ValueError("negative entry")
        if max(self.m + self.e, default=0) > self.r or max(self.a, default=0) > 2 * (g - self.r):
            raise ValueError("entry out of range")

    def to_json(self) -> dict:
        return {"r": self.r, "m": list(self.m), "a": list(self.a), "e": list(self.e)}

    @classmethod
    def from_json(cls, d: dict) -> "PositionInvariant":
        return cls(int(d["r"]), tuple(d["m"]), tuple(d["a"]), tuple(d["e"]))

    def label(self) -> str:
        return ";".join(f"({m},{a},{e})" for m, a, e in zip(self.m, self.a, self.e))


def std_flag(t: ParahoricType, p: int) -> IsotropicFlag:
    V = SymplecticSpace(t.g, p)
    return IsotropicFlag(p, t.g, tuple(V.span(*range(1, d + 1)) for d in t.D))


def invariants(H: IsotropicFlag, W: WeightFlag) -> PositionInvariant:
    """Dimensions of how each ``H_i`` meets the three graded pieces of W."""
    V = SymplecticSpace(H.g, H.p)
    if not V.is_isotropic(H.spaces[-1]):
        raise ValueError("flag is not isotropic")
    p = H.p
    m, a, e = [], [], []
    for Hi in H.spaces:
        c1 = dim_meet(Hi, W.W1, p)
        c2 = dim_meet(Hi, W.W2, p)
        m.append(c1)
        a.append(c2 - c1)
        e.append(len(Hi) - c2)
    return PositionInvariant(W.r, tuple(m), tuple(a), tuple(e))


# --------------------------------------------------------------------------
# the group GSp_2g(F_p)


def transvection(g: int, v: Sequence[int], p: int) -> tuple[tuple[int, ...], ...]:
    """x -> x + omega(x, v) v."""
    J = form_matrix(g)
    n = 2 * g
    Jv = [sum(J[i][j] * v[j] for j in range(n)) for i in range(n)]
    return tuple(tuple((int(i == j) + v[i] * Jv[j]) % p for j in range(n)) for i in range(n))


def primitive_root(p: int) -> int:
    for c in range(1, p):
        if all(pow(c, (p - 1) // q, p) != 1 for q in _prime_factors(p - 1)):
            return c
    raise ValueError(p)


def _prime_factors(n: int) -> list[int]:
    out, q = [], 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


def gsp_generators(g: int, p: int) -> list[tuple[tuple[int, ...], ...]]:
    """Transvections along ``x_i`` and ``x_i + x_j`` plus a multiplier generator.

    Generation of the whole group is checked against the group order in the
    test suite.
    """
    n = 2 * g
    gens = []
    for i in range(n):
        v = [int(k == i) for k in range(n)]
        gens.append(transvection(g, v, p))
    for i, j in combinations(range(n), 2):
        v = [int(k in (i, j)) for k in range(n)]
        gens.append(transvection(g, v, p))
    if p > 2:
        c = primitive_root(p)
        gens.append(tuple(tuple((c if i == j and i < g else int(i == j)) for j in range(n))
                          for i in range(n)))
    return gens


def gsp_order(g: int, p: int) -> int:
    order = p ** (g * g) * (p - 1)
    for i in range(1, g + 1):
        order *= p ** (2 * i) - 1
    return order


def _encode(arr: np.ndarray, p: int) -> np.ndarray:
    flat = arr.reshape(arr.shape[0], -1).astype(np.int64)
    weights = p ** np.arange(flat.shape[1], dtype=np.int64)
    return flat @ weights


def enumerate_group(gens: Sequence[Sequence[Sequence[int]]], p: int, limit: int = 5_000_000) -> np.ndarray:
    """All elements of the group generated by ``gens`` (breadth-first closure)."""
    G = np.array(gens, dtype=np.int64) % p
    n = G.shape[1]
    if (p ** (n * n)) >= 2 ** 62:
        raise ValueError("matrix too large to encode")
    ident = np.eye(n, dtype=np.int64)[None]
    elements = [ident]
    seen = np.sort(_encode(ident, p))
    frontier = ident
    total = 1
    while len(frontier):
        cand = (frontier[:, None, :, :] @ G[None, :, :, :]) % p
        cand = cand.reshape(-1, n, n)
        keys = _encode(cand, p)
        keys, idx = np.unique(keys, return_index=True)
        fresh = ~np.isin(keys, seen, assume_unique=True)
        frontier = cand[idx[fresh]]
        if len(frontier):
            seen = np.union1d(seen, keys[fresh])
            elements.append(frontier)
            total += len(frontier)
            if total > limit:
                raise RuntimeError("group enumeration exceeded limit")
    return np.concatenate(elements)


# --------------------------------------------------------------------------
# flag orbits and positions


def apply_flag(gamma, H: Flag, p: int) -> Flag:
    return tuple(apply(gamma, Hi, p) for Hi in H)


def flag_orbit(start: Flag, gens, p: int) -> set[Flag]:
    """Orbit of a flag under the group generated by ``gens``."""
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for H in frontier:
            for gam in gens:
                K = apply_flag(gam, H, p)
                if K not in seen:
                    seen.add(K)
                    nxt.append(K)
        frontier = nxt
    return seen


@lru_cache(maxsize=None)
def all_isotropic_flags(g: int, p: int, D: tuple[int, ...]) -> frozenset[Flag]:
    t = ParahoricType(g, D)
    return frozenset(flag_orbit(std_flag(t, p).spaces, gsp_generators(g, p), p))


def isotropic_flag_count(g: int, p: int, D: Sequence[int]) -> int:
    """Number of isotropic flags of type D (closed form).

    ``H_{i+1}/H_i`` is an isotropic subspace of the symplectic space
    ``H_i^perp / H_i``; isotropic k-spaces in dimension 2G are counted via
    ordered bases divided by ``|GL_k(F_p)|``.
    """
    total = 1
    prev = 0
    for d in D:
        G, k = g - prev, d - prev
        ordered = 1
        for j in range(k):
            ordered *= p ** (2 * G - j) - p ** j
        gl = 1
        for j in range(k):
            gl *= p ** k - p ** j
        total *= ordered // gl
        prev = d
    return total


def admissible_triples(g: int, r: int, D: Sequence[int]) -> set[PositionInvariant]:
    """Candidate positions from necessary conditions alone.

    Non-decreasing sequences with ``m_i + a_i + e_i = d_i``,
    ``m_s + e_s <= r`` (the multiplicative and etale parts pair perfectly, so
    an isotropic H meets them in orthogonal pieces) and ``a_s <= g - r``
    (the abelian part of an isotropic space is isotropic).
    """
    s = len(D)
    out = set()

    def rec(i, m, a, e):
        if i == s:
            out.add(PositionInvariant(r, tuple(m), tuple(a), tuple(e)))
            return
        d = D[i]
        m0 = m[-1] if m else 0
        a0 = a[-1] if a else 0
        e0 = e[-1] if e else 0
        for mi in range(m0, r + 1):
            for ei in range(e0, r + 1):
                ai = d - mi - ei
                if ai < a0 or ai > g - r or mi + ei > r:
                    continue
                rec(i + 1, m + [mi], a + [ai], e + [ei])

    rec(0, [], [], [])
    return out


class PositionMismatch(RuntimeError):
    pass


def positions_by_orbit(g: int, p: int, r: int, D: tuple[int, ...]) -> set[PositionInvariant]:
    W = WeightFlag.standard(g, p, r)
    return {invariants(IsotropicFlag(p, g, H), W) for H in all_isotropic_flags(g, p, tuple(D))}


def enumerate_positions(g: int, p: int, r: int, t: ParahoricType) -> list[PositionInvariant]:
    """The set of relative positions for torus rank r, computed two ways.

    (i) invariants of every flag in the GSp-orbit of the standard flag;
    (ii) the admissible triples of ``admissible_triples``. The two must agree.
    """
    if t.g != g:
        raise ValueError("type genus mismatch")
    orbit = positions_by_orbit(g, p, r, t.D)
    direct = admissible_triples(g, r, t.D)
    if orbit != direct:
        raise PositionMismatch(
            f"g={g} p={p} r={r} D={t.D}: orbit-only {sorted(orbit - direct)}, "
            f"direct-only {sorted(direct - orbit)}")
    return sorted(orbit)


def parabolic_elements(group: np.ndarray, r: int) -> np.ndarray:
    """Elements stabilising ``W_1 = span(x_1..x_r)`` (hence also W_1^perp)."""
    if r == 0:
        return group
    return group[np.all(group[:, r:, :r] == 0, axis=(1, 2))]


def parabolic_orbits(g: int, p: int, r: int, D: tuple[int, ...],
                     group: np.ndarray | None = None) -> list[set[Flag]]:
    """Orbits of the parabolic of the standard weight flag on isotropic flags."""
    if group is None:
        group = enumerate_group(gsp_generators(g, p), p)
    P = parabolic_elements(group, r)
    flags = set(all_isotropic_flags(g, p, tuple(D)))
    orbits = []
    while flags:
        H = min(flags)
        basis = _adapted_basis(H, p)
        Bm = np.array(basis, dtype=np.int64).T
        imgs = (P @ Bm) % p
        dims = [len(Hi) for Hi in H]
        orbit = set()
        for M in imgs:
            cols = M.T.tolist()
            orbit.add(tuple(rref(cols[:d], p) for d in dims))
        orbits.append(orbit)
        flags -= orbit
    return orbits


def _adapted_basis(H: Flag, p: int) -> list[Vec]:
    basis: list[Vec] = []
    for Hi in H:
        for v in Hi:
            if len(rref(basis + [v], p)) > len(basis):
                basis.append(v)
    return basis


# --------------------------------------------------------------------------
# Weyl group count


def _compose(u: tuple[int, ...], v: tuple[int, ...]) -> tuple[int, ...]:
    """(u o v)(i) for signed permutations written as images of 1..g."""
    out = []
    for x in v:
        y = u[abs(x) - 1]
        out.append(y if x > 0 else -y)
    return tuple(out)


def _levi_weyl_generators(g: int, blocks: Sequence[tuple[int, int]], sp_start: int):
    """Generators of S_{b1} x ... x W(C_{g - sp_start + 1}).

    ``blocks`` are 1-based inclusive index ranges of the GL factors; the
    symplectic factor acts on ``sp_start..g``.
    """
    ident = list(range(1, g + 1))
    gens = []

    def swap(i):
        w = ident.copy()
        w[i - 1], w[i] = w[i], w[i - 1]
        return tuple(w)

    for lo, hi in blocks:
        for i in range(lo, hi):
            gens.append(swap(i))
    if sp_start <= g:
        for i in range(sp_start, g):
            gens.append(swap(i))
        w = ident.copy()
        w[g - 1] = -g
        gens.append(tuple(w))
    return gens


def bruhat_count(g: int, r: int, t: ParahoricType) -> int:
    """Number of double cosets W_L \\ W(C_g) / W_{L_D}."""
    if g > 5:
        raise ValueError("desk-scale limit: g <= 5")
    left = _levi_weyl_generators(g, [(1, r)] if r else [], r + 1)
    D = (0,) + tuple(t.D)
    right = _levi_weyl_generators(g, [(D[i] + 1, D[i + 1]) for i in range(len(D) - 1)], D[-1] + 1)
    from itertools import permutations, product
    remaining = {tuple(s * x for s, x in zip(signs, perm))
                 for perm in permutations(range(1, g + 1))
                 for signs in product((1, -1), repeat=g)}
    count = 0
    while remaining:
        w = remaining.pop()
        count += 1
        frontier = [w]
        while frontier:
            nxt = []
            for x in frontier:
                for a in left:
                    y = _compose(a, x)
                    if y in remaining:
                        remaining.discard(y)
                        nxt.append(y)
                for b in right:
                    y = _compose(x, b)
                    if y in remaining:
                        remaining.discard(y)
                        nxt.append(y)
            frontier = nxt
    return count


# --------------------------------------------------------------------------
# integral chain and its stabiliser


@dataclass(frozen=True)
class ParahoricChain:
    """Lattices ``V^0 = Z^{2g}`` and ``V^1 .. V^{2s}``, each diagonal in x_j.

    ``scales[i][j]`` is 1 or p: ``V^i`` is the span of ``scales[i][j] x_j``.
    """

    g: int
    p: int
    D: tuple[int, ...]
    scales: tuple[tuple[int, ...], ...]

    def basis(self, i: int) -> IntMatrix:
        """Basis of V^i as the columns of a diagonal matrix."""
        return IntMatrix.diag(self.scales[i])

    def __len__(self) -> int:
        return len(self.scales)


def parahoric_chain(t: ParahoricType, p: int) -> ParahoricChain:
    n = 2 * t.g
    s = t.s
    scales = [tuple([1] * n)]
    for d in t.D:
        scales.append(tuple(1 if j < d else p for j in range(n)))
    for i in range(1, s + 1):
        top = n - t.D[s - i]
        scales.append(tuple(1 if j < top else p for j in range(n)))
    return ParahoricChain(t.g, p, tuple(t.D), tuple(scales))


def lattice_stable(gamma: Sequence[Sequence[int]], basis_cols: IntMatrix) -> bool:
    """True iff gamma maps the column lattice into itself."""
    B = basis_cols.to_rows()
    n = basis_cols.rows
    gens = [[B[i][j] for i in range(n)] for j in range(basis_cols.cols)]
    H = hnf_rows(gens, n)
    for v in gens:
        w = [sum(gamma[i][k] * v[k] for k in range(n)) for i in range(n)]
        if solve_in_lattice(H, w) is None:
            return False
    return True


def integral_multiplier(gamma: Sequence[Sequence[int]], g: int) -> int | None:
    J = form_matrix(g)
    n = 2 * g
    JG = [[sum(J[i][k] * gamma[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    M = [[sum(gamma[k][i] * JG[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    nu = M[0][n - 1]
    if nu not in (1, -1):
        return None
    if any(M[i][j] != nu * J[i][j] for i in range(n) for j in range(n)):
        return None
    return nu


def in_gamma0(gamma: Sequence[Sequence[int]], t: ParahoricType, p: int) -> bool:
    """Membership in the stabiliser of the chain inside GSp_2g(Z)."""
    gamma = [list(r) for r in gamma]
    if integral_multiplier(gamma, t.g) is None:
        return False
    chain = parahoric_chain(t, p)
    return all(lattice_stable(gamma, chain.basis(i)) for i in range(1, len(chain)))
