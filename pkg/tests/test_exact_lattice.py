import itertools
import random
from math import prod

from hypothesis import given, settings, strategies as st

from parahoric.exact_lattice import (
    IntMatrix, LatticeDiagram, colimit, cokernel, det, elementary_divisors,
    is_smith_form, kernel, matmul, saturate, snf, square_limit, subgroup_meet,
    subgroup_order, FinAbGroup,
)


def M(rows, cols=None):
    return IntMatrix.from_rows(rows, cols)


def check_smith(A):
    s = snf(A)
    assert (s.U @ A @ s.V) == s.D
    assert abs(det(s.U.to_rows())) == 1 and abs(det(s.V.to_rows())) == 1
    assert (s.U @ s.U_inv) == IntMatrix.identity(A.rows)
    assert (s.V @ s.V_inv) == IntMatrix.identity(A.cols)
    assert is_smith_form(s.D)
    return s


def test_snf_identity():
    s = check_smith(IntMatrix.identity(3))
    assert s.D == IntMatrix.identity(3)


def test_snf_2x2():
    assert check_smith(M([[2, 4], [6, 8]])).diagonal == [2, 4]


def test_snf_zero():
    s = check_smith(IntMatrix.zeros(2, 3))
    assert s.D == IntMatrix.zeros(2, 3)


def test_snf_large_entries():
    A = M([[10**30, 3], [7, 10**25 + 1]])
    s = check_smith(A)
    assert prod(s.diagonal) == abs(det(A.to_rows()))


matrices = st.integers(1, 6).flatmap(
    lambda m: st.integers(1, 6).flatmap(
        lambda n: st.lists(st.lists(st.integers(-20, 20), min_size=n, max_size=n),
                           min_size=m, max_size=m)))


@settings(max_examples=500, deadline=None)
@given(matrices)
def test_snf_random(rows):
    A = M(rows)
    s = check_smith(A)
    # first divisor is the gcd of the entries
    from math import gcd
    from functools import reduce
    g = reduce(gcd, (abs(x) for r in rows for x in r), 0)
    assert (s.diagonal[0] if s.diagonal else 0) == g


@settings(max_examples=200, deadline=None)
@given(matrices, st.randoms(use_true_random=False))
def test_cokernel_unimodular_invariance(rows, rnd):
    A = M(rows)
    U = random_unimodular(A.rows, rnd)
    V = random_unimodular(A.cols, rnd)
    assert cokernel(U @ A @ V) == cokernel(A)


def random_unimodular(n, rnd):
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(3 * n):
        i, j = rnd.sample(range(n), 2) if n > 1 else (0, 0)
        if i == j:
            U[i] = [-x for x in U[i]]
            continue
        q = rnd.randint(-3, 3)
        U[i] = [a + q * b for a, b in zip(U[i], U[j])]
    return M(U)


def test_kernel_examples():
    K = kernel(M([[1, 1]]))
    assert K.cols == 1 and sorted(K.column(0)) == [-1, 1]
    assert kernel(M([[2]])).cols == 0
    A = M([[1, 2, 3]])
    K = kernel(A)
    assert K.cols == 2
    assert (A @ K) == IntMatrix.zeros(1, 2)
    # saturated: the basis has trivial elementary divisors
    assert elementary_divisors(K.to_rows(), 2) == [1, 1]


def test_cokernel_examples():
    assert cokernel(IntMatrix.identity(3)) == FinAbGroup(())
    assert cokernel(M([[3]])) == FinAbGroup((3,))
    assert cokernel(M([[2, 4], [6, 8]])) == FinAbGroup((2, 4))
    assert cokernel(M([[1, 0]])).factors == ()
    assert cokernel(M([[2], [0]])) == FinAbGroup((2, 0))


def test_saturate_examples():
    s = saturate(M([[2, 0]]))
    assert s.basis.to_rows() == [[1, 0]] and s.index == 2
    s = saturate(M([[1, 1]]))
    assert s.basis.to_rows() == [[1, 1]] and s.index == 1
    s = saturate(M([[2, 2], [0, 4]]))
    assert s.index == 8 and abs(det(s.basis.to_rows())) == 1


def test_colimit_single_node():
    c = colimit(LatticeDiagram((3,)))
    assert c.group == FinAbGroup((0, 0, 0)) and c.is_free


def test_colimit_multiplication_edge():
    c = colimit(LatticeDiagram((1, 1), ((0, 1, M([[3]])),)))
    assert c.is_free and c.group.free_rank == 1
    src, tgt = c.node_maps
    assert src.to_rows()[0][0] == 3 * tgt.to_rows()[0][0]
    assert abs(tgt.to_rows()[0][0]) == 1


def test_colimit_torsion():
    # coequaliser of multiplication by 2 and 0
    c = colimit(LatticeDiagram((1, 1), ((0, 1, M([[2]])), (0, 1, M([[0]])))))
    assert c.group == FinAbGroup((2,))


def _agrees_mod(group, a, b):
    for f, x, y in zip(group.factors, a, b):
        if (f == 0 and x != y) or (f and (x - y) % f):
            return False
    return True


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_colimit_universal_property(rnd):
    nodes = tuple(rnd.randint(1, 3) for _ in range(rnd.randint(2, 4)))
    edges = []
    for _ in range(rnd.randint(1, 4)):
        s, t = rnd.sample(range(len(nodes)), 2)
        edges.append((s, t, M([[rnd.randint(-3, 3) for _ in range(nodes[s])]
                               for _ in range(nodes[t])], nodes[s])))
    d = LatticeDiagram(nodes, tuple(edges))
    c = colimit(d)
    for s, t, E in edges:
        lhs = c.node_maps[t] @ E
        rhs = c.node_maps[s]
        for j in range(nodes[s]):
            assert _agrees_mod(c.group, lhs.column(j), rhs.column(j))


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_colimit_duality_with_cokernel(rows):
    # coequaliser of f and 0 is coker f; a lone arrow just returns its target
    f = M(rows)
    zero = IntMatrix.zeros(f.rows, f.cols)
    c = colimit(LatticeDiagram((f.cols, f.rows), ((0, 1, f), (0, 1, zero))))
    assert c.group == cokernel(f)
    assert c.group.free_rank == f.rows - snf(f).rank
    assert colimit(LatticeDiagram((f.cols, f.rows), ((0, 1, f),))).group == FinAbGroup((0,) * f.rows)


# -- finite quotient limits


def closure(factors, gens):
    elems = {tuple([0] * len(factors))}
    frontier = list(elems)
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = tuple((a + b) % f for a, b, f in zip(x, g, factors))
                if y not in elems:
                    elems.add(y)
                    nxt.append(y)
        frontier = nxt
    return elems


def pair_count(factors, H1, H2, H, Hp):
    """|{(b1, b2) : b1 - b2 in H cap H'}| / |H1||H2| by enumeration."""
    meet = closure(factors, H) & closure(factors, Hp)
    B = list(itertools.product(*[range(f) for f in factors]))
    count = sum(1 for b1 in B for b2 in B
                if tuple((x - y) % f for x, y, f in zip(b1, b2, factors)) in meet)
    q = len(closure(factors, H1)) * len(closure(factors, H2))
    assert count % q == 0
    return count // q


def test_square_limit_cyclic():
    L = square_limit([4], [], [], [[2]], [[2]])
    assert L.group.order == 8 == pair_count([4], [], [], [[2]], [[2]])


def test_square_limit_trivial_subgroups_is_diagonal():
    L = square_limit([2, 6], [], [], [], [])
    assert L.group == FinAbGroup((2, 6))


def test_square_limit_klein():
    f = [2, 2]
    args = ([[1, 0]], [[0, 1]], [[1, 0], [0, 1]], [[1, 0], [0, 1]])
    assert square_limit(f, *args).group.order == 4 == pair_count(f, *args)


def test_square_limit_rejects_ill_defined_edges():
    import pytest
    with pytest.raises(ValueError):
        square_limit([4], [[1]], [], [[2]], [[2]])


def random_instance(rnd):
    while True:
        factors = [rnd.choice([2, 3, 4, 6, 8]) for _ in range(rnd.randint(1, 3))]
        if prod(factors) <= 256:
            break

    def rand_gens(k):
        return [[rnd.randrange(f) for f in factors] for _ in range(k)]

    H1, H2 = rand_gens(rnd.randint(0, 2)), rand_gens(rnd.randint(0, 2))
    H = H1 + H2 + rand_gens(rnd.randint(0, 2))
    Hp = H1 + H2 + rand_gens(rnd.randint(0, 2))
    return factors, H1, H2, H, Hp


def order_identity_holds(factors, H1, H2, H, Hp):
    L = square_limit(factors, H1, H2, H, Hp)
    B = prod(factors)
    meet12 = subgroup_order(factors, subgroup_meet(factors, H1, H2))
    meetHH = subgroup_order(factors, subgroup_meet(factors, H, Hp))
    sum12 = subgroup_order(factors, H1 + H2)
    predicted = (B // meet12) * (meetHH // sum12)
    return L.group.order == predicted == pair_count(factors, H1, H2, H, Hp)


def test_order_identity_random():
    rnd = random.Random(1472)
    for _ in range(200):
        inst = random_instance(rnd)
        assert order_identity_holds(*inst), inst


def test_subgroup_meet_against_enumeration():
    rnd = random.Random(5)
    for _ in range(50):
        factors, H1, H2, _, _ = random_instance(rnd)
        meet = closure(factors, subgroup_meet(factors, H1, H2))
        assert meet == closure(factors, H1) & closure(factors, H2)


def test_matmul_shapes():
    assert matmul([[1, 2]], [[3], [4]]) == [[11]]
