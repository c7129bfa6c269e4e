import itertools
import random
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from parahoric.char_lattices import character_lattice
from parahoric.exact_lattice import primitive
from parahoric.polyhedral import (
    Decomposition, IntegralStructure, RationalCone, SubdivisionBudgetExceeded,
    bounded_points, divisor_of_character, dual_cone, dual_of_generators, faces,
    hilbert_basis, in_monoid, is_principal_cone, is_psd, is_smooth, locate,
    minimal_containing_cone, monoid_hilbert_basis, multiplicity, principal_decomposition,
    quotient_lattice, refine_to_smooth, refines, same_support, square, strata_monoids,
    sym2_vector, transform_form, vec_to_form,
)
from parahoric.symplectic_flags import ParahoricType, enumerate_positions

PRINCIPAL = RationalCone.from_generators([square((1, 0)), square((0, 1)), square((1, 1))], 3)


def sw_structures(p, g=2):
    out = []
    for D in [(d,) for d in range(1, g + 1)] + ([tuple(range(1, g + 1))] if g > 1 else []):
        for w in enumerate_positions(g, p, g, ParahoricType(g, D)):
            C = character_lattice(w, p)
            out.append((D, w, IntegralStructure.from_rows(C.structure_basis())))
    return out


# -- dual cones


def test_dual_of_zero_cone_is_everything():
    d = dual_cone(RationalCone.zero(3))
    assert d.rays == () and len(d.lineality) == 3


def test_dual_genus_one():
    d = dual_cone(RationalCone(1, ((1,),)))
    assert d.rays == ((1,),) and d.lineality == ()


def double_dual(cone):
    d = dual_of_generators(cone.rays, cone.ambient)
    gens = list(d.rays) + list(d.lineality) + [tuple(-x for x in l) for l in d.lineality]
    dd = dual_of_generators(gens, cone.ambient)
    assert dd.lineality == ()
    return tuple(sorted(dd.rays))


def test_principal_double_dual():
    assert double_dual(PRINCIPAL) == PRINCIPAL.rays
    assert len(dual_cone(PRINCIPAL).rays) == 3


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4).flatmap(lambda n: st.lists(
    st.tuples(st.integers(1, 5), *[st.integers(-5, 5)] * (n - 1)), min_size=1, max_size=6)))
def test_double_dual_random(gens):
    # a positive first coordinate keeps the cone pointed
    cone = RationalCone.from_generators(gens)
    assert cone.is_pointed
    assert double_dual(cone) == cone.rays


def test_redundant_generators_dropped():
    c = RationalCone.from_generators([(1, 0), (1, 1), (1, 2), (2, 2)])
    assert c.rays == ((1, 0), (1, 2))


def test_non_pointed_flagged():
    assert not RationalCone.from_generators([(1, 0), (-1, 0), (0, 1)]).is_pointed


# -- faces


def test_faces_ray():
    assert len(faces(RationalCone(1, ((1,),))).faces) == 2


def test_faces_simplicial_2d():
    fl = faces(RationalCone.from_generators([(1, 0), (1, 2)]))
    assert [f.dim for f in fl.faces] == [0, 1, 1, 2]


def test_faces_principal():
    fl = faces(PRINCIPAL)
    assert [len(fl.by_dim(d)) for d in range(4)] == [1, 3, 3, 1]
    assert len(fl.covers) == 3 + 6 + 3


# -- quotient lattices


def test_quotient_zero_cone():
    assert quotient_lattice(RationalCone.zero(3)).rank == 0


def test_quotient_interior_ray():
    q = quotient_lattice(RationalCone.from_generators([(1, 0, 1)]))
    assert q.rank == 2 and q.radical == ()


def test_quotient_rank_one():
    q = quotient_lattice(RationalCone.from_generators([square((1, 0))]))
    assert q.rank == 1 and q.radical == ((0, 1),)
    assert q.push_forward(square((1, 0))) == (1,)


def test_quotient_rejects_non_psd():
    with pytest.raises(ValueError):
        quotient_lattice(RationalCone.from_generators([(1, 0, -1)]))


@pytest.mark.parametrize("u", [(1, 0), (1, 1), (2, 3), (1, -2)])
def test_quotient_idempotent(u):
    cone = RationalCone.from_generators([square(u)])
    q = quotient_lattice(cone)
    pushed = RationalCone.from_generators([q.push_forward(r) for r in cone.rays])
    assert quotient_lattice(pushed).radical == ()


# -- Hilbert bases


def test_hilbert_textbook():
    assert monoid_hilbert_basis([(1, 0), (1, 2)]).elements == ((1, 0), (1, 1), (1, 2))
    # as the dual of <(0, 1), (2, -1)>
    sigma = RationalCone.from_generators([(0, 1), (2, -1)])
    assert hilbert_basis(sigma).elements == ((1, 0), (1, 1), (1, 2))


def test_hilbert_smooth_cone_is_dual_basis():
    hb = hilbert_basis(PRINCIPAL)
    assert set(hb.elements) == set(dual_cone(PRINCIPAL).rays)


def test_hilbert_genus_one():
    assert hilbert_basis(RationalCone(1, ((1,),))).elements == ((1,),)


def test_hilbert_with_units():
    hb = hilbert_basis(RationalCone.from_generators([square((1, 0))]))
    assert len(hb.lineality) == 2 and len(hb.elements) == 1


def hilbert_suite():
    """The g <= 2 cones, each with the structures it is tested against."""
    suite = [(RationalCone(1, ((1,),)), IntegralStructure.standard(1))]
    structures = [IntegralStructure.standard(3)] + [S for p in (2, 3) for _, _, S in sw_structures(p)]
    for f in faces(PRINCIPAL).faces:
        for S in structures:
            suite.append((f.cone(3), S))
    suite.append((RationalCone.from_generators([(0, 1), (2, -1)]), IntegralStructure.standard(2)))
    return suite


def check_hilbert(cone, S, bound=8):
    hb = hilbert_basis(cone, S)
    n = cone.ambient
    facets = hb.facets
    pts = bounded_points(facets, n, bound)
    units = [x for x in pts if all(f == 0 for f in (sum(a * b for a, b in zip(c, x)) for c in facets))]
    for x in pts:
        if not in_monoid(x, hb.elements, facets):
            return False, ("incomplete", x)
    nonunit = [x for x in pts if x not in set(units)]
    for h in hb.elements:
        for y in nonunit:
            z = [a - b for a, b in zip(h, y)]
            if y != h and all(sum(a * b for a, b in zip(c, z)) >= 0 for c in facets) \
                    and any(sum(a * b for a, b in zip(c, z)) for c in facets):
                return False, ("reducible", h, y)
    return True, None


def test_hilbert_complete_and_minimal_small():
    for cone, S in hilbert_suite()[:12]:
        ok, why = check_hilbert(cone, S, bound=5)
        assert ok, (cone, why)


# -- strata


def test_strata_open_and_closed():
    st_ = strata_monoids(PRINCIPAL)
    assert st_[0].label == "open" and st_[0].rank == 3
    assert st_[-1].label == "closed" and st_[-1].rank == 0


def test_strata_ray():
    ray = [s for s in strata_monoids(PRINCIPAL) if s.face.rays == (square((1, 0)),)]
    assert ray[0].rank == 2


# -- divisors


def test_divisor_examples():
    assert divisor_of_character(PRINCIPAL, (0, 0, 0)) == (0, 0, 0)
    assert divisor_of_character(RationalCone(1, ((1,),)), sym2_vector((1,))) == (1,)
    # rays are sorted: x2^2, x1^2, (x1+x2)^2
    assert divisor_of_character(PRINCIPAL, sym2_vector((1, -1))) == (1, 1, 0)


def test_divisor_effective_with_expected_support():
    for x in itertools.product(range(-3, 4), repeat=2):
        if gcd(*x) != 1:
            continue
        div = divisor_of_character(PRINCIPAL, sym2_vector(x))
        for r, c in zip(PRINCIPAL.rays, div):
            b = vec_to_form(r)
            val = sum(b[k][l] * x[k] * x[l] for k in range(2) for l in range(2))
            assert c >= 0 and (c != 0) == (val != 0)


# -- smoothness


def test_rays_always_smooth():
    for _, _, S in sw_structures(2):
        assert is_smooth(RationalCone.from_generators([(3, 1, 1)]), S)


def test_a1_cone_not_smooth():
    c = RationalCone.from_generators([(1, 0), (1, 2)])
    assert not is_smooth(c) and multiplicity(c) == 2


def test_principal_smooth_for_sym2():
    assert is_smooth(PRINCIPAL)


def test_smoothness_is_lattice_property():
    rnd = random.Random(3)
    for _, _, S in sw_structures(2):
        for _ in range(5):
            U = random_unimodular(3, rnd)
            S2 = IntegralStructure.from_rows(
                [[sum(U[i][k] * S.basis[k][j] for k in range(3)) for j in range(3)] for i in range(3)])
            assert S2.same_lattice(S)
            for f in faces(PRINCIPAL).faces:
                assert is_smooth(f.cone(3), S) == is_smooth(f.cone(3), S2)


def random_unimodular(n, rnd):
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(6):
        i, j = rnd.sample(range(n), 2)
        q = rnd.randint(-2, 2)
        U[i] = [a + q * b for a, b in zip(U[i], U[j])]
    return U


def test_structure_invariant_under_level_group():
    # S^w for w = (1,0,1) at p = 2 is preserved by the principal congruence subgroup
    (S,) = [S for D, w, S in sw_structures(2) if D == (2,) and w.label() == "(1,0,1)"]
    for A in ([[1, 2], [0, 1]], [[1, 0], [2, 1]], [[-1, 0], [0, 1]], [[3, 2], [4, 3]]):
        assert S.transform(A).same_lattice(S)


# -- decompositions and refinement


def test_principal_membership():
    assert is_principal_cone(PRINCIPAL, 2)
    for A in ([[0, 1], [1, 0]], [[1, 1], [0, 1]], [[2, 1], [1, 1]]):
        assert is_principal_cone(PRINCIPAL.transform(A), 2)
    assert not is_principal_cone(RationalCone.from_generators([square((1, 0)), square((1, 2))]), 2)


def test_minimal_containing_cone():
    P = principal_decomposition(2)
    assert minimal_containing_cone((0, 0, 0), P).dim == 0
    assert minimal_containing_cone((1, 0, 1), P).rays == (square((0, 1)), square((1, 0)))
    assert minimal_containing_cone((2, 1, 2), P).dim == 3
    assert minimal_containing_cone((5,), principal_decomposition(1)).rays == ((1,),)
    with pytest.raises(ValueError):
        minimal_containing_cone((1, -1, 1), P)


def test_refine_smooth_input_unchanged():
    P = principal_decomposition(2)
    R = refine_to_smooth(P)
    assert R.steps == () and {c.rays for c in R.decomposition.cones} == {c.rays for c in P.cones}


def test_refine_a1():
    F = Decomposition.from_maximal(2, [RationalCone.from_generators([(1, 0), (1, 2)])])
    R = refine_to_smooth(F)
    assert [s.points for s in R.steps] == [((1, 1),)]
    assert len(R.decomposition.maximal) == 2
    assert all(is_smooth(c) for c in R.decomposition.cones)
    assert refines(R.decomposition, F) and same_support(R.decomposition, F)


def test_refine_principal_for_every_structure():
    P = principal_decomposition(2)
    for p in (2, 3):
        for D, w, S in sw_structures(p):
            R = refine_to_smooth(P, S)
            assert all(is_smooth(c, S) for c in R.decomposition.cones), (D, w)
            assert refines(R.decomposition, P) and same_support(R.decomposition, P)
            assert all(s.canonical for s in R.steps)


def test_refine_budget():
    F = Decomposition.from_maximal(2, [RationalCone.from_generators([(1, 0), (1, 7)])])
    with pytest.raises(SubdivisionBudgetExceeded):
        refine_to_smooth(F, budget=0)


def test_locate_and_transform():
    assert transform_form(square((1, 0)), [[1, 1], [0, 1]]) == square((1, 1))
    assert len(locate((2, 1, 2), principal_decomposition(2))) == 1
    assert is_psd((1, 1, 1)) and not is_psd((1, 2, 1))
    assert primitive([2, 4]) == (1, 2)
