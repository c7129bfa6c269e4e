import json
import random
from dataclasses import replace

import pytest

from parahoric.char_lattices import character_lattice
from parahoric.conical_complex import (
    UNVERIFIED, IsotropicSummand, check_admissible, check_smooth_complex, chain_images,
    enumerate_isotropic_orbits, gamma0_generators, induce_decomposition, induced_action,
    levi_for_x, ord_mult, ord_mult_strata, parahoric_orbits_on_subspaces, position_mod_p,
    position_of, refine_complex, restrictions_compatible, strata_poset,
    strata_poset_without_level,
)
from parahoric.polyhedral import Decomposition, RationalCone, principal_decomposition
from parahoric.symplectic_flags import (
    ParahoricType, WeightFlag, enumerate_group, gsp_generators, in_gamma0, invariants, std_flag,
)

TYPES = {1: [(1,)], 2: [(1,), (2,), (1, 2)]}


def induced(g, D, p):
    return induce_decomposition(principal_decomposition(g), g, p, ParahoricType(g, D))


def words(gens, n, rng, length=4):
    size = len(gens[0])
    for _ in range(n):
        M = [[int(i == j) for j in range(size)] for i in range(size)]
        for _ in range(length):
            G = rng.choice(gens)
            M = [[sum(M[i][k] * G[k][j] for k in range(size)) for j in range(size)] for i in range(size)]
        yield M


# -- summands


def test_summand_validation():
    with pytest.raises(ValueError):
        IsotropicSummand.from_rows(1, [[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        IsotropicSummand.from_rows(2, [[2, 0, 0, 0]])
    V = IsotropicSummand.from_rows(2, [[0, 1, 0, 0], [1, 1, 0, 0]])
    assert V.basis == ((1, 0, 0, 0), (0, 1, 0, 0))
    assert len(V.perp()) == 2 and set(V.basis) <= set(V.perp())


def test_summand_quotient_coordinates():
    V = IsotropicSummand.coordinate(1, [1])
    assert V.x_coords((0, 1)) == (1,)
    assert V.x_coords((1, 0)) == (0,)


def test_positions_genus_one():
    t = ParahoricType(1, (1,))
    for p in (2, 3, 5):
        assert position_of(IsotropicSummand.coordinate(1, [1]), t, p).label() == "(1,0,0)"
        assert position_of(IsotropicSummand.coordinate(1, [2]), t, p).label() == "(0,0,1)"


def test_position_rank_zero():
    for D in TYPES[2]:
        t = ParahoricType(2, D)
        w = position_of(IsotropicSummand.from_rows(2, []), t, 3)
        assert w.a == D and not any(w.m) and not any(w.e)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_position_agrees_mod_p_under_transport(p):
    rng = random.Random(p)
    for g in (1, 2):
        for D in TYPES[g]:
            t = ParahoricType(g, D)
            gens = gamma0_generators(t, p)
            assert all(in_gamma0(G, t, p) for G in gens)
            for r in range(1, g + 1):
                for rep in enumerate_isotropic_orbits(g, p, t, r):
                    for gam in words(gens, 5, rng):
                        V = rep.summand.transform(gam)
                        assert position_of(V, t, p) == rep.w == position_mod_p(V, t, p)
                        assert ord_mult(V, t, p) == ord_mult(rep.summand, t, p)


def test_orbit_examples():
    t = ParahoricType(1, (1,))
    assert len(enumerate_isotropic_orbits(1, 3, t, 1)) == 2
    assert len(enumerate_isotropic_orbits(1, 3, t, 0)) == 1
    orbs = parahoric_orbits_on_subspaces(2, 2, ParahoricType(2, (2,)), 1)
    assert sum(len(o) for o in orbs) == 15
    assert len(orbs) == len(enumerate_isotropic_orbits(2, 2, ParahoricType(2, (2,)), 1))


@pytest.mark.parametrize("g,p", [(1, 2), (1, 3), (1, 5), (2, 2), (2, 3)])
def test_orbits_match_exhaustive_enumeration(g, p):
    G = enumerate_group(gsp_generators(g, p), p)
    for D in TYPES[g]:
        t = ParahoricType(g, D)
        for r in range(g + 1):
            orbs = parahoric_orbits_on_subspaces(g, p, t, r, G)
            reps = enumerate_isotropic_orbits(g, p, t, r)
            assert len(orbs) == len(reps)
            seen = set()
            for orb in orbs:
                ws = {invariants(std_flag(t, p), WeightFlag.from_subspace(g, p, U)) for U in orb}
                assert len(ws) == 1
                seen |= ws
            assert seen == {rep.w for rep in reps}
            for rep in reps:
                assert all(len(img) == r for img in chain_images(rep.summand, t, p))


def test_genus_limit():
    with pytest.raises(ValueError, match="desk-scale"):
        enumerate_isotropic_orbits(3, 2, ParahoricType(3, (1,)), 1)


# -- ordinary-multiplicative predicate


def test_ord_mult_genus_one():
    t = ParahoricType(1, (1,))
    for p in (2, 3, 5):
        assert ord_mult(IsotropicSummand.coordinate(1, [1]), t, p)
        assert not ord_mult(IsotropicSummand.coordinate(1, [2]), t, p)
        assert not ord_mult(IsotropicSummand.from_rows(1, []), t, p)


def test_ord_mult_lagrangian_level():
    t = ParahoricType(2, (2,))
    H = std_flag(t, 2).spaces[-1]
    for rep in enumerate_isotropic_orbits(2, 2, t, 2):
        assert ord_mult(rep.summand, t, 2) == (rep.summand.reduce(2) == H)


# -- cells


@pytest.mark.parametrize("p", [2, 3])
def test_cell_structure_matches_character_lattice(p):
    for D in TYPES[2]:
        SF = induced(2, D, p)
        for cell in SF.cells:
            idx = character_lattice(cell.rep.w, p).index
            assert cell.structure.index_over_standard() == idx


@pytest.mark.parametrize("p", [2, 3, 5])
def test_cell_structure_invariant_under_level_group(p):
    for D in TYPES[2]:
        for cell in induced(2, D, p).cells:
            for A in cell.group.generators():
                assert cell.structure.transform(A).same_lattice(cell.structure)


def test_levi_lifts_lie_in_gamma0():
    for D in TYPES[2]:
        t = ParahoricType(2, D)
        for cell in induced(2, D, 3).cells_of_rank(2):
            for A in cell.group.generators():
                gam = levi_for_x(cell.rep, A)
                assert in_gamma0(gam, t, 3)
                assert induced_action(cell.rep, gam) == A


def test_induce_genus_one():
    SF = induced(1, (1,), 3)
    assert sorted(c.label for c in SF.cells) == ["(0,0,1)", "(1,0,0)"]
    for cell in SF.cells:
        assert [c.rays for c in cell.cones] == [(), ((1,),)]


def test_induce_rejections():
    t = ParahoricType(2, (1,))
    empty = Decomposition(3, (RationalCone(3, ()),), kind="principal", g=2)
    with pytest.raises(ValueError):
        induce_decomposition(empty, 2, 2, t)
    P = principal_decomposition(2)
    with pytest.raises(ValueError):
        induce_decomposition(replace(P, kind="finite"), 2, 2, t)
    with pytest.raises(ValueError):
        induce_decomposition(replace(P, kind="finite", generators=(((1, 1), (0, 1)),)), 2, 2, t)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_restriction_certificates(p):
    for D in TYPES[2]:
        SF = induced(2, D, p)
        assert SF.certificates and restrictions_compatible(SF)


# -- admissibility


def test_admissible_genus_one():
    rep = check_admissible(induced(1, (1,), 5))
    assert rep.ok and rep.marker == UNVERIFIED


def test_admissible_genus_two_p2():
    for D in TYPES[2]:
        rep = check_admissible(induced(2, D, 2), depth=2)
        assert rep.ok and rep.checked > 0 and rep.violations == ()


def test_admissible_detects_deleted_ray():
    SF = induced(2, (2,), 2)
    cell = SF.cells_of_rank(2)[0]
    top = next(c for c in cell.cones if c.dim == 3)
    broken = tuple(c for c in cell.cones if c != top) + (RationalCone(3, top.rays[:2] + ((5, 7, 11),)),)
    bad = replace(SF, cells=(replace(cell, cones=broken),) + SF.cells[1:])
    rep = check_admissible(bad)
    assert not rep.ok and rep.violations
    shrunk = tuple(c for c in cell.cones if c != top)
    rep = check_admissible(replace(SF, cells=(replace(cell, cones=shrunk),)))
    assert not rep.ok and any("dimension" in v for v in rep.violations)


# -- smoothness


def test_smooth_table_genus_one():
    rows = check_smooth_complex(induced(1, (1,), 3))
    assert rows and all(r.smooth_sw and r.smooth_sym2 for r in rows)


def test_smooth_table_genus_two_finding():
    rows = check_smooth_complex(induced(2, (2,), 2))
    witnesses = [r for r in rows if r.finding]
    assert witnesses
    assert {r.cell for r in witnesses} == {"(1,0,1)"}
    assert all(r.multiplicity_sw == 2 for r in witnesses)
    json.dumps([r.to_json() for r in rows])


@pytest.mark.parametrize("p", [2, 3])
def test_refined_complex_smooth(p):
    for D in TYPES[2]:
        R = refine_complex(induced(2, D, p))
        assert R.refined and all(r.smooth_sw for r in check_smooth_complex(R))


# -- strata


@pytest.mark.parametrize("p", [2, 3, 5])
def test_strata_genus_one(p):
    P = strata_poset(induced(1, (1,), p))
    assert len(P.nodes) == 3 and P.root == "A_{1,0}"
    assert sorted(n.w.label() for n in P.boundary()) == ["(0,0,1)", "(1,0,0)"]
    assert sorted(P.edges) == sorted((P.root, n.id) for n in P.boundary())
    assert [n.w.label() for n in ord_mult_strata(P)] == ["(1,0,0)"]


def _check_poset(P):
    dims = {n.id: n.dim for n in P.nodes}
    targets = {b for _, b in P.edges}
    assert [n.id for n in P.nodes if n.id not in targets] == [P.root]
    assert all(dims[a] < dims[b] for a, b in P.edges)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_strata_genus_two(p):
    base = strata_poset_without_level(2)
    for D in TYPES[2]:
        P = strata_poset(induced(2, D, p))
        _check_poset(P)
        assert len(P.nodes) >= len(base.nodes)
        assert not P.node(P.root).ord_mult


def test_strata_without_level():
    assert len(strata_poset_without_level(1).nodes) == 2
    P = strata_poset_without_level(2)
    assert [n.dim for n in P.nodes] == [0, 1, 2, 3]
    _check_poset(P)


def test_strata_emitters_deterministic():
    a = strata_poset(induced(2, (1, 2), 2))
    b = strata_poset(induced(2, (1, 2), 2))
    assert a.to_dot() == b.to_dot()
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    assert a.to_dot().startswith("digraph strata {")


def test_ord_mult_genus_two_only_lagrangian_cell():
    P = strata_poset(induced(2, (2,), 2))
    flagged = {(n.r, n.w.label()) for n in ord_mult_strata(P)}
    assert {w for r, w in flagged if r == 2} == {"(2,0,0)"}
