from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parahoric.symplectic_flags import (
    IsotropicFlag, ParahoricType, PositionInvariant, SymplecticSpace, WeightFlag,
    admissible_triples, all_isotropic_flags, apply_flag, bruhat_count,
    enumerate_group, enumerate_positions, gsp_generators, gsp_order, in_gamma0,
    invariants, isotropic_flag_count, parabolic_elements, parabolic_orbits,
    parahoric_chain, positions_by_orbit, std_flag,
)


def all_types(g):
    for k in range(1, g + 1):
        for D in combinations(range(1, g + 1), k):
            yield ParahoricType(g, D)


def test_form_matrix():
    V = SymplecticSpace(2, 3)
    J = np.array(V.J)
    assert (J.T == -J).all()
    assert round(abs(np.linalg.det(J))) == 1
    assert J[0, 3] == 1 and J[1, 2] == 1 and J[3, 0] == -1


def test_std_flag():
    V = SymplecticSpace(2, 2)
    assert std_flag(ParahoricType(2, (1,)), 2).spaces == (V.span(1),)
    assert std_flag(ParahoricType(2, (1, 2)), 2).spaces == (V.span(1), V.span(1, 2))
    assert std_flag(ParahoricType(1, (1,)), 3).spaces == (SymplecticSpace(1, 3).span(1),)


def test_parahoric_type_validation():
    for bad in [(), (2, 1), (0,), (3,)]:
        with pytest.raises(ValueError):
            ParahoricType(2, bad)


def test_invariants_examples():
    V = SymplecticSpace(1, 2)
    W = WeightFlag.standard(1, 2, 1)
    assert invariants(IsotropicFlag(2, 1, (V.span(1),)), W) == PositionInvariant(1, (1,), (0,), (0,))
    assert invariants(IsotropicFlag(2, 1, (V.span(2),)), W) == PositionInvariant(1, (0,), (0,), (1,))
    W0 = WeightFlag.standard(2, 3, 0)
    H = std_flag(ParahoricType(2, (1, 2)), 3)
    assert invariants(H, W0) == PositionInvariant(0, (0, 0), (1, 2), (0, 0))


def test_invariants_reject_non_isotropic():
    V = SymplecticSpace(2, 2)
    H = IsotropicFlag(2, 2, (V.span(1, 4),))
    with pytest.raises(ValueError):
        invariants(H, WeightFlag.standard(2, 2, 1))


def test_position_json_roundtrip():
    w = PositionInvariant(1, (0, 1), (1, 1), (0, 0))
    assert PositionInvariant.from_json(w.to_json()) == w
    assert w.to_json() == {"r": 1, "m": [0, 1], "a": [1, 1], "e": [0, 0]}


@pytest.mark.parametrize("g,p", [(1, 2), (1, 3), (2, 2), (2, 3)])
def test_generators_generate_gsp(g, p):
    assert len(enumerate_group(gsp_generators(g, p), p)) == gsp_order(g, p)


@pytest.mark.parametrize("g,p", [(1, 2), (2, 2), (2, 3), (3, 2)])
def test_flag_counts(g, p):
    for t in all_types(g):
        assert len(all_isotropic_flags(g, p, t.D)) == isotropic_flag_count(g, p, t.D)


def test_enumerate_positions_g1():
    t = ParahoricType(1, (1,))
    assert enumerate_positions(1, 2, 1, t) == [PositionInvariant(1, (0,), (0,), (1,)),
                                               PositionInvariant(1, (1,), (0,), (0,))]
    assert enumerate_positions(1, 2, 0, t) == [PositionInvariant(0, (0,), (1,), (0,))]


@pytest.mark.parametrize("g,p", [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2)])
def test_positions_two_ways_and_bruhat(g, p):
    for t in all_types(g):
        for r in range(g + 1):
            W = enumerate_positions(g, p, r, t)
            assert len(W) == bruhat_count(g, r, t)
            for w in W:
                w.validate(g, t.D)


def test_p_independence():
    for t in all_types(2):
        for r in range(3):
            assert positions_by_orbit(2, 2, r, t.D) == positions_by_orbit(2, 3, r, t.D)


def test_bruhat_examples():
    t = ParahoricType(1, (1,))
    assert bruhat_count(1, 1, t) == 2 and bruhat_count(1, 0, t) == 1
    t2 = ParahoricType(2, (2,))
    assert bruhat_count(2, 1, t2) == len(enumerate_positions(2, 2, 1, t2))


def test_bruhat_g4_matches_direct_triples():
    # beyond brute force: compare Weyl count with the decided constraint set
    for t in all_types(4):
        for r in range(5):
            assert bruhat_count(4, r, t) == len(admissible_triples(4, r, t.D))


@pytest.mark.parametrize("g,p", [(1, 2), (1, 3), (2, 2), (2, 3)])
def test_parabolic_orbits_injective(g, p):
    G = enumerate_group(gsp_generators(g, p), p)
    for t in all_types(g):
        for r in range(g + 1):
            W = WeightFlag.standard(g, p, r)
            labels = []
            for orbit in parabolic_orbits(g, p, r, t.D, G):
                inv = {invariants(IsotropicFlag(p, g, H), W) for H in orbit}
                assert len(inv) == 1
                labels.append(inv.pop())
            assert len(set(labels)) == len(labels) == bruhat_count(g, r, t)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_invariance_under_parabolic(data):
    g, p = 2, 3
    G = _group_2_3()
    r = data.draw(st.integers(0, 2))
    P = parabolic_elements(G, r)
    t = data.draw(st.sampled_from(list(all_types(2))))
    flags = sorted(all_isotropic_flags(g, p, t.D))
    H = data.draw(st.sampled_from(flags))
    gam = P[data.draw(st.integers(0, len(P) - 1))].tolist()
    W = WeightFlag.standard(g, p, r)
    assert invariants(IsotropicFlag(p, g, apply_flag(gam, H, p)), W) == \
        invariants(IsotropicFlag(p, g, H), W)


_cache = {}


def _group_2_3():
    if "G" not in _cache:
        _cache["G"] = enumerate_group(gsp_generators(2, 3), 3)
    return _cache["G"]


def test_similitude_scaling_does_not_change_invariants():
    g, p = 2, 3
    scale = [[2 if i == j and i < g else int(i == j) for j in range(4)] for i in range(4)]
    assert SymplecticSpace(g, p).is_similitude(scale) == 2
    for r in range(3):
        W = WeightFlag.standard(g, p, r)
        for H in all_isotropic_flags(g, p, (1, 2)):
            assert invariants(IsotropicFlag(p, g, apply_flag(scale, H, p)), W) == \
                invariants(IsotropicFlag(p, g, H), W)


def test_parahoric_chain_examples():
    c = parahoric_chain(ParahoricType(1, (1,)), 3)
    assert c.scales[1] == (1, 3)
    c = parahoric_chain(ParahoricType(2, (2,)), 2)
    assert c.scales[1] == (1, 1, 2, 2)


def test_parahoric_chain_nesting():
    for g in (1, 2, 3):
        for t in all_types(g):
            for p in (2, 3, 5):
                c = parahoric_chain(t, p)
                for sc in c.scales:
                    assert set(sc) <= {1, p}
                # V^1 in ... in V^s in V^{s+1} in ... in V^{2s}
                seq = c.scales[1:]
                for a, b in zip(seq, seq[1:]):
                    assert all(x >= y for x, y in zip(a, b))
                # self-dual up to scale: V^{2s+1-i} is the dual of V^i times p
                s = t.s
                for i in range(1, s + 1):
                    dual = tuple(p // x for x in reversed(c.scales[i]))
                    assert c.scales[2 * s + 1 - i] == dual


def test_in_gamma0_examples():
    t = ParahoricType(1, (1,))
    assert in_gamma0([[1, 0], [0, 1]], t, 3)
    assert in_gamma0([[1, 1], [0, 1]], t, 3)
    assert not in_gamma0([[0, -1], [1, 0]], t, 3)
    assert in_gamma0([[1, 0], [3, 1]], t, 3)
    assert not in_gamma0([[2, 0], [0, 1]], t, 3)


def test_in_gamma0_generators_reduce_into_parabolic():
    # integral elements of Gamma_0 reduce mod p into the stabiliser of the std flag
    t = ParahoricType(2, (1, 2))
    p = 2
    gam = [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, -1], [0, 0, 0, 1]]
    assert in_gamma0(gam, t, p)
    H = std_flag(t, p).spaces
    assert apply_flag(gam, H, p) == H
