import random
from fractions import Fraction as F

import pytest

from polyimage.complement import (build_TK, choose_epsilon, compute_delta,
                                  synthesize_complement)
from polyimage.errors import LayerEncountered, UniversePolyhedron
from polyimage.geometry import (Polyhedron, halfspaces, kernel_basis,
                                minimal_presentation)
from polyimage.geometry import _hyperplane_point
from polyimage.skyscraper import build_sep_poly_bounded, build_sep_poly_unbounded


def test_compute_delta_quadrant():
    quad = minimal_presentation(halfspaces(2, ([-1, 0], 0), ([0, -1], 0)))
    cert = compute_delta(quad)
    assert cert.family == () and cert.delta_sq is None


def test_compute_delta_triangle_corner():
    tri = minimal_presentation(halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], -3)))
    cert = compute_delta(tri)
    assert cert.delta_sq == F(9, 2)
    assert ((0, 1), 2) in cert.family


def test_compute_delta_strip_with_floor():
    strip = minimal_presentation(halfspaces(2, ([1, 0], 0), ([-1, 0], 1), ([0, -1], 0)))
    cert = compute_delta(strip)
    assert cert.family == () and cert.delta_sq is None


def test_choose_epsilon():
    tri = minimal_presentation(halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], -3)))
    ladder = choose_epsilon(compute_delta(tri), tri)
    assert ladder.epsilon == 1  # needs eps^2 < 9/8
    assert len(ladder.stages) == 4
    final = ladder.stages[-1].minimal
    assert {h.canonical_key() for h in final.constraints} == \
        {h.canonical_key() for h in tri.constraints}
    assert ladder.epsilon ** 2 < F(9, 2) / 4 * 1


def test_choose_epsilon_empty_family(wedge_min):
    ladder = choose_epsilon(compute_delta(wedge_min), wedge_min)
    assert ladder.epsilon == 1
    # enlargement strictly contains the original
    assert all(h.constant == orig.constant + 1
               for h, orig in zip(ladder.k0.constraints, wedge_min.constraints))


def test_choose_epsilon_small_delta():
    thin = minimal_presentation(
        halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], F(-1, 8))))
    cert = compute_delta(thin)
    ladder = choose_epsilon(cert, thin)
    min_g = min(sum(g * g for g in h.gradient) for h in thin.constraints)
    assert ladder.epsilon ** 2 < cert.delta_sq / 4 * min_g


def test_ladder_membership(wedge_min):
    ladder = choose_epsilon(compute_delta(wedge_min), wedge_min)
    # G_0 is the open enlargement, G_m is K itself
    inside_k = (F(0), F(-1))
    edge_of_k = (F(0), F(0))
    outside_all = (F(0), F(5))
    assert ladder.in_G(0, inside_k) and ladder.in_G(2, inside_k)
    assert ladder.in_G(0, edge_of_k) and ladder.in_G(2, edge_of_k)
    assert not ladder.in_G(2, outside_all)
    between = (F(0), F(1, 2))  # in the enlargement band, outside K
    assert ladder.in_G(0, between) and not ladder.in_G(2, between)


def test_build_TK_fixes_hyperplanes(rotated_square):
    sep = build_sep_poly_bounded(rotated_square)
    t_k = build_TK(rotated_square, sep)
    # identity on every constraint hyperplane and on {x_(n-1) = 0}
    for h in rotated_square.constraints:
        basis = kernel_basis([h.gradient], 2)[0]
        p0 = _hyperplane_point(h)
        for t in range(-8, 9):
            pt = tuple(p0[j] + F(t, 2) * basis[j] for j in range(2))
            assert t_k.apply(pt) == pt
    for t in range(-8, 9):
        pt = (F(0), F(t, 2))
        assert t_k.apply(pt) == pt


def test_build_TK_odd_degree(rotated_square):
    sep = build_sep_poly_bounded(rotated_square)
    t_k = build_TK(rotated_square, sep)
    rng = random.Random(4)
    checked = 0
    while checked < 100:
        a = F(rng.randint(-80, 80), 8)
        if a == 0:
            continue
        univ = t_k.components[-1].partial({0: a})
        if univ == __import__("polyimage.polyalg", fromlist=["Poly"]).Poly.variable(1, 0):
            continue
        checked += 1
        assert univ.degree() % 2 == 1
        assert univ.degree() > 1


def test_halfspace_map():
    hs = halfspaces(2, ([-1, 0], 0))
    chain, trace = synthesize_complement(hs)
    assert trace.kind == "halfspace"
    assert chain.chain_eval((F(0), F(0))) == (F(1), F(0))
    rng = random.Random(5)
    for _ in range(1000):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        assert chain.chain_eval(x)[0] > 0


def test_halfspace_map_3d():
    hs = halfspaces(3, ([0, -1, 0], 0))
    chain, _ = synthesize_complement(hs)
    rng = random.Random(6)
    for _ in range(300):
        x = tuple(F(rng.randint(-320, 320), 16) for _ in range(3))
        img = chain.chain_eval(x)
        assert img[1] > 0


def test_layer_and_universe():
    with pytest.raises(LayerEncountered):
        synthesize_complement(halfspaces(2, ([1, 0], 1), ([-1, 0], 1)))
    with pytest.raises(UniversePolyhedron):
        synthesize_complement(Polyhedron(2, ()))
    with pytest.raises(ValueError):
        synthesize_complement(halfspaces(1, ([1], 0)))


def test_wedge_pipeline_structure(wedge):
    chain, trace = synthesize_complement(wedge)
    assert trace.kind == "complement-ladder"
    assert trace.m == 2
    info = trace.info
    assert info["delta"]["delta_sq"] == "inf"
    assert info["ladder"]["epsilon"] == "1"
    assert len(info["stages"]) == 2
    for stage in info["stages"]:
        assert stage["placement"] == "hyperplane"
        assert stage["bounded_position"] is False
        assert stage["residual_faces"] == []
    assert trace.children[0].kind == "case1"


def test_wedge_complement_containment(wedge, wedge_min):
    chain, _ = synthesize_complement(wedge)
    rng = random.Random(7)
    for _ in range(2000):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        img = chain.chain_eval(x)
        assert not wedge_min.contains(img)


def test_stage_maps_keep_target_complement(wedge, wedge_min):
    # points already outside a later stage set stay outside under its map
    from polyimage.complement import _stage_chain
    ladder = choose_epsilon(compute_delta(wedge_min), wedge_min)
    steps, metas, info = _stage_chain(ladder, 1)
    from polyimage.polyalg import MapChain
    stage = MapChain(2, [s for s in steps], None)
    rng = random.Random(8)
    escapes = 0
    for _ in range(2000):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        if ladder.in_G(2, x):
            continue
        img = stage.chain_eval(x)
        if ladder.in_G(2, img):
            escapes += 1
    assert escapes == 0


def test_triangle_corner_pipeline():
    # non-degenerate fixture with a bounded-position stage and a nonempty
    # delta family: two facets meet at a vertex cut by the third
    tri = halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], -3))
    chain, trace = synthesize_complement(tri)
    tmin = minimal_presentation(tri)
    rng = random.Random(9)
    for _ in range(800):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        img = chain.chain_eval(x)
        assert not tmin.contains(img)
