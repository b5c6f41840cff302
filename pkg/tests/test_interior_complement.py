import random
from fractions import Fraction as F

import pytest

from polyimage.errors import (BadPosition, CompactBaseRequired,
                              LayerEncountered, OriginNotInterior,
                              UniversePolyhedron)
from polyimage.geometry import (LinearForm, Polyhedron, halfspaces,
                                kernel_basis, minimal_presentation)
from polyimage.geometry import _hyperplane_point
from polyimage.interior_complement import (build_F, build_F0, build_QGP,
                                           synthesize_interior_complement)
from polyimage.polyalg import MapChain, Poly


def test_base_ray_left():
    chain, trace = synthesize_interior_complement(halfspaces(1, ([-1], 0)))
    assert trace.kind == "base-n1"
    assert len(chain.steps) == 1
    assert chain.chain_eval((F(3),)) == (F(9),)


def test_base_ray_right():
    chain, _ = synthesize_interior_complement(halfspaces(1, ([1], -2)))
    values = [chain.chain_eval((F(t),))[0] for t in (-3, 0, 1, 5)]
    assert all(v <= 2 for v in values)


def test_layer_raises():
    with pytest.raises(LayerEncountered):
        synthesize_interior_complement(halfspaces(2, ([1, 0], 1), ([-1, 0], 1)))


def test_universe_raises():
    with pytest.raises(UniversePolyhedron):
        synthesize_interior_complement(Polyhedron(2, ()))


def test_halfplane_product():
    hp = halfspaces(2, ([0, -1], 0))
    chain, trace = synthesize_interior_complement(hp)
    assert trace.kind == "degenerate-product"
    assert trace.children[0].kind == "base-n1"
    rng = random.Random(0)
    for _ in range(200):
        x = (F(rng.randint(-400, 400), 8), F(rng.randint(-400, 400), 8))
        assert chain.chain_eval(x)[1] >= 0


def test_wedge_case1_trace(wedge):
    chain, trace = synthesize_interior_complement(wedge)
    assert trace.kind == "case1"
    assert (trace.m, trace.r) == (2, 0)
    kinds = [trace.kind]
    node = trace
    while node.children:
        node = node.children[0]
        kinds.append(node.kind)
    assert kinds == ["case1", "degenerate-product", "base-n1"]
    assert trace.affine is not None


def test_wedge_containment_exact(wedge, wedge_min):
    chain, _ = synthesize_interior_complement(wedge)
    rng = random.Random(1)
    for _ in range(2000):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        img = chain.chain_eval(x)
        assert not wedge_min.contains(img, strict=True)


def test_case2_compact_base_error():
    prism = halfspaces(3, ([1, 0, 0], 0), ([-1, 0, 0], 1), ([0, 1, 0], 0),
                       ([0, -1, 0], 1), ([0, 0, -1], 0))
    with pytest.raises(CompactBaseRequired) as err:
        synthesize_interior_complement(prism)
    assert err.value.node is not None
    assert err.value.node.dim == 2
    assert "case2" in err.value.payload["path"]


def test_case2_with_provider():
    # supplying a bounded-base hook lets the product branch continue
    prism = halfspaces(3, ([1, 0, 0], 0), ([-1, 0, 0], 1), ([0, 1, 0], 0),
                       ([0, -1, 0], 1), ([0, 0, -1], 0))
    # a deliberately wrong but well-typed chain: identity on R^2
    provider_chain = MapChain(2, [])

    def provider(node):
        return provider_chain if node.dim == 2 else None

    chain, trace = synthesize_interior_complement(prism, provider)
    assert trace.kind == "case2"
    assert chain.chain_eval((F(1), F(1), F(1)))  # evaluates without error


def test_halfstrip_layer_node():
    halfstrip = halfspaces(2, ([1, 0], 0), ([-1, 0], 1), ([0, -1], 0))
    with pytest.raises(LayerEncountered) as err:
        synthesize_interior_complement(halfstrip)
    assert err.value.payload["path"] == ("case2",)
    assert err.value.node.dim == 2


def test_build_QGP_shapes(notched_wedge):
    from polyimage.geometry import cone_relint_direction
    from polyimage.interior_complement import _base_position_map
    polys = build_QGP(notched_wedge)
    assert polys.m == 3 and polys.r == 1
    assert polys.P == Poly.constant(2, 1) - polys.Q * polys.G * polys.G
    # Q has the vertical coefficient one and the stated x' parts
    assert polys.Q.terms[(0, 1)] == 1


def test_build_QGP_position_checks():
    # no base facet on {x_n = 0}
    with pytest.raises(BadPosition):
        build_QGP(halfspaces(2, ([1, -1], 1), ([-1, -1], 1)))
    # origin not interior to the base facet
    with pytest.raises(BadPosition):
        build_QGP(halfspaces(2, ([0, -1], 0), ([1, -1], 0)))
    # upward recession direction
    with pytest.raises(BadPosition):
        build_QGP(halfspaces(2, ([0, -1], 0), ([1, 1], 1)))


def test_halfspace_QGP_convention():
    # a single base facet: empty sum and empty products
    polys = build_QGP(halfspaces(2, ([0, -1], 0)))
    assert polys.G == Poly.constant(2, 1)
    x1, x2 = Poly.variable(2, 0), Poly.variable(2, 1)
    assert polys.Q == x2 - x1 * x1 - 1
    assert polys.P == Poly.constant(2, 1) - polys.Q
    assert polys.Q((F(0), F(1))) == 0 and polys.P((F(0), F(1))) == 1


def test_F_identity_on_nonbase_hyperplanes(wedge_min):
    from polyimage.geometry import cone_relint_direction
    from polyimage.interior_complement import _base_position_map
    v, _ = cone_relint_direction(wedge_min)
    amap = _base_position_map(wedge_min, 0, v)
    kp = amap.image_polyhedron(wedge_min)
    polys = build_QGP(kp)
    fmap = build_F(polys)
    for i, h in enumerate(kp.constraints):
        basis = kernel_basis([h.gradient], 2)[0]
        p0 = _hyperplane_point(h)
        for t in range(-10, 11):
            pt = tuple(p0[j] + F(t, 2) * basis[j] for j in range(2))
            if i == polys.base_index:
                assert fmap.apply(pt)[1] == 0
            else:
                assert fmap.apply(pt) == pt


def test_F2_odd_degree_on_vertical_lines(notched_wedge):
    polys = build_QGP(notched_wedge)
    f2 = build_F(polys).components[-1]
    rng = random.Random(5)
    checked = 0
    while checked < 100:
        y = F(rng.randint(-160, 160), 8)
        univ = f2.partial({0: y})
        if univ.is_zero():
            continue
        checked += 1
        assert univ.degree() % 2 == 1


def test_F0_examples():
    pb = halfspaces(1, ([1], 1), ([-1], 1))
    h = Poly.from_linear(LinearForm((F(1),), F(1))) * \
        Poly.from_linear(LinearForm((F(-1),), F(1)))
    f0 = build_F0(pb, h)
    assert f0.apply((F(0), F(7))) == (F(0), F(7))
    assert f0.apply((F(2), F(-1))) == (F(20), F(-1))
    assert f0.apply((F(1), F(5))) == (F(1), F(5))


def test_F0_origin_check():
    pb = halfspaces(1, ([1], 0), ([-1], 1))  # [0, 1]: origin on the boundary
    with pytest.raises(OriginNotInterior):
        build_F0(pb, Poly.variable(1, 0))


def test_F0_lower_slices_invariant():
    pb = halfspaces(1, ([1], 1), ([-1], 1))
    h = Poly.from_linear(LinearForm((F(1),), F(1))) * \
        Poly.from_linear(LinearForm((F(-1),), F(1)))
    f0 = build_F0(pb, h)
    rng = random.Random(6)
    for _ in range(300):
        t = F(rng.randint(-400, 400), 16)
        lam = F(rng.randint(-400, 0), 16)
        if -1 <= t <= 1:
            continue
        img = f0.apply((t, lam))
        assert img[1] == lam
        assert img[0] <= -1 or img[0] >= 1


def test_wedge_lem0_real_root(wedge_min):
    # for sampled y the fiber polynomial of the peel has a root above the
    # parabola shift, found by sign change and bisection
    from polyimage.geometry import cone_relint_direction
    from polyimage.interior_complement import _base_position_map
    v, _ = cone_relint_direction(wedge_min)
    amap = _base_position_map(wedge_min, 0, v)
    kp = amap.image_polyhedron(wedge_min)
    polys = build_QGP(kp)
    rng = random.Random(10)
    tol = F(1, 2 ** 40)
    for _ in range(100):
        y = F(rng.randint(-160, 160), 8)
        qy = polys.Q.partial({0: y})
        z0 = -qy((F(0),))
        py = polys.P.partial({0: y})
        assert py((z0,)) == 1
        hi = z0 + 1
        while py((hi,)) > 0:
            hi = z0 + (hi - z0) * 2
        lo = z0
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if py((mid,)) > 0:
                lo = mid
            else:
                hi = mid
        z1 = (lo + hi) / 2
        assert z1 > z0
        assert polys.Q((y, z1)) > 0
