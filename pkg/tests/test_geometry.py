import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyimage.errors import EmptyInterior, FacetTooThin, NoInteriorDirection
from polyimage.geometry import (AffineMap, LinearForm, Polyhedron,
                                boundary_fiber_faces, cone_is_zero,
                                cone_relint_direction, face_descriptor,
                                face_relint_point, feasible, halfspaces,
                                is_layer, lineality_decomposition,
                                minimal_presentation, place_bounded_position,
                                place_recession_interior, project,
                                recession_cone, sample_point)


def test_minimal_presentation_drops_redundant():
    p = halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], 1))
    m = minimal_presentation(p)
    assert len(m.constraints) == 2
    assert m.minimal


def test_minimal_presentation_keeps_minimal():
    p = halfspaces(2, ([1, 0], 0), ([0, 1], 0))
    assert len(minimal_presentation(p).constraints) == 2


def test_minimal_presentation_dedups():
    p = halfspaces(1, ([1], 0), ([1], 0))
    assert len(minimal_presentation(p).constraints) == 1


def test_minimal_presentation_empty_interior():
    p = halfspaces(1, ([1], 0), ([-1], -1))
    with pytest.raises(EmptyInterior):
        minimal_presentation(p)


def test_minimal_presentation_point_set_preserved(wedge, wedge_min):
    rng = random.Random(0)
    for _ in range(500):
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        assert wedge.contains(x) == wedge_min.contains(x)


def test_minimal_presentation_idempotent(wedge_min):
    again = minimal_presentation(wedge_min)
    assert {h.canonical_key() for h in again.constraints} == \
        {h.canonical_key() for h in wedge_min.constraints}


def test_recession_cone_bounded(unit_box):
    assert cone_is_zero(recession_cone(unit_box))


def test_recession_cone_of_cone():
    quad = halfspaces(2, ([-1, 0], 0), ([0, -1], 0))
    cone = recession_cone(quad)
    assert cone.contains((F(-1), F(-2)))
    assert not cone.contains((F(1), F(0)))


def test_recession_cone_drops_constants():
    p = halfspaces(2, ([1, 0], 0), ([0, 1], 0), ([1, 1], -3))
    cone = recession_cone(p)
    assert all(h.constant == 0 for h in cone.constraints)
    assert cone.contains((F(1), F(1)))


def test_recession_cone_base_point_independent(wedge_min):
    # v in the cone iff q + t v stays inside for sampled base points and t
    cone = recession_cone(wedge_min)
    rng = random.Random(1)
    base_points = []
    while len(base_points) < 10:
        x = (F(rng.randint(-320, 320), 16), F(rng.randint(-320, 320), 16))
        if wedge_min.contains(x):
            base_points.append(x)
    for v in [(F(0), F(-1)), (F(1), F(-1)), (F(-2), F(-3)), (F(1), F(0)), (F(0), F(1))]:
        inside = cone.contains(v)
        for q in base_points:
            for t in (1, 10, 100):
                pt = tuple(qi + t * vi for qi, vi in zip(q, v))
                if inside:
                    assert wedge_min.contains(pt)
        if not inside:
            assert any(
                not wedge_min.contains(tuple(qi + 100 * vi for qi, vi in zip(q, v)))
                for q in base_points)


def test_is_layer():
    assert is_layer(halfspaces(2, ([1, 0], 0), ([-1, 0], 1)))
    assert not is_layer(halfspaces(2, ([-1, 0], 0), ([0, -1], 0)))
    assert not is_layer(halfspaces(2, ([-1, 0], 0)))


@pytest.mark.parametrize("a", [F(1, 2), F(1), F(7, 3)])
def test_is_layer_affine_images(a):
    rng = random.Random(int(a * 6))
    base = halfspaces(3, ([1, 0, 0], a), ([-1, 0, 0], a))
    for _ in range(20):
        while True:
            mat = tuple(tuple(F(rng.randint(-3, 3)) for _ in range(3)) for _ in range(3))
            amap = AffineMap(mat, tuple(F(rng.randint(-5, 5)) for _ in range(3)))
            if amap.determinant() != 0:
                break
        assert is_layer(amap.image_polyhedron(base))


def test_lineality_decomposition_halfplane():
    q, witness = lineality_decomposition(halfspaces(2, ([-1, -1], 0)))
    assert q.dim == 1
    assert len(q.constraints) == 1
    # factor is a ray, and the witness maps the polyhedron onto factor x R
    img = witness.image_polyhedron(halfspaces(2, ([-1, -1], 0)))
    assert all(h.gradient[1] == 0 for h in img.constraints)


def test_lineality_decomposition_nondegenerate(wedge_min):
    q, witness = lineality_decomposition(wedge_min)
    assert q.dim == 2
    assert witness.is_identity()


def test_lineality_decomposition_universe():
    q, _ = lineality_decomposition(Polyhedron(2, ()))
    assert q.dim == 0


def test_project_wedge(wedge_min):
    proj = project(wedge_min)
    assert proj.dim == 1 and not proj.constraints


def test_project_box_with_floor():
    p = halfspaces(2, ([1, 0], 0), ([-1, 0], 1), ([0, -1], 0))
    proj = minimal_presentation(project(p))
    keys = sorted(h.canonical_key() for h in proj.constraints)
    assert keys == [(-1, 1), (1, 0)]


def test_project_halfplane():
    proj = project(halfspaces(2, ([0, -1], 0)))
    assert not proj.constraints


def test_project_lift_consistency(unit_box):
    # interior points of the projection lift to interior fiber points
    p = minimal_presentation(unit_box)
    proj = minimal_presentation(project(p))
    rng = random.Random(7)
    found = 0
    while found < 100:
        x = (F(rng.randint(-32, 32), 16),)
        if not proj.contains(x, strict=True):
            continue
        found += 1
        fiber = [LinearForm((h.gradient[-1],), h(x + (F(0),)))
                 for h in p.constraints]
        assert sample_point(1, gt=fiber) is not None


def test_boundary_fiber_faces():
    p = minimal_presentation(halfspaces(2, ([1, 0], 0), ([-1, 0], 1), ([0, -1], 0)))
    faces = boundary_fiber_faces(p)
    assert len(faces) == 2
    assert all(f.vertical and f.affine_dim == 1 for f in faces)


def test_boundary_fiber_faces_empty(wedge_min):
    assert boundary_fiber_faces(wedge_min) == []


def test_boundary_fiber_faces_halfplane_floor():
    p = minimal_presentation(halfspaces(2, ([-1, 0], 0), ([0, -1], 0)))
    faces = boundary_fiber_faces(p)
    assert len(faces) == 1


def test_place_bounded_position(rotated_square):
    fd = face_descriptor(rotated_square, frozenset({0}))
    amap = place_bounded_position(rotated_square, fd)
    img = amap.image_polyhedron(rotated_square)
    cone = recession_cone(img)
    up = (F(0), F(1))
    dn = (F(0), F(-1))
    assert not cone.contains(up) and not cone.contains(dn)
    pt = face_relint_point(rotated_square, frozenset({0}))
    assert amap(pt)[0] == 0
    inner = sample_point(2, gt=rotated_square.constraints)
    assert amap(inner)[0] < 0


def test_place_bounded_position_thin_facet(wedge_min):
    with pytest.raises(FacetTooThin):
        place_bounded_position(wedge_min, face_descriptor(wedge_min, frozenset({0})))


def test_place_bounded_position_3d():
    k3 = minimal_presentation(halfspaces(
        3, ([1, 0, 0], 0), ([-1, 0, 0], 1), ([0, 1, 0], 0), ([0, -1, 0], 1),
        ([0, 0, -1], 0)))
    amap = place_bounded_position(k3, face_descriptor(k3, frozenset({4})))
    img = amap.image_polyhedron(k3)
    cone = recession_cone(img)
    assert not cone.contains((F(0), F(0), F(1)))
    assert not cone.contains((F(0), F(0), F(-1)))
    # placed facet lands in {x_(n-1) = 0}
    pt = face_relint_point(k3, frozenset({4}))
    assert amap(pt)[1] == 0


def test_place_recession_interior():
    quad = halfspaces(2, ([-1, 0], 0), ([0, -1], 0))
    amap = place_recession_interior(quad)
    img = amap.image_polyhedron(quad)
    down = (F(0), F(-1))
    assert all(h.vec(down) > 0 for h in img.constraints)


def test_place_recession_interior_identity_candidate(wedge_min):
    amap = place_recession_interior(wedge_min)
    img = amap.image_polyhedron(wedge_min)
    assert all(h.vec((F(0), F(-1))) > 0 for h in img.constraints)


def test_place_recession_interior_empty_interior_cone():
    # a single ray cone in 3D: recession cone has empty interior
    p = halfspaces(3, ([1, 0, 0], 0), ([-1, 0, 0], 0), ([0, 1, 0], 0),
                   ([0, -1, 0], 0), ([0, 0, -1], 0))
    # the gradients force v = (0, 0, t), t <= 0: no strict solution
    with pytest.raises(NoInteriorDirection):
        place_recession_interior(p)


def test_cone_relint_direction(wedge_min):
    v, zset = cone_relint_direction(wedge_min)
    assert zset == frozenset()
    assert all(h.vec(v) > 0 for h in recession_cone(wedge_min).constraints)


def test_affine_roundtrip():
    rng = random.Random(3)
    for _ in range(50):
        while True:
            mat = tuple(tuple(F(rng.randint(-4, 4), rng.randint(1, 3))
                              for _ in range(3)) for _ in range(3))
            amap = AffineMap(mat, tuple(F(rng.randint(-5, 5)) for _ in range(3)))
            if amap.determinant() != 0:
                break
        inv = amap.inverse()
        x = tuple(F(rng.randint(-50, 50), 8) for _ in range(3))
        assert inv(amap(x)) == x


def test_positional_postconditions_on_samples(rotated_square, wedge_min):
    # applying each returned map to exact samples keeps the claimed position
    rng = random.Random(9)
    amap = place_bounded_position(rotated_square, face_descriptor(rotated_square, frozenset({0})))
    count = 0
    while count < 200:
        x = (F(rng.randint(-64, 64), 16), F(rng.randint(-64, 64), 16))
        if not rotated_square.contains(x):
            continue
        count += 1
        assert amap(x)[0] <= 0


@given(st.lists(st.integers(-6, 6), min_size=2, max_size=2),
       st.integers(-6, 6))
@settings(max_examples=60, deadline=None)
def test_feasible_matches_sample(grad, const):
    if all(g == 0 for g in grad):
        return
    form = LinearForm(tuple(F(g) for g in grad), F(const))
    feas = feasible(2, gt=[form])
    assert feas == (sample_point(2, gt=[form]) is not None)


def test_polyhedron_json_roundtrip(wedge_min):
    again = Polyhedron.from_json(wedge_min.to_json())
    assert again.dim == wedge_min.dim
    assert [h.to_json() for h in again.constraints] == \
        [h.to_json() for h in wedge_min.constraints]
