"""Synthesis of map chains whose image is R^n minus the interior of K.

The construction runs by double induction on (dimension, facet count).  A
non-degenerate unbounded polyhedron is repositioned so a chosen facet lies in
{x_n = 0} with the origin in its relative interior, K below, and a relative
interior direction of the recession cone pointing straight down.  One facet is
then peeled off: the map F built from

    Q = x_n - |x'|^2 - 1 - sum (h0_i^2 + 1)/2     (non-vertical facets)
    G = (prod vertical h_j)^2 * (prod non-vertical h_i)
    P = 1 - Q G^2
    F = ( x' ((P-1)^2 + P^2),  x_n P^2 )

sends the complement-of-interior of the peeled polyhedron onto that of K.
When every other facet is vertical the peeled polyhedron is a product
(bounded base) x R and an intermediate map F0 = ((1 - x_n h^2) x', x_n) first
reshapes the complement; the product base is bounded, which this package does
not construct (it is a pluggable hook), so that branch surfaces
CompactBaseRequired, and two-dimensional product nodes are layers and surface
LayerEncountered.

Chains store the repositionings explicitly (A, F, A^-1) instead of expanding,
keeping coefficients small; the synthesis trace records every decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .errors import (BadPosition, CompactBaseRequired, LayerEncountered,
                     OriginNotInterior, UniversePolyhedron)
from .geometry import (AffineMap, LinearForm, Polyhedron, cone_is_zero,
                       cone_relint_direction, face_relint_point, feasible,
                       is_layer, kernel_basis, lineality_basis,
                       lineality_decomposition, minimal_presentation,
                       recession_cone)
from .polyalg import MapChain, Poly, PolyMap, extend_chain

CompactProvider = Optional[Callable[[Polyhedron], Optional[MapChain]]]


@dataclass(frozen=True)
class InteriorStepPolys:
    """The peeling polynomials of one induction step, in positioned coordinates."""

    Q: Poly
    G: Poly
    P: Poly
    r: int
    m: int
    base_index: int
    vertical: tuple[LinearForm, ...]       # vertical facet forms in x'
    nonvertical0: tuple[LinearForm, ...]   # x'-parts h0_i of the other facets


@dataclass
class TraceNode:
    """Audit trail of the synthesis recursion."""

    kind: str
    dim: int
    m: Optional[int] = None
    r: Optional[int] = None
    facet: Optional[int] = None
    affine: Optional[AffineMap] = None
    relative_interior_position: bool = False
    children: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "dim": self.dim}
        if self.m is not None:
            obj["m"] = self.m
        if self.r is not None:
            obj["r"] = self.r
        if self.facet is not None:
            obj["facet"] = self.facet
        if self.affine is not None:
            obj["affine"] = self.affine.to_json()
        if self.relative_interior_position:
            obj["relative_interior_position"] = True
        if self.info:
            obj["info"] = {k: v for k, v in self.info.items()}
        if self.children:
            obj["children"] = [c.to_json() for c in self.children]
        return obj


def _primitive(form: LinearForm) -> LinearForm:
    ints = form.canonical_key()
    return LinearForm(tuple(Fraction(v) for v in ints[:-1]), Fraction(ints[-1]))


def build_QGP(k: Polyhedron) -> InteriorStepPolys:
    """The peeling polynomials for a polyhedron in base position.

    Position requirements (checked exactly): one constraint is a positive
    multiple of -x_n (the base facet, containing the origin in its relative
    interior), every x_n coefficient is <= 0 (straight down is a recession
    direction), and all other constraints are strictly positive at 0.
    """
    n = k.dim
    base_index = None
    for i, h in enumerate(k.constraints):
        if all(g == 0 for g in h.gradient[:-1]) and h.gradient[-1] < 0 and h.constant == 0:
            if base_index is not None:
                raise BadPosition("two base facets", node=k)
            base_index = i
    if base_index is None:
        raise BadPosition("no facet on {x_n = 0} with K below", node=k)
    origin = tuple(Fraction(0) for _ in range(n))
    vertical: list[LinearForm] = []
    nonvertical0: list[LinearForm] = []
    nonvertical_full: list[Poly] = []
    for i, h in enumerate(k.constraints):
        if i == base_index:
            continue
        cn = h.gradient[-1]
        if cn > 0:
            raise BadPosition("-e_n is not a recession direction", node=k)
        if h(origin) <= 0:
            raise BadPosition("origin is not interior to the base facet", node=k)
        if cn == 0:
            vertical.append(_primitive(LinearForm(h.gradient[:-1], h.constant)))
        else:
            scaled = h.scale(Fraction(-1) / cn)  # h = h0(x') - x_n
            nonvertical0.append(LinearForm(scaled.gradient[:-1], scaled.constant))
            nonvertical_full.append(Poly.from_linear(
                LinearForm(scaled.gradient[:-1] + (Fraction(-1),), scaled.constant)))
    r, m = len(vertical), len(k.constraints)

    xn = Poly.variable(n, n - 1)
    q = xn - Poly.constant(n, 1)
    for i in range(n - 1):
        xi = Poly.variable(n, i)
        q = q - xi * xi
    half = Fraction(1, 2)
    for h0 in nonvertical0:
        h0p = Poly.from_linear(h0).lift(n)
        q = q - half * (h0p * h0p + Poly.constant(n, 1))

    g = Poly.constant(n, 1)
    for w in vertical:
        wp = Poly.from_linear(w).lift(n)
        g = g * wp
    g = g * g
    for hp in nonvertical_full:
        g = g * hp

    p = Poly.constant(n, 1) - q * g * g
    return InteriorStepPolys(q, g, p, r, m, base_index, tuple(vertical), tuple(nonvertical0))


def build_F(polys: InteriorStepPolys) -> PolyMap:
    """The peeling map F = (x' ((P-1)^2 + P^2), x_n P^2)."""
    n = polys.P.dim
    P = polys.P
    one = Poly.constant(n, 1)
    factor = (P - one) * (P - one) + P * P
    comps = [Poly.variable(n, i) * factor for i in range(n - 1)]
    comps.append(Poly.variable(n, n - 1) * P * P)
    return PolyMap(tuple(comps))


def build_F0(p_bounded: Polyhedron, h: Poly) -> PolyMap:
    """The product-case reshaping map F0 = ((1 - x_n h^2) x', x_n).

    ``h`` is the product of the vertical facet forms (x_n-free); the origin of
    the base space must be interior to the bounded base polyhedron.
    """
    n1 = p_bounded.dim
    n = n1 + 1
    origin = tuple(Fraction(0) for _ in range(n1))
    if not p_bounded.interior_contains(origin):
        raise OriginNotInterior("origin not interior to the product base", node=p_bounded)
    if h.dim != n1:
        raise ValueError("h must be a polynomial in x' only")
    hl = h.lift(n)
    xn = Poly.variable(n, n - 1)
    factor = Poly.constant(n, 1) - xn * hl * hl
    comps = [factor * Poly.variable(n, i) for i in range(n1)]
    comps.append(xn)
    return PolyMap(tuple(comps))


def _drop_constraint(k: Polyhedron, index: int) -> Polyhedron:
    forms = tuple(h for i, h in enumerate(k.constraints) if i != index)
    return Polyhedron(k.dim, forms, minimal=k.minimal)


def _base_position_map(k: Polyhedron, facet_index: int, v) -> AffineMap:
    """Affine change sending v to -e_n and the facet into {x_n = 0} with the
    facet's relative interior point at the origin (so K lies in {x_n <= 0})."""
    g = k.constraints[facet_index].gradient
    p0 = face_relint_point(k, frozenset({facet_index}))
    hyper = kernel_basis([g], k.dim)
    neg_v = tuple(-c for c in v)
    columns = hyper + [neg_v]
    return AffineMap.from_basis_columns(columns, p0)


def synthesize_interior_complement(
    k: Polyhedron,
    compact_provider: CompactProvider = None,
    _path: tuple = (),
) -> tuple[MapChain, TraceNode]:
    """Map chain with image R^n minus Int(K), plus the synthesis trace.

    K must be unbounded and not a layer (layers disconnect the complement);
    recursion nodes that need the bounded-base construction raise
    CompactBaseRequired unless ``compact_provider`` supplies a chain for them.
    """
    k = minimal_presentation(k)
    n = k.dim
    if k.is_universe():
        raise UniversePolyhedron("complement of interior is empty", node=k, path=_path)
    if is_layer(k):
        raise LayerEncountered("layer: complement of interior is disconnected",
                               node=k, path=_path)

    if n == 1:
        h = k.constraints[0]
        if len(k.constraints) != 1:
            # a 1-dimensional minimal system with two constraints is a bounded
            # interval, i.e. a layer, so it was caught above
            raise LayerEncountered("bounded interval in dimension one", node=k, path=_path)
        a, c = h.gradient[0], -h.constant / h.gradient[0]
        square = PolyMap((Poly(1, {(2,): 1}),))
        chain = MapChain(1, [square], [{"kind": "square", "index": 0}])
        if a < 0:
            # K = (-inf, c], image should be [c, inf)
            if c != 0:
                chain = chain.then(AffineMap(((Fraction(1),),), (c,)))
        else:
            # K = [c, inf), image should be (-inf, c]
            chain = chain.then(AffineMap(((Fraction(-1),),), (c,)))
        return chain, TraceNode("base-n1", 1, m=1)

    if lineality_basis(k):
        q, witness = lineality_decomposition(k)
        node = TraceNode("degenerate-product", n, affine=witness,
                         info={"factor_dim": q.dim})
        if cone_is_zero(recession_cone(q)):
            q_min = minimal_presentation(q)
            provided = compact_provider(q_min) if compact_provider else None
            if provided is None:
                raise CompactBaseRequired(
                    "bounded factor requires the compact-case construction",
                    node=q_min, path=_path + ("degenerate-product",))
            sub_chain = provided
            node.children.append(TraceNode("compact-base-provider", q.dim))
        else:
            sub_chain, sub_trace = synthesize_interior_complement(
                q, compact_provider, _path + ("degenerate-product",))
            node.children.append(sub_trace)
        chain = extend_chain(sub_chain, n)
        winv = witness.inverse()
        if not winv.is_identity():
            chain = chain.then(winv)
        return chain, node

    # non-degenerate
    if cone_is_zero(recession_cone(k)):
        k_min = k
        provided = compact_provider(k_min) if compact_provider else None
        if provided is None:
            raise CompactBaseRequired("bounded polyhedron requires the compact-case "
                                      "construction", node=k_min, path=_path)
        return provided, TraceNode("compact-base-provider", n)

    v, zset = cone_relint_direction(k)
    m = len(k.constraints)
    non_vertical = [i for i in range(m) if i not in zset]
    if not non_vertical:
        raise AssertionError("non-degenerate polyhedron with all-vertical facets")
    base = min(non_vertical)
    r = len(zset)
    full_dim_cone = feasible(n, ge=[LinearForm(h.gradient, Fraction(-1)) for h in k.constraints])

    amap = _base_position_map(k, base, v)
    k_pos = amap.image_polyhedron(k)
    polys = build_QGP(k_pos)
    fmap = build_F(polys)
    sub = _drop_constraint(k, base)

    if r < m - 1:
        sub_chain, sub_trace = synthesize_interior_complement(
            sub, compact_provider, _path + ("case1",))
        chain = sub_chain.then(amap, fmap, amap.inverse(),
                               meta=[None, {"kind": "peel-F", "polys": polys}, None])
        node = TraceNode("case1", n, m=m, r=r, facet=base, affine=amap,
                         relative_interior_position=not full_dim_cone)
        node.children.append(sub_trace)
        return chain, node

    # Case 2: every other facet is vertical; the peeled polyhedron is
    # (bounded base) x R and the complement needs the reshaping map first.
    walls = Polyhedron(n - 1, polys.vertical)
    h = Poly.constant(n - 1, 1)
    for w in polys.vertical:
        h = h * Poly.from_linear(w)
    f0 = build_F0(walls, h)
    sub_chain, sub_trace = synthesize_interior_complement(
        sub, compact_provider, _path + ("case2",))
    chain = sub_chain.then(amap, f0, fmap, amap.inverse(),
                           meta=[None, {"kind": "peel-F0", "h": h},
                                 {"kind": "peel-F", "polys": polys}, None])
    node = TraceNode("case2", n, m=m, r=r, facet=base, affine=amap,
                     relative_interior_position=not full_dim_cone)
    node.children.append(sub_trace)
    return chain, node
