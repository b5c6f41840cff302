"""Synthesis of map chains whose image is R^n minus K itself.

The complement of a non-degenerate polyhedron is produced in two phases.  An
enlarged copy K_0 (every constraint relaxed by a small epsilon chosen from an
exact distance certificate) first contributes its interior complement.  Then a
cascade of stage maps

    T(x) = (x', x_n - x_{n-1} h^2(x) P(x)),   h = product of all constraints,

peels the original constraints back one at a time: stage i repositions so the
i-th constraint hyperplane becomes {x_{n-1} = 0} with K below, applies T built
from the stage polyhedron Cl(G_i), and absorbs the residual faces sitting over
the boundary of the stage projection with further T maps in face-adapted
coordinates.  Degenerate polyhedra reduce to a non-degenerate factor, and a
one-dimensional factor uses the explicit half-space map.

The epsilon certificate guarantees no residual face is parallel to the peel
hyperplane while meeting its open upper side; that situation is checked
exactly and raises FaceParallelContradiction since it would signal an upstream
bug.

Stage polyhedra whose peel facet has fewer than two facets (possible for
two-dimensional polyhedra with ray facets) cannot be put in vertical-line
bounded position; the one-sided separating polynomial is used instead, as the
closest construction available.  The resulting stage maps keep the exact
containment guarantee but are not surjective on the affected vertical lines,
which the statistical coverage verification measures honestly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional

from .errors import (EmptyInterior, FaceParallelContradiction, FacetTooThin,
                     LayerEncountered, UniversePolyhedron)
from .geometry import (AffineMap, FaceDescriptor, LinearForm, Polyhedron,
                       cone_is_zero, dot, face_descriptor, face_relint_point,
                       feasible, implied_active, is_layer, kernel_basis,
                       lineality_basis, lineality_decomposition,
                       minimal_presentation, place_bounded_position, project,
                       rank, rat_str, recession_cone, sample_point,
                       solve_linear)
from .interior_complement import (CompactProvider, TraceNode,
                                  synthesize_interior_complement)
from .polyalg import MapChain, Poly, PolyMap, extend_chain
from .skyscraper import SepPoly, build_sep_poly_bounded, build_sep_poly_unbounded


# ---------------------------------------------------------------------------
# delta certificate and enlargement ladder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaCertificate:
    """Exact minimum squared distance between constraint-intersection flats and
    the facing half-spaces they are parallel to; None means the family is
    empty and the minimum over it is +infinity."""

    family: tuple[tuple[tuple[int, ...], int], ...]
    delta_sq: Optional[Fraction]

    def to_json(self) -> dict:
        return {
            "family": [{"flat": list(flat), "facing": j} for flat, j in self.family],
            "delta_sq": "inf" if self.delta_sq is None else rat_str(self.delta_sq),
        }


@dataclass(frozen=True)
class Stage:
    """Stage i of the ladder: first i constraints original, the rest enlarged."""

    index: int
    raw: Polyhedron
    minimal: Polyhedron


@dataclass(frozen=True)
class EnlargementLadder:
    epsilon: Fraction
    k: Polyhedron
    k0: Polyhedron
    stages: tuple[Stage, ...]

    @property
    def m(self) -> int:
        return len(self.k.constraints)

    def in_G(self, i: int, x) -> bool:
        """Exact membership in the half-open stage set G_i."""
        for j, h in enumerate(self.k.constraints):
            v = h(x)
            if j < i:
                if v < 0:
                    return False
            else:
                if v + self.epsilon <= 0:
                    return False
        return True

    def to_json(self) -> dict:
        return {
            "epsilon": rat_str(self.epsilon),
            "k0": self.k0.to_json(),
            "stage_count": len(self.stages),
        }


def compute_delta(k: Polyhedron) -> DeltaCertificate:
    """Enumerate index sets I = (i_1..i_k, j): independent gradients, the flat
    W = intersection of their hyperplanes parallel to H_j and strictly inside
    {h_j < 0}; delta^2 is the least squared distance dist(W, H_j^+)^2."""
    if not k.minimal:
        k = minimal_presentation(k)
    m = len(k.constraints)
    family = []
    best: Optional[Fraction] = None
    for size in range(1, k.dim + 1):
        for subset in combinations(range(m), size):
            grads = [k.constraints[i].gradient for i in subset]
            if rank(grads) != size:
                continue
            point = solve_linear(grads, [-k.constraints[i].constant for i in subset])
            if point is None:
                continue
            for j in range(m):
                if j in subset:
                    continue
                hj = k.constraints[j]
                # parallel: the flat's direction space is inside ker(grad_j)
                if rank(grads + [hj.gradient]) != size:
                    continue
                value = hj(point)
                if value >= 0:
                    continue
                dist_sq = value * value / dot(hj.gradient, hj.gradient)
                family.append((tuple(subset), j))
                best = dist_sq if best is None else min(best, dist_sq)
    family.sort()
    return DeltaCertificate(tuple(family), best)


def choose_epsilon(cert: DeltaCertificate, k: Polyhedron) -> EnlargementLadder:
    """Pick a rational epsilon with dist(H_i^+, H_i(eps))^2 < delta^2/4 for all
    i (squared comparison) and build the stage ladder; epsilon = 1 when the
    certificate family is empty."""
    if not k.minimal:
        k = minimal_presentation(k)
    eps = Fraction(1)
    if cert.delta_sq is not None:
        min_g = min(dot(h.gradient, h.gradient) for h in k.constraints)
        bound_sq = cert.delta_sq / 4 * min_g
        while eps * eps >= bound_sq:
            eps /= 2
    enlarged = [h.shift(eps) for h in k.constraints]
    stages = []
    for i in range(len(k.constraints) + 1):
        raw = Polyhedron(k.dim, tuple(list(k.constraints[:i]) + enlarged[i:]))
        stages.append(Stage(i, raw, minimal_presentation(raw)))
    k0 = stages[0].minimal
    return EnlargementLadder(eps, k, k0, tuple(stages))


# ---------------------------------------------------------------------------
# stage maps
# ---------------------------------------------------------------------------


def build_TK(k_stage: Polyhedron, sep: SepPoly) -> PolyMap:
    """The peel map (x', x_n - x_{n-1} h^2 P) for a positioned stage polyhedron."""
    n = k_stage.dim
    h = Poly.constant(n, 1)
    for form in k_stage.constraints:
        h = h * Poly.from_linear(form)
    correction = Poly.variable(n, n - 2) * h * h * sep.P
    comps = [Poly.variable(n, i) for i in range(n - 1)]
    comps.append(Poly.variable(n, n - 1) - correction)
    return PolyMap(tuple(comps))


def _is_bounded_position(p: Polyhedron) -> bool:
    cone = recession_cone(p)
    up = tuple([Fraction(0)] * (p.dim - 1) + [Fraction(1)])
    dn = tuple([Fraction(0)] * (p.dim - 1) + [Fraction(-1)])
    return not cone.contains(up) and not cone.contains(dn)


def _build_sep(k_hat: Polyhedron) -> tuple[SepPoly, bool]:
    if _is_bounded_position(k_hat):
        return build_sep_poly_bounded(k_hat), True
    return build_sep_poly_unbounded(k_hat, 1), False


def _coordinate_form(dim: int, index: int, constant=0) -> LinearForm:
    grad = [Fraction(0)] * dim
    grad[index] = Fraction(1)
    return LinearForm(tuple(grad), Fraction(constant))


def _hyperplane_placement(k_cone_source: Polyhedron, h: LinearForm) -> AffineMap:
    """Facet-hyperplane placement without the bounded-position guarantee.

    Sends {h = 0} to {x_(n-1) = 0} with {h >= 0} mapping into {x_(n-1) <= 0},
    choosing the vertical direction inside the hyperplane so that +e_n is not
    a recession direction of the image (reflecting if necessary).
    """
    n = h.dim
    basis = kernel_basis([h.gradient], n)
    v = basis[-1]
    cone = recession_cone(k_cone_source)
    if cone.contains(v):
        v = tuple(-c for c in v)
    w = tuple(-g for g in h.gradient)
    rest = []
    for b in basis:
        if rank([v] + rest + [b]) > 1 + len(rest):
            rest.append(b)
        if len(rest) == n - 2:
            break
    g2 = dot(h.gradient, h.gradient)
    origin = tuple(-h.constant * g / g2 for g in h.gradient)
    return AffineMap.from_basis_columns(rest + [w, v], origin)


def _face_adapted_map(k_hat: Polyhedron, active: frozenset[int]) -> AffineMap:
    """Affine change keeping the x_(n-1) coordinate fixed that makes the line
    from a face point to an interior point at the same height vertical, with
    +e_n not a recession direction."""
    n = k_hat.dim
    p = face_relint_point(k_hat, active)
    level = _coordinate_form(n, n - 2, -p[n - 2])
    q = sample_point(n, gt=k_hat.constraints, eq=[level])
    if q is None:
        raise AssertionError("face-height hyperplane misses the interior")
    u = tuple(b - a for a, b in zip(p, q))
    cone = recession_cone(k_hat)
    if cone.contains(u):
        u = tuple(-c for c in u)
    if cone.contains(u):
        raise AssertionError("recession cone contains a line")
    e_last = tuple(Fraction(1) if i == n - 2 else Fraction(0) for i in range(n))
    rest = []
    for j in range(n):
        if j == n - 2:
            continue
        e = tuple(Fraction(1) if i == j else Fraction(0) for i in range(n))
        if rank([u] + rest + [e]) > 1 + len(rest):
            rest.append(e)
        if len(rest) == n - 2:
            break
    columns = rest + [e_last, u]
    zero = tuple(Fraction(0) for _ in range(n))
    return AffineMap.from_basis_columns(columns, zero)


def _residual_faces(k_hat: Polyhedron, enlarged_keys: set) -> list[FaceDescriptor]:
    """Faces of the stage polyhedron over the boundary of its projection whose
    relative interior survives in G_i and which meet {x_(n-1) > 0}."""
    n = k_hat.dim
    proj = project(k_hat)
    if not proj.constraints:
        return []
    try:
        proj = minimal_presentation(proj)
    except EmptyInterior:  # projection degenerate; no full-dimensional shadow
        return []
    lifts = [LinearForm(h.gradient + (Fraction(0),), h.constant) for h in proj.constraints]
    m = len(k_hat.constraints)
    upper = _coordinate_form(n, n - 2)
    found: dict[frozenset[int], FaceDescriptor] = {}
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            eq = [k_hat.constraints[i] for i in subset]
            act = implied_active(k_hat, eq)
            if act is None or act in found:
                continue
            eq_act = [k_hat.constraints[i] for i in act]
            over_boundary = any(
                not feasible(n, ge=k_hat.constraints, gt=[lift], eq=eq_act)
                for lift in lifts)
            if not over_boundary:
                continue
            if any(k_hat.constraints[i].canonical_key() in enlarged_keys for i in act):
                continue  # relative interior falls outside G_i
            if not feasible(n, ge=k_hat.constraints, gt=[upper], eq=eq_act):
                continue  # stays in the closed lower half-space
            grads = [k_hat.constraints[i].gradient for i in act]
            e_level = tuple(Fraction(1) if i == n - 2 else Fraction(0) for i in range(n))
            if rank(grads) == rank(grads + [e_level]):
                raise FaceParallelContradiction(
                    "residual face parallel to the peel hyperplane meets its "
                    "open upper side", node=k_hat, face=sorted(act))
            found[act] = face_descriptor(k_hat, act)
    return sorted(found.values(), key=lambda f: f.sort_key())


def _tk_product(k_stage: Polyhedron) -> Poly:
    h = Poly.constant(k_stage.dim, 1)
    for form in k_stage.constraints:
        h = h * Poly.from_linear(form)
    return h


def _stage_chain(ladder: EnlargementLadder, i: int) -> tuple[list, list, dict]:
    """Steps ``[S, T0, (B_j, T_j, B_j^-1)..., S^-1]`` for ladder stage i,
    with one structural annotation per step."""
    k = ladder.k
    n = k.dim
    h_peel = k.constraints[i]
    k_i = ladder.stages[i].minimal
    k_next = ladder.stages[i + 1].minimal
    info: dict = {"stage": i}

    facet_idx = next((j for j, h in enumerate(k_next.constraints)
                      if h.canonical_key() == h_peel.canonical_key()), None)
    placement = None
    if facet_idx is not None:
        try:
            placement = place_bounded_position(k_next, face_descriptor(k_next, frozenset({facet_idx})))
            info["placement"] = "bounded-position"
        except FacetTooThin:
            placement = None
    if placement is None:
        placement = _hyperplane_placement(k_i, h_peel)
        info["placement"] = "hyperplane"
    k_hat = placement.image_polyhedron(k_i)
    sep, bounded = _build_sep(k_hat)
    info["bounded_position"] = bounded
    steps: list = [placement, build_TK(k_hat, sep)]
    metas: list = [{"kind": "affine"},
                   {"kind": "T-peel", "h": _tk_product(k_hat), "P": sep.P}]

    enlarged_keys = {placement.push_form(h.shift(ladder.epsilon)).canonical_key()
                     for h in k.constraints[i:]}
    faces = _residual_faces(k_hat, enlarged_keys)
    info["residual_faces"] = [sorted(f.active) for f in faces]
    info["face_bounded"] = []
    for face in faces:
        bmap = _face_adapted_map(k_hat, face.active)
        k_tilde = bmap.image_polyhedron(k_hat)
        sep_f, bounded_f = _build_sep(k_tilde)
        info["face_bounded"].append(bounded_f)
        tk_meta = {"kind": "T-peel", "h": _tk_product(k_tilde), "P": sep_f.P}
        if bmap.is_identity():
            steps.append(build_TK(k_tilde, sep_f))
            metas.append(tk_meta)
        else:
            steps.extend([bmap, build_TK(k_tilde, sep_f), bmap.inverse()])
            metas.extend([{"kind": "affine"}, tk_meta, {"kind": "affine"}])
    steps.append(placement.inverse())
    metas.append({"kind": "affine"})
    return steps, metas, info


# ---------------------------------------------------------------------------
# top-level synthesis
# ---------------------------------------------------------------------------


def _halfspace_map(n: int) -> PolyMap:
    """Map of R^n onto {x_1 > 0} x R^(n-2): ((x1 x2 - 1)^2 + x1^2, x2 (x1 x2 - 1), x'')."""
    x1, x2 = Poly.variable(n, 0), Poly.variable(n, 1)
    w = x1 * x2 - Poly.constant(n, 1)
    comps = [w * w + x1 * x1, x2 * w]
    comps += [Poly.variable(n, i) for i in range(2, n)]
    return PolyMap(tuple(comps))


def synthesize_complement(
    k: Polyhedron,
    compact_provider: CompactProvider = None,
) -> tuple[MapChain, TraceNode]:
    """Map chain with image R^n minus K (n >= 2), plus the synthesis trace."""
    if k.dim < 2:
        raise ValueError("complement synthesis requires dimension at least two")
    k = minimal_presentation(k)
    n = k.dim
    if k.is_universe():
        raise UniversePolyhedron("complement of the whole space is empty", node=k)
    if is_layer(k):
        raise LayerEncountered("layer: complement is disconnected", node=k)

    if lineality_basis(k):
        q, witness = lineality_decomposition(k)
        q = minimal_presentation(q)
        if q.dim == 1:
            # normalize the ray factor to (-inf, 0] and use the half-space map
            h = q.constraints[0]
            a, c = h.gradient[0], -h.constant / h.gradient[0]
            mat = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
            trans = [Fraction(0)] * n
            if a < 0:
                trans[0] = -c        # u = t - c
            else:
                mat[0][0] = Fraction(-1)
                trans[0] = c         # u = c - t
            norm = AffineMap(tuple(tuple(row) for row in mat), tuple(trans)).compose(witness)
            chain = MapChain(n, [_halfspace_map(n)], [{"kind": "halfspace"}])
            inv = norm.inverse()
            if not inv.is_identity():
                chain = chain.then(inv)
            node = TraceNode("halfspace", n, affine=norm)
            return chain, node
        sub_chain, sub_trace = synthesize_complement(q, compact_provider)
        chain = extend_chain(sub_chain, n)
        winv = witness.inverse()
        if not winv.is_identity():
            chain = chain.then(winv)
        node = TraceNode("degenerate-product", n, affine=witness,
                         info={"factor_dim": q.dim})
        node.children.append(sub_trace)
        return chain, node

    cert = compute_delta(k)
    ladder = choose_epsilon(cert, k)
    ic_chain, ic_trace = synthesize_interior_complement(ladder.k0, compact_provider)
    steps = list(ic_chain.steps)
    metas = list(ic_chain.meta) if ic_chain.meta is not None else \
        [{"kind": "affine"} if isinstance(s, AffineMap) else None for s in steps]
    stage_infos = []
    for i in range(ladder.m):
        stage_steps, stage_metas, info = _stage_chain(ladder, i)
        for s, mm in zip(stage_steps, stage_metas):
            if isinstance(s, AffineMap) and s.is_identity():
                continue
            steps.append(s)
            metas.append(mm)
        stage_infos.append(info)
    chain = MapChain(n, steps, metas)
    node = TraceNode("complement-ladder", n, m=ladder.m,
                     info={"delta": cert.to_json(), "ladder": ladder.to_json(),
                           "stages": stage_infos})
    node.children.append(ic_trace)
    return chain, node


__all__ = [
    "DeltaCertificate", "EnlargementLadder", "Stage", "build_TK",
    "compute_delta", "choose_epsilon", "synthesize_complement",
]
