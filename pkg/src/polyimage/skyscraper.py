"""Separating polynomials for the attic and basement of a skyscraper.

For an n-dimensional polyhedron K whose vertical lines meet it in bounded
sets, the prism Int(P) x R over the open projection P = pi_n(K) splits minus K
into two components: the attic above the ceiling facets and the basement below
the floor facets.  The polynomial P(x) = f1(x') x_n - f2(x') built from a
rational separator of the floor/ceiling affine forms is negative on the
basement and positive on the attic, with {f1 = 0} contained in {f2 = 0}.

When K is not in bounded position but all non-vertical facets form a ceiling,
the simpler monic P(x) = x_n + sum_j (b_j(x')^2 + 1)/2 works: it is positive on
the single component above the ceiling and its x'-part never vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .errors import MixedSides, NotBoundedPosition
from .geometry import LinearForm, Polyhedron, minimal_presentation, project
from .polyalg import Poly
from .separator import RationalSeparator, build_separator


@dataclass(frozen=True)
class FacetSplit:
    """Constraints of a polyhedron sorted by their x_n coefficient.

    floor entries come from h = -a(x') + x_n (lower facets), ceiling entries
    from h = b(x') - x_n (upper facets), walls are x_n-free.  The stored forms
    are the (n-1)-variable a_i, b_j, c_k after normalizing the x_n coefficient
    to +-1.
    """

    floor: tuple[LinearForm, ...]
    ceiling: tuple[LinearForm, ...]
    walls: tuple[LinearForm, ...]
    floor_idx: tuple[int, ...]
    ceiling_idx: tuple[int, ...]
    wall_idx: tuple[int, ...]

    @property
    def r(self) -> int:
        return len(self.floor)

    @property
    def s(self) -> int:
        return len(self.ceiling)


class RegionTag(Enum):
    BASEMENT = "basement"
    ATTIC = "attic"
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE_PRISM = "outside-prism"


@dataclass(frozen=True)
class SepPoly:
    """P = f1(x') x_n - f2(x') separating attic and basement.

    ``kind`` records which construction produced it ("bounded" uses the
    rational separator of the floor/ceiling tuples, "unbounded" the one-sided
    ceiling sum); ``rs`` is the (r, s) of the separator when applicable.
    """

    f1: Poly
    f2: Poly
    P: Poly
    kind: str
    rs: Optional[tuple[int, int]] = None

    def to_json(self) -> dict:
        obj = {"f1": self.f1.to_json(), "f2": self.f2.to_json(), "P": self.P.to_json(),
               "kind": self.kind}
        if self.rs is not None:
            obj["rs"] = list(self.rs)
        return obj


def split_facets(k: Polyhedron) -> FacetSplit:
    """Classify constraints into floor/ceiling/walls, normalizing x_n to +-1."""
    floor, ceiling, walls = [], [], []
    fi, ci, wi = [], [], []
    for idx, h in enumerate(k.constraints):
        cn = h.gradient[-1]
        if cn == 0:
            walls.append(LinearForm(h.gradient[:-1], h.constant))
            wi.append(idx)
        elif cn > 0:
            # h/cn = -a(x') + x_n  =>  a = -(gradient'/cn) . x' - const/cn
            scaled = h.scale(Fraction(1) / cn)
            floor.append(LinearForm(tuple(-g for g in scaled.gradient[:-1]), -scaled.constant))
            fi.append(idx)
        else:
            scaled = h.scale(Fraction(-1) / cn)
            ceiling.append(LinearForm(scaled.gradient[:-1], scaled.constant))
            ci.append(idx)
    if not floor or not ceiling:
        raise NotBoundedPosition(
            f"floor/ceiling counts r={len(floor)}, s={len(ceiling)}", node=k)
    return FacetSplit(tuple(floor), tuple(ceiling), tuple(walls),
                      tuple(fi), tuple(ci), tuple(wi))


def _compose_forms(g: Poly, forms: Sequence[LinearForm], out_dim: int) -> Poly:
    """g(a_1(x'), ..., a_m(x')) as a polynomial in x'."""
    args = [Poly.from_linear(f) for f in forms]
    if len(args) != g.dim:
        raise ValueError("arity mismatch")
    return g.composed_with(args)


def build_sep_poly_bounded(k: Polyhedron) -> SepPoly:
    """Separating polynomial for a polyhedron in vertical-line-bounded position.

    f_l = g_l(a_1..a_r; b_1..b_s) with (g1, g2) the square-denominator pair of
    the (r, s) separator; f1 > 0 on Int(P), P < 0 on the basement and P > 0 on
    the attic, and {f1 = 0} is inside {f2 = 0} because f2 keeps the f1-root as
    a factor.
    """
    split = split_facets(k)
    r, s = split.r, split.s
    sep = build_separator(r, s)
    n = k.dim
    forms = list(split.floor) + list(split.ceiling)
    g1p_x = _compose_forms(sep.g1p, forms, n - 1)
    g2p_x = _compose_forms(sep.g2p, forms, n - 1)
    f1 = g1p_x * g1p_x
    f2 = g2p_x * g1p_x
    xn = Poly.variable(n, n - 1)
    P = f1.lift(n) * xn - f2.lift(n)
    return SepPoly(f1, f2, P, "bounded", (r, s))


def build_sep_poly_unbounded(k: Polyhedron, orientation: int = 1) -> SepPoly:
    """One-sided separating polynomial when every non-vertical facet is a ceiling.

    ``orientation`` = +1 expects ceiling-only constraints as given; -1 means
    the caller works with the reflection x_n -> -x_n (recorded by the caller
    in its chain) and passes the reflected polyhedron here.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +-1")
    floor, ceiling = [], []
    for h in k.constraints:
        cn = h.gradient[-1]
        if cn == 0:
            continue
        if cn > 0:
            floor.append(h)
        else:
            scaled = h.scale(Fraction(-1) / cn)
            ceiling.append(LinearForm(scaled.gradient[:-1], scaled.constant))
    if floor:
        raise MixedSides("floor facets present; use the bounded construction "
                         "or reflect first", node=k)
    if not ceiling:
        raise MixedSides("no non-vertical facets", node=k)
    n = k.dim
    half = Fraction(1, 2)
    f2 = Poly.zero(n - 1)
    for b in ceiling:
        bp = Poly.from_linear(b)
        f2 = f2 - half * (bp * bp + Poly.constant(n - 1, 1))
    f1 = Poly.constant(n - 1, 1)
    xn = Poly.variable(n, n - 1)
    P = xn - f2.lift(n)
    return SepPoly(f1, f2, P, "unbounded")


def classify_region(k: Polyhedron, x: Sequence[Fraction]) -> RegionTag:
    """Exact position of a point relative to K and the prism over pi_n(K)."""
    if not k.minimal:
        k = minimal_presentation(k)
    values = [h(x) for h in k.constraints]
    if all(v > 0 for v in values):
        return RegionTag.INSIDE
    if all(v >= 0 for v in values):
        return RegionTag.BOUNDARY
    proj = project(k)
    xp = tuple(x[:-1])
    if not proj.contains(xp, strict=True):
        return RegionTag.OUTSIDE_PRISM
    # above every ceiling or below every floor along the fiber
    xn = x[-1]
    lo, hi = None, None
    for h in k.constraints:
        cn = h.gradient[-1]
        if cn == 0:
            continue
        bound = -(h(tuple(xp) + (Fraction(0),))) / cn
        if cn > 0:
            lo = bound if lo is None else max(lo, bound)
        else:
            hi = bound if hi is None else min(hi, bound)
    if hi is not None and xn > hi:
        return RegionTag.ATTIC
    if lo is not None and xn < lo:
        return RegionTag.BASEMENT
    # walls exclude the point even though x' is interior to the projection
    return RegionTag.OUTSIDE_PRISM
