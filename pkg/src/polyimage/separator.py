"""Rational separators for tuples of variables.

A separator for the pair (r, s) is a rational function on R^r x R^s, written
in variables (y_1..y_r, z_1..z_s), that takes values strictly between
max{y} and min{z} on the interior of the order polyhedron

    Q_{r,s} = { (y; z) : max{y} <= min{z} },

extends continuously to the boundary, and is kept in the square-denominator
normal form den = den_root^2, num = g2' * den_root with {den = 0} inside
{num = 0}.

Separators are assembled recursively from the closed-form (2,2) base through
an argument swap, a repetition embedding, and a composition step that nests a
separator value into the last y-slot of another.  Each separator is primarily
its construction tree: exact evaluation walks the tree with small rational
operations, while the expanded numerator/denominator polynomials are
materialized lazily (they are only affordable for small pairs; no gcd
reduction is performed, and the unreduced degrees grow quickly under
composition, e.g. the (3,3) numerator already has total degree 13 and several
thousand terms).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .geometry import LinearForm, Polyhedron, rat
from .polyalg import Poly


@dataclass(frozen=True)
class TupleBox:
    """The polyhedron Q_{r,s} materialized as the r*s constraints z_j - y_i >= 0."""

    r: int
    s: int
    polyhedron: Polyhedron

    @staticmethod
    def build(r: int, s: int) -> "TupleBox":
        dim = r + s
        forms = []
        for j in range(s):
            for i in range(r):
                grad = [Fraction(0)] * dim
                grad[r + j] = Fraction(1)
                grad[i] = Fraction(-1)
                forms.append(LinearForm(tuple(grad), Fraction(0)))
        return TupleBox(r, s, Polyhedron(dim, tuple(forms)))

    def interior_contains(self, point) -> bool:
        return self.polyhedron.contains(point, strict=True)


class SeparatorPole(ValueError):
    """Raised when a tree evaluation hits a vanishing inner denominator."""


@dataclass(frozen=True)
class RationalSeparator:
    """Separator for (r, s) in square-denominator normal form.

    deg2/deg1 are per-variable upper bounds on the degrees of the primed pair
    (exact for the base case, conservative after merges); they fix the
    homogenization power of every composition once and for all, so the lazy
    expanded polynomials and the tree evaluation agree wherever no inner
    denominator vanishes.
    """

    r: int
    s: int
    node: tuple
    deg2: tuple[int, ...]
    deg1: tuple[int, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.r + self.s

    # -- lazily expanded polynomials ----------------------------------------

    def _materialize(self) -> tuple[Poly, Poly]:
        if "pair" in self._cache:
            return self._cache["pair"]
        kind = self.node[0]
        dim = self.dim
        if kind == "base":
            y1, y2, z1, z2 = (Poly.variable(4, i) for i in range(4))
            pair = (z1 * z2 - y1 * y2, (z1 + z2) - (y1 + y2))
        elif kind == "swap":
            inner = self.node[1]
            g2i, g1i = inner._materialize()
            # inner's y-block lands after the new y-block (of length self.r)
            var_map = [self.r + j for j in range(inner.r)] + list(range(inner.s))
            pair = (-(g2i.remap(dim, var_map).negate_vars(range(dim))),
                    g1i.remap(dim, var_map).negate_vars(range(dim)))
        elif kind == "embed":
            inner, k, ell = self.node[1], self.node[2], self.node[3]
            g2i, g1i = inner._materialize()
            var_map = []
            for j in range(inner.r):
                var_map.append(j if j < self.r - 1 else self.r - 1)
            for j in range(inner.s):
                var_map.append(self.r + j if j < self.s - 1 else self.r + self.s - 1)
            pair = (g2i.remap(dim, var_map), g1i.remap(dim, var_map))
        elif kind == "compose":
            outer, inner, k, d = self.node[1], self.node[2], self.node[3], self.node[4]
            g2o, g1o = outer._materialize()
            g2i, g1i = inner._materialize()
            split = self.r - k
            inner_map = [split + j for j in range(k)] + [self.r + t for t in range(self.s)]
            pi = g2i.remap(dim, inner_map)
            qi = g1i.remap(dim, inner_map)
            outer_map = {}
            for j in range(outer.r + outer.s):
                if j < split:
                    outer_map[j] = j
                elif j > split:
                    outer_map[j] = self.r + (j - split - 1)
            pair = (_slot_subst(g2o, split, outer_map, pi, qi, d, dim),
                    _slot_subst(g1o, split, outer_map, pi, qi, d, dim))
        else:  # pragma: no cover
            raise AssertionError(f"unknown node {kind}")
        self._cache["pair"] = pair
        return pair

    @property
    def g2p(self) -> Poly:
        return self._materialize()[0]

    @property
    def g1p(self) -> Poly:
        return self._materialize()[1]

    @property
    def num(self) -> Poly:
        if "num" not in self._cache:
            self._cache["num"] = self.g2p * self.g1p
        return self._cache["num"]

    @property
    def den_root(self) -> Poly:
        return self.g1p

    @property
    def den(self) -> Poly:
        if "den" not in self._cache:
            self._cache["den"] = self.g1p * self.g1p
        return self._cache["den"]

    def pole_witness_ok(self) -> bool:
        """{den = 0} subset of {num = 0}, witnessed by num = g2p * den_root."""
        return self.num == self.g2p * self.den_root

    # -- exact evaluation through the construction tree ---------------------

    def pair_at(self, point: Sequence[Fraction]) -> tuple[Fraction, Fraction]:
        """(g2p(x), g1p(x)) evaluated exactly via the construction tree."""
        x = tuple(rat(v) for v in point)
        kind = self.node[0]
        if kind == "base":
            y1, y2, z1, z2 = x
            return (z1 * z2 - y1 * y2, (z1 + z2) - (y1 + y2))
        if kind == "swap":
            inner = self.node[1]
            args = tuple(-v for v in x[self.r:]) + tuple(-v for v in x[: self.r])
            p, q = inner.pair_at(args)
            return (-p, q)
        if kind == "embed":
            inner, k, ell = self.node[1], self.node[2], self.node[3]
            y, z = x[: self.r], x[self.r:]
            args = y[:-1] + (y[-1],) * (k + 1) + z[:-1] + (z[-1],) * (ell + 1)
            return inner.pair_at(args)
        if kind == "compose":
            outer, inner, k, d = self.node[1], self.node[2], self.node[3], self.node[4]
            split = self.r - k
            pi, qi = inner.pair_at(x[split: self.r] + x[self.r:])
            if qi == 0:
                raise SeparatorPole("inner denominator vanished")
            v = pi / qi
            po, qo = outer.pair_at(x[:split] + (v,) + x[self.r:])
            scale = qi ** d
            return (po * scale, qo * scale)
        raise AssertionError(f"unknown node {kind}")  # pragma: no cover

    def value_at(self, point: Sequence[Fraction]) -> Fraction:
        p, q = self.pair_at(point)
        if q == 0:
            raise SeparatorPole("denominator vanished")
        return p / q


def _slot_subst(poly: Poly, split: int, outer_map: dict, pi: Poly, qi: Poly,
                d: int, dim_new: int) -> Poly:
    """Substitute pi/qi into variable ``split`` and clear to qi^d."""
    by_exp: dict[int, dict] = {}
    for e, c in poly.terms.items():
        ne = [0] * dim_new
        for j, kk in enumerate(e):
            if j == split or not kk:
                continue
            ne[outer_map[j]] += kk
        bucket = by_exp.setdefault(e[split], {})
        key = tuple(ne)
        bucket[key] = bucket.get(key, Fraction(0)) + c
    out = Poly.zero(dim_new)
    pi_pow = {0: Poly.constant(dim_new, 1)}
    qi_pow = {0: Poly.constant(dim_new, 1)}

    def pw(memo, base, n):
        if n not in memo:
            top = max(memo)
            q = memo[top]
            for j in range(top, n):
                q = q * base
                memo[j + 1] = q
        return memo[n]

    for e_slot, bucket in by_exp.items():
        part = Poly(dim_new, bucket)
        out = out + part * pw(pi_pow, pi, e_slot) * pw(qi_pow, qi, d - e_slot)
    return out


# -- constructors ------------------------------------------------------------


def phi22() -> RationalSeparator:
    """The closed-form base separator (z1 z2 - y1 y2) / ((z1+z2) - (y1+y2))."""
    return RationalSeparator(2, 2, ("base",), (1, 1, 1, 1), (1, 1, 1, 1))


def swap(sep: RationalSeparator) -> RationalSeparator:
    """Separator for (s, r) from one for (r, s): phi_{s,r}(z, y) = -phi_{r,s}(-y; -z)."""
    r, s = sep.r, sep.s
    # new first block (length s) carries the old z-degrees and vice versa
    deg2 = tuple(sep.deg2[r + t] for t in range(s)) + tuple(sep.deg2[j] for j in range(r))
    deg1 = tuple(sep.deg1[r + t] for t in range(s)) + tuple(sep.deg1[j] for j in range(r))
    return RationalSeparator(s, r, ("swap", sep), deg2, deg1)


def embed(sep: RationalSeparator, k: int, ell: int) -> RationalSeparator:
    """Separator for (r, s) from one for (r+k, s+ell) via the repetition embedding."""
    if k < 0 or ell < 0:
        raise ValueError("k, ell must be nonnegative")
    rb, sb = sep.r, sep.s
    r, s = rb - k, sb - ell
    if r < 1 or s < 1:
        raise ValueError("resulting pair must be positive")

    def merged(deg):
        out = [0] * (r + s)
        for j in range(rb):
            out[j if j < r - 1 else r - 1] += deg[j]
        for j in range(sb):
            out[r + j if j < s - 1 else r + s - 1] += deg[rb + j]
        return tuple(out)

    return RationalSeparator(r, s, ("embed", sep, k, ell), merged(sep.deg2), merged(sep.deg1))


def compose_step(outer: RationalSeparator, inner: RationalSeparator) -> RationalSeparator:
    """Nest inner's value into outer's last y-slot.

    outer separates (r-k+1, s) and inner (k, s); the result separates (r, s)
    with r = outer.r - 1 + inner.r.  Denominators are cleared by the fixed
    power d bounding the slot degree, so both primed polynomials carry the
    same qi^d normalization (the square-denominator convention is then
    num = g2p*g1p, den = g1p^2 as usual).
    """
    if outer.s != inner.s:
        raise ValueError("z-arities must agree")
    k, s = inner.r, inner.s
    r = outer.r - 1 + k
    split = r - k
    d = max(outer.deg2[outer.r - 1], outer.deg1[outer.r - 1])

    def bounds(deg_outer):
        out = [0] * (r + s)
        for j in range(outer.r + outer.s):
            if j < split:
                out[j] = deg_outer[j]
            elif j > split:
                out[r + (j - split - 1)] = deg_outer[j]
        for j in range(k):
            out[split + j] += d * max(inner.deg2[j], inner.deg1[j])
        for t in range(s):
            out[r + t] += d * max(inner.deg2[k + t], inner.deg1[k + t])
        return tuple(out)

    return RationalSeparator(r, s, ("compose", outer, inner, k, d),
                             bounds(outer.deg2), bounds(outer.deg1))


_MEMO: dict[tuple[int, int], RationalSeparator] = {}


def build_separator(r: int, s: int) -> RationalSeparator:
    """Separator for any pair of positive integers, by the recursive assembly.

    Swap handles r < s, the repetition embedding handles a 1 on either side,
    and otherwise the last two y's are collapsed through a (2, s) separator
    (every composition step uses k = 2).
    """
    if r < 1 or s < 1:
        raise ValueError("r, s must be positive")
    key = (r, s)
    if key in _MEMO:
        return _MEMO[key]
    if r < s:
        sep = swap(build_separator(s, r))
    elif (r, s) == (2, 2):
        sep = phi22()
    elif s == 1:
        sep = embed(build_separator(r, 2), 0, 1)
    elif s == 2:
        sep = compose_step(build_separator(r - 1, 2), build_separator(2, 2))
    else:
        sep = compose_step(build_separator(r - 1, s), build_separator(2, s))
    _MEMO[key] = sep
    return sep


def sample_interior(r: int, s: int, n: int, seed: int, span: int = 10, denom: int = 16):
    """Deterministic exact rational samples of Int(Q_{r,s}).

    Draws the y's freely in [-span, span] and places every z strictly above
    max{y}, which parametrizes the full interior up to the sampling window.
    """
    rng = random.Random(seed)
    pts = []
    for _ in range(n):
        ys = [Fraction(rng.randint(-span * denom, span * denom), denom) for _ in range(r)]
        top = max(ys)
        zs = [top + Fraction(rng.randint(1, 2 * span * denom), denom) for _ in range(s)]
        pts.append(tuple(ys + zs))
    return pts
