"""Sparse exact-rational multivariate polynomials, maps, and map chains.

Polynomials are dictionaries monomial -> nonzero rational coefficient with a
graded-lexicographic canonical order for equality and serialization.  Map
chains hold an ordered list of polynomial or affine steps and are evaluated
lazily (left fold); full expansion is opt-in behind a degree cap because
composed degrees grow multiplicatively.

Exact chain evaluation runs on integer numerator/denominator pairs (no gcd
normalization per step), which keeps 10^5-point containment checks cheap even
when composed values reach thousands of bits.
"""

from __future__ import annotations

import json
from fractions import Fraction
from math import gcd, prod
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegreeCapExceeded
from .geometry import AffineMap, LinearForm, rat, rat_str

Monomial = tuple[int, ...]


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


class Poly:
    """Sparse polynomial over exact rationals."""

    __slots__ = ("dim", "terms", "_key", "_floats")

    def __init__(self, dim: int, terms=None):
        self.dim = dim
        clean: dict[Monomial, Fraction] = {}
        if terms:
            items = terms.items() if hasattr(terms, "items") else terms
            for exps, coeff in items:
                exps = tuple(int(e) for e in exps)
                if len(exps) != dim:
                    raise ValueError("monomial arity mismatch")
                if any(e < 0 for e in exps):
                    raise ValueError("negative exponent")
                coeff = rat(coeff)
                if coeff == 0:
                    continue
                clean[exps] = clean.get(exps, Fraction(0)) + coeff
                if clean[exps] == 0:
                    del clean[exps]
        self.terms = clean
        self._key = tuple(sorted(((sum(e), e, c) for e, c in clean.items())))
        self._floats = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(dim: int) -> "Poly":
        return Poly(dim)

    @staticmethod
    def constant(dim: int, c) -> "Poly":
        return Poly(dim, {tuple([0] * dim): rat(c)})

    @staticmethod
    def variable(dim: int, index: int) -> "Poly":
        exps = [0] * dim
        exps[index] = 1
        return Poly(dim, {tuple(exps): Fraction(1)})

    @staticmethod
    def from_linear(form: LinearForm) -> "Poly":
        dim = form.dim
        terms = {tuple([0] * dim): form.constant}
        for i, g in enumerate(form.gradient):
            exps = [0] * dim
            exps[i] = 1
            terms[tuple(exps)] = g
        return Poly(dim, terms)

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, index: int) -> int:
        return max((e[index] for e in self.terms), default=0)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return [(e, c) for (_, e, c) in self._key]

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, self._key))

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        bits = []
        for e, c in self.sorted_terms():
            mono = "*".join(f"x{i}^{k}" if k > 1 else f"x{i}" for i, k in enumerate(e) if k)
            bits.append(f"{rat_str(c)}{'*' + mono if mono else ''}")
        return "Poly(" + " + ".join(bits) + ")"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.dim, other)
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Poly(self.dim, terms)

    def __neg__(self) -> "Poly":
        return Poly(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.dim, other)
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = rat(other)
            return Poly(self.dim, {e: k * c for e, k in self.terms.items()})
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        out: dict[Monomial, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Poly(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power")
        result = Poly.constant(self.dim, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- evaluation ---------------------------------------------------------

    def __call__(self, point: Sequence[Fraction]) -> Fraction:
        if len(point) != self.dim:
            raise ValueError("point arity mismatch")
        point = [rat(x) for x in point]
        powers: list[list[Fraction]] = []
        for i in range(self.dim):
            d = self.degree_in(i)
            row = [Fraction(1)]
            for _ in range(d):
                row.append(row[-1] * point[i])
            powers.append(row)
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for i, k in enumerate(e):
                if k:
                    v *= powers[i][k]
            total += v
        return total

    def float_terms(self) -> list[tuple[Monomial, float]]:
        """Term list with float coefficients, cached (for numeric scanning)."""
        if self._floats is None:
            self._floats = [(e, float(c)) for e, c in self.terms.items()]
        return self._floats

    def int_scaled(self) -> tuple[int, list[tuple[Monomial, int]]]:
        """(L, terms) with integer coefficients L*c for every coefficient c."""
        L = 1
        for c in self.terms.values():
            L = _lcm(L, c.denominator)
        return L, [(e, int(c * L)) for e, c in self.terms.items()]

    def eval_scaled(self, nums: Sequence[int], den: int, total_deg: int, scale: int) -> int:
        """Integer value of scale * den^total_deg * p(nums/den).

        ``scale`` must clear all coefficient denominators and total_deg must be
        at least deg(p); used by the gcd-free exact chain evaluator.
        """
        powers: list[list[int]] = []
        for i in range(self.dim):
            d = self.degree_in(i)
            row = [1]
            for _ in range(d):
                row.append(row[-1] * nums[i])
            powers.append(row)
        dpow = [1]
        for _ in range(total_deg):
            dpow.append(dpow[-1] * den)
        total = 0
        for e, c in self.terms.items():
            ic = c * scale
            if ic.denominator != 1:
                raise ValueError("scale does not clear denominators")
            v = ic.numerator
            for i, k in enumerate(e):
                if k:
                    v *= powers[i][k]
            total += v * dpow[total_deg - sum(e)]
        return total

    # -- substitution and variable plumbing ---------------------------------

    def substitute(self, slot: int, q: "Poly") -> "Poly":
        """Replace variable ``slot`` by the polynomial q (same dimension)."""
        if q.dim != self.dim:
            raise ValueError("dimension mismatch")
        powers: dict[int, Poly] = {0: Poly.constant(self.dim, 1)}
        out = Poly.zero(self.dim)
        for e, c in self.terms.items():
            k = e[slot]
            if k not in powers:
                p = powers[max(powers)]
                for j in range(max(powers), k):
                    p = p * q
                    powers[j + 1] = p
            rest = list(e)
            rest[slot] = 0
            mono = Poly(self.dim, {tuple(rest): c})
            out = out + mono * powers[k]
        return out

    def composed_with(self, args: Sequence["Poly"]) -> "Poly":
        """Simultaneous substitution x_i := args[i]; output has args' dimension."""
        if len(args) != self.dim:
            raise ValueError("need one polynomial per variable")
        out_dim = args[0].dim
        powers: list[dict[int, Poly]] = [{0: Poly.constant(out_dim, 1)} for _ in args]
        out = Poly.zero(out_dim)
        for e, c in self.terms.items():
            v = Poly.constant(out_dim, c)
            for i, k in enumerate(e):
                if k:
                    memo = powers[i]
                    if k not in memo:
                        top = max(memo)
                        p = memo[top]
                        for j in range(top, k):
                            p = p * args[i]
                            memo[j + 1] = p
                    v = v * memo[k]
            out = out + v
        return out

    def partial(self, values: dict[int, Fraction]) -> "Poly":
        """Fix some variables to exact constants; remaining variables keep
        their relative order in a lower-dimensional polynomial."""
        keep = [i for i in range(self.dim) if i not in values]
        new_dim = len(keep)
        pos = {v: i for i, v in enumerate(keep)}
        out: dict[Monomial, Fraction] = {}
        for e, c in self.terms.items():
            coeff = c
            ne = [0] * new_dim
            for i, k in enumerate(e):
                if not k:
                    continue
                if i in values:
                    coeff *= rat(values[i]) ** k
                else:
                    ne[pos[i]] = k
            if coeff == 0:
                continue
            key = tuple(ne)
            out[key] = out.get(key, Fraction(0)) + coeff
        return Poly(new_dim, out)

    def remap(self, new_dim: int, var_map: Sequence[int]) -> "Poly":
        """Re-route variable i to var_map[i] (exponents of merged slots add)."""
        out: dict[Monomial, Fraction] = {}
        for e, c in self.terms.items():
            ne = [0] * new_dim
            for i, k in enumerate(e):
                ne[var_map[i]] += k
            key = tuple(ne)
            out[key] = out.get(key, Fraction(0)) + c
        return Poly(new_dim, out)

    def negate_vars(self, indices) -> "Poly":
        idx = set(indices)
        out = {}
        for e, c in self.terms.items():
            s = sum(e[i] for i in idx)
            out[e] = -c if s % 2 else c
        return Poly(self.dim, out)

    def lift(self, new_dim: int) -> "Poly":
        """Embed into more variables, keeping indices."""
        if new_dim < self.dim:
            raise ValueError("cannot shrink")
        return self.remap(new_dim, list(range(self.dim)))

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "terms": [{"exps": list(e), "coeff": rat_str(c)} for e, c in self.sorted_terms()],
        }

    @staticmethod
    def from_json(obj) -> "Poly":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return Poly(int(obj["dim"]), {tuple(t["exps"]): rat(t["coeff"]) for t in obj["terms"]})


def eval_poly(p: Poly, point: Sequence[Fraction]) -> Fraction:
    return p(point)


def substitute(p: Poly, slot: int, q: Poly) -> Poly:
    return p.substitute(slot, q)


def rational_substitute(p: Poly, slot: int, num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Substitute num/den for a variable, clearing denominators.

    Returns (den^d * p[slot := num/den], den^d) with d the slot degree of p,
    so num_out/den_out equals the rational substitution wherever den != 0.
    """
    if num.dim != p.dim or den.dim != p.dim:
        raise ValueError("dimension mismatch")
    if den.is_zero():
        raise ValueError("denominator is identically zero")
    d = p.degree_in(slot)
    num_pows: dict[int, Poly] = {0: Poly.constant(p.dim, 1)}
    den_pows: dict[int, Poly] = {0: Poly.constant(p.dim, 1)}

    def pow_of(memo, base, k):
        if k not in memo:
            top = max(memo)
            q = memo[top]
            for j in range(top, k):
                q = q * base
                memo[j + 1] = q
        return memo[k]

    out = Poly.zero(p.dim)
    for e, c in p.terms.items():
        k = e[slot]
        rest = list(e)
        rest[slot] = 0
        mono = Poly(p.dim, {tuple(rest): c})
        out = out + mono * pow_of(num_pows, num, k) * pow_of(den_pows, den, d - k)
    return out, pow_of(den_pows, den, d)


# ---------------------------------------------------------------------------
# polynomial maps and chains
# ---------------------------------------------------------------------------


class PolyMap:
    """A polynomial self-map of R^dim, one Poly per component."""

    __slots__ = ("dim", "components", "_scale", "_maxdeg", "_float_cache")

    def __init__(self, components: Sequence[Poly]):
        components = tuple(components)
        if not components:
            raise ValueError("empty map")
        dim = components[0].dim
        for c in components:
            if c.dim != dim:
                raise ValueError("component dimension mismatch")
        if len(components) != dim:
            raise ValueError("map must be a self-map of R^dim")
        self.dim = dim
        self.components = components
        scale = 1
        for comp in components:
            for c in comp.terms.values():
                scale = _lcm(scale, c.denominator)
        self._scale = scale
        self._maxdeg = max(c.degree() for c in components)
        self._float_cache = None

    @staticmethod
    def identity(dim: int) -> "PolyMap":
        return PolyMap(tuple(Poly.variable(dim, i) for i in range(dim)))

    def apply(self, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
        return tuple(c(point) for c in self.components)

    def __call__(self, point):
        return self.apply(point)

    def eval_pair(self, nums: Sequence[int], den: int) -> tuple[tuple[int, ...], int]:
        """Evaluate at nums/den as a shared-denominator integer pair."""
        D, L = self._maxdeg, self._scale
        outs = tuple(c.eval_scaled(nums, den, D, L) for c in self.components)
        return outs, L * den ** D

    def degree(self) -> int:
        return self._maxdeg

    def compose_after(self, inner: "PolyMap") -> "PolyMap":
        args = list(inner.components)
        return PolyMap(tuple(c.composed_with(args) for c in self.components))

    def eval_float(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            maxdeg = [max(c.degree_in(i) for c in self.components) for i in range(self.dim)]
            pow_tabs = []
            for i in range(self.dim):
                tab = np.empty((maxdeg[i] + 1, pts.shape[0]))
                tab[0] = 1.0
                for k in range(1, maxdeg[i] + 1):
                    tab[k] = tab[k - 1] * pts[:, i]
                pow_tabs.append(tab)
            for j, comp in enumerate(self.components):
                acc = np.zeros(pts.shape[0])
                for e, c in comp.terms.items():
                    term = np.full(pts.shape[0], float(c))
                    for i, k in enumerate(e):
                        if k:
                            term = term * pow_tabs[i][k]
                    acc += term
                out[:, j] = acc
        return out

    def to_json(self) -> dict:
        return {"kind": "polymap", "components": [c.to_json() for c in self.components]}

    @staticmethod
    def from_json(obj: dict) -> "PolyMap":
        return PolyMap(tuple(Poly.from_json(c) for c in obj["components"]))

    def __eq__(self, other):
        return isinstance(other, PolyMap) and self.components == other.components

    def __hash__(self):
        return hash(self.components)


Step = Union[PolyMap, AffineMap]


class MapChain:
    """Ordered composition of polynomial and affine steps.

    Evaluation folds left to right: the first listed step is applied first.
    ``meta`` optionally carries one structural annotation per step (set by the
    synthesis code, not serialized) that lets the verifier propose preimages
    by walking the chain backwards.
    """

    __slots__ = ("dim", "steps", "meta")

    def __init__(self, dim: int, steps: Sequence[Step] = (), meta=None):
        self.dim = dim
        self.steps = tuple(steps)
        self.meta = tuple(meta) if meta is not None else None
        if self.meta is not None and len(self.meta) != len(self.steps):
            raise ValueError("one annotation per step required")
        for s in self.steps:
            if s.dim != dim:
                raise ValueError("step dimension mismatch")

    def then(self, *steps: Step, meta=None) -> "MapChain":
        new = []
        new_meta = []
        metas = meta if meta is not None else [None] * len(steps)
        for s, mm in zip(steps, metas):
            if isinstance(s, AffineMap) and s.is_identity():
                continue
            new.append(s)
            new_meta.append(mm if mm is not None else
                            ({"kind": "affine"} if isinstance(s, AffineMap) else None))
        if self.meta is None and all(m is None or m == {"kind": "affine"} for m in new_meta):
            base_meta = None
        else:
            base_meta = list(self.meta) if self.meta is not None else \
                [{"kind": "affine"} if isinstance(s, AffineMap) else None for s in self.steps]
        if base_meta is None:
            return MapChain(self.dim, self.steps + tuple(new))
        return MapChain(self.dim, self.steps + tuple(new), base_meta + new_meta)

    def concat(self, other: "MapChain") -> "MapChain":
        if self.meta is None and other.meta is None:
            return MapChain(self.dim, self.steps + other.steps)
        meta_a = list(self.meta) if self.meta is not None else \
            [{"kind": "affine"} if isinstance(s, AffineMap) else None for s in self.steps]
        meta_b = list(other.meta) if other.meta is not None else \
            [{"kind": "affine"} if isinstance(s, AffineMap) else None for s in other.steps]
        return MapChain(self.dim, self.steps + other.steps, meta_a + meta_b)

    def __len__(self):
        return len(self.steps)

    def chain_eval(self, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """Exact evaluation through all steps."""
        nums, den = _to_pair(point)
        for step in self.steps:
            nums, den = _step_pair(step, nums, den)
        return tuple(Fraction(n, den) for n in nums)

    def eval_pair(self, nums: Sequence[int], den: int) -> tuple[tuple[int, ...], int]:
        for step in self.steps:
            nums, den = _step_pair(step, nums, den)
        return tuple(nums), den

    def eval_float(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            for step in self.steps:
                if isinstance(step, AffineMap):
                    m = np.array([[float(a) for a in row] for row in step.matrix])
                    t = np.array([float(x) for x in step.translation])
                    pts = pts @ m.T + t
                else:
                    pts = step.eval_float(pts)
        return pts

    def expand(self, degree_cap: int) -> PolyMap:
        """Compose all steps into a single PolyMap, guarding total degree."""
        current = PolyMap.identity(self.dim)
        for idx, step in enumerate(self.steps):
            before = current.degree()
            pm = _affine_to_polymap(step) if isinstance(step, AffineMap) else step
            if before * pm.degree() > degree_cap:
                raise DegreeCapExceeded(
                    f"step {idx} would exceed degree cap {degree_cap}", step_index=idx)
            current = pm.compose_after(current)
            if current.degree() > degree_cap:
                raise DegreeCapExceeded(
                    f"step {idx} exceeded degree cap {degree_cap}", step_index=idx)
        return current

    def to_json(self) -> dict:
        return {"dim": self.dim, "steps": [s.to_json() for s in self.steps]}

    @staticmethod
    def from_json(obj) -> "MapChain":
        if isinstance(obj, str):
            obj = json.loads(obj)
        steps = []
        for s in obj["steps"]:
            if s["kind"] == "affine":
                steps.append(AffineMap.from_json(s))
            elif s["kind"] == "polymap":
                steps.append(PolyMap.from_json(s))
            else:
                raise ValueError(f"unknown step kind {s['kind']!r}")
        return MapChain(int(obj["dim"]), steps)

    def __eq__(self, other):
        return isinstance(other, MapChain) and self.dim == other.dim and self.steps == other.steps


def _to_pair(point: Sequence[Fraction]) -> tuple[tuple[int, ...], int]:
    point = [rat(x) for x in point]
    den = 1
    for x in point:
        den = _lcm(den, x.denominator)
    return tuple(x.numerator * (den // x.denominator) for x in point), den


def _step_pair(step: Step, nums: Sequence[int], den: int) -> tuple[tuple[int, ...], int]:
    if isinstance(step, AffineMap):
        L = 1
        for row in step.matrix:
            for a in row:
                L = _lcm(L, a.denominator)
        for t in step.translation:
            L = _lcm(L, t.denominator)
        out = []
        for row, t in zip(step.matrix, step.translation):
            acc = 0
            for a, n in zip(row, nums):
                ia = a * L
                acc += ia.numerator * n
            it = t * L
            acc += it.numerator * den
            out.append(acc)
        return tuple(out), L * den
    return step.eval_pair(nums, den)


def _affine_to_polymap(a: AffineMap) -> PolyMap:
    comps = []
    for row, t in zip(a.matrix, a.translation):
        comps.append(Poly.from_linear(LinearForm(row, t)))
    return PolyMap(tuple(comps))


def chain_eval(chain: MapChain, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return chain.chain_eval(point)


def expand(chain: MapChain, degree_cap: int) -> PolyMap:
    return chain.expand(degree_cap)


def extend_polymap(pm: PolyMap, total_dim: int) -> PolyMap:
    """Extend a self-map of the first k coordinates by the identity."""
    k = pm.dim
    comps = [c.lift(total_dim) for c in pm.components]
    comps += [Poly.variable(total_dim, i) for i in range(k, total_dim)]
    return PolyMap(tuple(comps))


def extend_chain(chain: MapChain, total_dim: int) -> MapChain:
    steps: list[Step] = []
    meta: list = []
    old_meta = chain.meta if chain.meta is not None else [None] * len(chain.steps)
    for s, mm in zip(chain.steps, old_meta):
        if isinstance(s, AffineMap):
            steps.append(s.block_extend(total_dim))
            meta.append({"kind": "affine"})
        else:
            steps.append(extend_polymap(s, total_dim))
            if mm is not None and "sub_dim" not in mm:
                mm = dict(mm)
                mm["sub_dim"] = chain.dim
            meta.append(mm)
    if chain.meta is None:
        return MapChain(total_dim, steps)
    return MapChain(total_dim, steps, meta)
