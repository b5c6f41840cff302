"""Exact rational polyhedral geometry.

Everything here is computed over arbitrary-precision rationals: H-representations
h_i(x) = a_i . x + b_i >= 0, faces, recession cones, coordinate projections and
the affine repositionings the map constructions rely on.  Sign decisions (facet
classification, cone membership, redundancy) are brittle in floating point, so
no floats appear anywhere in this module.

Feasibility, redundancy removal and exact point sampling run on a small
Fourier-Motzkin engine with strict/non-strict rows; the polyhedra handled by
this package are desk scale (n <= 4, a handful of constraints), where FM is
simpler and just as exact as a pivoting LP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Optional, Sequence

from .errors import EmptyInterior, FacetTooThin, NoInteriorDirection

Scalar = Fraction
Vector = tuple[Fraction, ...]


def rat(x) -> Fraction:
    """Parse an exact rational from an int, Fraction, or a 'p/q' string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact rational: {x!r}")


def rat_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def vec(*xs) -> Vector:
    return tuple(rat(x) for x in xs)


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


# ---------------------------------------------------------------------------
# linear forms and polyhedra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """Affine form h(x) = gradient . x + constant; the half-space is {h >= 0}."""

    gradient: Vector
    constant: Fraction

    def __post_init__(self):
        object.__setattr__(self, "gradient", tuple(rat(g) for g in self.gradient))
        object.__setattr__(self, "constant", rat(self.constant))

    @property
    def dim(self) -> int:
        return len(self.gradient)

    def __call__(self, point: Sequence[Fraction]) -> Fraction:
        return dot(self.gradient, point) + self.constant

    def vec(self, direction: Sequence[Fraction]) -> Fraction:
        """The vectorial form: gradient . v (constant dropped)."""
        return dot(self.gradient, direction)

    def scale(self, c: Fraction) -> "LinearForm":
        c = rat(c)
        return LinearForm(tuple(g * c for g in self.gradient), self.constant * c)

    def shift(self, delta) -> "LinearForm":
        return LinearForm(self.gradient, self.constant + rat(delta))

    def is_zero(self) -> bool:
        return all(g == 0 for g in self.gradient) and self.constant == 0

    def canonical_key(self) -> tuple:
        """Key identifying the form up to positive scaling."""
        nums = [g.numerator for g in self.gradient] + [self.constant.numerator]
        dens = [g.denominator for g in self.gradient] + [self.constant.denominator]
        lcm = 1
        for d in dens:
            lcm = lcm * d // gcd(lcm, d)
        ints = [n * (lcm // d) for n, d in zip(nums, dens)]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        if g:
            ints = [v // g for v in ints]
        return tuple(ints)

    def to_json(self) -> dict:
        return {"a": [rat_str(g) for g in self.gradient], "b": rat_str(self.constant)}

    @staticmethod
    def from_json(obj: dict) -> "LinearForm":
        return LinearForm(tuple(rat(a) for a in obj["a"]), rat(obj["b"]))


@dataclass(frozen=True)
class Polyhedron:
    """Intersection of closed half-spaces {h_i >= 0} in R^dim."""

    dim: int
    constraints: tuple[LinearForm, ...]
    minimal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for h in self.constraints:
            if h.dim != self.dim:
                raise ValueError("constraint dimension mismatch")

    def contains(self, point: Sequence[Fraction], strict: bool = False) -> bool:
        if strict:
            return all(h(point) > 0 for h in self.constraints)
        return all(h(point) >= 0 for h in self.constraints)

    def interior_contains(self, point: Sequence[Fraction]) -> bool:
        return self.contains(point, strict=True)

    def is_universe(self) -> bool:
        return not self.constraints

    def to_json(self) -> dict:
        return {"dim": self.dim, "constraints": [h.to_json() for h in self.constraints]}

    @staticmethod
    def from_json(obj) -> "Polyhedron":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return Polyhedron(int(obj["dim"]), tuple(LinearForm.from_json(c) for c in obj["constraints"]))


def halfspaces(dim: int, *rows) -> Polyhedron:
    """Convenience builder: halfspaces(2, ([1,0],0), ([0,-1],1)) etc."""
    return Polyhedron(dim, tuple(LinearForm(vec(*g), rat(b)) for g, b in rows))


@dataclass(frozen=True)
class RecessionCone:
    """Vectorial cone of a polyhedron: same gradients, zero constants."""

    dim: int
    constraints: tuple[LinearForm, ...]

    def contains(self, direction: Sequence[Fraction], strict: bool = False) -> bool:
        if strict:
            return all(h.vec(direction) > 0 for h in self.constraints)
        return all(h.vec(direction) >= 0 for h in self.constraints)

    def as_polyhedron(self) -> Polyhedron:
        return Polyhedron(self.dim, tuple(LinearForm(h.gradient, Fraction(0)) for h in self.constraints))


@dataclass(frozen=True)
class FaceDescriptor:
    """A face of a polyhedron, named by the constraints active on it."""

    active: frozenset[int]
    affine_dim: int
    vertical: bool

    def sort_key(self) -> tuple:
        return (self.affine_dim, tuple(sorted(self.active)))


# ---------------------------------------------------------------------------
# Fourier-Motzkin engine (strict/non-strict rows)
# ---------------------------------------------------------------------------

# A row is (coeffs, const, strict) meaning coeffs . x + const >= 0 (or > 0).
Row = tuple[Vector, Fraction, bool]


def _row_key(row: Row) -> tuple:
    coeffs, const, strict = row
    form = LinearForm(coeffs, const)
    return form.canonical_key() + (strict,)


def _dedup(rows: list[Row]) -> list[Row]:
    seen = {}
    for row in rows:
        key = _row_key(row)
        base = key[:-1]
        prev = seen.get(base)
        # strict row subsumes an identical non-strict one
        if prev is None or (row[2] and not prev[2]):
            seen[base] = row
    return list(seen.values())


def _eliminate(rows: list[Row], j: int) -> Optional[list[Row]]:
    """Eliminate variable j; returns None when a constant row is contradictory."""
    zero, pos, neg = [], [], []
    for coeffs, const, strict in rows:
        c = coeffs[j]
        if c == 0:
            zero.append((coeffs, const, strict))
        elif c > 0:
            pos.append((coeffs, const, strict))
        else:
            neg.append((coeffs, const, strict))
    out = []
    for coeffs, const, strict in zero:
        if all(c == 0 for c in coeffs):
            if const < 0 or (strict and const == 0):
                return None
            continue  # trivially true
        out.append((coeffs, const, strict))
    for (pc, pb, ps) in pos:
        for (nc, nb, ns) in neg:
            a, b = pc[j], -nc[j]
            coeffs = tuple(b * x + a * y for x, y in zip(pc, nc))
            const = b * pb + a * nb
            strict = ps or ns
            if all(c == 0 for c in coeffs):
                if const < 0 or (strict and const == 0):
                    return None
                continue
            out.append((coeffs, const, strict))
    return _dedup(out)


def _system_rows(dim: int, ge=(), gt=(), eq=()) -> list[Row]:
    rows: list[Row] = []
    for h in ge:
        rows.append((h.gradient, h.constant, False))
    for h in gt:
        rows.append((h.gradient, h.constant, True))
    for h in eq:
        rows.append((h.gradient, h.constant, False))
        neg = h.scale(Fraction(-1))
        rows.append((neg.gradient, neg.constant, False))
    return [r for r in rows if any(c != 0 for c in r[0]) or r[1] != 0 or r[2]]


def feasible(dim: int, ge=(), gt=(), eq=()) -> bool:
    """Exact feasibility of {ge >= 0, gt > 0, eq = 0} via Fourier-Motzkin."""
    rows = _system_rows(dim, ge, gt, eq)
    for coeffs, const, strict in rows:
        if all(c == 0 for c in coeffs):
            if const < 0 or (strict and const == 0):
                return False
    rows = _dedup(rows)
    for j in range(dim):
        rows = _eliminate(rows, j)
        if rows is None:
            return False
    for coeffs, const, strict in rows:
        if const < 0 or (strict and const == 0):
            return False
    return True


def _bounds_for(rows: list[Row], j: int, point: dict[int, Fraction]):
    """Bounds on variable j after substituting the already-fixed variables."""
    lo = hi = None
    lo_strict = hi_strict = False
    for coeffs, const, strict in rows:
        c = coeffs[j]
        if c == 0:
            continue
        rest = const + sum((coeffs[k] * point[k] for k in point if coeffs[k] != 0), Fraction(0))
        bound = -rest / c
        if c > 0:
            if lo is None or bound > lo:
                lo, lo_strict = bound, strict
            elif bound == lo:
                lo_strict = lo_strict or strict
        else:
            if hi is None or bound < hi:
                hi, hi_strict = bound, strict
            elif bound == hi:
                hi_strict = hi_strict or strict
    return lo, lo_strict, hi, hi_strict


def sample_point(dim: int, ge=(), gt=(), eq=()) -> Optional[Vector]:
    """One exact point of {ge >= 0, gt > 0, eq = 0}, or None when infeasible.

    Back-substitutes midpoints through the FM elimination stack, so the result
    is deterministic and lies strictly inside every strict constraint.
    """
    rows = _dedup(_system_rows(dim, ge, gt, eq))
    stack = [rows]
    for j in range(dim - 1, 0, -1):
        rows = _eliminate(rows, j)
        if rows is None:
            return None
        stack.append(rows)
    point: dict[int, Fraction] = {}
    for j in range(dim):
        lo, lo_s, hi, hi_s = _bounds_for(stack[dim - 1 - j], j, point)
        if lo is not None and hi is not None:
            if lo > hi or (lo == hi and (lo_s or hi_s)):
                return None
            value = lo if lo == hi else (lo + hi) / 2
        elif lo is not None:
            value = lo + 1 if lo_s else lo
        elif hi is not None:
            value = hi - 1 if hi_s else hi
        else:
            value = Fraction(0)
        point[j] = value
    pt = tuple(point[j] for j in range(dim))
    # validate (guards against rare degenerate eliminations)
    for h in ge:
        if h(pt) < 0:
            return None
    for h in gt:
        if h(pt) <= 0:
            return None
    for h in eq:
        if h(pt) != 0:
            return None
    return pt


# ---------------------------------------------------------------------------
# exact linear algebra helpers
# ---------------------------------------------------------------------------


def rank(vectors: Sequence[Sequence[Fraction]]) -> int:
    m = [list(v) for v in vectors]
    r = 0
    cols = len(m[0]) if m else 0
    for c in range(cols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    return r


def kernel_basis(vectors: Sequence[Sequence[Fraction]], dim: int) -> list[Vector]:
    """Basis of the joint kernel {v : row . v = 0 for every row}."""
    m = [list(v) for v in vectors if any(x != 0 for x in v)]
    pivots = []
    r = 0
    for c in range(dim):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = Fraction(1) / m[r][c]
        m[r] = [a * inv for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(dim) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * dim
        v[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            v[pcol] = -m[i][fcol]
        basis.append(tuple(v))
    return basis


def solve_linear(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Optional[Vector]:
    """One solution of rows . x = rhs, or None when inconsistent."""
    dim = len(rows[0]) if rows else 0
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(dim):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = Fraction(1) / m[r][c]
        m[r] = [a * inv for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    for i in range(r, len(m)):
        if m[i][dim] != 0:
            return None
    x = [Fraction(0)] * dim
    for i, c in enumerate(pivots):
        x[c] = m[i][dim]
    return tuple(x)


def complete_to_basis(partial: Sequence[Vector], dim: int) -> list[Vector]:
    """Extend independent vectors to a basis using standard basis vectors."""
    basis = [tuple(v) for v in partial]
    for j in range(dim):
        e = tuple(Fraction(1) if k == j else Fraction(0) for k in range(dim))
        if rank(basis + [e]) > len(basis):
            basis.append(e)
        if len(basis) == dim:
            break
    if len(basis) != dim:
        raise ValueError("could not complete basis")
    return basis


# ---------------------------------------------------------------------------
# affine maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix . x + translation with an exactly invertible matrix."""

    matrix: tuple[Vector, ...]
    translation: Vector

    def __post_init__(self):
        object.__setattr__(self, "matrix", tuple(tuple(rat(a) for a in row) for row in self.matrix))
        object.__setattr__(self, "translation", tuple(rat(t) for t in self.translation))

    @property
    def dim(self) -> int:
        return len(self.translation)

    @staticmethod
    def identity(dim: int) -> "AffineMap":
        return AffineMap(
            tuple(tuple(Fraction(1) if i == j else Fraction(0) for j in range(dim)) for i in range(dim)),
            tuple(Fraction(0) for _ in range(dim)),
        )

    def is_identity(self) -> bool:
        n = self.dim
        return self == AffineMap.identity(n)

    def apply(self, point: Sequence[Fraction]) -> Vector:
        return tuple(dot(row, point) + t for row, t in zip(self.matrix, self.translation))

    def __call__(self, point: Sequence[Fraction]) -> Vector:
        return self.apply(point)

    def determinant(self) -> Fraction:
        m = [list(row) for row in self.matrix]
        n = len(m)
        det = Fraction(1)
        for c in range(n):
            piv = next((i for i in range(c, n) if m[i][c] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != c:
                m[c], m[piv] = m[piv], m[c]
                det = -det
            det *= m[c][c]
            inv = Fraction(1) / m[c][c]
            for i in range(c + 1, n):
                if m[i][c] != 0:
                    f = m[i][c] * inv
                    m[i] = [a - f * b for a, b in zip(m[i], m[c])]
        return det

    def inverse(self) -> "AffineMap":
        n = self.dim
        m = [list(row) + [Fraction(1) if i == j else Fraction(0) for j in range(n)]
             for i, row in enumerate(self.matrix)]
        for c in range(n):
            piv = next((i for i in range(c, n) if m[i][c] != 0), None)
            if piv is None:
                raise ValueError("singular affine map")
            m[c], m[piv] = m[piv], m[c]
            inv = Fraction(1) / m[c][c]
            m[c] = [a * inv for a in m[c]]
            for i in range(n):
                if i != c and m[i][c] != 0:
                    f = m[i][c]
                    m[i] = [a - f * b for a, b in zip(m[i], m[c])]
        minv = tuple(tuple(row[n:]) for row in m)
        tinv = tuple(-dot(row, self.translation) for row in minv)
        return AffineMap(minv, tinv)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        mat = tuple(
            tuple(dot(row, tuple(other.matrix[k][j] for k in range(self.dim))) for j in range(self.dim))
            for row in self.matrix
        )
        trans = tuple(dot(row, other.translation) + t for row, t in zip(self.matrix, self.translation))
        return AffineMap(mat, trans)

    @staticmethod
    def from_basis_columns(columns: Sequence[Vector], origin: Sequence[Fraction]) -> "AffineMap":
        """The map x -> B^-1 (x - origin) where B has the given columns.

        Sends origin to 0 and the k-th column to the k-th standard basis vector.
        """
        n = len(columns)
        b = AffineMap(tuple(tuple(columns[j][i] for j in range(n)) for i in range(n)),
                      tuple(rat(o) for o in origin))
        binv = b.inverse()
        # b.inverse() inverts x -> Bx + origin, which is exactly B^-1 (x - origin)
        return binv

    def push_form(self, h: LinearForm) -> LinearForm:
        """The form h composed with self^-1 (constraints of an image polyhedron)."""
        inv = self.inverse()
        grad = tuple(dot(h.gradient, tuple(inv.matrix[k][j] for k in range(self.dim))) for j in range(self.dim))
        const = h.constant + dot(h.gradient, inv.translation)
        return LinearForm(grad, const)

    def image_polyhedron(self, p: Polyhedron) -> Polyhedron:
        inv = self.inverse()
        forms = []
        for h in p.constraints:
            grad = tuple(dot(h.gradient, tuple(inv.matrix[k][j] for k in range(self.dim))) for j in range(self.dim))
            const = h.constant + dot(h.gradient, inv.translation)
            forms.append(LinearForm(grad, const))
        return Polyhedron(p.dim, tuple(forms), minimal=p.minimal)

    def block_extend(self, total_dim: int) -> "AffineMap":
        """Extend by the identity on trailing coordinates."""
        n = self.dim
        mat = []
        for i in range(total_dim):
            row = []
            for j in range(total_dim):
                if i < n and j < n:
                    row.append(self.matrix[i][j])
                else:
                    row.append(Fraction(1) if i == j else Fraction(0))
            mat.append(tuple(row))
        trans = tuple(self.translation[i] if i < n else Fraction(0) for i in range(total_dim))
        return AffineMap(tuple(mat), trans)

    def to_json(self) -> dict:
        return {
            "kind": "affine",
            "matrix": [[rat_str(a) for a in row] for row in self.matrix],
            "translation": [rat_str(t) for t in self.translation],
        }

    @staticmethod
    def from_json(obj: dict) -> "AffineMap":
        return AffineMap(
            tuple(tuple(rat(a) for a in row) for row in obj["matrix"]),
            tuple(rat(t) for t in obj["translation"]),
        )


# ---------------------------------------------------------------------------
# polyhedron operations
# ---------------------------------------------------------------------------


def minimal_presentation(p: Polyhedron) -> Polyhedron:
    """Remove redundant constraints; requires a nonempty interior."""
    if not feasible(p.dim, gt=p.constraints):
        raise EmptyInterior("polyhedron has empty interior", node=p)
    # exact duplicate removal first (positive-scaling duplicates collapse)
    seen = {}
    for h in p.constraints:
        seen.setdefault(h.canonical_key(), h)
    forms = list(seen.values())
    i = 0
    while i < len(forms):
        others = forms[:i] + forms[i + 1:]
        neg = forms[i].scale(Fraction(-1))
        if not feasible(p.dim, ge=others, gt=[neg]):
            forms.pop(i)  # redundant: cannot be violated while the rest hold
        else:
            i += 1
    return Polyhedron(p.dim, tuple(forms), minimal=True)


def recession_cone(p: Polyhedron) -> RecessionCone:
    return RecessionCone(p.dim, tuple(LinearForm(h.gradient, Fraction(0)) for h in p.constraints))


def cone_is_zero(cone: RecessionCone) -> bool:
    """True iff the cone is the origin only."""
    forms = [LinearForm(h.gradient, Fraction(0)) for h in cone.constraints]
    for j in range(cone.dim):
        for sgn in (1, -1):
            probe = LinearForm(tuple(Fraction(sgn) if k == j else Fraction(0) for k in range(cone.dim)),
                               Fraction(-1))
            if feasible(cone.dim, ge=forms + [probe]):
                return False
    return True


def lineality_basis(p: Polyhedron) -> list[Vector]:
    """Basis of {v : gradient_i . v = 0 for all i} (the lineality space)."""
    return kernel_basis([h.gradient for h in p.constraints], p.dim)


def is_degenerate(p: Polyhedron) -> bool:
    return len(lineality_basis(p)) > 0


def is_bounded(p: Polyhedron) -> bool:
    return cone_is_zero(recession_cone(p))


def is_layer(p: Polyhedron) -> bool:
    """True iff p is affinely equivalent to [-a, a] x R^(n-1) with a > 0."""
    lin = lineality_basis(p)
    if len(lin) != p.dim - 1:
        return False
    grads = [h.gradient for h in p.constraints if any(g != 0 for g in h.gradient)]
    if not grads:
        return False
    w = grads[0]  # all gradients are parallel: they kill the lineality hyperplane
    lo = hi = None
    for h in p.constraints:
        a = h.vec(w)
        if a == 0:
            if h.constant < 0:
                return False
            continue
        bound = -h.constant / a
        if a > 0:
            lo = bound if lo is None else max(lo, bound)
        else:
            hi = bound if hi is None else min(hi, bound)
    return lo is not None and hi is not None and lo < hi


def lineality_decomposition(p: Polyhedron) -> tuple[Polyhedron, AffineMap]:
    """Split p into (non-degenerate factor q, witness) with witness(p) = q x R^(n-k).

    The witness maps the chosen complement of the lineality space onto the first
    k coordinates and the lineality space onto the rest.
    """
    lin = lineality_basis(p)
    d = len(lin)
    k = p.dim - d
    if d == 0:
        return p, AffineMap.identity(p.dim)
    # complement spanned greedily by standard basis vectors
    basis = []
    for j in range(p.dim):
        e = tuple(Fraction(1) if i == j else Fraction(0) for i in range(p.dim))
        if rank(lin + basis + [e]) > len(lin) + len(basis):
            basis.append(e)
        if len(basis) == k:
            break
    columns = basis + lin
    witness = AffineMap.from_basis_columns(columns, tuple(Fraction(0) for _ in range(p.dim)))
    image = witness.image_polyhedron(p)
    forms = []
    for h in image.constraints:
        if any(h.gradient[j] != 0 for j in range(k, p.dim)):
            raise AssertionError("lineality coordinates did not vanish")
        forms.append(LinearForm(h.gradient[:k], h.constant))
    q = Polyhedron(k, tuple(forms))
    return q, witness


def project(p: Polyhedron) -> Polyhedron:
    """Exact H-representation of the projection dropping the last coordinate."""
    rows = [(h.gradient, h.constant, False) for h in p.constraints]
    out = _eliminate(rows, p.dim - 1)
    if out is None:
        raise ValueError("projection of an empty polyhedron")
    forms = []
    seen = set()
    for coeffs, const, _ in out:
        grad = coeffs[: p.dim - 1]
        if all(c == 0 for c in grad):
            continue
        h = LinearForm(grad, const)
        key = h.canonical_key()
        if key not in seen:
            seen.add(key)
            forms.append(h)
    return Polyhedron(p.dim - 1, tuple(forms))


def implied_active(p: Polyhedron, eq: Sequence[LinearForm]) -> Optional[frozenset[int]]:
    """Indices of p-constraints forced to equality on {p, eq = 0}; None if empty."""
    if not feasible(p.dim, ge=p.constraints, eq=eq):
        return None
    active = set()
    for i, h in enumerate(p.constraints):
        if not feasible(p.dim, ge=p.constraints, gt=[h], eq=eq):
            active.add(i)
    return frozenset(active)


def face_descriptor(p: Polyhedron, active: frozenset[int], extra_eq: Sequence[LinearForm] = ()) -> FaceDescriptor:
    grads = [p.constraints[i].gradient for i in active] + [h.gradient for h in extra_eq]
    r = rank(grads) if grads else 0
    aff_dim = p.dim - r
    # the affine hull is parallel to e_n iff e_n lies in every active kernel
    vertical = all(g[-1] == 0 for g in grads)
    return FaceDescriptor(active, aff_dim, vertical)


def face_relint_point(p: Polyhedron, active: frozenset[int]) -> Vector:
    """Exact point in the relative interior of the face named by ``active``."""
    eq = [p.constraints[i] for i in active]
    gt = [p.constraints[i] for i in range(len(p.constraints)) if i not in active]
    pt = sample_point(p.dim, gt=gt, eq=eq)
    if pt is None:
        raise ValueError("face is empty or not a face")
    return pt


def enumerate_faces(p: Polyhedron) -> list[FaceDescriptor]:
    """All nonempty proper faces of a minimal polyhedron, deduplicated."""
    m = len(p.constraints)
    found: dict[frozenset[int], FaceDescriptor] = {}
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            eq = [p.constraints[i] for i in subset]
            act = implied_active(p, eq)
            if act is None or act in found:
                continue
            found[act] = face_descriptor(p, act)
    return sorted(found.values(), key=lambda f: f.sort_key())


def boundary_fiber_faces(p: Polyhedron) -> list[FaceDescriptor]:
    """Faces of p lying over the facets of its projection (full vertical fibers)."""
    if not p.minimal:
        p = minimal_presentation(p)
    proj = project(p)
    if not proj.constraints:
        return []
    proj = minimal_presentation(proj)
    out: dict[frozenset[int], FaceDescriptor] = {}
    for h in proj.constraints:
        lift = LinearForm(h.gradient + (Fraction(0),), h.constant)
        act = implied_active(p, [lift])
        if act is None:
            continue
        if act not in out:
            out[act] = face_descriptor(p, act, extra_eq=[lift])
    return sorted(out.values(), key=lambda f: f.sort_key())


# ---------------------------------------------------------------------------
# repositioning
# ---------------------------------------------------------------------------


def _hyperplane_point(h: LinearForm) -> Vector:
    g2 = dot(h.gradient, h.gradient)
    return tuple(-h.constant * g / g2 for g in h.gradient)


def facet_subpolyhedron(p: Polyhedron, facet_index: int) -> tuple[Polyhedron, list[Vector], Vector]:
    """The facet as an (n-1)-polyhedron in hyperplane coordinates.

    Returns (facet poly, basis of the hyperplane direction space, base point).
    """
    h = p.constraints[facet_index]
    basis = kernel_basis([h.gradient], p.dim)
    p0 = _hyperplane_point(h)
    forms = []
    for j, hj in enumerate(p.constraints):
        if j == facet_index:
            continue
        grad = tuple(hj.vec(b) for b in basis)
        forms.append(LinearForm(grad, hj(p0)))
    return Polyhedron(p.dim - 1, tuple(forms)), basis, p0


def place_bounded_position(p: Polyhedron, facet: FaceDescriptor) -> AffineMap:
    """Reposition so the facet lies in {x_(n-1) = 0}, p in {x_(n-1) <= 0}, and
    every vertical line meets p in a bounded set (neither +e_n nor -e_n is a
    recession direction afterwards)."""
    if len(facet.active) != 1:
        raise ValueError("facet descriptor must name exactly one constraint")
    idx = next(iter(facet.active))
    if not p.minimal:
        p = minimal_presentation(p)
    face_poly, basis, p0 = facet_subpolyhedron(p, idx)
    try:
        face_min = minimal_presentation(face_poly)
    except EmptyInterior:
        raise FacetTooThin("facet has empty relative interior", node=p)
    if len(face_min.constraints) < 2:
        raise FacetTooThin("facet has fewer than two facets", node=p, facet=idx)

    cone = recession_cone(p)
    face_cone = RecessionCone(p.dim - 1, tuple(LinearForm(h.gradient, Fraction(0)) for h in face_poly.constraints))
    if cone_is_zero(face_cone):
        v = basis[0]
    else:
        # ell = sum of all vectorial forms is positive on the facet cone minus 0;
        # any nonzero kernel vector of ell inside the hyperplane avoids +-cone
        ell = tuple(sum((h.gradient[k] for h in p.constraints), Fraction(0)) for k in range(p.dim))
        ell_y = tuple(dot(ell, b) for b in basis)
        ker = kernel_basis([ell_y], p.dim - 1)
        if not ker:
            raise FacetTooThin("no vertical direction avoids the recession cone", node=p, facet=idx)
        v = tuple(sum(ker[0][i] * basis[i][k] for i in range(len(basis))) for k in range(p.dim))
    if cone.contains(v) or cone.contains(tuple(-c for c in v)):
        raise AssertionError("vertical candidate lies in the recession cone")

    h = p.constraints[idx]
    w = tuple(-g for g in h.gradient)
    others = [b for b in basis if rank([v, b]) == 2]
    cols = []
    for b in others:
        if rank([v] + cols + [b]) > 1 + len(cols):
            cols.append(b)
        if len(cols) == p.dim - 2:
            break
    columns = cols + [w, v]
    amap = AffineMap.from_basis_columns(columns, p0)
    return amap


def place_recession_interior(p: Polyhedron) -> AffineMap:
    """Reposition a non-degenerate unbounded polyhedron so -e_n is strictly
    interior to its recession cone (every vectorial form positive at -e_n)."""
    ones = [LinearForm(h.gradient, Fraction(-1)) for h in p.constraints]
    v = sample_point(p.dim, ge=ones)
    if v is None:
        raise NoInteriorDirection("recession cone has empty interior", node=p)
    neg_v = tuple(-c for c in v)
    columns = complete_to_basis([neg_v], p.dim)
    # put the completion first so -v maps to e_n (v to -e_n)
    columns = columns[1:] + [neg_v]
    return AffineMap.from_basis_columns(columns, tuple(Fraction(0) for _ in range(p.dim)))


def cone_relint_direction(p: Polyhedron) -> tuple[Vector, frozenset[int]]:
    """A direction in the relative interior of the recession cone.

    Returns (v, Z) where Z is the set of constraint indices whose vectorial
    form vanishes on the whole cone (these become the vertical facets once v
    is sent to -e_n).
    """
    vforms = [LinearForm(h.gradient, Fraction(0)) for h in p.constraints]
    zset = set()
    for i in range(len(vforms)):
        probe = LinearForm(vforms[i].gradient, Fraction(-1))
        if not feasible(p.dim, ge=vforms + [probe]):
            zset.add(i)
    ge = [LinearForm(vforms[i].gradient, Fraction(-1)) for i in range(len(vforms)) if i not in zset]
    eq = [vforms[i] for i in zset]
    v = sample_point(p.dim, ge=ge, eq=eq)
    if v is None:
        raise ValueError("recession cone is trivial")
    return v, frozenset(zset)
