import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyimage.errors import DegreeCapExceeded
from polyimage.geometry import AffineMap, LinearForm
from polyimage.polyalg import (MapChain, Poly, PolyMap, extend_chain,
                               rational_substitute)


def V(i, dim=2):
    return Poly.variable(dim, i)


def test_eval_examples():
    assert Poly(1, {(2,): 1})([F(3)]) == 9
    assert Poly(2, {(0, 0): 1, (1, 1): -1})([F(1), F(1)]) == 0
    assert Poly(2, {(0, 1): 1, (2, 0): -1, (0, 0): -1})([F(2), F(7)]) == 2


def test_substitute_examples():
    x1, x2 = V(0), V(1)
    assert (x1 ** 2).substitute(0, x1 + x2) == x1 ** 2 + 2 * x1 * x2 + x2 ** 2
    assert x2.substitute(0, x1 * x2 + 5) == x2
    assert (x1 * x2).substitute(1, x1) == x1 ** 2


def test_rational_substitute_examples():
    x1, x2 = V(0), V(1)
    one = Poly.constant(2, 1)
    num, den = rational_substitute(x1, 0, x2, one + x2 ** 2)
    assert num == x2 and den == one + x2 ** 2
    num, den = rational_substitute(x1 ** 2, 0, x2, x2 + 1)
    assert num == x2 ** 2 and den == (x2 + 1) ** 2
    num, den = rational_substitute(x1 + x2, 0, one, x2)
    assert num == one + x2 ** 2 and den == x2


def test_rational_substitute_pointwise():
    rng = random.Random(5)
    x1, x2 = V(0), V(1)
    p = x1 ** 3 - 2 * x1 * x2 + Poly.constant(2, F(1, 3))
    num = x2 ** 2 - 1
    den = x2 + 3
    n_out, d_out = rational_substitute(p, 0, num, den)
    for _ in range(100):
        pt = (F(rng.randint(-40, 40), 8), F(rng.randint(-40, 40), 8))
        if den(pt) == 0:
            continue
        sub = p((num(pt) / den(pt), pt[1]))
        assert n_out(pt) / d_out(pt) == sub


def test_chain_eval_order():
    sq = PolyMap((Poly(1, {(2,): 1}),))
    shift = AffineMap(((F(1),),), (F(-1),))
    assert MapChain(1, [sq, shift]).chain_eval([F(3)]) == (F(8),)
    assert MapChain(1, [shift, sq]).chain_eval([F(3)]) == (F(4),)
    assert MapChain(1, []).chain_eval([F(5)]) == (F(5),)


def test_expand_and_cap():
    sq = PolyMap((Poly(1, {(2,): 1}),))
    chain = MapChain(1, [sq, sq])
    assert chain.expand(10).components[0] == Poly(1, {(4,): 1})
    with pytest.raises(DegreeCapExceeded) as err:
        chain.expand(3)
    assert err.value.step_index == 1


def test_expand_agrees_with_chain_eval():
    rng = random.Random(11)
    x1, x2 = V(0), V(1)
    pm = PolyMap((x1 * x2 - 1, x2 ** 2 + x1))
    amap = AffineMap(((F(2), F(1)), (F(0), F(1))), (F(1), F(-3)))
    chain = MapChain(2, [amap, pm, pm])
    flat = chain.expand(100)
    for _ in range(100):
        x = (F(rng.randint(-24, 24), 8), F(rng.randint(-24, 24), 8))
        assert flat.apply(x) == chain.chain_eval(x)


def test_eval_pair_matches_fractions():
    rng = random.Random(2)
    x1, x2 = V(0), V(1)
    pm = PolyMap((x1 ** 3 - F(1, 2) * x2, x1 * x2 + F(2, 3)))
    chain = MapChain(2, [pm, pm])
    for _ in range(50):
        x = (F(rng.randint(-40, 40), 16), F(rng.randint(-40, 40), 16))
        nums, den = chain.eval_pair(*_pair(x))
        expect = chain.chain_eval(x)
        assert tuple(F(nn, den) for nn in nums) == expect


def _pair(x):
    den = 1
    for v in x:
        den = den * v.denominator // __import__("math").gcd(den, v.denominator)
    return tuple(v.numerator * (den // v.denominator) for v in x), den


def test_eval_float():
    x1, x2 = V(0), V(1)
    pm = PolyMap((x1 * x2, x2 - x1))
    chain = MapChain(2, [pm])
    out = chain.eval_float(np.array([[2.0, 3.0], [1.0, -1.0]]))
    assert np.allclose(out, [[6.0, 1.0], [-1.0, -2.0]])


def test_partial():
    p = V(0) ** 2 * V(1) + V(1) ** 3 - 2
    q = p.partial({0: F(3)})
    assert q.dim == 1
    assert q([F(2)]) == p([F(3), F(2)])


def test_extend_chain_identity_on_new_coords():
    sq = PolyMap((Poly(1, {(2,): 1}),))
    chain = extend_chain(MapChain(1, [sq]), 3)
    assert chain.chain_eval([F(2), F(5), F(-7)]) == (F(4), F(5), F(-7))


def test_serialization_roundtrip():
    p = Poly(2, {(1, 2): F(3, 7), (0, 0): -2})
    assert Poly.from_json(p.to_json()) == p
    chain = MapChain(2, [AffineMap(((F(1), F(0)), (F(1), F(1))), (F(0), F(2))),
                         PolyMap((V(0) * V(1), V(1) ** 3 - 1))])
    assert MapChain.from_json(chain.to_json()) == chain


def test_meta_propagation():
    sq = PolyMap((Poly(1, {(2,): 1}),))
    chain = MapChain(1, [sq], [{"kind": "square", "index": 0}])
    ext = extend_chain(chain, 2)
    assert ext.meta[0]["kind"] == "square"
    more = ext.then(AffineMap.identity(2))  # identity dropped
    assert len(more.steps) == 1
    shifted = ext.then(AffineMap(((F(1), F(0)), (F(0), F(1))), (F(1), F(0))))
    assert shifted.meta[-1] == {"kind": "affine"}


coeffs = st.integers(-4, 4)
exps = st.tuples(st.integers(0, 3), st.integers(0, 3))


@st.composite
def polys(draw):
    terms = draw(st.dictionaries(exps, coeffs, max_size=5))
    return Poly(2, terms)


@given(polys(), polys(), polys())
@settings(max_examples=200, deadline=None)
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(polys())
@settings(max_examples=100, deadline=None)
def test_serialize_canonical(p):
    assert Poly.from_json(p.to_json()) == p
