"""Structured preimage proposals for chains built by this package.

Synthesized chains carry one annotation per step.  Walking a target point
backwards through the annotated steps needs only one-dimensional root finding
in float arithmetic, because every step fixes all coordinates but one (peel
maps), scales coordinates by a positive factor (the product-case reshaping
map), or is affine.  The proposals are heuristic: every candidate returned
here is afterwards scored by an honest forward evaluation of the chain, so a
bad proposal can never fake coverage; a good one lands on preimage branches
that random sampling cannot reach (their widths shrink like the reciprocal of
the composed derivative).
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .geometry import AffineMap
from .polyalg import MapChain, Poly


def _poly_eval_np(p: Poly, coords: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized float evaluation; coords[i] is the array for variable i."""
    arrays = [np.asarray(c, dtype=np.float64) for c in coords]
    shape = np.broadcast(*arrays).shape if len(arrays) > 1 else arrays[0].shape
    acc = np.zeros(shape)
    powers: list[dict[int, np.ndarray]] = [dict() for _ in arrays]
    for e, c in p.float_terms():
        term = None
        for i, k in enumerate(e):
            if not k:
                continue
            memo = powers[i]
            if k not in memo:
                memo[k] = arrays[i] ** k
            term = memo[k] if term is None else term * memo[k]
        if term is None:
            acc += c
        else:
            acc += c * term
    return acc


def _bisect(f, lo: float, hi: float, flo: float, iters: int = 60) -> float:
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = f(mid)
        if not math.isfinite(fm):
            return mid
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def _scan_roots(f, ts: np.ndarray, values: Optional[np.ndarray] = None,
                max_roots: int = 8) -> list[float]:
    """Roots of f between consecutive grid nodes where the sign changes."""
    vals = values if values is not None else np.array([f(t) for t in ts])
    out = []
    ok = np.isfinite(vals)
    sgn = np.sign(vals)
    for i in range(len(ts) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        if sgn[i] == 0:
            out.append(float(ts[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            out.append(_bisect(f, float(ts[i]), float(ts[i + 1]), float(vals[i])))
        if len(out) >= max_roots:
            break
    return out


# ---------------------------------------------------------------------------
# per-step inverters: each returns a list of candidate preimages of ``target``
# ---------------------------------------------------------------------------


def _invert_affine(step: AffineMap, target, rng):
    inv = step.inverse()
    m = np.array([[float(a) for a in row] for row in inv.matrix])
    t = np.array([float(x) for x in inv.translation])
    return [m @ target + t]


def _invert_square(meta, target, rng):
    i = meta["index"]
    if target[i] < 0:
        return []
    r = math.sqrt(target[i])
    out = []
    for s in (r, -r):
        cand = target.copy()
        cand[i] = s
        out.append(cand)
    return out


def _invert_halfspace(meta, target, rng):
    # image ((x1 x2 - 1)^2 + x1^2, x2 (x1 x2 - 1), x'') = (a, b, ...), a > 0.
    a, b = float(target[0]), float(target[1])
    if a <= 0:
        return []
    out = []

    def residual(x1, sign):
        w2 = a - x1 * x1
        if np.ndim(x1) == 0 and (w2 < 0 or x1 == 0):
            return math.nan
        w = sign * np.sqrt(np.maximum(w2, 0))
        x2 = (w + 1) / x1
        return x2 * w - b

    lim = math.sqrt(a)
    ts = np.linspace(-lim * (1 - 1e-9), lim * (1 - 1e-9), 801)
    for sign in (1.0, -1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = residual(ts, sign)
        for x1 in _scan_roots(lambda t: residual(t, sign), ts, vals, max_roots=4):
            w2 = a - x1 * x1
            if w2 < 0 or x1 == 0:
                continue
            w = sign * math.sqrt(w2)
            cand = target.copy()
            cand[0] = x1
            cand[1] = (w + 1) / x1
            out.append(cand)
    return out


def _invert_f0(meta, target, rng):
    # ((1 - x_n h(x')^2) x', x_n) on the first sub_dim+1 coordinates; the
    # preimage keeps x_n and rescales x' along its ray through the origin.
    h = meta["h"]
    k = h.dim
    lam = float(target[k])
    w = target[:k]
    norm = float(np.linalg.norm(w))
    if norm == 0:
        return [target.copy()]
    u = w / norm

    def factor(t):
        hv = _poly_eval_np(h, [u[i] * t for i in range(k)])
        return (1.0 - lam * hv * hv) * t - norm

    hi = max(8.0, 4 * norm)
    roots = []
    for _ in range(4):
        ts = np.linspace(-hi, hi, 701)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = factor(ts)
        roots = _scan_roots(lambda t: float(factor(np.array(t))), ts, vals, max_roots=6)
        if roots:
            break
        hi *= 8
    out = []
    for t in roots:
        cand = target.copy()
        cand[:k] = u * t
        out.append(cand)
    return out


def _largest_root_branch_vec(polys, lam: float, ys: np.ndarray) -> np.ndarray:
    """z(y) with f2(y, z) = lam on the increasing branch above the peel zero,
    vectorized over y (nan where the bracket fails)."""
    q, p = polys.Q, polys.P

    def pv(y, z):
        return _poly_eval_np(p, [y, z])

    def f2v(y, z):
        return z * pv(y, z) ** 2 - lam

    z0 = -_poly_eval_np(q, [ys, np.zeros_like(ys)])
    # the peel polynomial falls from 1 at z0: expand until it goes negative
    hi = z0 + 1.0
    for _ in range(90):
        v = pv(ys, hi)
        need = np.isfinite(v) & (v >= 0)
        if not need.any():
            break
        hi = np.where(need, z0 + (hi - z0) * 2, hi)
    lo = z0.copy()
    for _ in range(48):
        mid = (lo + hi) / 2
        v = pv(ys, mid)
        pos = np.isfinite(v) & (v > 0)
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    z1 = (lo + hi) / 2
    # the second component grows from ~0 above z1: bracket and bisect
    hi = z1 + 1.0
    for _ in range(90):
        v = f2v(ys, hi)
        need = np.isfinite(v) & (v <= 0)
        if not need.any():
            break
        hi = np.where(need, z1 + (hi - z1) * 2, hi)
    lo = z1.copy()
    bad = ~(np.isfinite(f2v(ys, hi)) & (f2v(ys, hi) > 0))
    for _ in range(48):
        mid = (lo + hi) / 2
        v = f2v(ys, mid)
        neg = np.isfinite(v) & (v < 0)
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    z2 = (lo + hi) / 2
    z2[bad] = np.nan
    return z2


def _band_root_vec(polys, lam: float, ys: np.ndarray, side: str = "low") -> np.ndarray:
    """z(y) with f2(y, z) = lam inside the band (lam-1, 0), vectorized.

    The fiber polynomial can cross the level several times inside the band;
    ``side`` anchors the bisection at the lower or upper band end so both
    outer branches are reachable.
    """
    p = polys.P

    def f2v(y, z):
        return z * _poly_eval_np(p, [y, z]) ** 2 - lam

    if side == "low":
        lo = np.full_like(ys, lam - 1.0)
        hi = np.zeros_like(ys)
        bad = ~(np.isfinite(f2v(ys, lo)) & (f2v(ys, lo) < 0))
    else:
        # localize the highest crossing: walk down from 0 (where f2 > 0)
        zgrid = np.linspace(0.0, lam - 1.0, 25)
        lo = np.full_like(ys, lam - 1.0)
        hi = np.zeros_like(ys)
        found = np.zeros(ys.shape, dtype=bool)
        prev = 0.0
        for z in zgrid[1:]:
            v = f2v(ys, np.full_like(ys, z))
            neg = np.isfinite(v) & (v < 0) & ~found
            lo[neg] = z
            hi[neg] = prev
            found |= neg
            prev = z
        bad = ~found
    for _ in range(48):
        mid = (lo + hi) / 2
        v = f2v(ys, mid)
        neg = np.isfinite(v) & (v < 0)
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    out = (lo + hi) / 2
    out[bad] = np.nan
    return out


def _invert_peel_f(meta, target, rng):
    """Invert the peel map F = (x'((P-1)^2 + P^2), x_n P^2) (planar case).

    For positive heights the preimage rides the graph of the largest fiber
    root; for negative heights it rides the band branch.  Both are located by
    a vectorized scan over the first coordinate followed by bisection.
    """
    polys = meta["polys"]
    if polys.P.dim != 2:
        return []
    w, lam = float(target[0]), float(target[1])
    if lam == 0:
        lam = 1e-9
    if lam > 0:
        branches = [lambda p_, l_, ys_: _largest_root_branch_vec(p_, l_, ys_)]
    else:
        branches = [lambda p_, l_, ys_: _band_root_vec(p_, l_, ys_, "low"),
                    lambda p_, l_, ys_: _band_root_vec(p_, l_, ys_, "high")]

    out = []
    for branch in branches:
        def phi_values(ys):
            zs = branch(polys, lam, ys)
            pv = _poly_eval_np(polys.P, [ys, zs])
            return ys * ((pv - 1.0) ** 2 + pv * pv) - w, zs

        span = max(25.0, 3 * abs(w) + 5)
        ys = np.linspace(-span, span, 301)
        vals, _ = phi_values(ys)
        ok = np.isfinite(vals)
        sgn = np.sign(vals)
        for i in range(len(ys) - 1):
            if len(out) >= 4:
                break
            if not (ok[i] and ok[i + 1]) or sgn[i] * sgn[i + 1] >= 0:
                continue
            lo, hi = ys[i], ys[i + 1]
            slo = sgn[i]
            # vectorized subdivision refinement (one branch solve per level)
            for _ in range(10):
                sub = np.linspace(lo, hi, 9)
                sv, _ = phi_values(sub)
                ss = np.sign(sv)
                ss[~np.isfinite(sv)] = 0
                nxt = None
                for j in range(8):
                    if ss[j] == slo and ss[j + 1] != 0 and ss[j + 1] != slo:
                        nxt = (sub[j], sub[j + 1])
                        break
                if nxt is None:
                    break
                lo, hi = nxt
            y = (lo + hi) / 2
            z = branch(polys, lam, np.array([y]))[0]
            if math.isfinite(z):
                out.append(np.array([y, z]))
    return out


def _invert_tpeel(meta, target, rng):
    """Invert the stage peel (x', x_n - x_{n-1} h^2 P): a 1-D solve in x_n."""
    h, P = meta["h"], meta["P"]
    n = h.dim
    wp = [float(v) for v in target[: n - 1]]

    def qa(t):
        coords = [np.full_like(np.asarray(t, dtype=float), c) if np.ndim(t) else c
                  for c in wp] + [t]
        hv = _poly_eval_np(h, coords)
        pv = _poly_eval_np(P, coords)
        return t - wp[n - 2] * hv * hv * pv - float(target[n - 1])

    roots = []
    hi = 32.0
    for _ in range(4):
        ts = np.linspace(-hi, hi, 701)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = qa(ts)
        roots = _scan_roots(lambda t: float(qa(t)), ts, vals, max_roots=8)
        if roots:
            break
        hi *= 8
    out = []
    for t in roots:
        cand = target.copy()
        cand[n - 1] = t
        out.append(cand)
    return out


_INVERTERS = {
    "square": _invert_square,
    "halfspace": _invert_halfspace,
    "peel-F0": _invert_f0,
    "peel-F": _invert_peel_f,
    "T-peel": _invert_tpeel,
}


def backward_proposals(chain: MapChain, targets: np.ndarray, rng,
                       per_target: int = 2) -> np.ndarray:
    """Candidate domain points whose forward images should land near targets.

    Walks each target backwards through the annotated steps, branching over
    the (finitely many) per-step preimages and keeping a bounded number of
    candidates per target.  Chains without annotations yield no proposals.
    """
    if chain.meta is None:
        return np.empty((0, chain.dim))
    out = []
    for target in np.asarray(targets, dtype=np.float64):
        frontier = [target.copy()]
        okay = True
        for step, meta in zip(reversed(chain.steps), reversed(chain.meta)):
            if meta is None:
                okay = False
                break
            kind = meta["kind"]
            nxt = []
            for point in frontier:
                if kind == "affine":
                    nxt.extend(_invert_affine(step, point, rng))
                else:
                    inverter = _INVERTERS.get(kind)
                    if inverter is None:
                        okay = False
                        break
                    sub = meta.get("sub_dim")
                    if sub is not None and sub < chain.dim and kind != "affine":
                        head = point[:sub].copy()
                        cands = inverter(meta, head, rng)
                        for c in cands:
                            full = point.copy()
                            full[:sub] = c
                            nxt.append(full)
                    else:
                        nxt.extend(inverter(meta, point, rng))
            if not okay or not nxt:
                okay = False
                break
            if len(nxt) > 8:
                idx = rng.choice(len(nxt), size=8, replace=False)
                nxt = [nxt[i] for i in idx]
            frontier = nxt
        if okay and frontier:
            if len(frontier) > per_target:
                idx = rng.choice(len(frontier), size=per_target, replace=False)
                frontier = [frontier[i] for i in idx]
            out.extend(frontier)
    if not out:
        return np.empty((0, chain.dim))
    return np.array(out)
