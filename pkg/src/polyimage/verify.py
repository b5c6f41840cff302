"""Exact and statistical verification of synthesized chain images.

Containment (the refutable half of an image identity) is checked with zero
floating error: rational inputs, integer-pair chain evaluation, rational sign
tests.  Coverage (the surjectivity half) cannot be certified at desk scale and
is estimated statistically over a grid of target cells; reports say which is
which.  Line probes and level-curve diagnostics check the per-line behavior of
the peel maps and the level sets of the second peel component with exact-sign
bisection.

Chains contract target cells onto preimage slivers whose width shrinks like
the reciprocal of the local derivative, so blind uniform sampling cannot reach
high grid coverage for composed chains; ``strategy="adaptive"`` therefore
refines per-cell best points with log-scale perturbations, spending the same
evaluation budget where cells are still uncovered.  Every sampler only ever
scores genuine domain points.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import RootNotBracketed, SamplingStarved
from .geometry import (FaceDescriptor, LinearForm, Polyhedron, dot,
                       minimal_presentation, project, rat, rat_str)
from .interior_complement import InteriorStepPolys
from .polyalg import MapChain, Poly, PolyMap

BISECT_TOL = Fraction(1, 2 ** 40)
BLOWUP_THRESHOLD = 1000
COVER_GUARD = 2.0 ** -30
STARVATION = 1e-3


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """Constraint-defined region with exact membership.

    Modes: "complement" (R^n minus the base polyhedron), "interior-complement"
    (R^n minus its interior), "complement-minus-faces" (interior complement
    with the relative interiors of the listed faces removed), "halfspace-side"
    (one strict or closed side of a single form), plus the duals "polyhedron"
    and "interior" used as forbidden regions in containment checks.
    """

    base: Polyhedron
    mode: str
    faces: tuple[FaceDescriptor, ...] = ()
    form: Optional[LinearForm] = None
    side: str = "gt"

    @staticmethod
    def all_space(dim: int) -> "RegionSpec":
        infeasible = Polyhedron(dim, (
            LinearForm(tuple([Fraction(1)] + [Fraction(0)] * (dim - 1)), Fraction(0)),
            LinearForm(tuple([Fraction(-1)] + [Fraction(0)] * (dim - 1)), Fraction(-1)),
        ))
        return RegionSpec(infeasible, "complement")

    @property
    def dim(self) -> int:
        return self.base.dim

    def contains(self, x: Sequence[Fraction]) -> bool:
        if self.mode == "complement":
            return not self.base.contains(x)
        if self.mode == "interior-complement":
            return not self.base.interior_contains(x)
        if self.mode == "polyhedron":
            return self.base.contains(x)
        if self.mode == "interior":
            return self.base.interior_contains(x)
        if self.mode == "complement-minus-faces":
            if self.base.interior_contains(x):
                return False
            for face in self.faces:
                if all(self.base.constraints[i](x) == 0 for i in face.active) and \
                   all(self.base.constraints[i](x) > 0
                       for i in range(len(self.base.constraints)) if i not in face.active):
                    return False
            return True
        if self.mode == "halfspace-side":
            v = self.form(x)
            return {"gt": v > 0, "ge": v >= 0, "lt": v < 0, "le": v <= 0}[self.side]
        raise ValueError(f"unknown mode {self.mode!r}")

    def contains_pair(self, nums: Sequence[int], den: int) -> bool:
        """Membership of nums/den (den > 0) without reducing the fractions."""

        def sign(h: LinearForm) -> int:
            total = sum((g * nn for g, nn in zip(h.gradient, nums)), Fraction(0)) \
                + h.constant * den
            return (total > 0) - (total < 0)

        if self.mode == "complement":
            return any(sign(h) < 0 for h in self.base.constraints)
        if self.mode == "interior-complement":
            return any(sign(h) <= 0 for h in self.base.constraints)
        if self.mode == "polyhedron":
            return all(sign(h) >= 0 for h in self.base.constraints)
        if self.mode == "interior":
            return all(sign(h) > 0 for h in self.base.constraints)
        if self.mode == "complement-minus-faces":
            signs = [sign(h) for h in self.base.constraints]
            if all(s > 0 for s in signs):
                return False
            for face in self.faces:
                if all(signs[i] == 0 for i in face.active) and \
                   all(signs[i] > 0 for i in range(len(signs)) if i not in face.active):
                    return False
            return True
        if self.mode == "halfspace-side":
            s = sign(self.form)
            return {"gt": s > 0, "ge": s >= 0, "lt": s < 0, "le": s <= 0}[self.side]
        raise ValueError(f"unknown mode {self.mode!r}")

    def to_json(self) -> dict:
        obj = {"base": self.base.to_json(), "mode": self.mode}
        if self.faces:
            obj["faces"] = [sorted(f.active) for f in self.faces]
        if self.form is not None:
            obj["form"] = self.form.to_json()
            obj["side"] = self.side
        return obj


@dataclass
class VerificationReport:
    kind: str
    samples_used: int
    violations: list
    coverage_fraction: Optional[float] = None
    cells_total: Optional[int] = None
    cells_covered: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    seed: Optional[int] = None
    runtime: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self, include_runtime: bool = False) -> dict:
        obj = {
            "kind": self.kind,
            "samples_used": self.samples_used,
            "violations": self.violations,
            "diagnostics": self.diagnostics,
            "seed": self.seed,
        }
        if self.coverage_fraction is not None:
            obj["coverage_fraction"] = self.coverage_fraction
            obj["cells_total"] = self.cells_total
            obj["cells_covered"] = self.cells_covered
        if include_runtime and self.runtime is not None:
            obj["runtime_seconds"] = self.runtime
        return obj


def contains(region: RegionSpec, x: Sequence[Fraction]) -> bool:
    return region.contains(tuple(rat(v) for v in x))


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def _as_box(window, dim: int) -> list[tuple[Fraction, Fraction]]:
    if isinstance(window, (int, Fraction, float, str)):
        r = rat(window) if not isinstance(window, float) else Fraction(window).limit_denominator(10 ** 6)
        return [(-r, r)] * dim
    box = [(rat(lo), rat(hi)) for lo, hi in window]
    if len(box) != dim:
        raise ValueError("window arity mismatch")
    return box


def _rational_batch(rng: random.Random, box, count: int, denom_bits: int = 6):
    d = 1 << denom_bits
    pts = []
    for _ in range(count):
        pts.append(tuple(
            Fraction(rng.randint(int(lo * d), int(hi * d)), d) for lo, hi in box))
    return pts


# ---------------------------------------------------------------------------
# containment
# ---------------------------------------------------------------------------


def check_containment(chain: MapChain, domain: RegionSpec, forbidden: RegionSpec,
                      n: int, seed: int, window=20, denom_bits: int = 6,
                      progress: Optional[int] = None) -> VerificationReport:
    """Exact check that chain images of n domain samples avoid the forbidden
    region.  Rejection-samples dyadic rationals in the window; the window
    doubles (three times at most) if acceptance starves below 1e-3."""
    t0 = time.time()
    rng = random.Random(seed)
    box = _as_box(window, chain.dim)
    accepted = 0
    tried = 0
    doublings = 0
    violations = []
    while accepted < n:
        batch = _rational_batch(rng, box, min(4096, n - accepted + 64), denom_bits)
        for x in batch:
            tried += 1
            if not domain.contains(x):
                continue
            accepted += 1
            nums, den = _point_pair(x)
            out_nums, out_den = chain.eval_pair(nums, den)
            if forbidden.contains_pair(out_nums, out_den):
                img = tuple(Fraction(nn, out_den) for nn in out_nums)
                violations.append({
                    "input": [rat_str(v) for v in x],
                    "image": [rat_str(v) for v in img],
                    "predicate": forbidden.mode,
                })
            if accepted >= n:
                break
        if tried > 4096 and accepted / tried < STARVATION:
            if doublings >= 3:
                raise SamplingStarved(f"acceptance {accepted}/{tried}", window=str(box))
            box = [(2 * lo, 2 * hi) for lo, hi in box]
            doublings += 1
            tried = 0
    return VerificationReport("containment", accepted, violations,
                              diagnostics={"window": [[rat_str(lo), rat_str(hi)] for lo, hi in box]},
                              seed=seed, runtime=time.time() - t0)


def _point_pair(x: Sequence[Fraction]) -> tuple[tuple[int, ...], int]:
    den = 1
    for v in x:
        den = den * v.denominator // __import__("math").gcd(den, v.denominator)
    return tuple(v.numerator * (den // v.denominator) for v in x), den


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


class _Grid:
    def __init__(self, box, step: float, dim: int):
        self.dim = dim
        self.lo = np.array([float(lo) for lo, _ in box])
        self.hi = np.array([float(hi) for _, hi in box])
        self.step = float(step)
        self.counts = np.maximum(1, np.round((self.hi - self.lo) / self.step)).astype(int)
        self.total = int(np.prod(self.counts))

    def centers_axis(self, axis: int) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.counts[axis]) + 0.5) * self.step

    def flat_center(self, flat: np.ndarray) -> np.ndarray:
        idx = np.unravel_index(flat, self.counts)
        return np.stack([self.lo[a] + (idx[a] + 0.5) * self.step for a in range(self.dim)], axis=-1)

    def bin_of(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.floor((pts - self.lo) / self.step).astype(np.int64)
        ok = np.all((idx >= -1) & (idx <= self.counts), axis=1)
        idx = np.clip(idx, 0, self.counts - 1)
        flat = np.ravel_multi_index(tuple(idx.T), self.counts, mode="clip")
        return flat, ok


def _target_cells(grid: _Grid, target: RegionSpec) -> np.ndarray:
    """Exact membership of every cell center (rational centers)."""
    mask = np.zeros(grid.total, dtype=bool)
    step = Fraction(grid.step).limit_denominator(10 ** 9)
    los = [Fraction(float(l)).limit_denominator(10 ** 9) for l in grid.lo]
    ranges = [range(c) for c in grid.counts]
    for flat, multi in enumerate(itertools.product(*ranges)):
        center = tuple(los[a] + (multi[a] + Fraction(1, 2)) * step for a in range(grid.dim))
        mask[flat] = target.contains(center)
    return mask


def _mark(grid: _Grid, images: np.ndarray, pts: np.ndarray, best_d: np.ndarray,
          best_pt: np.ndarray):
    finite = np.all(np.isfinite(images), axis=1)
    images, pts = images[finite], pts[finite]
    if images.shape[0] == 0:
        return
    inside = np.all((images >= grid.lo - grid.step) & (images <= grid.hi + grid.step), axis=1)
    images, pts = images[inside], pts[inside]
    if images.shape[0] == 0:
        return
    base_idx = np.floor((images - grid.lo) / grid.step).astype(np.int64)
    for off in itertools.product((-2, -1, 0, 1, 2), repeat=grid.dim):
        cand = base_idx + np.array(off)
        ok = np.all((cand >= 0) & (cand < grid.counts), axis=1)
        if not ok.any():
            continue
        flat = np.ravel_multi_index(tuple(cand[ok].T), grid.counts)
        centers = grid.flat_center(flat)
        dist = np.sqrt(np.sum((images[ok] - centers) ** 2, axis=1))
        pts_ok = pts[ok]
        order = np.argsort(-dist)  # later writes win; ascending quality
        f, dd, pp = flat[order], dist[order], pts_ok[order]
        improve = dd < best_d[f]
        best_d[f[improve]] = dd[improve]
        best_pt[f[improve]] = pp[improve]


def _is_all_space(domain: RegionSpec) -> bool:
    from .geometry import feasible
    return domain.mode == "complement" and not feasible(domain.dim, ge=domain.base.constraints)


def _domain_mask(domain: RegionSpec, pts: np.ndarray, all_space: bool) -> np.ndarray:
    """Exact domain membership of float points (each float is a dyadic rational).

    A float interval-style pre-pass decides clear rows; ambiguous rows fall
    back to exact rational membership.
    """
    if all_space:
        return np.ones(pts.shape[0], dtype=bool)
    keep = np.ones(pts.shape[0], dtype=bool)
    forms = domain.base.constraints
    if domain.mode in ("complement", "interior-complement") and forms:
        vals = np.stack([
            pts @ np.array([float(g) for g in h.gradient]) + float(h.constant)
            for h in forms], axis=1)
        scale = (np.max(np.abs(pts), axis=1, initial=1.0) + 1.0) * 1e-10
        clearly_out = np.any(vals < -scale[:, None], axis=1)   # in the region
        clearly_in = np.all(vals > scale[:, None], axis=1)     # inside the polyhedron
        ambiguous = ~(clearly_out | clearly_in)
        keep[clearly_in] = False
        keep[clearly_out] = True
        idxs = np.nonzero(ambiguous)[0]
    else:
        idxs = np.arange(pts.shape[0])
    for i in idxs:
        keep[i] = domain.contains(tuple(Fraction(float(v)) for v in pts[i]))
    return keep


def check_coverage(chain: MapChain, domain: RegionSpec, target: RegionSpec,
                   window, grid_step, n: int, seed: int,
                   strategy: str = "uniform", domain_window=None,
                   batch: int = 20000) -> VerificationReport:
    """Statistical coverage of target grid cells by chain images.

    A cell (with center in the target region, tested exactly) counts as
    covered once some image of a sampled domain point lands within grid_step
    of its center.  ``strategy="adaptive"`` reinvests the sample budget into
    log-scale refinements around the best point found for each uncovered cell.
    """
    t0 = time.time()
    dim = chain.dim
    box = _as_box(window, dim)
    grid = _Grid(box, float(grid_step), dim)
    target_mask = _target_cells(grid, target)
    total = int(target_mask.sum())
    radius = float(grid_step) + COVER_GUARD

    best_d = np.full(grid.total, np.inf)
    best_pt = np.zeros((grid.total, dim))
    rng = np.random.default_rng(seed)
    used = 0
    all_space = _is_all_space(domain)

    dbox = _as_box(domain_window if domain_window is not None else 20, dim)
    dlo = np.array([float(lo) for lo, _ in dbox])
    dhi = np.array([float(hi) for _, hi in dbox])

    def run_batch(pts: np.ndarray):
        nonlocal used
        if pts.shape[0] == 0:
            return
        keep = _domain_mask(domain, pts, all_space)
        pts = pts[keep]
        used += int(pts.shape[0])
        if pts.shape[0] == 0:
            return
        images = chain.eval_float(pts)
        _mark(grid, images, pts, best_d, best_pt)

    def uniform_batch(count: int) -> np.ndarray:
        return rng.uniform(dlo, dhi, size=(count, dim))

    def heavy_batch(count: int) -> np.ndarray:
        mag = np.exp(rng.uniform(np.log(1e-3), np.log(float(np.max(dhi)) * 16), size=(count, dim)))
        sign = rng.choice((-1.0, 1.0), size=(count, dim))
        return mag * sign

    if strategy == "uniform":
        while used < n:
            run_batch(uniform_batch(min(batch, n - used)))
    elif strategy == "adaptive":
        _adaptive_cover(chain, domain, all_space, grid, target_mask, radius,
                        best_d, best_pt, rng, n, run_batch, uniform_batch,
                        heavy_batch)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    covered = int((target_mask & (best_d <= radius)).sum())
    fraction = 1.0 if total == 0 else covered / total
    return VerificationReport(
        "coverage", used, [],
        coverage_fraction=fraction, cells_total=total, cells_covered=covered,
        diagnostics={"strategy": strategy, "grid_step": float(grid_step),
                     "window": [[rat_str(lo), rat_str(hi)] for lo, hi in box]},
        seed=seed, runtime=time.time() - t0)


def _adaptive_cover(chain, domain, all_space, grid: _Grid, target_mask, radius,
                    best_d, best_pt, rng, n, run_batch, uniform_batch,
                    heavy_batch):
    """Target-guided coverage search.

    Composed chains compress target cells onto preimage slivers as thin as the
    reciprocal of the local derivative, so the search combines three engines:
    a global phase (uniform window, heavy-tailed scales, and the target
    centers themselves, which the peel maps often fix), a row sweep that
    traces every still-open grid row along one-dimensional domain lines
    (batched bisection on level crossings, including the fold dips where the
    image plunges through a row without a coarse-grid sign change), and a
    damped Gauss-Newton polish from the best point recorded per cell.
    Derivative and bisection evaluations count against the budget; scored
    points are always domain-filtered exactly.
    """
    import os
    debug = bool(os.environ.get("POLYIMAGE_DEBUG_COVER"))
    dim = grid.dim
    _run_count = [0]

    def run(pts):
        if pts.shape[0] == 0:
            return
        run_batch(pts)
        _run_count[0] += int(pts.shape[0])

    def eval_probe(pts):
        """Evaluate without exact filtering (derivative/bisection probes);
        budgeted, and marked directly when the domain is all of space."""
        vals = chain.eval_float(pts)
        _run_count[0] += int(pts.shape[0])
        if all_space:
            _mark(grid, vals, pts, best_d, best_pt)
        return vals

    # ------------------------------------------------------------------ phase 0
    run(grid.flat_center(np.nonzero(target_mask)[0]))
    phase0 = max(2000, n // 8)
    while _run_count[0] < phase0:
        count = min(8192, phase0 - _run_count[0])
        run(uniform_batch(max(1, count // 2)))
        if _run_count[0] < phase0:
            run(heavy_batch(max(1, count // 2)))

    # ---------------------------------------------------------------- row sweep
    golden = 0.6180339887498949

    def open_rows(axis: int):
        """Center levels along ``axis`` of rows that still have open cells."""
        openc = target_mask & ~(best_d <= radius)
        if not openc.any():
            return np.empty(0)
        idx = np.stack(np.unravel_index(np.nonzero(openc)[0], grid.counts), axis=1)
        rows = np.unique(idx[:, axis])
        return grid.lo[axis] + (rows + 0.5) * grid.step

    def sweep_line(a: float, line_axis: int, t_grid: np.ndarray, levels: np.ndarray):
        """Trace every requested level of image coordinate ``line_axis`` along
        the domain line {x_other = a}; dim == 2 only."""
        other = 1 - line_axis
        pts = np.empty((t_grid.size, 2))
        pts[:, other] = a
        pts[:, line_axis] = t_grid
        vals = eval_probe(pts)[:, line_axis]
        finite = np.isfinite(vals)
        lo_list, hi_list = [], []
        vlo, vhi = [], []
        lev_list = []
        v1, v2 = vals[:-1], vals[1:]
        ok_pair = finite[:-1] & finite[1:]
        for lev in levels:
            s1 = v1 - lev
            s2 = v2 - lev
            cross = ok_pair & (np.sign(s1) * np.sign(s2) < 0)
            ii = np.nonzero(cross)[0]
            if ii.size:
                lo_list.append(t_grid[ii])
                hi_list.append(t_grid[ii + 1])
                vlo.append(s1[ii])
                lev_list.append(np.full(ii.size, lev))
        if not lo_list:
            return
        lo = np.concatenate(lo_list)
        hi = np.concatenate(hi_list)
        slo = np.sign(np.concatenate(vlo))
        lev = np.concatenate(lev_list)
        # batched bisection on (image component - level)
        for _ in range(44):
            if _run_count[0] >= n:
                break
            mid = (lo + hi) / 2
            pts = np.empty((mid.size, 2))
            pts[:, other] = a
            pts[:, line_axis] = mid
            mv = eval_probe(pts)[:, line_axis] - lev
            ms = np.sign(mv)
            ms[~np.isfinite(mv)] = 0.0
            left = ms == slo
            lo = np.where(left, mid, lo)
            hi = np.where(left, hi, mid)

    def dips_on_line(a: float, line_axis: int, t_grid: np.ndarray, levels: np.ndarray):
        """Fold dips: the image coordinate dives toward a row and back between
        grid nodes.  Refine each local minimum of the coordinate magnitude and
        emit bisection brackets on both flanks for the rows it undercuts."""
        other = 1 - line_axis
        pts = np.empty((t_grid.size, 2))
        pts[:, other] = a
        pts[:, line_axis] = t_grid
        vals = eval_probe(pts)[:, line_axis]
        work = np.where(np.isfinite(vals), vals, np.inf)
        lo_med, hi_med = np.min(levels) - 1.0, np.max(levels) + 1.0
        for sgn in (1.0, -1.0):
            prof = sgn * work
            cand = np.nonzero((prof[1:-1] <= prof[:-2]) & (prof[1:-1] <= prof[2:]) &
                              np.isfinite(prof[1:-1]))[0] + 1
            for i in cand[:24]:
                lo_t, mid_t, hi_t = t_grid[i - 1], t_grid[i], t_grid[i + 1]
                if not (np.isfinite(prof[i - 1]) and np.isfinite(prof[i + 1])):
                    continue
                if prof[i] > sgn * hi_med and sgn > 0:
                    continue
                if prof[i] > -sgn * lo_med and sgn < 0 and -prof[i] < lo_med:
                    pass
                # recursive three-point refinement of the dip
                t3 = np.array([lo_t, mid_t, hi_t])
                v3 = prof[[i - 1, i, i + 1]].copy()
                for _ in range(40):
                    if _run_count[0] >= n:
                        break
                    m1, m2 = (t3[0] + t3[1]) / 2, (t3[1] + t3[2]) / 2
                    pts2 = np.empty((2, 2))
                    pts2[:, other] = a
                    pts2[:, line_axis] = (m1, m2)
                    nv = sgn * eval_probe(pts2)[:, line_axis]
                    nv = np.where(np.isfinite(nv), nv, np.inf)
                    ts = np.array([t3[0], m1, t3[1], m2, t3[2]])
                    vs = np.array([v3[0], nv[0], v3[1], nv[1], v3[2]])
                    j = int(np.argmin(vs[1:4])) + 1
                    t3 = ts[j - 1:j + 2]
                    v3 = vs[j - 1:j + 2]
                    if t3[2] - t3[0] < 1e-13 * (1 + abs(t3[1])):
                        break
                bottom = sgn * v3[1]
                flank = sgn * min(v3[0], v3[2])
                if sgn > 0:
                    band = levels[(levels > bottom) & (levels < flank)]
                else:
                    band = levels[(levels < bottom) & (levels > flank)]
                if band.size == 0:
                    continue
                for blo, bhi in ((t3[0], t3[1]), (t3[1], t3[2])):
                    tt = np.linspace(blo, bhi, 3)
                    sub = np.stack([np.full(3, a), tt], axis=1) if other == 0 else \
                        np.stack([tt, np.full(3, a)], axis=1)
                    sweep_vals = eval_probe(sub)
                    del sweep_vals
                # hand the refined dip flanks to the generic crossing tracer
                fine = np.linspace(t3[0] - (t3[2] - t3[0]), t3[2] + (t3[2] - t3[0]), 65)
                sweep_line_section(a, line_axis, fine, band)

    def sweep_line_section(a, line_axis, t_grid, levels):
        sweep_line(a, line_axis, t_grid, levels)

    def t_grid_for(extent: float) -> np.ndarray:
        lin = np.linspace(-extent, extent, 241)
        logs = np.exp(np.linspace(np.log(extent), np.log(extent * 256), 160))
        return np.unique(np.concatenate([lin, logs, -logs]))

    # ------------------------------------------------------------- main rounds
    extent = float(np.max(np.abs(np.concatenate([grid.lo, grid.hi])))) * 2
    sweep_round = 0
    axes = [np.array([1, 0]), np.array([0, 1])]
    attempts = np.zeros(grid.total, dtype=np.int32)
    stall = [0]
    last_covered = [-1]
    while _run_count[0] < n:
        covered = best_d <= radius
        open_idx = np.nonzero(target_mask & ~covered)[0]
        if open_idx.size == 0:
            break
        if debug and sweep_round % 5 == 0:
            fin = int(np.isfinite(best_d[open_idx]).sum())
            print(f"[cover] sweep={sweep_round} open={open_idx.size} finite={fin} "
                  f"evals={_run_count[0]}", flush=True)

        # structural proposals: walk open-cell centers backwards through the
        # annotated steps (scored by forward evaluation like everything else);
        # each cell gets a bounded number of backward attempts
        if chain.meta is not None and _run_count[0] < n:
            from .preimage import backward_proposals
            fresh = open_idx[attempts[open_idx] < 3]
            if fresh.size == 0:
                if int((target_mask & (best_d <= radius)).sum()) == last_covered[0]:
                    stall[0] += 1
                    if stall[0] >= 3:
                        break
                else:
                    stall[0] = 0
                last_covered[0] = int((target_mask & (best_d <= radius)).sum())
            take = fresh if fresh.size <= 256 else \
                rng.choice(fresh, size=256, replace=False)
            if take.size:
                attempts[take] += 1
                centers = grid.flat_center(take)
                jit = centers + rng.uniform(-0.25, 0.25, size=centers.shape) * grid.step
                with np.errstate(all="ignore"):
                    props = backward_proposals(chain, jit, rng)
                if props.shape[0]:
                    run(props)
        elif dim == 2:
            # generic fallback: golden-ratio line sweeps tracing all open rows
            for line_axis in (1, 0):
                levels = open_rows(line_axis)
                if levels.size == 0 or _run_count[0] >= n:
                    continue
                u = (sweep_round * golden) % 1.0
                a = (2 * u - 1) * extent
                tg = t_grid_for(extent)
                sweep_line(a, line_axis, tg, levels)
                dips_on_line(a, line_axis, tg, levels)
        else:
            run(heavy_batch(min(8192, max(256, n - _run_count[0]))))
            run(uniform_batch(min(8192, max(256, n - _run_count[0]))))
        sweep_round += 1

        # continuation and neighbor restarts along the covered front
        covered = best_d <= radius
        open_idx = np.nonzero(target_mask & ~covered)[0]
        if open_idx.size == 0:
            break
        multi = np.stack(np.unravel_index(open_idx, grid.counts), axis=1)
        seeds = []
        for off in itertools.product((-1, 0, 1), repeat=dim):
            if all(o == 0 for o in off):
                continue
            nb = multi + np.array(off)
            ok = np.all((nb >= 0) & (nb < grid.counts), axis=1)
            if not ok.any():
                continue
            nb_flat = np.ravel_multi_index(tuple(nb[ok].T), grid.counts)
            have = np.isfinite(best_d[nb_flat])
            if have.any():
                seeds.append(best_pt[nb_flat[have]])
        if seeds:
            pool = np.concatenate(seeds, axis=0)
            if pool.shape[0] > 6 * open_idx.size:
                pool = pool[rng.choice(pool.shape[0], 6 * open_idx.size, replace=False)]
            run(pool)

        # Gauss-Newton polish from per-cell best points
        covered = best_d <= radius
        open_idx = np.nonzero(target_mask & ~covered)[0]
        active = open_idx[np.isfinite(best_d[open_idx])]
        if active.size and _run_count[0] < n:
            _newton_polish(chain, grid, active, best_pt[active], best_d, best_pt,
                           eval_probe, run, rng, iters=3)


def _newton_polish(chain, grid: _Grid, cells_flat, starts, best_d, best_pt,
                   eval_probe, run, rng, iters=3):
    """Batched damped Gauss-Newton toward the cell centers."""
    dim = grid.dim
    centers = grid.flat_center(cells_flat)
    cur = starts.copy()
    m = cur.shape[0]
    for _ in range(iters):
        h = 1e-7 * (1.0 + np.abs(cur))
        probes = [cur]
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = 1.0
            probes.append(cur + h[:, a:a + 1] * e)
            probes.append(cur - h[:, a:a + 1] * e)
        vals = eval_probe(np.concatenate(probes, axis=0))
        i0 = vals[:m]
        blown = ~np.all(np.isfinite(i0), axis=1)
        if blown.any():
            cur[blown] *= 0.35
        jac = np.empty((m, dim, dim))
        for a in range(dim):
            plus = vals[(1 + 2 * a) * m:(2 + 2 * a) * m]
            minus = vals[(2 + 2 * a) * m:(3 + 2 * a) * m]
            jac[:, :, a] = (plus - minus) / (2 * h[:, a:a + 1])
        rhs = centers - i0
        cur_dist = np.sqrt(np.sum(rhs ** 2, axis=1))
        cur_dist[~np.isfinite(cur_dist)] = np.inf
        good = ~blown & np.all(np.isfinite(jac.reshape(m, -1)), axis=1) & \
            np.all(np.isfinite(rhs), axis=1)
        delta = np.zeros_like(cur)
        if good.any():
            jg = jac[good]
            ok = np.abs(np.linalg.det(jg)) > 1e-280
            sol = np.zeros((int(good.sum()), dim))
            if ok.any():
                sol[ok] = np.linalg.solve(jg[ok], rhs[good][ok][..., None])[..., 0]
            delta[good] = sol
        cands = [cur + delta, cur + delta / 2, cur + delta / 8, cur + delta / 32]
        cvals = eval_probe(np.concatenate(cands, axis=0))
        dists = np.full((len(cands), m), np.inf)
        for ci in range(len(cands)):
            dv = cvals[ci * m:(ci + 1) * m] - centers
            dd = np.sqrt(np.sum(dv ** 2, axis=1))
            dd[~np.isfinite(dd)] = np.inf
            dists[ci] = dd
        pick = np.argmin(dists, axis=0)
        better = dists[pick, np.arange(m)] < cur_dist
        nxt = cur.copy()
        for ci in range(len(cands)):
            sel = better & (pick == ci)
            nxt[sel] = cands[ci][sel]
        cur = nxt
    run(cur)


# ---------------------------------------------------------------------------
# line behavior probes
# ---------------------------------------------------------------------------


def _univariate_last(pm_component: Poly, a_prime: Sequence[Fraction]) -> Poly:
    values = {i: rat(v) for i, v in enumerate(a_prime)}
    return pm_component.partial(values)


def line_behavior_probe(t_k: PolyMap, k: Polyhedron, a_prime: Sequence[Fraction],
                        window: float = 15, grid_step: float = 0.05,
                        samples: int = 4000) -> dict:
    """Classify the vertical line over a_prime and check the matching claim.

    Invariance cases are exact (zero escapes over sampled parameters);
    surjectivity cases are grid-coverage checks of the parameter window.
    """
    if not k.minimal:
        k = minimal_presentation(k)
    n = k.dim
    a_prime = tuple(rat(v) for v in a_prime)
    proj = project(k)
    in_p = proj.contains(a_prime)
    in_int_p = proj.contains(a_prime, strict=True)
    level = a_prime[n - 2]
    if not in_p:
        case = "i"
    elif level <= 0:
        case = "ii"
    elif in_int_p:
        case = "iii"
    else:
        case = "iv"

    qa = _univariate_last(t_k.components[n - 1], a_prime)
    identity_line = qa == Poly.variable(1, 0)

    result = {"case": case, "a_prime": [rat_str(v) for v in a_prime],
              "identity_line": identity_line}
    ts = [Fraction(i, 8) for i in range(-8 * int(window) * 2, 8 * int(window) * 2 + 1)]

    if case == "ii" or (case == "iv" and identity_line):
        escapes = 0
        checked = 0
        for t in ts:
            x = a_prime + (t,)
            if k.contains(x):
                continue
            checked += 1
            img_t = qa((t,))
            if k.contains(a_prime + (img_t,)):
                escapes += 1
        result.update({"mode": "invariance", "checked": checked,
                       "escapes": escapes, "passed": escapes == 0})
        return result

    # surjectivity: images of a wide parameter sweep cover the window grid
    sweep = np.linspace(-max(60.0, 4 * window), max(60.0, 4 * window), samples)
    coeffs = {e[0]: float(c) for e, c in qa.terms.items()}
    vals = np.zeros_like(sweep)
    for e, c in coeffs.items():
        vals += c * sweep ** e
    if case != "i":
        # when the fiber over a_prime is a bounded segment, sample only from
        # outside it (the stronger surjectivity-from-the-complement claim);
        # for ray fibers the claim is about the line minus boundary points,
        # so the full sweep is legitimate input
        walls_ok = all(h(a_prime + (Fraction(0),)) >= 0
                       for h in k.constraints if h.gradient[-1] == 0)
        lo = hi = None
        for h in k.constraints:
            cn = h.gradient[-1]
            if cn == 0:
                continue
            bound = -(h(a_prime + (Fraction(0),))) / cn
            if cn > 0:
                lo = bound if lo is None else max(lo, bound)
            else:
                hi = bound if hi is None else min(hi, bound)
        if walls_ok and lo is not None and hi is not None and lo <= hi:
            vals = vals[(sweep < float(lo)) | (sweep > float(hi))]
    centers = np.arange(-window + grid_step / 2, window, grid_step)
    covered = np.zeros(centers.shape[0], dtype=bool)
    if vals.size:
        idx = np.floor((vals - (-window)) / grid_step).astype(np.int64)
        ok = (idx >= 0) & (idx < centers.shape[0])
        for shift in (-1, 0, 1):
            j = idx[ok] + shift
            valid = (j >= 0) & (j < centers.shape[0])
            close = np.abs(vals[ok][valid] - centers[j[valid]]) <= grid_step + COVER_GUARD
            covered[j[valid][close]] = True
    frac = float(covered.mean()) if centers.size else 1.0
    result.update({"mode": "coverage", "fraction": frac, "passed": frac >= 0.99})
    return result


# ---------------------------------------------------------------------------
# level curves
# ---------------------------------------------------------------------------


@dataclass
class LevelCurveProbe:
    lam: Fraction
    traced: list
    branch: dict
    verdicts: dict

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def _bisect_sign_change(f: Poly, lo: Fraction, hi: Fraction, tol: Fraction) -> Fraction:
    """Root of the univariate f in (lo, hi) with f(lo), f(hi) of opposite sign."""
    flo = f((lo,))
    fhi = f((hi,))
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise RootNotBracketed(f"no sign change on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f((mid,))
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return (lo + hi) / 2


def level_curve_diagnostics(f2: Poly, lam, y_samples: Sequence[Fraction],
                            polys: InteriorStepPolys,
                            blowup_threshold: int = BLOWUP_THRESHOLD,
                            tol: Fraction = BISECT_TOL,
                            blowup_halvings: int = 20) -> LevelCurveProbe:
    """Trace the level set {f2 = lam} of the second peel component (2-D case).

    For lam < 0 every fiber root is bracketed inside the band (lam-1, 0).  For
    lam > 0 the largest fiber root is located through the monotone structure
    above the zero curve of the peel polynomial, checked to lie in {q > 0},
    and shown to exceed the blow-up threshold approaching each vertical facet
    abscissa (a single exact sign decides the threshold crossing).
    """
    lam = rat(lam)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if f2.dim != 2:
        raise ValueError("two-dimensional fixture required")
    q2 = polys.Q
    p2 = polys.P
    verdicts: dict = {}
    traced = []
    branch: dict = {}

    if lam < 0:
        in_band = 0
        for y in y_samples:
            y = rat(y)
            fy = f2.partial({0: y}) - Poly.constant(1, lam)
            lo, hi = lam - 1, Fraction(0)
            flo, fhi = fy((lo,)), fy((hi,))
            if not (flo < 0 < fhi):
                raise RootNotBracketed(f"band bracket failed at y={y}")
            root = _bisect_sign_change(fy, lo, hi, tol)
            traced.append((y, root))
            if lam - 1 < root < 0:
                in_band += 1
        verdicts["band"] = in_band == len(traced)
        branch["band"] = (rat_str(lam - 1), "0")
        return LevelCurveProbe(lam, traced, branch, verdicts)

    # lam > 0
    abscissae = []
    for w in polys.vertical:
        # vertical forms c (y - b): abscissa b = -const/coeff
        if w.gradient[0] != 0:
            abscissae.append(-w.constant / w.gradient[0])
    graph_ok = 0
    for y in y_samples:
        y = rat(y)
        if any(y == b for b in abscissae):
            continue
        qy = q2.partial({0: y})
        py = p2.partial({0: y})
        z0 = _linear_root(qy)  # q(y, z) = z - z0(y)
        # root of p above z0 (p decreases from 1 there)
        hi = z0 + 1
        cap = 0
        while py((hi,)) > 0:
            hi = z0 + (hi - z0) * 2
            cap += 1
            if cap > 80:
                raise RootNotBracketed("peel polynomial did not change sign")
        z1 = _bisect_sign_change(py, z0, hi, tol)
        # largest root of f2 = lam above z1 (f2 increases there from ~0)
        fy = f2.partial({0: y}) - Poly.constant(1, lam)
        hi2 = z1 + 1
        cap = 0
        while fy((hi2,)) < 0:
            hi2 = z1 + (hi2 - z1) * 2
            cap += 1
            if cap > 80:
                raise RootNotBracketed("level value not reached above the zero curve")
        z2 = _bisect_sign_change(fy, z1, hi2, tol)
        traced.append((y, z2))
        if qy((z2,)) > 0:
            graph_ok += 1
    verdicts["graph_in_q"] = graph_ok == len(traced)

    blowup = {}
    for b in abscissae:
        hit = None
        for kk in range(1, blowup_halvings + 1):
            step = Fraction(1, 2 ** kk)
            good = True
            for y in (b - step, b + step):
                val = f2((y, Fraction(blowup_threshold)))
                if val >= lam:
                    good = False
                    break
            if good:
                hit = kk
                break
        blowup[rat_str(b)] = hit
        verdicts[f"blowup@{rat_str(b)}"] = hit is not None
    branch["blowup_halvings"] = blowup
    return LevelCurveProbe(lam, traced, branch, verdicts)


def _linear_root(q_univ: Poly) -> Fraction:
    """Root of a degree-one univariate polynomial."""
    a = q_univ.terms.get((1,), Fraction(0))
    b = q_univ.terms.get((0,), Fraction(0))
    if a == 0:
        raise ValueError("not degree one")
    return -b / a


# ---------------------------------------------------------------------------
# negative controls
# ---------------------------------------------------------------------------


def corrupt_chain_sign(chain: MapChain) -> MapChain:
    """Flip the sign of one coefficient in the last polynomial step (for
    asserting that the containment check detects broken chains)."""
    steps = list(chain.steps)
    for idx in range(len(steps) - 1, -1, -1):
        if isinstance(steps[idx], PolyMap):
            pm = steps[idx]
            comps = list(pm.components)
            last = comps[-1]
            terms = dict(last.terms)
            key = max(terms, key=lambda e: (sum(e), e))
            terms[key] = -terms[key]
            comps[-1] = Poly(last.dim, terms)
            steps[idx] = PolyMap(tuple(comps))
            return MapChain(chain.dim, steps)
    raise ValueError("no polynomial step to corrupt")
