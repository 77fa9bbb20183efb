"""Certified weight constants as ``[lower, upper]`` intervals.

Inside one cell span every average ``int_R f dmu / mu(R)`` is a ratio of two
functions that are linear in each endpoint separately, hence monotone in each
endpoint.  Its maximum over a box of endpoints is therefore attained at one of
the box corners, which gives the certified upper bounds used below.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .maximal import strong_maximal_integral_1d
from .errors import InputError, UndefinedResultError
from .measure import (
    AxisGrid,
    GridMeasure,
    Rect,
    Weight,
    all_grid_rects,
    aligned_sums,
    box_sums,
    clip_to,
    conjugate,
    covered_fractions,
    cumulative,
    dual_weight,
    index_to_coords,
)
from .search import branch_and_bound, corner_rects, initial_boxes


@dataclass
class ConstantInterval:
    """Certified enclosure ``lower <= constant <= upper`` with its witness."""

    name: str
    lower: float
    upper: float
    witness: Rect | None
    attained: bool = True
    converged: bool = True
    boxes_explored: int = 0
    iterations: int = 0
    limit_faces: list = field(default_factory=list)

    @property
    def gap(self):
        return self.upper - self.lower

    def to_dict(self):
        return {
            "name": self.name,
            "lower": self.lower,
            "upper": self.upper,
            "attained": self.attained,
            "converged": self.converged,
            "witness": None if self.witness is None else self.witness.to_list(),
            "limit_faces": list(self.limit_faces),
            "boxes_explored": self.boxes_explored,
            "iterations": self.iterations,
        }


MERGE_RTOL = 1e-13
ROUND_RTOL = 1e-14


def canonical_pair(w: Weight, mu: GridMeasure):
    """Drop breakpoints that separate identical data.

    A breakpoint is redundant when the two slices it separates carry equal
    weight values and equal mass densities (relative ``MERGE_RTOL``); removing
    it changes neither the weight nor the measure, but a finer grid turns every
    family of equivalent rectangles into a continuum of tied maximisers that
    the box search would have to tile.  Returns ``(w, mu, delta)`` where
    ``delta`` is the largest relative density change absorbed (0 when exact).
    """
    grid = mu.grid
    vals = w.values
    masses = mu.masses
    wf = list(w.factors) if w.factors is not None else None
    mf = list(mu.factors) if mu.factors is not None else None
    bps = list(grid.breakpoints)
    groups = []
    for axis in range(grid.dim):
        widths = np.diff(bps[axis])
        dens = np.moveaxis(masses, axis, 0) / widths.reshape((-1,) + (1,) * (grid.dim - 1))
        wv = np.moveaxis(vals, axis, 0)
        start = [0]
        for j in range(1, widths.size):
            same_w = np.array_equal(wv[j - 1], wv[j])
            scale = np.maximum(np.abs(dens[j - 1]), np.abs(dens[j]))
            if not (same_w and np.all(np.abs(dens[j - 1] - dens[j]) <= MERGE_RTOL * scale)):
                start.append(j)
        start = np.array(start)
        groups.append(np.repeat(np.arange(start.size), np.diff(np.append(start, widths.size))))
        if start.size == widths.size:
            continue
        bps[axis] = np.append(bps[axis][start], bps[axis][-1])
        masses = np.add.reduceat(masses, start, axis=axis)
        vals = np.take(vals, start, axis=axis)
        if wf is not None:
            wf[axis] = wf[axis][start]
        if mf is not None:
            mf[axis] = np.add.reduceat(mf[axis], start)
    if all(g.size == int(g[-1]) + 1 for g in groups):
        return w, mu, 0.0
    cg = AxisGrid(tuple(bps), max_cells=grid.max_cells)
    cmu = GridMeasure.product(cg, mf) if mf is not None else GridMeasure(cg, masses)
    cw = Weight.product(cg, wf) if wf is not None else Weight(cg, vals)
    # density deviation of every original cell from its merged cell
    back = cmu.density()[np.ix_(*groups)]
    d = mu.density()
    pos = back > 0
    delta = float(np.max(np.abs(d[pos] - back[pos]) / back[pos])) if pos.any() else 0.0
    return cw, cmu, delta


def _widen(ci, factor):
    """Account for a measure perturbed by at most ``factor`` in every average."""
    if factor == 1.0:
        return ci
    ci.lower = max(ci.lower / factor, 1.0)
    ci.upper = ci.upper * factor
    return ci


def _check(w, mu, tol):
    if not w.grid.same_as(mu.grid):
        raise InputError("weight and measure live on different grids")
    if not tol > 0:
        raise InputError("tol must be positive")
    return min(tol, 0.5)


def _mass_tables(mu, cellwise):
    return np.stack([cumulative(c * mu.masses) for c in cellwise] + [cumulative(mu.masses)])


def _face_slabs(grid, boxes, lo, hi, axis, face):
    """Corner rectangles with ``axis`` widened to the cell holding that face."""
    bp = grid.breakpoints[axis]
    c = 0 if face == 0 else 2
    cell = grid.locate(axis, 0.5 * (boxes[:, axis, c] + boxes[:, axis, c + 1]))
    slo, shi = lo.copy(), hi.copy()
    slo[:, :, axis] = bp[cell][:, None]
    shi[:, :, axis] = bp[cell + 1][:, None]
    return slo, shi


def _monotone_reducer(grid, tables, null, terms):
    """Pin faces along which the objective is certifiably monotone on the box.

    With ``log g = sum c_k phi_k(A_k)`` the derivative in a face coordinate has
    the sign of ``sum c_k phi_k'(A_k) (F_k - A_k)`` (``F_k`` the face average).
    Averages and face averages range between their corner values, which bounds
    that sign over the whole box.
    """

    def reduce(boxes):
        boxes = boxes.copy()
        N, n, _ = boxes.shape
        lo, hi = corner_rects(boxes)
        C = lo.shape[1]
        s = box_sums(tables, grid, lo.reshape(-1, n), hi.reshape(-1, n)).reshape(len(tables), N, C)
        m = s[-1]
        ok = (m > null).all(axis=1)
        A = s[:-1] / np.where(m > null, m, 1.0)
        amin, amax = A.min(axis=2), A.max(axis=2)
        for axis in range(n):
            for face in (0, 1):
                c = 2 * face
                free = ok & (boxes[:, axis, c + 1] > boxes[:, axis, c])
                if not free.any():
                    continue
                slo, shi = _face_slabs(grid, boxes, lo, hi, axis, face)
                fs = box_sums(tables, grid, slo.reshape(-1, n), shi.reshape(-1, n)).reshape(len(tables), N, C)
                fm = fs[-1]
                free &= (fm > null).all(axis=1)
                F = fs[:-1] / np.where(fm > null, fm, 1.0)
                fmin, fmax = F.min(axis=2), F.max(axis=2)
                hmin = np.zeros(N)
                hmax = np.zeros(N)
                for k, (kind, coef) in enumerate(terms):
                    if kind == "log":
                        hmin += coef * (fmin[k] / amax[k] - 1.0)
                        hmax += coef * (fmax[k] / amin[k] - 1.0)
                    else:
                        hmin += coef * (fmin[k] - amax[k])
                        hmax += coef * (fmax[k] - amin[k])
                up = free & (hmin > 1e-13)
                down = free & (hmax < -1e-13)
                # increasing along an upper face -> push it up; along a lower face -> push it down
                to_hi = up if face == 1 else down
                to_lo = down if face == 1 else up
                boxes[to_hi, axis, c] = boxes[to_hi, axis, c + 1]
                boxes[to_lo, axis, c + 1] = boxes[to_lo, axis, c]
        return boxes

    return reduce


def _walsh(n):
    """Sign matrix taking corner values to multilinear coefficients, and term degrees.

    Corner ``c`` and coefficient index ``S`` share the encoding of
    :func:`corner_rects`: per axis a digit ``2 * a_bit + b_bit``.
    """
    C = 4 ** n
    digits = np.array(list(itertools.product(range(4), repeat=n)))
    bits = np.stack([digits // 2, digits % 2], axis=2).reshape(C, 2 * n)
    signs = 2.0 * bits - 1.0
    H = np.ones((C, C))
    for j in range(2 * n):
        H *= np.where(bits[:, j][:, None] == 1, signs[:, j][None, :], 1.0)
    return H / C, bits.sum(axis=1), bits


def _taylor_bound(corner_sums, terms, walsh):
    """Second-order certified upper bound on ``log g`` over each box.

    ``corner_sums`` has shape ``(F + 1, N, C)`` (last row the mass).  Every
    ``A_k - A_k(centre) = D_k / m`` with ``D_k`` multilinear and zero at the
    centre; its affine part is kept and the rest bounded in absolute value.
    Log terms are bounded by their tangent at the centre (concavity).
    """
    H, degree, bits = walsh
    coef = corner_sums @ H.T
    m = corner_sums[-1]
    m_lo, m_hi = m.min(axis=1), m.max(axis=1)
    m_c = coef[-1][:, 0]
    delta = np.maximum(1.0 / m_lo - 1.0 / m_c, 1.0 / m_c - 1.0 / m_hi)
    single = degree == 1
    higher = degree >= 2
    const = np.zeros(m.shape[0])
    grad = np.zeros((m.shape[0], int(single.sum())))
    err = np.zeros(m.shape[0])
    for k, (kind, c) in enumerate(terms):
        a_c = coef[k][:, 0] / m_c
        D = coef[k] - a_c[:, None] * coef[-1]
        lin = D[:, single]
        e_k = np.abs(lin).sum(axis=1) * delta + np.abs(D[:, higher]).sum(axis=1) / m_lo
        if kind == "log":
            const += c * np.log(a_c)
            grad += c * lin / (m_c * a_c)[:, None]
            err += c * e_k / a_c
        else:
            const += c * a_c
            grad += c * lin / m_c[:, None]
            err += c * e_k
    return const + np.abs(grad).sum(axis=1) + err


def _factor_search(w, mu, cellwise, combine, tol, budget, name, terms=None):
    """Maximise ``combine(avg_1, ..., avg_F)`` (increasing in each average)."""
    grid = mu.grid
    tables = _mass_tables(mu, cellwise)
    null = mu.null_threshold()
    pos = mu.masses > null
    fallback = np.array([c[pos].max() for c in cellwise])
    reduce = None if terms is None else _monotone_reducer(grid, tables, null, terms)
    walsh = _walsh(grid.dim)

    def evaluate(boxes):
        N, n, _ = boxes.shape
        lo, hi = corner_rects(boxes)
        C = lo.shape[1]
        centre_lo = 0.5 * (boxes[:, :, 0] + boxes[:, :, 1])
        centre_hi = 0.5 * (boxes[:, :, 2] + boxes[:, :, 3])
        all_lo = np.concatenate([lo.reshape(-1, n), centre_lo])
        all_hi = np.concatenate([hi.reshape(-1, n), centre_hi])
        sums = box_sums(tables, grid, all_lo, all_hi)
        m = sums[-1]
        ok = m > null
        avgs = np.where(ok, sums[:-1] / np.where(ok, m, 1.0), -np.inf)
        corner_avgs = avgs[:, : N * C].reshape(len(cellwise), N, C)
        corner_ok = ok[: N * C].reshape(N, C)
        ub_f = corner_avgs.max(axis=2)
        bad = ~corner_ok.all(axis=1)
        if np.any(bad):
            ub_f[:, bad] = fallback[:, None]
        ub = combine(*ub_f)
        if terms is not None:
            good = ~bad
            if np.any(good):
                cs = np.concatenate([sums[:-1, : N * C], sums[-1:, : N * C]]).reshape(-1, N, C)[:, good]
                with np.errstate(over="ignore"):
                    ub[good] = np.minimum(ub[good], np.exp(_taylor_bound(cs, terms, walsh)))
        vals = np.where(ok, combine(*avgs), -np.inf)
        cvals = vals[: N * C].reshape(N, C)
        k = np.argmax(cvals, axis=1)
        rows = np.arange(N)
        lb = cvals[rows, k]
        lb_lo, lb_hi = lo[rows, k], hi[rows, k]
        ctr = vals[N * C :]
        use_c = ctr > lb
        lb = np.where(use_c, ctr, lb)
        lb_lo = np.where(use_c[:, None], centre_lo, lb_lo)
        lb_hi = np.where(use_c[:, None], centre_hi, lb_hi)
        return ub, lb, lb_lo, lb_hi

    res = branch_and_bound(grid, initial_boxes(grid), evaluate, tol, budget=budget, reduce=reduce)
    if res.witness_lo is not None:

        def value(lo, hi):
            # direct overlap sums: differences of cumulative tables lose digits on thin boxes
            fr = covered_fractions(grid, Rect(list(zip(lo, hi)))) * mu.masses
            m = fr.sum()
            return combine(*(np.sum(fr * c) / m for c in cellwise)) if m > null else -np.inf

        res.lower = min(res.lower, value(np.asarray(res.witness_lo), np.asarray(res.witness_hi)))
        lo, hi, v = _polish(grid, value, res.witness_lo, res.witness_hi)
        if v > res.lower:
            res.lower, res.witness_lo, res.witness_hi = float(v), lo, hi
            res.upper = max(res.upper, res.lower)
    return _to_interval(name, res)


_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def _golden_max(f, a, b, iters=80):
    x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _polish(grid, value, lo, hi, sweeps=4):
    """Coordinate-wise golden-section ascent of a witness rectangle.

    Each face moves within the two cells around its current position.  Only
    evaluated rectangles are returned, so the value stays a valid lower bound.
    """
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    best = value(lo, hi)
    for _ in range(sweeps):
        start = best
        for axis in range(grid.dim):
            bp = grid.breakpoints[axis]
            for face in (0, 1):
                cur = lo if face == 0 else hi
                x = cur[axis]
                j = int(np.searchsorted(bp, x))
                a, b = bp[max(j - 1, 0)], bp[min(j + 1, bp.size - 1)]
                if face == 0:
                    b = min(b, hi[axis])
                else:
                    a = max(a, lo[axis])
                if b <= a:
                    continue

                def f(t, cur=cur, axis=axis):
                    trial = cur.copy()
                    trial[axis] = t
                    return value(trial, hi) if cur is lo else value(lo, trial)

                t, v = _golden_max(f, a, b)
                if v > best and ((face == 0 and t < hi[axis]) or (face == 1 and t > lo[axis])):
                    cur[axis] = t
                    best = v
        if best <= start:
            break
    return lo, hi, best


def _to_interval(name, res):
    witness = None
    if res.witness_lo is not None:
        witness = Rect(list(zip(res.witness_lo, res.witness_hi)))
    # outward rounding covers the floating-point error of the box sums
    lower = max(res.lower * (1.0 - ROUND_RTOL), 1.0) if np.isfinite(res.lower) else 1.0
    return ConstantInterval(
        name=name,
        lower=float(lower),
        upper=float(max(res.upper * (1.0 + ROUND_RTOL), lower)),
        witness=witness,
        converged=bool(res.converged),
        boxes_explored=res.boxes_explored,
        iterations=res.iterations,
    )


def ap_star_constant(w: Weight, mu: GridMeasure, p: float, tol=1e-6, budget=400_000) -> ConstantInterval:
    """``sup_R (avg_R w) (avg_R sigma)^(p-1)`` over all axis-parallel rectangles."""
    if not p > 1:
        raise InputError("p must exceed 1 for A_p*; use a1_star_constant for A_1*")
    tol = _check(w, mu, tol)
    w, mu, delta = canonical_pair(w, mu)
    sigma = dual_weight(w, p).values

    def combine(aw, asg):
        return aw * asg ** (p - 1.0)

    ci = _factor_search(
        w, mu, [w.values, sigma], combine, tol, budget, f"A_{p:g}*", terms=[("log", 1.0), ("log", p - 1.0)]
    )
    return _widen(ci, (1.0 + 3.0 * delta) ** p)


def ainf_exp_constant(w: Weight, mu: GridMeasure, tol=1e-6, budget=400_000) -> ConstantInterval:
    """``sup_R (avg_R w) exp(avg_R log w^-1)``."""
    tol = _check(w, mu, tol)
    w, mu, delta = canonical_pair(w, mu)
    ci = _factor_search(
        w, mu, [w.values, -np.log(w.values)], lambda aw, al: aw * np.exp(al), tol, budget, "A_inf* (exp)",
        terms=[("log", 1.0), ("lin", 1.0)],
    )
    return _widen(ci, (1.0 + 3.0 * delta) * np.exp(3.0 * delta * w.log_ratio()))


def _range_min(values, axis):
    """Min over every contiguous index range [j, k] along ``axis``: shape (.., R, ..)."""
    K = values.shape[axis]
    parts = []
    for j in range(K):
        sl = np.take(values, np.arange(j, K), axis=axis)
        parts.append(np.minimum.accumulate(sl, axis=axis))
    return np.concatenate(parts, axis=axis)


def _axis_a1_options(K):
    """Per axis: (block j, block k, G lo idx, G hi idx, lower-limit?, upper-limit?)."""
    opts = []
    r = 0
    for j in range(K):
        for k in range(j, K):
            if k == j:
                opts.append((r, j, j + 1, False, False))
            else:
                for a, la in ((j, False), (j + 1, True)):
                    for b, lb in ((k + 1, False), (k, True)):
                        if a < b:
                            opts.append((r, a, b, la, lb))
            r += 1
    return np.array(opts, dtype=object)


def a1_star_constant(w: Weight, mu: GridMeasure, tol=1e-6, grid_aligned_only=False) -> ConstantInterval:
    """``sup_R (avg_R w) esssup_R w^-1``, computed exactly.

    On a block of cells ``j..k`` (per axis) the esssup term is constant for
    rectangles whose faces lie strictly inside the end cells, and the average is
    maximised at a corner of the face ranges.  Corners with a face on the inner
    edge of an end cell are limits: the rectangle still meets that cell.
    ``grid_aligned_only`` restricts to grid rectangles (diagnostic).
    """
    _check(w, mu, tol)
    delta = 0.0
    if not grid_aligned_only:
        w, mu, delta = canonical_pair(w, mu)
    grid = mu.grid
    null = mu.null_threshold()
    tables = _mass_tables(mu, [w.values])
    vals = np.where(mu.masses > null, w.values, np.inf)
    if grid_aligned_only:
        ilo, ihi = all_grid_rects(grid.shape)
        s = aligned_sums(tables, ilo, ihi)
        mins = np.array([vals[tuple(slice(a, b) for a, b in zip(l, h))].min() for l, h in zip(ilo, ihi)])
        ok = s[1] > null
        score = np.where(ok, s[0] / np.where(ok, s[1], 1) / mins, -np.inf)
        lo, hi = index_to_coords(grid, ilo, ihi)
        k = _best_index(score, lo, hi)
        return ConstantInterval("A_1* (grid)", float(max(score[k], 1.0)), float(max(score[k], 1.0)),
                                Rect(list(zip(lo[k], hi[k]))), attained=True)
    block_min = vals
    for axis in range(grid.dim):
        block_min = _range_min(block_min, axis)
    opts = [_axis_a1_options(K) for K in grid.shape]
    combos = np.array(list(itertools.product(*[range(len(o)) for o in opts])))
    per = [opts[i][combos[:, i]] for i in range(grid.dim)]
    blk = tuple(per[i][:, 0].astype(int) for i in range(grid.dim))
    ilo = np.stack([per[i][:, 1].astype(int) for i in range(grid.dim)], axis=1)
    ihi = np.stack([per[i][:, 2].astype(int) for i in range(grid.dim)], axis=1)
    limit = np.stack([np.stack([per[i][:, 3], per[i][:, 4]], axis=1) for i in range(grid.dim)], axis=1).astype(bool)
    s = aligned_sums(tables, ilo, ihi)
    ok = (s[1] > null) & np.isfinite(block_min[blk])
    score = np.where(ok, s[0] / np.where(ok, s[1], 1.0) / block_min[blk], -np.inf)
    if not np.any(ok):
        raise UndefinedResultError("no rectangle of positive mass")
    lo, hi = index_to_coords(grid, ilo, ihi)
    k = _best_index(score, lo, hi)
    best = float(score[k])
    own_min = vals[tuple(slice(a, b) for a, b in zip(ilo[k], ihi[k]))].min()
    attained = bool(not limit[k].any() or own_min <= block_min[blk][k])
    faces = []
    if not attained:
        for axis in range(grid.dim):
            if limit[k, axis, 0]:
                faces.append({"axis": axis, "face": "lower", "approaches": float(lo[k, axis]), "from": "below"})
            if limit[k, axis, 1]:
                faces.append({"axis": axis, "face": "upper", "approaches": float(hi[k, axis]), "from": "above"})
    val = max(best, 1.0)
    ci = ConstantInterval("A_1*", val, val, Rect(list(zip(lo[k], hi[k]))), attained=attained,
                          limit_faces=faces, boxes_explored=len(score))
    return _widen(ci, 1.0 + 3.0 * delta)


def _best_index(score, lo, hi):
    top = score.max()
    cand = np.nonzero(score >= top - 1e-12 * abs(top))[0]
    keys = [tuple(lo[c]) + tuple(hi[c]) for c in cand]
    return int(cand[min(range(len(cand)), key=lambda i: keys[i])])


# ---------------------------------------------------------------------------
# Fujii-Wilson constant


def fw_inner_bounds(w: Weight, mu: GridMeasure, rect: Rect, depth: int):
    """Certified bounds on ``int_R M_s(w chi_R) dmu`` and on ``w(R)``.

    ``M_s(w chi_R)`` on ``R`` only sees sub-rectangles of ``R``, so the problem
    is restricted to ``R`` (grid cut at its faces, cells split ``2^depth`` ways).
    Per lattice cell the supremum of ``M_s`` is exact (max over lattice boxes
    meeting the cell) and boxes containing the cell give a lower bound.
    """
    sw, smu = clip_to(w, mu, rect, refine=2 ** depth)
    cf, cm = cumulative(sw.values * smu.masses), cumulative(smu.masses)
    null = smu.null_threshold()
    contain, meet, _ = kernels.sweep_max(cf, cm, null)
    pos = smu.masses > null
    if smu.grid.dim == 1:
        lo_c, hi_c = strong_maximal_integral_1d(cf, cm, sw.values, smu.masses, null)
        lo_c = np.maximum(lo_c, np.where(pos, contain, 0.0) * smu.masses)
        hi_c = np.maximum(np.minimum(hi_c, np.where(pos, meet, 0.0) * smu.masses), lo_c)
        return float(lo_c.sum()), float(hi_c.sum()), float(np.sum(sw.values * smu.masses))
    lo_int = float(np.sum(np.where(pos, contain, 0.0) * smu.masses))
    hi_int = float(np.sum(np.where(pos, meet, 0.0) * smu.masses))
    return lo_int, hi_int, float(np.sum(sw.values * smu.masses))


def _fw_global_cap(w, mu):
    """``max_c G_c / w_c`` with ``G_c`` the exact per-cell ceiling of ``M_s w``.

    ``M_s(w chi_R) <= M_s w`` and a ratio of sums is at most its largest
    termwise ratio, so this bounds the constant for every rectangle.
    """
    cf, cm = cumulative(w.values * mu.masses), cumulative(mu.masses)
    null = mu.null_threshold()
    meet = kernels.sweep_max(cf, cm, null)[1]
    pos = mu.masses > null
    return float(np.max(np.where(pos, meet / w.values, 1.0)))


def ainf_fw_constant(w: Weight, mu: GridMeasure, tol=0.02, ms_depth=3, budget=4000) -> ConstantInterval:
    """``sup_R w(R)^-1 int_R M_s(w chi_R) dmu`` with a certified enclosure.

    For a box of rectangles, ``R_big`` (largest) and ``R_small`` (smallest)
    give ``value(R) <= I_upper(R_big) / w(R_small)``.  The lower bound uses the
    lattice lower evaluator on ``R_big``.  The upper bound is also capped by the
    global ceiling ratio.  The gap is limited by ``ms_depth`` and ``budget``
    and may stay above ``tol``; ``converged`` reports this.
    """
    tol = _check(w, mu, tol)
    w, mu, delta = canonical_pair(w, mu)
    widen = (1.0 + 3.0 * delta) ** 3
    grid = mu.grid
    wtab = _mass_tables(mu, [w.values])
    if grid.dim == 1:
        # the inner integral is exact in 1D, so refinement buys nothing
        ms_depth = 0
    # in 1D a face can sit in a cell of much larger w-mass than the rest of R,
    # so freezing must happen far below the target tolerance
    min_rel = 1e-7 if grid.dim == 1 else 2.0 ** -(ms_depth + 2)
    cap = _fw_global_cap(w, mu)

    def evaluate(boxes, depth=ms_depth):
        N, n, _ = boxes.shape
        ub = np.empty(N)
        lb = np.empty(N)
        big_lo, big_hi = boxes[:, :, 0], boxes[:, :, 3]
        small = box_sums(wtab, grid, boxes[:, :, 1], boxes[:, :, 2])[0]
        for k in range(N):
            r = Rect(list(zip(big_lo[k], big_hi[k])))
            li, ui, wr = fw_inner_bounds(w, mu, r, depth)
            ub[k] = min(ui / small[k], cap) if small[k] > 0 else cap
            lb[k] = li / wr if wr > 0 else -np.inf
        return ub, lb, big_lo, big_hi

    boxes = initial_boxes(grid)
    name = "A_inf* (Fujii-Wilson)"
    if len(boxes) > budget:
        # too many starting boxes: evaluate an even sample for the lower bound
        pick = np.unique(np.linspace(0, len(boxes) - 1, max(1, budget // 4)).astype(int))
        _, lb, blo, bhi = evaluate(boxes[pick], depth=0)
        k = _best_index(lb, blo, bhi)
        lower = max(float(lb[k]), 1.0)
        ci = ConstantInterval(
            name=name,
            lower=lower,
            upper=max(cap, lower),
            witness=Rect(list(zip(blo[k], bhi[k]))),
            converged=bool(cap - lower <= tol * cap),
            boxes_explored=len(pick),
            iterations=0,
        )
        return _widen(ci, widen)
    res = branch_and_bound(grid, boxes, evaluate, tol, budget=budget, batch=16, min_rel_width=min_rel)
    return _widen(_to_interval(name, res), widen)


# ---------------------------------------------------------------------------
# Doubling constant


def _lines_1d(bp, dlo, dhi, min_width):
    lines = []
    for x in bp:
        lines += [(1.0, 0.0, x), (0.0, 1.0, x), (3.0, -1.0, 2 * x), (-1.0, 3.0, 2 * x)]
    lines.append((-1.0, 1.0, min_width))
    return np.array(lines)


def _doubling_1d(bp, masses):
    """Exact 1D ``sup mu(2R)/mu(R)`` via the vertices of the linearity arrangement.

    In ``(a, b)`` coordinates both masses are piecewise linear with kinks on the
    lines ``a, b, (3a-b)/2, (3b-a)/2 = breakpoint``; on each piece the ratio is
    linear-fractional, so its supremum over the admissible polygon sits at a
    vertex.  Rescaling about a breakpoint leaves the ratio unchanged while ``2R``
    stays inside two adjacent cells, so ``b - a >= min cell width / 2`` loses
    nothing and keeps ``mu(R)`` away from zero.
    """
    dlo, dhi = bp[0], bp[-1]
    min_width = np.diff(bp).min() / 2.0
    lines = _lines_1d(bp, dlo, dhi, min_width)
    i, j = np.triu_indices(len(lines), 1)
    A = np.stack([lines[i, :2], lines[j, :2]], axis=1)
    det = np.linalg.det(A)
    keep = np.abs(det) > 1e-14
    rhs = np.stack([lines[i, 2], lines[j, 2]], axis=1)[keep]
    pts = np.linalg.solve(A[keep], rhs[..., None])[..., 0]
    a, b = pts[:, 0], pts[:, 1]
    eps = 1e-12 * (dhi - dlo)
    feas = (
        (a >= dlo - eps) & (b <= dhi + eps) & (b - a >= min_width - eps)
        & (3 * a - b >= 2 * dlo - 2 * eps) & (3 * b - a <= 2 * dhi + 2 * eps)
    )
    a, b = a[feas], b[feas]
    if a.size == 0:
        raise UndefinedResultError("no rectangle with its double inside the domain")
    a = np.clip(a, dlo, dhi)
    b = np.clip(b, dlo, dhi)
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    lo2 = np.clip(c - 2 * h, dlo, dhi)
    hi2 = np.clip(c + 2 * h, dlo, dhi)
    from .measure import AxisGrid

    g = AxisGrid((bp,))
    tab = cumulative(masses)[None]
    small = box_sums(tab, g, a[:, None], b[:, None])[0]
    big = box_sums(tab, g, lo2[:, None], hi2[:, None])[0]
    null = 1e-13 * masses.sum()
    if np.any((small <= null) & (big > null)):
        return np.inf, None
    ok = small > null
    ratio = np.where(ok, big / np.where(ok, small, 1.0), -np.inf)
    k = int(np.argmax(ratio))
    return float(ratio[k]), (float(a[k]), float(b[k]))


def doubling_constant(mu: GridMeasure, tol=1e-6) -> ConstantInterval:
    """``sup mu(2R)/mu(R)`` over rectangles whose concentric double fits the domain.

    Exact in 1D and for product measures (the ratio factorises).  For other
    measures in n > 1 the interval is ``[best candidate, 2^n max density /
    min density]`` and is flagged as not converged.
    """
    grid = mu.grid
    if grid.dim == 1 or mu.is_product:
        facs = [mu.masses] if grid.dim == 1 else mu.factors
        val, bounds = 1.0, []
        for axis, f in enumerate(facs):
            r, wit = _doubling_1d(grid.breakpoints[axis], np.asarray(f))
            val *= r
            bounds.append(wit)
        if not np.isfinite(val) or None in bounds:
            return ConstantInterval("doubling", np.inf, np.inf, None, attained=False)
        return ConstantInterval("doubling", val, val, Rect(bounds))
    lower, wit = _doubling_candidates(mu)
    dens = mu.density()
    if np.any(dens <= 0):
        upper = np.inf
    else:
        upper = 2.0 ** grid.dim * dens.max() / dens.min()
    return ConstantInterval("doubling", lower, max(upper, lower), wit, converged=bool(upper - lower <= tol * upper))


def _doubling_candidates(mu):
    grid = mu.grid
    tab = cumulative(mu.masses)[None]
    per_axis = []
    for axis in range(grid.dim):
        bp = grid.breakpoints[axis]
        dlo, dhi = bp[0], bp[-1]
        pts = np.unique(np.concatenate([bp, grid.midpoints(axis)]))
        cand = []
        for a in pts:
            for b in pts:
                if b > a and 1.5 * a - 0.5 * b >= dlo - 1e-15 and 1.5 * b - 0.5 * a <= dhi + 1e-15:
                    cand.append((a, b))
        if not cand:
            raise UndefinedResultError("no rectangle with its double inside the domain")
        per_axis.append(np.array(cand))
    idx = np.array(list(itertools.product(*[range(len(c)) for c in per_axis])))
    lo = np.stack([per_axis[i][idx[:, i], 0] for i in range(grid.dim)], axis=1)
    hi = np.stack([per_axis[i][idx[:, i], 1] for i in range(grid.dim)], axis=1)
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    small = box_sums(tab, grid, lo, hi)[0]
    big = box_sums(tab, grid, np.maximum(c - 2 * h, [d[0] for d in grid.domain]),
                   np.minimum(c + 2 * h, [d[1] for d in grid.domain]))[0]
    ok = small > mu.null_threshold()
    ratio = np.where(ok, big / np.where(ok, small, 1.0), -np.inf)
    k = _best_index(ratio, lo, hi)
    return float(ratio[k]), Rect(list(zip(lo[k], hi[k])))


def constant_by_name(name, w, mu, p=None, tol=1e-6, **kw):
    if name == "ap":
        return ap_star_constant(w, mu, p, tol=tol, **kw)
    if name == "a1":
        return a1_star_constant(w, mu, tol=tol, **kw)
    if name == "ainf-exp":
        return ainf_exp_constant(w, mu, tol=tol, **kw)
    if name == "ainf-fw":
        return ainf_fw_constant(w, mu, tol=max(tol, 1e-3), **kw)
    if name == "doubling":
        return doubling_constant(mu, tol=tol)
    raise InputError(f"unknown constant {name!r}")


__all__ = [
    "ConstantInterval",
    "ap_star_constant",
    "a1_star_constant",
    "ainf_exp_constant",
    "ainf_fw_constant",
    "doubling_constant",
    "fw_inner_bounds",
    "conjugate",
]
