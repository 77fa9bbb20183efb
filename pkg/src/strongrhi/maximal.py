"""Maximal operators on piecewise-constant functions.

Strong, cubic and centred maximal functions are evaluated on a lattice (the
ambient grid with every cell split ``2^depth`` ways per axis).  Node values
are exact for the strong and centred operators: for a piecewise-constant
function the optimal rectangle faces lie on grid breakpoints or on the point
itself.  Per-cell certified upper values come from rectangles meeting the
closed cell, and per-cell floors from rectangles containing it.

The ``mu``-dyadic machinery (median splitting trees, dyadic maximal function,
majorization constant) lives here as well.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError, InputError
from .measure import (
    AxisGrid,
    GridMeasure,
    Rect,
    Weight,
    _along,
    all_grid_rects,
    aligned_sums,
    box_sums,
    covered_fractions,
    cumulative,
)

OPERATORS = ("strong", "cubic", "centered")


def _values(f, grid):
    vals = np.asarray(f.values if isinstance(f, Weight) else f, dtype=float)
    if vals.shape != grid.shape:
        raise InputError(f"function shape {vals.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(vals)):
        raise InputError("function values must be finite")
    if np.any(vals < 0):
        raise InputError("maximal operators take nonnegative functions")
    return vals


def _repeat(vals, factor):
    for axis in range(vals.ndim):
        vals = np.repeat(vals, factor, axis=axis)
    return vals


@dataclass
class MaximalField:
    """Maximal function of ``f`` on a lattice.

    ``lower`` holds node values (shape = breakpoints per axis), ``floor`` and
    ``upper`` hold per-cell bounds ``floor <= Mf <= upper`` on each closed
    lattice cell (``upper`` is ``None`` outside certified mode).
    """

    operator: str
    lattice: AxisGrid
    lower: np.ndarray
    floor: np.ndarray
    upper: np.ndarray | None
    masses: np.ndarray

    def node_coords(self):
        return np.meshgrid(*self.lattice.breakpoints, indexing="ij")

    def at(self, x):
        """Node value at the lattice node nearest to ``x``."""
        idx = tuple(int(np.argmin(np.abs(b - xi))) for b, xi in zip(self.lattice.breakpoints, np.atleast_1d(x)))
        return float(self.lower[idx])

    def integral(self, kind="nodes"):
        """``int Mf dmu`` from the lattice.

        ``nodes`` averages the corner node values of each cell (converges
        with depth), ``lower``/``upper`` use the certified per-cell bounds.
        """
        if kind == "lower":
            return float(np.sum(np.where(self.masses > 0, self.floor, 0.0) * self.masses))
        if kind == "upper":
            if self.upper is None:
                raise InputError("upper integral needs certified mode")
            return float(np.sum(np.where(self.masses > 0, self.upper, 0.0) * self.masses))
        if kind != "nodes":
            raise InputError(f"unknown integral kind {kind!r}")
        n = self.lattice.dim
        acc = np.zeros(self.lattice.shape)
        for corner in itertools.product((0, 1), repeat=n):
            acc += self.lower[tuple(slice(c, c + k) for c, k in zip(corner, self.lattice.shape))]
        return float(np.sum(acc / 2**n * self.masses))

    def to_dict(self):
        return {
            "operator": self.operator,
            "breakpoints": [b.tolist() for b in self.lattice.breakpoints],
            "lower": self.lower.tolist(),
            "floor": self.floor.tolist(),
            "upper": None if self.upper is None else self.upper.tolist(),
        }


def _lattice(f, mu, depth):
    if depth < 0:
        raise InputError("depth must be >= 0")
    vals = _values(f, mu.grid)
    factor = 2**depth
    if factor == 1:
        return vals, mu
    return _repeat(vals, factor), mu.refine(factor)


def strong_maximal(f, mu: GridMeasure, depth=0, mode="lower", operator="strong") -> MaximalField:
    """Maximal function of ``f >= 0`` on the ``depth``-refined lattice.

    ``operator``: ``strong`` (all rectangles), ``cubic`` (geometric cubes,
    with ``mu`` vanishing outside the domain so cubes are clipped to it) or
    ``centered`` (1D, intervals centred at the point).
    """
    if operator not in OPERATORS:
        raise InputError(f"unknown operator {operator!r}; expected one of {OPERATORS}")
    if mode not in ("lower", "certified"):
        raise InputError("mode must be 'lower' or 'certified'")
    if operator == "centered" and mu.grid.dim > 1:
        raise InputError("centered maximal function is implemented in one dimension only")
    vals, lmu = _lattice(f, mu, depth)
    null = lmu.null_threshold()
    cf, cm = cumulative(vals * lmu.masses), cumulative(lmu.masses)
    contain, meet, point = kernels.sweep_max(cf, cm, null)
    lower, floor = point, contain
    if operator == "cubic" and mu.grid.dim > 1:
        lower, floor = _cubic_lower(vals, lmu)
    elif operator == "centered":
        lower = _centered_nodes(_values(f, mu.grid), mu, lmu.grid.breakpoints[0])
        floor = vals.copy()
    return MaximalField(operator, lmu.grid, lower, floor, meet if mode == "certified" else None, lmu.masses)


def strong_maximal_at(f, mu: GridMeasure, x) -> float:
    """Exact ``M_s f(x)`` at an arbitrary point (the point becomes a lattice node)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != mu.grid.dim:
        raise InputError("point has the wrong dimension")
    vals = _values(f, mu.grid)
    bps = []
    for axis, xi in enumerate(x):
        b = mu.grid.breakpoints[axis]
        if not b[0] <= xi <= b[-1]:
            raise InputError("point outside the domain")
        bps.append(np.union1d(b, [xi]))
    g = AxisGrid(tuple(bps), max_cells=mu.grid.max_cells)
    sel = [mu.grid.locate(i, g.midpoints(i)) for i in range(g.dim)]
    frac = np.ones(g.shape)
    for axis in range(g.dim):
        frac = frac * _along(g.widths(axis) / mu.grid.widths(axis)[sel[axis]], axis, g.dim)
    idx = np.ix_(*sel)
    m = mu.masses[idx] * frac
    _, _, point = kernels.sweep_max(cumulative(vals[idx] * m), cumulative(m), mu.null_threshold())
    node = tuple(int(np.searchsorted(b, xi)) for b, xi in zip(bps, x))
    return float(point[node])


def _centered_nodes(vals, mu, xs):
    """Exact centred maximal function at points ``xs`` (1D).

    The average over ``[x - r, x + r]`` (clipped to the domain) is a Moebius
    function of ``r`` between consecutive breakpoint distances, so the
    supremum is at such a distance or in the limit ``r -> 0``.
    """
    g = mu.grid
    bp = g.breakpoints[0]
    lo, hi = bp[0], bp[-1]
    tab = np.stack([cumulative(vals * mu.masses), cumulative(mu.masses)])
    dens = mu.masses / g.widths(0)
    out = np.empty(xs.size)
    for k, x in enumerate(xs):
        r = np.abs(bp - x)
        r = r[r > 0]
        a = np.clip(x - r, lo, hi)
        b = np.clip(x + r, lo, hi)
        s = box_sums(tab, g, a[:, None], b[:, None])
        ok = s[1] > mu.null_threshold()
        best = np.max(s[0][ok] / s[1][ok]) if np.any(ok) else 0.0
        # r -> 0: density-weighted mix of the cells on either side
        left = int(np.searchsorted(bp, x, side="left")) - 1
        right = int(np.searchsorted(bp, x, side="right")) - 1
        num = den = 0.0
        for c in {left, right}:
            if 0 <= c < g.shape[0] and dens[c] > 0:
                num += dens[c] * vals[c]
                den += dens[c]
        if den > 0:
            best = max(best, num / den)
        out[k] = best
    return out


def _cubic_lower(vals, lmu):
    """Cube averages scattered to the nodes and cells they contain.

    Cubes have side lengths drawn from node spacings and a lower corner at a
    node or a node minus the side; they are clipped to the domain.
    """
    g = lmu.grid
    n = g.dim
    nodes = g.breakpoints
    tab = np.stack([cumulative(vals * lmu.masses), cumulative(lmu.masses)])
    null = lmu.null_threshold()
    sides = np.unique(np.concatenate([np.abs(b[:, None] - b[None, :]).ravel() for b in nodes]))
    sides = sides[sides > 0]
    lower = np.full(tuple(b.size for b in nodes), -np.inf)
    floor = np.full(g.shape, -np.inf)
    for ell in sides:
        per_axis = []
        for b in nodes:
            starts = np.unique(np.concatenate([b, b - ell]))
            a = np.clip(starts, b[0], b[-1])
            e = np.clip(starts + ell, b[0], b[-1])
            keep = e > a
            per_axis.append(np.unique(np.stack([a[keep], e[keep]], axis=1), axis=0))
        combos = np.array(list(itertools.product(*[range(len(p)) for p in per_axis])))
        lo = np.stack([per_axis[i][combos[:, i], 0] for i in range(n)], axis=1)
        hi = np.stack([per_axis[i][combos[:, i], 1] for i in range(n)], axis=1)
        s = box_sums(tab, g, lo, hi)
        ok = s[1] > null
        avg = np.where(ok, s[0] / np.where(ok, s[1], 1.0), -np.inf)
        for k in np.nonzero(ok)[0]:
            nsl, csl = [], []
            for i in range(n):
                b = nodes[i]
                j0 = np.searchsorted(b, lo[k, i], side="left")
                j1 = np.searchsorted(b, hi[k, i], side="right")
                nsl.append(slice(j0, j1))
                csl.append(slice(j0, max(j1 - 1, j0)))
            sl = tuple(nsl)
            lower[sl] = np.maximum(lower[sl], avg[k])
            sl = tuple(csl)
            floor[sl] = np.maximum(floor[sl], avg[k])
    return lower, floor


def local_dyadic_maximal(f, mu: GridMeasure, root: Rect, depth: int):
    """``M^d_{R_0}``: maximal function over successive halvings of ``root``."""
    return dyadic_maximal(f, mu, build_dyadic(mu, root, depth, rule="geometric"))


def _envelope_integral(c, alpha, beta, width, max_steps=10_000):
    """Integrate ``max_i c_i / (alpha_i + beta_i t)`` over ``[0, width]``.

    Any two members differ in sign like an affine function of ``t``, so they
    cross at most once: if one member is the maximum at both ends of a piece,
    it is the maximum throughout.  Pieces are split at the crossing of the two
    end maximisers.  Returns ``(lower, upper)``; they agree unless the step
    budget runs out, in which case the remaining pieces get monotone bounds.
    """

    def val(t):
        return c / (alpha + beta * t)

    def integral(i, t0, t1):
        if beta[i] == 0:
            return c[i] * (t1 - t0) / alpha[i]
        return c[i] * beta[i] * np.log((alpha[i] + beta[i] * t1) / (alpha[i] + beta[i] * t0))

    lo = hi = 0.0
    stack = [(0.0, width)]
    steps = 0
    while stack:
        t0, t1 = stack.pop()
        v0, v1 = val(t0), val(t1)
        i0, i1 = int(np.argmax(v0)), int(np.argmax(v1))
        tie = 1e-14 * max(abs(v1[i1]), 1.0)
        if v1[i0] >= v1[i1] - tie:
            i1 = i0
        elif v0[i1] >= v0[i0] - tie:
            i0 = i1
        if i0 == i1:
            part = integral(i0, t0, t1)
            lo += part
            hi += part
            continue
        steps += 1
        if steps > max_steps:
            lo += max(integral(i0, t0, t1), integral(i1, t0, t1))
            hi += (t1 - t0) * max(v0[i0], v1[i1])
            continue
        den = c[i0] * beta[i1] - c[i1] * beta[i0]
        t = (c[i1] * alpha[i0] - c[i0] * alpha[i1]) / den if den != 0 else 0.5 * (t0 + t1)
        if not t0 < t < t1:
            t = 0.5 * (t0 + t1)
        stack += [(t0, t), (t, t1)]
    return lo, hi


def strong_maximal_integral_1d(cf, cm, f, m, null):
    """Per-cell ``(lower, upper)`` of ``int_cell M_s f dmu`` on a 1D grid, exact.

    For ``x`` in cell ``s`` the strong maximal function is the largest of
    ``f_s`` and the averages over ``[x, x_h]`` and ``[x_l, x]`` with ``x_h``,
    ``x_l`` breakpoints, since the average over ``[x_l, x_h]`` is a convex
    combination of the two one-sided ones.  In the mass coordinate ``t`` each
    candidate is ``f_s + c / (alpha +- t)``.
    """
    K = m.size
    lo = np.zeros(K)
    hi = np.zeros(K)
    for s in range(K):
        ms, fs = m[s], f[s]
        if ms <= null:
            continue
        F = cf[s + 2 :] - cf[s]
        M = cm[s + 2 :] - cm[s]
        ok = M - ms > null
        cr, ar = F[ok] - fs * M[ok], M[ok]
        F = cf[s] - cf[:s]
        M = cm[s] - cm[:s]
        ok = M > null
        cl, al = F[ok] - fs * M[ok], M[ok]
        c = np.concatenate([[0.0], cr, cl])
        alpha = np.concatenate([[1.0], ar, al])
        beta = np.concatenate([[0.0], -np.ones(cr.size), np.ones(cl.size)])
        keep = c >= 0
        a, b = _envelope_integral(c[keep], alpha[keep], beta[keep], ms)
        lo[s] = fs * ms + a
        hi[s] = fs * ms + b
    return lo, hi


# ---------------------------------------------------------------------------
# mu-dyadic grids


@dataclass
class DyadicGrid:
    """Splitting tree of ``root`` into ``2^n`` children per node.

    ``levels[l]`` is a pair of ``(2^(n l), n)`` arrays (lower and upper
    corners); the children of node ``i`` at level ``l`` are nodes
    ``i * 2^n .. i * 2^n + 2^n - 1`` at level ``l + 1``.
    """

    root: Rect
    depth: int
    rule: str
    levels: list

    @property
    def dim(self):
        return self.root.dim

    def leaves(self):
        return self.levels[-1]

    def node_rect(self, level, i):
        lo, hi = self.levels[level]
        return Rect(list(zip(lo[i], hi[i])), degenerate=True)

    def to_dict(self):
        return {
            "root": self.root.to_list(),
            "depth": self.depth,
            "rule": self.rule,
            "leaves": [[list(p) for p in zip(a, b)] for a, b in zip(*self.leaves())],
        }


def _slab_mass_at(mu, lo, hi, axis, ts):
    a = np.repeat(lo[None], ts.size, axis=0)
    b = np.repeat(hi[None], ts.size, axis=0)
    b[:, axis] = ts
    return box_sums(mu._cum, mu.grid, a, b)[0]


def median_cut(mu: GridMeasure, lo, hi, axis):
    """Coordinate ``t`` with ``mu([lo, hi] cut at t) = mu([lo, hi]) / 2``.

    The slab mass is linear in ``t`` inside each cell, so the cut is solved
    exactly by interpolation.  Flat stretches resolve to the leftmost root.
    """
    bp = mu.grid.breakpoints[axis]
    ts = np.concatenate([[lo[axis]], bp[(bp > lo[axis]) & (bp < hi[axis])], [hi[axis]]])
    cum = _slab_mass_at(mu, lo, hi, axis, ts)
    target = 0.5 * cum[-1]
    k = int(np.searchsorted(cum, target, side="left"))
    k = min(max(k, 1), ts.size - 1)
    m0, m1 = cum[k - 1], cum[k]
    if m1 <= m0:
        return float(ts[k - 1])
    t = ts[k - 1] + (target - m0) / (m1 - m0) * (ts[k] - ts[k - 1])
    return float(min(max(t, ts[k - 1]), ts[k]))


def build_dyadic(mu: GridMeasure, root: Rect, depth: int, rule="median") -> DyadicGrid:
    """Split ``root`` ``depth`` times by sequential axis cuts.

    ``median`` cuts axis 0 at the conditional median, then each half along
    axis 1, and so on, giving ``2^n`` children of equal mass; ``geometric``
    halves every side (the local dyadic grid of ``root``).
    """
    if depth < 0:
        raise InputError("depth must be >= 0")
    if rule not in ("median", "geometric"):
        raise InputError("rule must be 'median' or 'geometric'")
    if root.dim != mu.grid.dim or not root.inside(mu.grid):
        raise InputError("root rectangle must lie inside the domain")
    if box_sums(mu._cum, mu.grid, root.lo[None], root.hi[None])[0, 0] <= mu.null_threshold():
        raise DegenerateInputError("root rectangle has zero mass")
    n = mu.grid.dim
    levels = [(root.lo[None].copy(), root.hi[None].copy())]
    for _ in range(depth):
        plo, phi = levels[-1]
        boxes = [(a, b) for a, b in zip(plo, phi)]
        for axis in range(n):
            nxt = []
            for a, b in boxes:
                t = median_cut(mu, a, b, axis) if rule == "median" else 0.5 * (a[axis] + b[axis])
                b1, a2 = b.copy(), a.copy()
                b1[axis] = t
                a2[axis] = t
                nxt += [(a, b1), (a2, b)]
            boxes = nxt
        levels.append((np.array([a for a, _ in boxes]), np.array([b for _, b in boxes])))
    return DyadicGrid(root, depth, rule, levels)


@dataclass
class DyadicField:
    """Dyadic maximal function: exact leaf values and per-level averages."""

    grid: DyadicGrid
    averages: list
    values: np.ndarray

    @property
    def lower(self):
        return self.values

    @property
    def upper(self):
        return self.values


def dyadic_maximal(f, mu: GridMeasure, grid: DyadicGrid, support: Rect | None = None) -> DyadicField:
    """Leaf values of ``sup_{J ancestor} avg_J |f|`` over the splitting tree.

    ``support`` multiplies ``f`` by the indicator of a rectangle.  Nodes of
    zero mass get average 0.
    """
    vals = np.abs(_values(np.abs(np.asarray(f.values if isinstance(f, Weight) else f)), mu.grid))
    tab = np.stack([cumulative(vals * mu.masses), cumulative(mu.masses)])
    n = mu.grid.dim
    avgs = []
    for lo, hi in grid.levels:
        s = box_sums(tab, mu.grid, lo, hi)
        num = s[0]
        if support is not None:
            slo = np.maximum(lo, support.lo)
            shi = np.maximum(np.minimum(hi, support.hi), slo)
            num = box_sums(tab[:1], mu.grid, slo, shi)[0]
        ok = s[1] > mu.null_threshold()
        avgs.append(np.where(ok, num / np.where(ok, s[1], 1.0), 0.0))
    run = avgs[0]
    for lvl in avgs[1:]:
        run = np.maximum(np.repeat(run, 2**n), lvl)
    return DyadicField(grid, avgs, run)


def majorization_check(w, mu: GridMeasure, root: Rect, depth: int, budget=None):
    """``C_emp = max over leaves of w(leaf) / M^D w(leaf)``.

    ``w(leaf)`` is the largest weight value on a positive-mass part of the
    leaf.  Returns ``(C_emp, passed)`` where ``passed`` compares against
    ``budget`` (``None`` when no budget is given).
    """
    if depth < 1:
        raise InputError("majorization check needs depth >= 1")
    vals = _values(w, mu.grid)
    grid = build_dyadic(mu, root, depth)
    field = dyadic_maximal(vals, mu, grid)
    lo, hi = grid.leaves()
    null = mu.null_threshold()
    ratio = 0.0
    for k in range(lo.shape[0]):
        r = Rect(list(zip(lo[k], hi[k])), degenerate=True)
        seen = covered_fractions(mu.grid, r) * mu.masses > null
        if not seen.any() or field.values[k] <= 0:
            continue
        ratio = max(ratio, float(vals[seen].max() / field.values[k]))
    return ratio, (None if budget is None else bool(ratio <= budget))


# ---------------------------------------------------------------------------
# operator norm estimates


@dataclass
class NormEstimate:
    """Lower estimate of an operator norm with the best test function found."""

    value: float
    witness: dict
    evaluations: int
    weak: bool = False

    def to_dict(self):
        return {"value": self.value, "witness": self.witness, "evaluations": self.evaluations, "weak": self.weak}


def _floor_values(vals, lmu, operator):
    if operator == "M" and lmu.grid.dim > 1:
        return _cubic_lower(vals, lmu)[1]
    cf, cm = cumulative(vals * lmu.masses), cumulative(lmu.masses)
    return kernels.sweep_max(cf, cm, lmu.null_threshold())[0]


def op_norm_estimate(operator, q, w: Weight, mu: GridMeasure, depth=None, budget=2000, seed=0, weak=False):
    """Lower estimate of ``||Op||`` on ``L^q(w dmu)`` (``Op`` averages against ``mu``).

    ``operator`` is ``M`` (cubes) or ``M_s`` (rectangles).  Test functions
    live on the lattice; the maximal function is replaced by per-cell floors,
    so each ratio is a valid lower bound.  ``weak`` gives the weak-type
    quantity ``sup_lambda lambda nu(Op f > lambda)^(1/q) / ||f||``.
    """
    if operator not in ("M", "M_s"):
        raise InputError("operator must be 'M' or 'M_s'")
    if not q > 1:
        raise InputError("q must exceed 1")
    if budget < 1:
        raise InputError("empty test family")
    grid = mu.grid
    if not w.grid.same_as(grid):
        raise InputError("weight and measure live on different grids")
    if depth is None:
        depth = max(0, int(np.ceil(np.log2(max(1, 32 // max(grid.shape))))) if grid.dim == 1 else 0)
    factor = 2**depth
    lmu = mu.refine(factor) if factor > 1 else mu
    wl = _repeat(w.values, factor) if factor > 1 else w.values
    nu = wl * lmu.masses
    pos = lmu.masses > lmu.null_threshold()
    rng = np.random.default_rng(seed)

    def score(vals):
        norm = np.sum(vals**q * nu)
        if norm <= 0:
            return -np.inf
        fl = np.where(pos, np.maximum(_floor_values(vals, lmu, operator), 0.0), 0.0)
        if not weak:
            return float((np.sum(fl**q * nu) / norm) ** (1.0 / q))
        order = np.argsort(-fl, axis=None, kind="stable")
        v = fl.ravel()[order]
        cum = np.cumsum(nu.ravel()[order])
        return float(np.max(v * cum ** (1.0 / q)) / norm ** (1.0 / q))

    best, wit, evals = -np.inf, {}, 0

    def consider(vals, desc):
        nonlocal best, wit, evals
        evals += 1
        r = score(vals)
        if r > best:
            best, wit = r, desc
        return r

    ilo, ihi = all_grid_rects(lmu.grid.shape)
    sizes = np.prod(ihi - ilo, axis=1)
    order = np.argsort(sizes, kind="stable")
    n_ind = min(len(order), max(1, budget // 2))
    for k in order[:n_ind]:
        vals = np.zeros(lmu.grid.shape)
        vals[tuple(slice(a, b) for a, b in zip(ilo[k], ihi[k]))] = 1.0
        consider(vals, {"kind": "indicator", "cells": [[int(a), int(b)] for a, b in zip(ilo[k], ihi[k])]})
    consider(wl.copy(), {"kind": "weight"})
    consider(wl ** (1.0 - q / (q - 1.0)), {"kind": "dual-weight"})
    cur, cur_desc = None, None
    while evals < budget:
        vals = np.exp(rng.uniform(-2.0, 2.0, lmu.grid.shape)) * (rng.uniform(size=lmu.grid.shape) < 0.5)
        r = consider(vals, {"kind": "random", "seed": int(seed), "draw": evals})
        if cur is None or r >= score(cur):
            cur, cur_desc = vals, wit
        if evals >= budget - max(1, budget // 4):
            break
    # coordinate ascent on the best random draw
    if cur is not None:
        cur_score = score(cur)
        while evals < budget:
            idx = tuple(rng.integers(0, k) for k in lmu.grid.shape)
            trial = cur.copy()
            trial[idx] = trial[idx] * rng.choice([0.0, 0.5, 2.0]) + (rng.uniform() if trial[idx] == 0 else 0.0)
            r = consider(trial, {"kind": "polished", "seed": int(seed)})
            if r > cur_score:
                cur, cur_score = trial, r
    return NormEstimate(float(best), wit, evals, weak)
