"""Rising-sun decompositions and maximal dyadic level selections.

Given ``f >= 0`` on a rectangle ``R`` with ``avg_R f <= lam``, both
constructions return pairwise disjoint rectangles, each with average exactly
``lam``, such that ``f <= lam`` on the positive-mass part of the rest of ``R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InputError, PreconditionError
from .maximal import DyadicGrid, _values, dyadic_maximal, median_cut
from .measure import GridMeasure, Rect, box_sums, covered_fractions, cumulative

AVG_RTOL = 1e-12
COVER_RTOL = 1e-9


@dataclass
class RisingSunDecomposition:
    """Selected rectangles, their averages and the residual certificate.

    ``residual`` is the largest value of ``f`` on a positive-mass cell of
    ``R`` that is not covered by the selection (relative slack 1e-9).
    """

    level: float
    rects: list
    averages: list
    residual: float
    stats: dict = field(default_factory=dict)

    @property
    def total_mass(self):
        return float(sum(self.stats.get("masses", [])))

    def to_dict(self):
        return {
            "level": self.level,
            "rects": [r.to_list() for r in self.rects],
            "averages": list(self.averages),
            "residual": self.residual,
        }


def _tables(vals, mu):
    return np.stack([cumulative(vals * mu.masses), cumulative(mu.masses)])


def _rect_sums(tab, mu, rects):
    if not rects:
        return np.zeros((2, 0))
    lo = np.array([r.lo for r in rects])
    hi = np.array([r.hi for r in rects])
    return box_sums(tab, mu.grid, lo, hi)


def _check_pre(vals, mu, tab, rect, lam):
    if not rect.inside(mu.grid):
        raise InputError(f"rectangle {rect!r} is not inside the domain")
    x, m = box_sums(tab, mu.grid, rect.lo[None], rect.hi[None])[:, 0]
    if m <= mu.null_threshold():
        raise PreconditionError(f"rectangle {rect!r} has zero mass")
    if lam <= 0:
        seen = covered_fractions(mu.grid, rect) * mu.masses > mu.null_threshold()
        if np.any(vals[seen] > 0) or lam < 0:
            raise PreconditionError("lambda must be positive unless f vanishes on the rectangle")
    if x / m > lam * (1 + AVG_RTOL) + 1e-300:
        raise PreconditionError(f"average {x / m:.17g} exceeds lambda {lam:.17g}")


def _finish(vals, mu, tab, rect, lam, rects):
    s = _rect_sums(tab, mu, rects)
    avgs = [float(a) for a in s[0] / np.where(s[1] > 0, s[1], 1.0)]
    cover = np.zeros(mu.grid.shape)
    for r in rects:
        cover += covered_fractions(mu.grid, r)
    inside = covered_fractions(mu.grid, rect)
    left = (inside - cover) * mu.masses
    open_cells = (left > COVER_RTOL * np.maximum(mu.masses, 1e-300)) & (mu.masses > mu.null_threshold())
    residual = float(vals[open_cells].max()) if np.any(open_cells) else 0.0
    return RisingSunDecomposition(float(lam), rects, avgs, residual, {"masses": [float(m) for m in s[1]]})


def rising_sun_1d(f, mu: GridMeasure, interval: Rect, lam: float) -> RisingSunDecomposition:
    """Exact 1D rising-sun selection at level ``lam``.

    With ``F(x) = int_a^x (f - lam) dmu`` (piecewise linear) the selection is
    the closure of each component of ``{x : F(x) < sup_{y > x} F(y)}``.  A
    component starting at ``a`` is extended to the first point where the
    running maximum from the right drops to ``F(a)``, which makes its average
    exactly ``lam`` as well.
    """
    if mu.grid.dim != 1:
        raise InputError("rising_sun_1d needs a one-dimensional grid")
    vals = _values(f, mu.grid)
    lam = float(lam)
    tab = _tables(vals, mu)
    _check_pre(vals, mu, tab, interval, lam)
    (a, b), = interval.bounds
    bp = mu.grid.breakpoints[0]
    xs = np.concatenate([[a], bp[(bp > a) & (bp < b)], [b]])
    K = xs.size - 1
    cell = mu.grid.locate(0, 0.5 * (xs[:-1] + xs[1:]))
    X, m = box_sums(tab, mu.grid, np.full((K + 1, 1), a), xs[:, None])
    F = X - lam * m
    fv = vals[cell]
    # suffix maxima: phi[j] = max_{i >= j} F_i; phi[K + 1] = -inf
    phi = np.append(np.maximum.accumulate(F[::-1])[::-1], -np.inf)
    scale = max(np.abs(F).max(), 1e-300) * 1e-13

    pieces = []
    for k in range(K):
        slope_pos = fv[k] > lam and m[k + 1] > m[k]
        if slope_pos:
            pieces.append([xs[k], xs[k + 1]])
            continue
        target = phi[k + 1]
        if F[k] < target - scale:
            pieces.append([xs[k], xs[k + 1]])
        elif F[k + 1] < target - scale:
            t = (F[k] - target) / (F[k] - F[k + 1])
            pieces.append([xs[k] + t * (xs[k + 1] - xs[k]), xs[k + 1]])

    # merge pieces whose shared endpoint lies in the shadow set
    comps = []
    for lo, hi in pieces:
        if comps and comps[-1][1] == lo:
            j = int(np.searchsorted(xs, lo))
            if F[j] < phi[j + 1] - scale:
                comps[-1][1] = hi
                continue
        comps.append([lo, hi])

    if comps and comps[0][0] == a and F[0] < phi[0] - scale:
        j = int(np.argmax(phi[: K + 1] <= F[0] + scale))
        if phi[j] > F[0] + scale:
            x1 = b
        elif j == 0:
            x1 = a
        else:
            t = (F[j - 1] - F[0]) / (F[j - 1] - F[j]) if F[j - 1] > F[j] else 1.0
            x1 = xs[j - 1] + min(max(t, 0.0), 1.0) * (xs[j] - xs[j - 1])
        first = [a, max(x1, comps[0][1])]
        comps = [first] + [c for c in comps[1:] if c[0] >= first[1]]

    rects = [Rect([(lo, hi)]) for lo, hi in comps if hi > lo]
    return _finish(vals, mu, tab, interval, lam, rects)


def _slab_root(tab, mu, lam, lo, hi, axis, start, stop):
    """Coordinate ``s`` between ``start`` and ``stop`` where the slab integral vanishes.

    The slab is ``[lo, hi]`` with its face on the ``start`` side replaced by
    ``s``; ``int (f - lam) dmu`` over it is piecewise linear in ``s``,
    positive at ``start`` and nonpositive at ``stop``.
    """
    bp = mu.grid.breakpoints[axis]
    a, b = min(start, stop), max(start, stop)
    ts = np.concatenate([[start], np.sort(bp[(bp > a) & (bp < b)]), [stop]])
    if stop < start:
        ts = np.concatenate([[start], np.sort(bp[(bp > a) & (bp < b)])[::-1], [stop]])
    L = np.repeat(lo[None], ts.size, axis=0)
    H = np.repeat(hi[None], ts.size, axis=0)
    if stop > start:
        H[:, axis] = ts
    else:
        L[:, axis] = ts
    X, m = box_sums(tab, mu.grid, L, H)
    G = X - lam * m
    k = int(np.argmax(G <= 0)) if np.any(G <= 0) else ts.size - 1
    if k == 0:
        return float(ts[0])
    t = G[k - 1] / (G[k - 1] - G[k]) if G[k - 1] > G[k] else 1.0
    return float(ts[k - 1] + min(max(t, 0.0), 1.0) * (ts[k] - ts[k - 1]))


def _choose_cut(mu, lo, hi, axis):
    """Interior grid breakpoint nearest the ``mu``-median, cycling through axes.

    Cutting on breakpoints means every branch strictly loses interior
    breakpoints, so the recursion ends after finitely many steps.
    """
    n = mu.grid.dim
    for k in range(n):
        ax = (axis + k) % n
        bp = mu.grid.breakpoints[ax]
        inner = bp[(bp > lo[ax]) & (bp < hi[ax])]
        if inner.size:
            t = median_cut(mu, lo, hi, ax)
            return ax, float(inner[np.argmin(np.abs(inner - t))])
    return None, None


def rising_sun_nd(f, mu: GridMeasure, rect: Rect, lam: float, max_depth=200, max_nodes=200_000) -> RisingSunDecomposition:
    """Halving-and-adjust realisation of the multidimensional Riesz lemma.

    A rectangle with average at most ``lam`` is accepted as residual when
    every positive-mass cell it meets has ``f <= lam``.  Otherwise it is cut
    near the ``mu``-median along the next axis.  A half with average above
    ``lam`` is pushed back across the cut until its average equals ``lam``;
    that rectangle is emitted and the remaining slab (average at most ``lam``)
    is processed further.  Halves with average at most ``lam`` are processed
    as they are.  Cuts are placed on the grid breakpoint nearest the median,
    which bounds the recursion depth by the number of breakpoints.
    """
    vals = _values(f, mu.grid)
    lam = float(lam)
    tab = _tables(vals, mu)
    _check_pre(vals, mu, tab, rect, lam)
    n = mu.grid.dim
    null = mu.null_threshold()
    emitted = []
    stack = [(rect.lo.copy(), rect.hi.copy(), 0, 0)]
    nodes = 0
    while stack:
        lo, hi, axis, depth = stack.pop()
        nodes += 1
        if np.any(hi <= lo):
            continue
        r = Rect(list(zip(lo, hi)), degenerate=True)
        seen = covered_fractions(mu.grid, r) * mu.masses > null
        if not np.any(seen) or np.all(vals[seen] <= lam):
            continue
        if depth >= max_depth or nodes > max_nodes:
            raise ConvergenceError(
                "rising-sun recursion did not terminate",
                {"depth": depth, "nodes": nodes, "rect": r.to_list(), "emitted": len(emitted)},
            )
        axis, t = _choose_cut(mu, lo, hi, axis)
        if axis is None:
            # inside a single cell: f is constant there and the average is <= lam
            continue
        nxt = (axis + 1) % n
        lo_half = (lo, np.where(np.arange(n) == axis, t, hi))
        hi_half = (np.where(np.arange(n) == axis, t, lo), hi)
        sums = box_sums(tab, mu.grid, np.array([lo_half[0], hi_half[0]]), np.array([lo_half[1], hi_half[1]]))
        over = (sums[0] - lam * sums[1]) > AVG_RTOL * lam * sums[1]
        if over[0]:
            s = _slab_root(tab, mu, lam, lo, hi, axis, t, hi[axis])
            e_hi = hi.copy()
            e_hi[axis] = s
            emitted.append(Rect(list(zip(lo, e_hi))))
            rest_lo = lo.copy()
            rest_lo[axis] = s
            stack.append((rest_lo, hi.copy(), nxt, depth + 1))
        elif over[1]:
            s = _slab_root(tab, mu, lam, lo, hi, axis, t, lo[axis])
            e_lo = lo.copy()
            e_lo[axis] = s
            emitted.append(Rect(list(zip(e_lo, hi))))
            rest_hi = hi.copy()
            rest_hi[axis] = s
            stack.append((lo.copy(), rest_hi, nxt, depth + 1))
        else:
            stack.append((hi_half[0].copy(), hi_half[1].copy(), nxt, depth + 1))
            stack.append((lo_half[0].copy(), lo_half[1].copy(), nxt, depth + 1))
    emitted.sort(key=lambda q: q.endpoint_key())
    out = _finish(vals, mu, tab, rect, lam, emitted)
    out.stats["nodes"] = nodes
    return out


@dataclass
class DyadicSelection:
    """Maximal dyadic nodes with average above ``lam``: ``(level, index)`` pairs."""

    level: float
    nodes: list
    rects: list
    averages: list

    def to_dict(self):
        return {
            "level": self.level,
            "nodes": [list(p) for p in self.nodes],
            "rects": [r.to_list() for r in self.rects],
            "averages": list(self.averages),
        }


def dyadic_level_selection(w, mu: GridMeasure, grid: DyadicGrid, lam: float) -> DyadicSelection:
    """Top-down maximal selection of tree nodes with average ``> lam``."""
    if not lam > 0:
        raise InputError("lambda must be positive")
    field_ = dyadic_maximal(w, mu, grid)
    k = 2**grid.dim
    blocked = np.zeros(1, dtype=bool)
    nodes, rects, avgs = [], [], []
    for level, av in enumerate(field_.averages):
        if level > 0:
            blocked = np.repeat(blocked, k)
        pick = (av > lam) & ~blocked
        for i in np.nonzero(pick)[0]:
            nodes.append((level, int(i)))
            rects.append(grid.node_rect(level, i))
            avgs.append(float(av[i]))
        blocked = blocked | pick
    return DyadicSelection(float(lam), nodes, rects, avgs)
