"""Grids, non-atomic measures, weights and exact rectangle queries.

A measure is stored as one nonnegative mass per cell of a tensor grid and is
interpreted as uniform density inside each cell, so every point and every
axis-parallel hyperplane has measure zero.  Rectangle queries use an
n-dimensional cumulative table: the prefix function ``P(x) = mu([lo, x])`` is
the multilinear interpolant of that table, which makes ``mass`` exact for
rectangles with arbitrary real endpoints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, InputError

DEFAULT_MAX_CELLS = 1 << 20

# Relative mass below which a rectangle is treated as null.  Inclusion-exclusion
# over cumulative sums leaves O(eps * total) residue on genuinely empty sets.
NULL_MASS_RTOL = 1e-13


def _readonly(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AxisGrid:
    """Tensor grid given by strictly increasing breakpoints on each axis."""

    breakpoints: tuple
    max_cells: int = DEFAULT_MAX_CELLS

    def __post_init__(self):
        bps = []
        if len(self.breakpoints) == 0:
            raise InputError("grid needs at least one axis")
        for axis, b in enumerate(self.breakpoints):
            b = np.asarray(b, dtype=float)
            if b.ndim != 1 or b.size < 2:
                raise InputError(f"axis {axis}: need at least two breakpoints")
            if not np.all(np.isfinite(b)):
                raise InputError(f"axis {axis}: breakpoints must be finite")
            bad = np.nonzero(np.diff(b) <= 0)[0]
            if bad.size:
                raise InputError(
                    f"axis {axis}: breakpoints not strictly increasing at index {int(bad[0]) + 1}"
                )
            bps.append(_readonly(b))
        object.__setattr__(self, "breakpoints", tuple(bps))
        if self.ncells > self.max_cells:
            raise InputError(f"grid has {self.ncells} cells, limit is {self.max_cells}")

    @classmethod
    def uniform(cls, domain, cells, **kw):
        """Uniform grid on ``domain = [(lo, hi), ...]`` with ``cells[i]`` cells on axis i."""
        if len(domain) != len(cells):
            raise InputError("domain and cell counts have different dimensions")
        return cls(tuple(np.linspace(lo, hi, k + 1) for (lo, hi), k in zip(domain, cells)), **kw)

    @property
    def dim(self):
        return len(self.breakpoints)

    @property
    def shape(self):
        return tuple(b.size - 1 for b in self.breakpoints)

    @property
    def ncells(self):
        return int(np.prod(self.shape))

    @property
    def domain(self):
        return tuple((float(b[0]), float(b[-1])) for b in self.breakpoints)

    def widths(self, axis):
        return np.diff(self.breakpoints[axis])

    def midpoints(self, axis):
        b = self.breakpoints[axis]
        return 0.5 * (b[:-1] + b[1:])

    def cell_volumes(self):
        vol = np.ones(self.shape)
        for axis in range(self.dim):
            vol = vol * _along(self.widths(axis), axis, self.dim)
        return vol

    def domain_rect(self):
        return Rect(self.domain)

    def same_as(self, other):
        return self is other or (
            self.dim == other.dim
            and all(np.array_equal(a, b) for a, b in zip(self.breakpoints, other.breakpoints))
        )

    def refine(self, factor):
        """Split every cell into ``factor`` equal pieces per axis (int or per-axis list)."""
        if np.isscalar(factor):
            factor = [int(factor)] * self.dim
        out = []
        for b, f in zip(self.breakpoints, factor):
            if f < 1:
                raise InputError("refinement factor must be >= 1")
            t = np.arange(f) / f
            pts = (b[:-1, None] + np.diff(b)[:, None] * t[None, :]).ravel()
            out.append(np.append(pts, b[-1]))
        return AxisGrid(tuple(out), max_cells=max(self.max_cells, DEFAULT_MAX_CELLS * 16))

    def locate(self, axis, x):
        """Index of the cell containing ``x`` (cells closed on the left, last one closed)."""
        b = self.breakpoints[axis]
        return np.clip(np.searchsorted(b, x, side="right") - 1, 0, b.size - 2)


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return np.reshape(vec, shape)


@dataclass(frozen=True, eq=False)
class Rect:
    """Closed axis-parallel box ``prod [lo_i, hi_i]``."""

    bounds: tuple
    degenerate: bool = False

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        for axis, (a, b) in enumerate(bounds):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise InputError(f"axis {axis}: rectangle endpoints must be finite")
            if b < a or (b == a and not self.degenerate):
                raise InputError(f"axis {axis}: rectangle needs lo < hi, got [{a}, {b}]")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def lo(self):
        return np.array([a for a, _ in self.bounds])

    @property
    def hi(self):
        return np.array([b for _, b in self.bounds])

    def endpoint_key(self):
        """Lexicographic tie-break key (all lower ends, then all upper ends)."""
        return tuple(self.lo) + tuple(self.hi)

    def inside(self, grid: AxisGrid):
        return self.dim == grid.dim and all(
            lo <= a and b <= hi for (a, b), (lo, hi) in zip(self.bounds, grid.domain)
        )

    def intersect(self, other):
        out = []
        for (a, b), (c, d) in zip(self.bounds, other.bounds):
            lo, hi = max(a, c), min(b, d)
            if hi < lo:
                return None
            out.append((lo, hi))
        return Rect(out, degenerate=True)

    def split(self, axis, cut):
        b = list(self.bounds)
        left, right = list(b), list(b)
        left[axis] = (b[axis][0], cut)
        right[axis] = (cut, b[axis][1])
        return Rect(left, degenerate=True), Rect(right, degenerate=True)

    def to_list(self):
        return [list(p) for p in self.bounds]

    def __repr__(self):
        return "Rect(" + " x ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self.bounds) + ")"


@dataclass(frozen=True, eq=False)
class GridRect:
    """Grid-aligned rectangle given by per-axis half-open cell index ranges."""

    ranges: tuple

    def __post_init__(self):
        ranges = tuple((int(a), int(b)) for a, b in self.ranges)
        if any(b <= a for a, b in ranges):
            raise InputError("GridRect ranges must be nonempty")
        object.__setattr__(self, "ranges", ranges)

    def to_rect(self, grid):
        if len(self.ranges) != grid.dim:
            raise InputError("GridRect dimension does not match the grid")
        return Rect(
            tuple((grid.breakpoints[i][a], grid.breakpoints[i][b]) for i, (a, b) in enumerate(self.ranges))
        )


def cumulative(values):
    """Cumulative table with a zero row prepended on every axis."""
    c = np.asarray(values, dtype=float)
    for axis in range(c.ndim):
        c = np.cumsum(c, axis=axis)
    return np.pad(c, [(1, 0)] * c.ndim)


def _axis_terms(grid, axis, lo, hi):
    """Per-axis (index, weight) pairs turning a rectangle sum into table lookups."""
    b = grid.breakpoints[axis]
    out = []
    for x, sign in ((hi, 1.0), (lo, -1.0)):
        j = grid.locate(axis, x)
        t = np.clip((x - b[j]) / (b[j + 1] - b[j]), 0.0, 1.0)
        out.append((j, sign * (1.0 - t)))
        out.append((j + 1, sign * t))
    return out


def box_sums(tables, grid, lo, hi):
    """Sums of cellwise quantities over many rectangles at once.

    ``tables`` has shape ``(F,) + cumulative shape``; ``lo``/``hi`` have shape
    ``(N, n)``.  Returns an ``(F, N)`` array.  Each cell contributes its value
    times the covered fraction along every axis.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    terms = [_axis_terms(grid, i, lo[:, i], hi[:, i]) for i in range(grid.dim)]
    out = np.zeros((tables.shape[0], lo.shape[0]))
    for combo in itertools.product(range(4), repeat=grid.dim):
        idx = tuple(terms[i][c][0] for i, c in enumerate(combo))
        wgt = np.prod([terms[i][c][1] for i, c in enumerate(combo)], axis=0)
        out += tables[(slice(None),) + idx] * wgt
    return out


def aligned_sums(tables, ilo, ihi):
    """Sums over grid-aligned boxes given breakpoint index arrays ``(N, n)``."""
    ilo = np.atleast_2d(ilo)
    ihi = np.atleast_2d(ihi)
    n = ilo.shape[1]
    out = np.zeros((tables.shape[0], ilo.shape[0]))
    for combo in itertools.product((0, 1), repeat=n):
        idx = tuple(ihi[:, i] if c else ilo[:, i] for i, c in enumerate(combo))
        sign = -1.0 if (n - sum(combo)) % 2 else 1.0
        out += sign * tables[(slice(None),) + idx]
    return out


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Non-atomic measure: nonnegative cell masses spread uniformly per cell."""

    grid: AxisGrid
    masses: np.ndarray
    factors: tuple | None = None
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.shape != self.grid.shape:
            raise InputError(f"mass array shape {m.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("masses must be finite")
        if np.any(m < 0):
            raise InputError("masses must be nonnegative")
        if m.sum() <= 0:
            raise InputError("total mass must be positive")
        object.__setattr__(self, "masses", _readonly(m))
        object.__setattr__(self, "_cum", _readonly(cumulative(m)[None]))

    @classmethod
    def lebesgue(cls, grid):
        return cls.product(grid, [grid.widths(i) for i in range(grid.dim)])

    @classmethod
    def product(cls, grid, factors):
        """Tensor product of per-axis 1D cell masses."""
        if len(factors) != grid.dim:
            raise InputError("one factor per axis required")
        m = np.ones(grid.shape)
        facs = []
        for axis, f in enumerate(factors):
            f = np.asarray(f, dtype=float)
            if f.shape != (grid.shape[axis],):
                raise InputError(f"factor {axis} has wrong length")
            facs.append(_readonly(f))
            m = m * _along(f, axis, grid.dim)
        return cls(grid, m, factors=tuple(facs))

    @property
    def total(self):
        return float(self.masses.sum())

    @property
    def is_product(self):
        return self.factors is not None

    def null_threshold(self):
        return NULL_MASS_RTOL * self.total

    def density(self):
        return self.masses / self.grid.cell_volumes()

    def refine(self, factor):
        g = self.grid.refine(factor)
        fac = [factor] * self.grid.dim if np.isscalar(factor) else list(factor)
        if self.factors is not None:
            return GridMeasure.product(g, [np.repeat(fa, f) / f for fa, f in zip(self.factors, fac)])
        m = self.masses
        for axis, f in enumerate(fac):
            m = np.repeat(m, f, axis=axis) / f
        return GridMeasure(g, m)


@dataclass(frozen=True, eq=False)
class Weight:
    """Strictly positive piecewise-constant function on a grid."""

    grid: AxisGrid
    values: np.ndarray
    factors: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InputError(f"weight shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InputError("weight values must be finite and > 0")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def constant(cls, grid, c=1.0):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def product(cls, grid, factors):
        v = np.ones(grid.shape)
        facs = []
        for axis, f in enumerate(factors):
            f = np.asarray(f, dtype=float)
            facs.append(_readonly(f))
            v = v * _along(f, axis, grid.dim)
        return cls(grid, v, factors=tuple(facs))

    @property
    def is_product(self):
        return self.factors is not None

    def log_ratio(self):
        return float(np.log(self.values.max() / self.values.min()))

    def power(self, s):
        facs = None if self.factors is None else tuple(f ** s for f in self.factors)
        return Weight(self.grid, self.values ** s, factors=facs)

    def refine(self, factor):
        g = self.grid.refine(factor)
        fac = [factor] * self.grid.dim if np.isscalar(factor) else list(factor)
        if self.factors is not None:
            return Weight.product(g, [np.repeat(fa, f) for fa, f in zip(self.factors, fac)])
        v = self.values
        for axis, f in enumerate(fac):
            v = np.repeat(v, f, axis=axis)
        return Weight(g, v)


def _check_rect(grid, rect):
    if not isinstance(rect, Rect):
        rect = Rect(rect, degenerate=True)
    if not rect.inside(grid):
        raise InputError(f"rectangle {rect!r} is not inside the domain {grid.domain}")
    return rect


def _check_pair(w, mu):
    if not w.grid.same_as(mu.grid):
        raise InputError("weight and measure live on different grids")


def cell_integrals(w, mu):
    return w.values * mu.masses


def mass(mu: GridMeasure, rect) -> float:
    """Exact ``mu(R)``."""
    rect = _check_rect(mu.grid, rect)
    return float(box_sums(mu._cum, mu.grid, rect.lo[None], rect.hi[None])[0, 0])


def integral(w: Weight, mu: GridMeasure, rect) -> float:
    """Exact ``int_R w dmu`` for piecewise-constant ``w``."""
    _check_pair(w, mu)
    rect = _check_rect(mu.grid, rect)
    tab = cumulative(cell_integrals(w, mu))[None]
    return float(box_sums(tab, mu.grid, rect.lo[None], rect.hi[None])[0, 0])


def average(w: Weight, mu: GridMeasure, rect) -> float:
    _check_pair(w, mu)
    rect = _check_rect(mu.grid, rect)
    tab = np.stack([cumulative(cell_integrals(w, mu)), cumulative(mu.masses)])
    x, m = box_sums(tab, mu.grid, rect.lo[None], rect.hi[None])[:, 0]
    if m <= mu.null_threshold():
        raise DegenerateInputError(f"rectangle {rect!r} has zero mass")
    return float(x / m)


def covered_fractions(grid, rect):
    """Per-axis covered fraction of every cell, combined into a cell array."""
    frac = np.ones(grid.shape)
    for axis, (a, b) in enumerate(rect.bounds):
        bp = grid.breakpoints[axis]
        f = (np.clip(b, bp[:-1], bp[1:]) - np.clip(a, bp[:-1], bp[1:])) / np.diff(bp)
        frac = frac * _along(f, axis, grid.dim)
    return frac


def level_mass(w: Weight, mu: GridMeasure, rect, lam: float, strict=True, weighted=False) -> float:
    """``mu`` (or ``w dmu`` when ``weighted``) mass of ``{x in R : w(x) > lam}``.

    ``w`` is constant on cells, so membership is decided per cell and partially
    covered cells contribute their covered fraction.
    """
    _check_pair(w, mu)
    rect = _check_rect(mu.grid, rect)
    sel = w.values > lam if strict else w.values >= lam
    dens = mu.masses * (w.values if weighted else 1.0)
    return float(np.sum(dens * covered_fractions(mu.grid, rect) * sel))


def dual_weight(w: Weight, p: float) -> Weight:
    """``sigma = w^(1 - p')`` with ``p' = p / (p - 1)``."""
    if not p > 1:
        raise InputError("dual weight needs p > 1")
    return w.power(1.0 - conjugate(p))


def conjugate(p):
    if not p > 1:
        raise InputError("conjugate exponent needs p > 1")
    return p / (p - 1.0)


def clip_to(w: Weight, mu: GridMeasure, rect: Rect, refine=1):
    """Restrict ``(w, mu)`` to ``rect``: the grid is cut at the rectangle's faces.

    The restricted measure is exact because density is uniform inside cells.
    Cells of zero width are dropped; ``refine`` subdivides the clipped cells.
    """
    _check_pair(w, mu)
    rect = _check_rect(mu.grid, rect)
    bps, sel = [], []
    for axis, (a, b) in enumerate(rect.bounds):
        g = mu.grid.breakpoints[axis]
        inner = g[(g > a) & (g < b)]
        pts = np.concatenate([[a], inner, [b]])
        bps.append(pts)
        sel.append(mu.grid.locate(axis, 0.5 * (pts[:-1] + pts[1:])))
    grid = AxisGrid(tuple(bps), max_cells=max(mu.grid.max_cells, DEFAULT_MAX_CELLS * 16))
    frac = np.ones(grid.shape)
    for axis in range(grid.dim):
        f = np.diff(bps[axis]) / mu.grid.widths(axis)[sel[axis]]
        frac = frac * _along(f, axis, grid.dim)
    idx = np.ix_(*sel)
    sub_mu = GridMeasure(grid, mu.masses[idx] * frac)
    sub_w = Weight(grid, w.values[idx])
    if refine > 1:
        sub_mu, sub_w = sub_mu.refine(refine), sub_w.refine(refine)
    return sub_w, sub_mu


def all_grid_rects(shape):
    """Breakpoint index arrays ``(ilo, ihi)`` of every grid-aligned rectangle."""
    per_axis = [np.array([(a, b) for a in range(k) for b in range(a + 1, k + 1)]) for k in shape]
    mesh = np.meshgrid(*[np.arange(len(p)) for p in per_axis], indexing="ij")
    flat = [m.ravel() for m in mesh]
    ilo = np.stack([per_axis[i][flat[i], 0] for i in range(len(shape))], axis=1)
    ihi = np.stack([per_axis[i][flat[i], 1] for i in range(len(shape))], axis=1)
    return ilo, ihi


def index_to_coords(grid, ilo, ihi):
    lo = np.stack([grid.breakpoints[i][ilo[:, i]] for i in range(grid.dim)], axis=1)
    hi = np.stack([grid.breakpoints[i][ihi[:, i]] for i in range(grid.dim)], axis=1)
    return lo, hi


def same_grid_arrays(items: Sequence):
    g = items[0].grid
    for it in items[1:]:
        if not it.grid.same_as(g):
            raise InputError("objects live on different grids")
    return g
