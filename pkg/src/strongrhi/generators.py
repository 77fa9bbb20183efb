"""Instance families: measures and weights on tensor grids.

All generators are deterministic for a fixed seed.  Densities evaluated by the
midpoint rule are a valid choice of non-atomic measure in their own right, so
there is no attempt to integrate the named densities exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .measure import AxisGrid, GridMeasure, Weight

MEASURE_KINDS = ("lebesgue", "product-of-1d", "gaussian", "random-density")
WEIGHT_KINDS = ("constant", "power-weight", "random-log-bounded-weight", "product-weight")


def _rng(seed):
    return np.random.default_rng(seed)


def _midgrid(grid):
    return np.meshgrid(*[grid.midpoints(i) for i in range(grid.dim)], indexing="ij")


def _bounded(rng, size, bound):
    # log-uniform on [1/B, B]
    if not bound > 1:
        raise InputError("bound B must exceed 1")
    return np.exp(rng.uniform(-np.log(bound), np.log(bound), size=size))


def _factor_1d(kind, grid, axis, rng, params):
    widths = grid.widths(axis)
    if kind == "lebesgue":
        return widths
    if kind == "gaussian":
        delta = float(params.get("delta", 2.0))
        return np.exp(-np.abs(grid.midpoints(axis)) ** delta) * widths
    if kind == "random":
        return _bounded(rng, widths.size, float(params.get("B", 8.0))) * widths
    raise InputError(f"unknown 1D factor kind {kind!r}")


def make_measure(kind, grid: AxisGrid, params=None, seed=0) -> GridMeasure:
    params = dict(params or {})
    rng = _rng(seed)
    if kind == "lebesgue":
        return GridMeasure.lebesgue(grid)
    if kind == "gaussian":
        # tensor product of e^{-|x_i|^delta}; equals e^{-|x|^2} for delta = 2
        delta = float(params.get("delta", 2.0))
        if delta <= 0:
            raise InputError("gaussian delta must be positive")
        facs = [_factor_1d("gaussian", grid, i, rng, {"delta": delta}) for i in range(grid.dim)]
        return GridMeasure.product(grid, facs)
    if kind == "product-of-1d":
        kinds = params.get("factors", ["random"] * grid.dim)
        if isinstance(kinds, str):
            kinds = [kinds] * grid.dim
        if len(kinds) != grid.dim:
            raise InputError("product-of-1d needs one factor kind per axis")
        facs = [_factor_1d(k, grid, i, rng, params) for i, k in enumerate(kinds)]
        return GridMeasure.product(grid, facs)
    if kind == "random-density":
        dens = _bounded(rng, grid.shape, float(params.get("B", 8.0)))
        return GridMeasure(grid, dens * grid.cell_volumes())
    raise InputError(f"unknown measure kind {kind!r}; expected one of {MEASURE_KINDS}")


def make_weight(kind, grid: AxisGrid, params=None, seed=0) -> Weight:
    params = dict(params or {})
    rng = _rng(seed)
    if kind == "constant":
        return Weight.constant(grid, float(params.get("c", 1.0)))
    if kind == "power-weight":
        # Midpoint values of |x - center|^(-alpha).  alpha >= 1 is accepted: the
        # grid only ever sees finite cell values, never the singularity itself.
        alpha = float(params.get("alpha", 0.5))
        center = np.broadcast_to(np.asarray(params.get("center", 0.0), dtype=float), (grid.dim,))
        r2 = sum((m - c) ** 2 for m, c in zip(_midgrid(grid), center))
        with np.errstate(divide="ignore"):
            vals = np.sqrt(r2) ** (-alpha)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise InputError("power weight is singular at a cell midpoint; shift the grid or the center")
        return Weight(grid, vals)
    if kind == "random-log-bounded-weight":
        return Weight(grid, _bounded(rng, grid.shape, float(params.get("B", 8.0))))
    if kind == "product-weight":
        B = float(params.get("B", 8.0))
        facs = [_bounded(rng, k, B) for k in grid.shape]
        return Weight.product(grid, facs)
    raise InputError(f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")


def generate(measure_kind, weight_kind, grid, measure_params=None, weight_params=None, seed=0):
    """Build ``(mu, w)``; the weight uses an independent stream derived from ``seed``."""
    ss = np.random.SeedSequence(seed)
    s_mu, s_w = ss.spawn(2)
    mu = make_measure(measure_kind, grid, measure_params, seed=s_mu)
    w = make_weight(weight_kind, grid, weight_params, seed=s_w)
    return mu, w
