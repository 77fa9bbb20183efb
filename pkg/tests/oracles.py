"""Independent brute-force oracles used by the tests."""

import itertools

import numpy as np


def brute_ap_1d(w, mu, p, step=1e-4):
    """Max of the A_p product over intervals with endpoints on a uniform grid."""
    b = mu.grid.breakpoints[0]
    xs = np.linspace(b[0], b[-1], int(round((b[-1] - b[0]) / step)) + 1)
    sig = w.values ** (1.0 - p / (p - 1.0))
    dens = mu.masses / mu.grid.widths(0)

    def prim(vals):
        c = np.concatenate([[0.0], np.cumsum(vals * mu.masses)])
        return np.interp(xs, b, c)

    Fm, Fw, Fs = prim(np.ones_like(dens)), prim(w.values), prim(sig)
    best = 0.0
    for i0 in range(0, xs.size - 1, 256):
        i = np.arange(i0, min(i0 + 256, xs.size - 1))[:, None]
        j = np.arange(xs.size)[None, :]
        m = Fm[j] - Fm[i]
        ok = (j > i) & (m > 0)
        m = np.where(ok, m, 1.0)
        val = np.maximum(Fw[j] - Fw[i], 0.0) / m * (np.maximum(Fs[j] - Fs[i], 0.0) / m) ** (p - 1.0)
        best = max(best, float(np.max(np.where(ok, val, 0.0))))
    return best


def _overlaps(bp, xs):
    """Covered fraction of every cell by every interval [xs[i], xs[j]], i < j."""
    i, j = np.triu_indices(xs.size, k=1)
    a, b = xs[i][:, None], xs[j][:, None]
    cov = np.clip(np.minimum(b, bp[1:]) - np.maximum(a, bp[:-1]), 0.0, None)
    return cov / np.diff(bp)


def rect_sums(mu, cellwise, points=41):
    """Sums of ``cellwise * masses`` over all rectangles with corners on a uniform lattice.

    Returns one array per input with one axis per dimension (pairs of lattice
    points along that axis).
    """
    mats = []
    for bp in mu.grid.breakpoints:
        mats.append(_overlaps(bp, np.linspace(bp[0], bp[-1], points)))
    out = []
    for c in cellwise:
        s = c * mu.masses
        for axis, F in enumerate(mats):
            s = np.moveaxis(np.tensordot(F, s, axes=([1], [axis])), 0, axis)
        out.append(s)
    return out


def brute_ap(w, mu, p, points=41):
    sig = w.values ** (1.0 - p / (p - 1.0))
    sw, ss, sm = rect_sums(mu, [w.values, sig, np.ones_like(sig)], points)
    ok = sm > 1e-12 * mu.masses.sum()
    sm = np.where(ok, sm, 1.0)
    return float(np.max(np.where(ok, sw / sm * (ss / sm) ** (p - 1.0), 0.0)))


def brute_ainf_exp(w, mu, points=41):
    sw, sl, sm = rect_sums(mu, [w.values, np.log(w.values), np.ones_like(w.values)], points)
    ok = sm > 1e-12 * mu.masses.sum()
    sm = np.where(ok, sm, 1.0)
    return float(np.max(np.where(ok, sw / sm * np.exp(-sl / sm), 0.0)))


def brute_a1(w, mu, points=41):
    """A_1 over lattice rectangles; the infimum uses cells the rectangle actually covers."""
    grids = [np.linspace(bp[0], bp[-1], points) for bp in mu.grid.breakpoints]
    best = 0.0
    pairs = [list(itertools.combinations(range(points), 2)) for _ in grids]
    for combo in itertools.product(*pairs):
        lo = [g[i] for g, (i, _) in zip(grids, combo)]
        hi = [g[j] for g, (_, j) in zip(grids, combo)]
        frac = np.ones(mu.grid.shape)
        for axis, (a, b) in enumerate(zip(lo, hi)):
            bp = mu.grid.breakpoints[axis]
            f = np.clip(np.minimum(b, bp[1:]) - np.maximum(a, bp[:-1]), 0.0, None) / np.diff(bp)
            frac = frac * f.reshape([-1 if k == axis else 1 for k in range(mu.grid.dim)])
        m = frac * mu.masses
        seen = m > 0
        if not seen.any():
            continue
        best = max(best, float(np.sum(m * w.values) / m.sum() / w.values[seen].min()))
    return best
