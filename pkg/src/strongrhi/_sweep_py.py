"""Pure numpy implementation of the rectangle max-sweep (any dimension).

For every lower corner ``lo`` the averages of all boxes ``[lo, hi]`` are formed
from the cumulative tables, turned into a suffix maximum over ``hi`` and then
scattered to every target index that such a box contains or meets.
"""

import itertools

import numpy as np


def _box_avgs(cf, cm, lo, null):
    n = cf.ndim
    num = np.zeros(tuple(b - l - 1 for b, l in zip(cf.shape, lo)))
    den = np.zeros_like(num)
    for e in itertools.product((0, 1), repeat=n):
        idx = tuple(slice(l + 1, None) if ei else slice(l, l + 1) for l, ei in zip(lo, e))
        sign = -1.0 if (n - sum(e)) % 2 else 1.0
        num += sign * cf[idx]
        den += sign * cm[idx]
    out = np.full(num.shape, -np.inf)
    ok = den > null
    out[ok] = num[ok] / den[ok]
    return out


def _suffix_max(a):
    for axis in range(a.ndim):
        a = np.flip(np.maximum.accumulate(np.flip(a, axis), axis=axis), axis)
    return a


def sweep_max(cf, cm, null):
    """Return ``(contain, meet, point)`` maxima of box averages.

    ``cf``/``cm`` are cumulative tables with ``B_i`` breakpoints per axis.
    ``contain[s]`` maximises over boxes containing cell ``s``, ``meet[s]`` over
    boxes meeting its closure, ``point[q]`` over boxes containing breakpoint
    node ``q``.  Boxes of mass ``<= null`` are skipped.
    """
    cf = np.asarray(cf, dtype=float)
    cm = np.asarray(cm, dtype=float)
    B = cf.shape
    N = tuple(b - 1 for b in B)
    contain = np.full(N, -np.inf)
    meet = np.full(N, -np.inf)
    point = np.full(B, -np.inf)
    for lo in itertools.product(*[range(b - 1) for b in B]):
        sm = _suffix_max(_box_avgs(cf, cm, lo, null))
        pid = np.ix_(*[np.maximum(np.arange(l, b) - l - 1, 0) for l, b in zip(lo, B)])
        psl = tuple(slice(l, None) for l in lo)
        point[psl] = np.maximum(point[psl], sm[pid])
        csl = tuple(slice(l, None) for l in lo)
        cid = np.ix_(*[np.arange(l, b - 1) - l for l, b in zip(lo, B)])
        contain[csl] = np.maximum(contain[csl], sm[cid])
        starts = [max(l - 1, 0) for l in lo]
        msl = tuple(slice(s, None) for s in starts)
        mid = np.ix_(*[np.maximum(np.arange(s, b - 1) - l - 1, 0) for s, l, b in zip(starts, lo, B)])
        meet[msl] = np.maximum(meet[msl], sm[mid])
    return contain, meet, point
