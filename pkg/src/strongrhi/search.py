"""Best-first branch and bound over rectangle-endpoint boxes.

A parameter box fixes, per axis, ranges ``[a_lo, a_hi]`` for the lower face and
``[b_lo, b_hi]`` for the upper face.  Boxes are stored as arrays of shape
``(N, n, 4)``.  Callers supply an ``evaluate`` function returning, for a batch
of boxes, a certified upper bound of the objective over the box and the best
objective value found inside it together with the rectangle achieving it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .measure import AxisGrid

TIE_RTOL = 1e-12


@dataclass
class SearchResult:
    lower: float
    upper: float
    witness_lo: np.ndarray | None
    witness_hi: np.ndarray | None
    converged: bool
    boxes_explored: int
    iterations: int


def _axis_spans(bp, reduce_adjacent):
    out = []
    K = bp.size - 1
    for j in range(K):
        out.append((bp[j], bp[j], bp[j + 1], bp[j + 1]))
        for k in range(j + 1, K):
            if k == j + 1 and reduce_adjacent:
                # value is invariant under scaling about the shared breakpoint,
                # so one face may be pinned to the outer edge of the pair
                out.append((bp[j], bp[j], bp[k], bp[k + 1]))
                out.append((bp[j], bp[j + 1], bp[k + 1], bp[k + 1]))
            else:
                out.append((bp[j], bp[j + 1], bp[k], bp[k + 1]))
    return np.array(out, dtype=float)


def initial_boxes(grid: AxisGrid, reduce_adjacent=True):
    per_axis = [_axis_spans(b, reduce_adjacent) for b in grid.breakpoints]
    idx = np.array(list(itertools.product(*[range(len(p)) for p in per_axis])))
    return np.stack([per_axis[i][idx[:, i]] for i in range(grid.dim)], axis=1)


def _param_scales(grid, boxes):
    """Cell width of the cell each face parameter lives in, shape (N, n, 2)."""
    out = np.empty(boxes.shape[:2] + (2,))
    for i in range(grid.dim):
        w = grid.widths(i)
        a_mid = 0.5 * (boxes[:, i, 0] + boxes[:, i, 1])
        b_mid = 0.5 * (boxes[:, i, 2] + boxes[:, i, 3])
        out[:, i, 0] = w[grid.locate(i, a_mid)]
        out[:, i, 1] = w[grid.locate(i, b_mid)]
    return out


def split_boxes(grid, boxes):
    """Bisect every box along its relatively widest face parameter."""
    widths = np.stack([boxes[:, :, 1] - boxes[:, :, 0], boxes[:, :, 3] - boxes[:, :, 2]], axis=2)
    rel = (widths / _param_scales(grid, boxes)).reshape(len(boxes), -1)
    which = np.argmax(rel, axis=1)
    axis, face = which // 2, which % 2
    rows = np.arange(len(boxes))
    left, right = boxes.copy(), boxes.copy()
    c_lo, c_hi = 2 * face, 2 * face + 1
    mid = 0.5 * (boxes[rows, axis, c_lo] + boxes[rows, axis, c_hi])
    left[rows, axis, c_hi] = mid
    right[rows, axis, c_lo] = mid
    return np.concatenate([left, right]), rel.max(axis=1)


def corner_rects(boxes):
    """All 4^n corner rectangles of each box: arrays ``(N, C, n)`` for lo and hi."""
    N, n, _ = boxes.shape
    choices = [(0, 2), (0, 3), (1, 2), (1, 3)]
    combos = list(itertools.product(range(4), repeat=n))
    lo = np.empty((N, len(combos), n))
    hi = np.empty((N, len(combos), n))
    for c, combo in enumerate(combos):
        for i, ch in enumerate(combo):
            lo[:, c, i] = boxes[:, i, choices[ch][0]]
            hi[:, c, i] = boxes[:, i, choices[ch][1]]
    return lo, hi


def _better(value, key, best_value, best_key):
    if best_key is None or value > best_value * (1 + TIE_RTOL) + 1e-300:
        return True
    return abs(value - best_value) <= TIE_RTOL * abs(best_value) and key < best_key


def branch_and_bound(grid, boxes, evaluate, tol, budget=200_000, batch=64, min_rel_width=1e-12, reduce=None):
    """Run the search and return a :class:`SearchResult`.

    ``evaluate(boxes) -> (ub, lb, lb_lo, lb_hi)``.  ``reduce(boxes)``, if
    given, may shrink boxes to sub-boxes that still contain a maximiser.  Terminates when the global
    upper bound ``U`` satisfies ``U - L <= tol * U``, when every open box is
    narrower than ``min_rel_width`` (relative to its cell), or when ``budget``
    boxes have been evaluated.  ``tol`` must lie in (0, 1).
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    best = -np.inf
    best_key = None
    w_lo = w_hi = None
    heap = []
    counter = itertools.count()
    frozen_ub = -np.inf
    explored = 0
    iterations = 0

    def absorb(bxs):
        nonlocal best, best_key, w_lo, w_hi, explored, frozen_ub
        if reduce is not None:
            bxs = reduce(bxs)
        ub, lb, lb_lo, lb_hi = evaluate(bxs)
        explored += len(bxs)
        for k in np.argsort(-lb, kind="stable")[:8]:
            if not np.isfinite(lb[k]):
                continue
            key = tuple(lb_lo[k]) + tuple(lb_hi[k])
            if _better(lb[k], key, best, best_key):
                best, best_key, w_lo, w_hi = float(lb[k]), key, lb_lo[k].copy(), lb_hi[k].copy()
        for k in range(len(bxs)):
            heapq.heappush(heap, (-ub[k], next(counter), bxs[k]))

    absorb(boxes)
    converged = False
    while heap:
        top = max(-heap[0][0], frozen_ub)
        if top <= best / (1.0 - tol):
            converged = True
            break
        if explored >= budget:
            break
        iterations += 1
        popped, popped_ub = [], []
        while heap and len(popped) < batch:
            ub_k, _, bx = heap[0]
            if -ub_k <= best / (1.0 - tol):
                break
            heapq.heappop(heap)
            popped.append(bx)
            popped_ub.append(-ub_k)
        if not popped:
            converged = frozen_ub <= best / (1.0 - tol)
            break
        pb = np.array(popped)
        children, rel = split_boxes(grid, pb)
        narrow = rel <= min_rel_width
        if np.any(narrow):
            frozen_ub = max(frozen_ub, float(np.max(np.array(popped_ub)[narrow])))
            keep = np.concatenate([~narrow, ~narrow])
            children = children[keep]
        if len(children):
            absorb(children)
    open_ub = -heap[0][0] if heap else -np.inf
    upper = max(open_ub, frozen_ub, best)
    if not converged:
        converged = upper - best <= tol * upper
    return SearchResult(best, upper, w_lo, w_hi, converged, explored, iterations)
