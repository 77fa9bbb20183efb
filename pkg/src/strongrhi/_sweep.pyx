# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rectangle max-sweep for one and two dimensions.

Same contract as ``_sweep_py.sweep_max``; higher dimensions stay on numpy.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef void _sweep_1d(double[::1] cf, double[::1] cm, double null,
                    double[::1] contain, double[::1] meet, double[::1] point,
                    double[::1] sm) noexcept nogil:
    cdef Py_ssize_t B = cf.shape[0]
    cdef Py_ssize_t lo, hi, s, q
    cdef double run, m, v
    for lo in range(B - 1):
        run = -INFINITY
        hi = B - 1
        while hi > lo:
            m = cm[hi] - cm[lo]
            if m > null:
                v = (cf[hi] - cf[lo]) / m
                if v > run:
                    run = v
            sm[hi] = run
            hi -= 1
        sm[lo] = run
        for q in range(lo, B):
            if sm[q] > point[q]:
                point[q] = sm[q]
        for s in range(lo, B - 1):
            if sm[s + 1] > contain[s]:
                contain[s] = sm[s + 1]
        s = lo - 1 if lo > 0 else 0
        while s < B - 1:
            v = sm[s] if s > lo else sm[lo]
            if v > meet[s]:
                meet[s] = v
            s += 1


cdef void _sweep_2d(double[:, ::1] cf, double[:, ::1] cm, double null,
                    double[:, ::1] contain, double[:, ::1] meet, double[:, ::1] point,
                    double[:, ::1] sm) noexcept nogil:
    cdef Py_ssize_t B1 = cf.shape[0], B2 = cf.shape[1]
    cdef Py_ssize_t l1, l2, h1, h2, s1, s2, t1, t2
    cdef double m, v, best
    for l1 in range(B1 - 1):
        for l2 in range(B2 - 1):
            # suffix max over (h1, h2) >= (l1 + 1, l2 + 1); rows/cols l1, l2 copy the first valid
            h1 = B1 - 1
            while h1 > l1:
                h2 = B2 - 1
                while h2 > l2:
                    m = cm[h1, h2] - cm[l1, h2] - cm[h1, l2] + cm[l1, l2]
                    best = -INFINITY
                    if m > null:
                        best = (cf[h1, h2] - cf[l1, h2] - cf[h1, l2] + cf[l1, l2]) / m
                    if h1 + 1 < B1 and sm[h1 + 1, h2] > best:
                        best = sm[h1 + 1, h2]
                    if h2 + 1 < B2 and sm[h1, h2 + 1] > best:
                        best = sm[h1, h2 + 1]
                    sm[h1, h2] = best
                    h2 -= 1
                sm[h1, l2] = sm[h1, l2 + 1]
                h1 -= 1
            for h2 in range(l2, B2):
                sm[l1, h2] = sm[l1 + 1, h2]
            for s1 in range(l1, B1):
                for s2 in range(l2, B2):
                    if sm[s1, s2] > point[s1, s2]:
                        point[s1, s2] = sm[s1, s2]
            for s1 in range(l1, B1 - 1):
                for s2 in range(l2, B2 - 1):
                    if sm[s1 + 1, s2 + 1] > contain[s1, s2]:
                        contain[s1, s2] = sm[s1 + 1, s2 + 1]
            s1 = l1 - 1 if l1 > 0 else 0
            while s1 < B1 - 1:
                t1 = s1 if s1 > l1 else l1
                s2 = l2 - 1 if l2 > 0 else 0
                while s2 < B2 - 1:
                    t2 = s2 if s2 > l2 else l2
                    if sm[t1, t2] > meet[s1, s2]:
                        meet[s1, s2] = sm[t1, t2]
                    s2 += 1
                s1 += 1


def sweep_max(cf, cm, double null):
    cf = np.ascontiguousarray(cf, dtype=np.float64)
    cm = np.ascontiguousarray(cm, dtype=np.float64)
    if cf.ndim == 1:
        B = cf.shape[0]
        contain = np.full(B - 1, -np.inf)
        meet = np.full(B - 1, -np.inf)
        point = np.full(B, -np.inf)
        sm = np.empty(B)
        _sweep_1d(cf, cm, null, contain, meet, point, sm)
        return contain, meet, point
    if cf.ndim == 2:
        B1, B2 = cf.shape
        contain = np.full((B1 - 1, B2 - 1), -np.inf)
        meet = np.full((B1 - 1, B2 - 1), -np.inf)
        point = np.full((B1, B2), -np.inf)
        sm = np.full((B1, B2), -np.inf)
        _sweep_2d(cf, cm, null, contain, meet, point, sm)
        return contain, meet, point
    raise NotImplementedError("compiled sweep covers 1D and 2D only")
