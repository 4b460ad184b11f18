# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the two hot kernels.

Semantics (including split tie-breaking) mirror breathauth._core_numpy; the
parity test suite holds both backends to the same results.
"""

from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_BASIS = 16


def window_msr(const double[::1] profile, long scale, const double[:, ::1] q_basis):
    """Per-window mean-square detrending residuals at one scale."""
    cdef Py_ssize_t n = profile.shape[0]
    cdef Py_ssize_t s = scale
    cdef Py_ssize_t ns = n // s
    cdef Py_ssize_t m = q_basis.shape[1]
    if q_basis.shape[0] != s:
        raise ValueError("q_basis rows must equal the scale")
    if m > MAX_BASIS:
        raise ValueError("detrend basis too wide for the compiled kernel")
    out = np.empty(2 * ns, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double coef[MAX_BASIS]
    cdef Py_ssize_t w, t, j, start, back0 = n - ns * s
    cdef double acc, fit, rss
    for w in range(2 * ns):
        start = w * s if w < ns else back0 + (w - ns) * s
        for j in range(m):
            acc = 0.0
            for t in range(s):
                acc += q_basis[t, j] * profile[start + t]
            coef[j] = acc
        rss = 0.0
        for t in range(s):
            fit = 0.0
            for j in range(m):
                fit += q_basis[t, j] * coef[j]
            acc = profile[start + t] - fit
            rss += acc * acc
        out_v[w] = rss / s
    return out


cdef void _sort_pairs(double* v, unsigned char* lab, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    # iterative quicksort on parallel arrays; insertion sort below 16 elements
    cdef Py_ssize_t stack_lo[64]
    cdef Py_ssize_t stack_hi[64]
    cdef Py_ssize_t top = 0, i, j, mid
    cdef double pivot, tv
    cdef unsigned char tl
    stack_lo[0] = lo
    stack_hi[0] = hi
    top = 1
    while top > 0:
        top -= 1
        lo = stack_lo[top]
        hi = stack_hi[top]
        while hi - lo > 16:
            mid = lo + (hi - lo) // 2
            # median-of-three pivot
            if v[mid] < v[lo]:
                tv = v[lo]; v[lo] = v[mid]; v[mid] = tv
                tl = lab[lo]; lab[lo] = lab[mid]; lab[mid] = tl
            if v[hi] < v[lo]:
                tv = v[lo]; v[lo] = v[hi]; v[hi] = tv
                tl = lab[lo]; lab[lo] = lab[hi]; lab[hi] = tl
            if v[hi] < v[mid]:
                tv = v[mid]; v[mid] = v[hi]; v[hi] = tv
                tl = lab[mid]; lab[mid] = lab[hi]; lab[hi] = tl
            pivot = v[mid]
            i = lo
            j = hi
            while i <= j:
                while v[i] < pivot:
                    i += 1
                while v[j] > pivot:
                    j -= 1
                if i <= j:
                    tv = v[i]; v[i] = v[j]; v[j] = tv
                    tl = lab[i]; lab[i] = lab[j]; lab[j] = tl
                    i += 1
                    j -= 1
            if j - lo < hi - i:
                if i < hi and top < 64:
                    stack_lo[top] = i
                    stack_hi[top] = hi
                    top += 1
                hi = j
            else:
                if lo < j and top < 64:
                    stack_lo[top] = lo
                    stack_hi[top] = j
                    top += 1
                lo = i
        # insertion sort for the remainder
        for i in range(lo + 1, hi + 1):
            tv = v[i]
            tl = lab[i]
            j = i - 1
            while j >= lo and v[j] > tv:
                v[j + 1] = v[j]
                lab[j + 1] = lab[j]
                j -= 1
            v[j + 1] = tv
            lab[j + 1] = tl
    return


def best_split(
    const double[:, ::1] X,
    const unsigned char[::1] y,
    const long long[::1] idx,
    const long long[::1] feats,
    long min_leaf,
):
    """Best binary Gini split; see the NumPy fallback for the full contract."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t nf = feats.shape[0]
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef unsigned char* lab = <unsigned char*> malloc(n * sizeof(unsigned char))
    if v == NULL or lab == NULL:
        free(v)
        free(lab)
        raise MemoryError()
    cdef Py_ssize_t fi, k, f
    cdef long long total1, ones
    cdef double nl, nr, l1, r1, gini_l, gini_r, cost, thr
    cdef double best_cost = np.inf
    cdef double best_thr = 0.0
    cdef Py_ssize_t best_feat = -1
    try:
        with nogil:
            for fi in range(nf):
                f = <Py_ssize_t> feats[fi]
                total1 = 0
                for k in range(n):
                    v[k] = X[idx[k], f]
                    lab[k] = y[idx[k]]
                    total1 += lab[k]
                _sort_pairs(v, lab, 0, n - 1)
                ones = 0
                for k in range(1, n):
                    ones += lab[k - 1]
                    if v[k] == v[k - 1]:
                        continue
                    if k < min_leaf or n - k < min_leaf:
                        continue
                    nl = k
                    nr = n - k
                    l1 = ones
                    r1 = total1 - ones
                    gini_l = 1.0 - (l1 * l1 + (nl - l1) * (nl - l1)) / (nl * nl)
                    gini_r = 1.0 - (r1 * r1 + (nr - r1) * (nr - r1)) / (nr * nr)
                    cost = (nl * gini_l + nr * gini_r) / n
                    if cost < best_cost:
                        thr = 0.5 * (v[k - 1] + v[k])
                        if thr >= v[k]:
                            thr = v[k - 1]
                        best_cost = cost
                        best_thr = thr
                        best_feat = f
    finally:
        free(v)
        free(lab)
    return int(best_feat), float(best_thr), float(best_cost)
