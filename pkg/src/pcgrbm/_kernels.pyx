# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled clustering kernels.

Same contracts as pcgrbm._kernels_py; see that module for documentation.
The loop-bound pieces live here (Jacobi rotations, affinity-propagation
messages, constrained assignment); BLAS-bound math stays in NumPy.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY

cnp.import_array()

BACKEND = "compiled"


def jacobi_eigh(double[:, ::1] A, double[:, ::1] V, double tol, int max_sweeps):
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t p, q, i, sweeps
    cdef double scale = 0.0, off, apq, diff, theta, t, c, s
    cdef double aip, aiq, vip, viq
    for p in range(n):
        for q in range(n):
            scale += A[p, q] * A[p, q]
    scale = sqrt(scale)
    if scale < 1.0:
        scale = 1.0
    cdef double threshold = tol * scale
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        if sqrt(off) <= threshold:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if 2.0 * fabs(apq) * 1e150 < fabs(diff):
                    t = apq / diff  # limit of the stable tangent for huge theta
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip = A[i, p]
                    aiq = A[i, q]
                    A[i, p] = c * aip - s * aiq
                    A[i, q] = s * aip + c * aiq
                for i in range(n):
                    aip = A[p, i]
                    aiq = A[q, i]
                    A[p, i] = c * aip - s * aiq
                    A[q, i] = s * aip + c * aiq
                for i in range(n):
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq
    return sweeps


def ap_iterate(double[:, ::1] S, double[:, ::1] R, double[:, ::1] A, double damping):
    cdef Py_ssize_t n = S.shape[0]
    cdef Py_ssize_t i, k, top
    cdef double best, second, v, rnew, colsum, anew, keep = damping, mix = 1.0 - damping
    cdef cnp.ndarray[cnp.float64_t, ndim=1] col = np.empty(n, dtype=np.float64)

    for i in range(n):
        best = -INFINITY
        second = -INFINITY
        top = 0
        for k in range(n):
            v = A[i, k] + S[i, k]
            if v > best:
                second = best
                best = v
                top = k
            elif v > second:
                second = v
        for k in range(n):
            if k == top:
                rnew = S[i, k] - second
            else:
                rnew = S[i, k] - best
            R[i, k] = keep * R[i, k] + mix * rnew

    for k in range(n):
        colsum = 0.0
        for i in range(n):
            if i == k:
                v = R[i, k]
            else:
                v = R[i, k] if R[i, k] > 0.0 else 0.0
            col[i] = v
            colsum += v
        for i in range(n):
            if i == k:
                anew = colsum - col[i]
            else:
                anew = colsum - col[i]
                if anew > 0.0:
                    anew = 0.0
            A[i, k] = keep * A[i, k] + mix * anew


def constrained_assign(
    long[:, ::1] order,
    long[::1] must_indptr,
    long[::1] must_indices,
    long[::1] cannot_indptr,
    long[::1] cannot_indices,
    long[::1] out,
):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t k = order.shape[1]
    cdef Py_ssize_t i, slot, m
    cdef long c, j
    cdef bint ok
    for i in range(n):
        out[i] = -1
    for i in range(n):
        c = -1
        for slot in range(k):
            c = order[i, slot]
            ok = True
            for m in range(must_indptr[i], must_indptr[i + 1]):
                j = must_indices[m]
                if out[j] != -1 and out[j] != c:
                    ok = False
                    break
            if ok:
                for m in range(cannot_indptr[i], cannot_indptr[i + 1]):
                    j = cannot_indices[m]
                    if out[j] == c:
                        ok = False
                        break
            if ok:
                break
            c = -1
        if c == -1:
            return i
        out[i] = c
    return -1
