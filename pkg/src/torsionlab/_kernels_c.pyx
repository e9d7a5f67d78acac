# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in _kernels_py; see that module for the
shared conventions. Keep both backends algorithmically identical."""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, log1p, sqrt

cnp.import_array()


def stiffness_triplets(const double[:, ::1] vertices, const cnp.int64_t[:, ::1] triangles):
    cdef Py_ssize_t nt = triangles.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(9 * nt, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(9 * nt, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.empty(9 * nt, dtype=np.float64)
    cdef cnp.int64_t[:] rv = rows
    cdef cnp.int64_t[:] cv = cols
    cdef double[:] vv = vals
    cdef Py_ssize_t t, i, j, k
    cdef cnp.int64_t i0, i1, i2
    cdef double ex[3]
    cdef double ey[3]
    cdef double area2, coef
    for t in range(nt):
        i0 = triangles[t, 0]
        i1 = triangles[t, 1]
        i2 = triangles[t, 2]
        # e_i = edge opposite vertex i
        ex[0] = vertices[i2, 0] - vertices[i1, 0]
        ey[0] = vertices[i2, 1] - vertices[i1, 1]
        ex[1] = vertices[i0, 0] - vertices[i2, 0]
        ey[1] = vertices[i0, 1] - vertices[i2, 1]
        ex[2] = vertices[i1, 0] - vertices[i0, 0]
        ey[2] = vertices[i1, 1] - vertices[i0, 1]
        area2 = ex[1] * ey[2] - ey[1] * ex[2]
        if area2 <= 0.0:
            raise ValueError("triangle with non-positive area")
        coef = 1.0 / (2.0 * area2)
        k = 9 * t
        for i in range(3):
            for j in range(3):
                rv[k] = triangles[t, i]
                cv[k] = triangles[t, j]
                vv[k] = (ex[i] * ex[j] + ey[i] * ey[j]) * coef
                k += 1
    return rows, cols, vals


cdef inline void _sort3(double* a, double* b, double* c) noexcept nogil:
    cdef double tmp
    if a[0] > b[0]:
        tmp = a[0]; a[0] = b[0]; b[0] = tmp
    if b[0] > c[0]:
        tmp = b[0]; b[0] = c[0]; c[0] = tmp
    if a[0] > b[0]:
        tmp = a[0]; a[0] = b[0]; b[0] = tmp


cdef inline Py_ssize_t _lower_bound(const double[:] arr, double x) noexcept nogil:
    # first index with arr[i] >= x
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def superlevel_areas(tri_values, tri_weights, thresholds):
    cdef const double[:, ::1] vals = np.ascontiguousarray(tri_values, dtype=np.float64)
    cdef const double[:] w = np.ascontiguousarray(tri_weights, dtype=np.float64)
    cdef const double[:] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t nt = vals.shape[0]
    cdef Py_ssize_t m = th.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(m, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] diff_arr = np.zeros(m + 1, dtype=np.float64)
    cdef double[:] diff = diff_arr
    cdef Py_ssize_t t, i, ia, ic
    cdef double a, b, c, wt, tt, frac, acc
    for t in range(nt):
        a = vals[t, 0]; b = vals[t, 1]; c = vals[t, 2]
        _sort3(&a, &b, &c)
        wt = w[t]
        ia = _lower_bound(th, a)
        ic = _lower_bound(th, c)
        diff[0] += wt
        diff[ia] -= wt
        for i in range(ia, ic):
            tt = th[i]
            # products of bounded ratios (the raw denominator products can
            # underflow for near-plateau triangles)
            if tt < b:
                frac = 1.0 - ((tt - a) / (b - a)) * ((tt - a) / (c - a))
            else:
                frac = ((c - tt) / (c - b)) * ((c - tt) / (c - a))
            out[i] += wt * frac
    acc = 0.0
    for i in range(m):
        acc += diff[i]
        out[i] += acc
    return out_arr


def boundary_superlevel(edge_values, edge_lengths, thresholds):
    cdef const double[:, ::1] ev = np.ascontiguousarray(edge_values, dtype=np.float64)
    cdef const double[:] length = np.ascontiguousarray(edge_lengths, dtype=np.float64)
    cdef const double[:] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t nb = ev.shape[0]
    cdef Py_ssize_t m = th.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] len_arr = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rec_arr = np.zeros(m, dtype=np.float64)
    cdef double[:] len_out = len_arr
    cdef double[:] rec_out = rec_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ldiff_arr = np.zeros(m + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rdiff_arr = np.zeros(m + 1, dtype=np.float64)
    cdef double[:] ldiff = ldiff_arr
    cdef double[:] rdiff = rdiff_arr
    cdef Py_ssize_t e, i, ilo, ihi
    cdef double lo, hi, L, d, full_recip, tt, acc_l, acc_r
    for e in range(nb):
        lo = ev[e, 0]; hi = ev[e, 1]
        if lo > hi:
            lo, hi = hi, lo
        if lo <= 0.0:
            raise ValueError("reciprocal boundary integral needs positive boundary values")
        L = length[e]
        d = hi - lo
        if d > 0.0:
            full_recip = L * log1p(d / lo) / d
        else:
            full_recip = L / lo
        ilo = _lower_bound(th, lo)
        ihi = _lower_bound(th, hi)
        ldiff[0] += L
        ldiff[ilo] -= L
        rdiff[0] += full_recip
        rdiff[ilo] -= full_recip
        for i in range(ilo, ihi):
            tt = th[i]
            len_out[i] += L * (hi - tt) / d
            rec_out[i] += L * log(hi / tt) / d
    acc_l = 0.0
    acc_r = 0.0
    for i in range(m):
        acc_l += ldiff[i]
        acc_r += rdiff[i]
        len_out[i] += acc_l
        rec_out[i] += acc_r
    return len_arr, rec_arr


def cg_csr(indptr, indices, data, diag, rhs, double tol, cnp.int64_t maxiter):
    cdef const cnp.int32_t[:] ip = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef const cnp.int32_t[:] ix = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const double[:] av = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[:] dg = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[:] b = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = np.zeros(n, dtype=np.float64)
    cdef double[:] x = x_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.zeros(4 * n, dtype=np.float64)
    cdef double[:] r = scratch[:n]
    cdef double[:] z = scratch[n:2 * n]
    cdef double[:] p = scratch[2 * n:3 * n]
    cdef double[:] q = scratch[3 * n:]
    cdef Py_ssize_t i, j, it
    cdef double bnorm2 = 0.0, rho, rho_new, alpha, beta, pq, rnorm2, relres, s

    for i in range(n):
        bnorm2 += b[i] * b[i]
    if bnorm2 == 0.0:
        return x_arr, 0.0, 0, True
    rho = 0.0
    rnorm2 = 0.0
    for i in range(n):
        r[i] = b[i]
        z[i] = r[i] / dg[i]
        p[i] = z[i]
        rho += r[i] * z[i]
        rnorm2 += r[i] * r[i]
    relres = sqrt(rnorm2 / bnorm2)
    it = 0
    while relres > tol and it < maxiter:
        pq = 0.0
        for i in range(n):
            s = 0.0
            for j in range(ip[i], ip[i + 1]):
                s += av[j] * p[ix[j]]
            q[i] = s
            pq += p[i] * s
        alpha = rho / pq
        rnorm2 = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
            rnorm2 += r[i] * r[i]
        relres = sqrt(rnorm2 / bnorm2)
        it += 1
        if relres <= tol:
            break
        rho_new = 0.0
        for i in range(n):
            z[i] = r[i] / dg[i]
            rho_new += r[i] * z[i]
        beta = rho_new / rho
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rho = rho_new
    return x_arr, relres, it, relres <= tol
