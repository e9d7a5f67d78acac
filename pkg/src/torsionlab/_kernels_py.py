"""NumPy implementations of the hot kernels.

Every function here has a signature-identical twin in ``_kernels_c.pyx``;
``torsionlab.kernels`` picks the compiled module when it imported cleanly
and falls back to this one otherwise. The test suite asserts that the two
backends agree to roundoff, so keep the algorithms in lockstep.

Conventions shared by both backends:
  * vertex coordinates are float64 arrays of shape (nv, 2),
  * triangle connectivity is int64 of shape (nt, 3),
  * thresholds passed to the sweep kernels are sorted ascending.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

# Process triangles in blocks so the flat event arrays of the threshold
# sweeps stay small even when a field has tens of thousands of distinct
# values.
_BLOCK = 1024


def stiffness_triplets(vertices, triangles):
    """COO triplets of the P1 stiffness matrix (9 entries per triangle).

    Uses the edge-vector identity K_ij = (e_i . e_j) / (4 A) with e_i the
    edge opposite vertex i, which is exact for linear elements.
    """
    p = vertices[triangles]  # (nt, 3, 2)
    e = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]
    area2 = e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0]  # 2A, positive for CCW
    if np.any(area2 <= 0.0):
        raise ValueError("triangle with non-positive area")
    local = np.einsum("tik,tjk->tij", e, e) / (2.0 * area2)[:, None, None]
    rows = triangles[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]].ravel()
    cols = triangles[:, [0, 1, 2, 0, 1, 2, 0, 1, 2]].ravel()
    return rows, cols, local.reshape(-1)


def _ranges(starts, counts):
    """Concatenation of arange(starts[i], starts[i]+counts[i])."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return np.repeat(starts - offsets, counts) + np.arange(total, dtype=np.int64)


def superlevel_areas(tri_values, tri_weights, thresholds):
    """Weighted areas of the super-level sets {u > t} of a P1 field.

    Parameters
    ----------
    tri_values : (nt, 3) float64
        Vertex values per triangle (any order).
    tri_weights : (nt,) float64
        Per-triangle weight, already multiplied by the triangle area.
        Pass plain areas to get the distribution function.
    thresholds : (m,) float64, sorted ascending.

    Returns
    -------
    (m,) float64 with sum_T w_T * |T ∩ {u > t}| / |T| for each threshold.

    The per-triangle clipped-area fractions are the exact piecewise
    quadratics of the linear interpolant, so the result is exact up to
    roundoff (no quadrature).
    """
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    m = thresholds.shape[0]
    out = np.zeros(m)
    diff = np.zeros(m + 1)
    vals = np.sort(np.asarray(tri_values, dtype=np.float64), axis=1)
    w = np.asarray(tri_weights, dtype=np.float64)
    nt = vals.shape[0]
    for lo in range(0, nt, _BLOCK):
        sl = slice(lo, min(lo + _BLOCK, nt))
        a, b, c = vals[sl, 0], vals[sl, 1], vals[sl, 2]
        wb = w[sl]
        ia = np.searchsorted(thresholds, a, side="left")   # first t >= a
        ic = np.searchsorted(thresholds, c, side="left")   # first t >= c
        # thresholds strictly below a get the full weight
        np.add.at(diff, 0, wb.sum())
        np.add.at(diff, ia, -wb)
        # thresholds in [a, c): piecewise-quadratic fraction
        counts = ic - ia
        if counts.any():
            tri_idx = np.repeat(np.arange(len(wb)), counts)
            th_idx = _ranges(ia, counts)
            t = thresholds[th_idx]
            aa, bb, cc = a[tri_idx], b[tri_idx], c[tri_idx]
            # products of two bounded ratios, not ratios of products: the
            # raw denominators (b-a)(c-a) can underflow for near-plateau
            # triangles even when the fraction itself is well-scaled
            frac = np.empty(t.shape[0])
            mid = t < bb
            hm = ~mid
            dm = t[mid] - aa[mid]
            frac[mid] = 1.0 - (dm / (bb[mid] - aa[mid])) * (dm / (cc[mid] - aa[mid]))
            dh = cc[hm] - t[hm]
            frac[hm] = (dh / (cc[hm] - bb[hm])) * (dh / (cc[hm] - aa[hm]))
            out += np.bincount(th_idx, weights=wb[tri_idx] * frac, minlength=m)
    out += np.cumsum(diff[:m])
    return out


def boundary_superlevel(edge_values, edge_lengths, thresholds):
    """Lengths and reciprocal integrals of {u > t} on the boundary polyline.

    For each sorted threshold t returns
      * the length of the boundary portion where the edge-linear field
        exceeds t,
      * the integral of 1/u over that portion (closed-form logarithm per
        sub-segment; requires u > 0 wherever a sub-segment survives).
    """
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    m = thresholds.shape[0]
    ev = np.asarray(edge_values, dtype=np.float64)
    lo = np.minimum(ev[:, 0], ev[:, 1])
    hi = np.maximum(ev[:, 0], ev[:, 1])
    if np.any(lo <= 0.0):
        raise ValueError("reciprocal boundary integral needs positive boundary values")
    length = np.asarray(edge_lengths, dtype=np.float64)
    d = hi - lo
    # full-edge reciprocal integral: L * log(hi/lo) / (hi - lo), -> L/lo as d -> 0
    safe_d = np.where(d > 0.0, d, 1.0)
    full_recip = length * np.where(d > 0.0, np.log1p(d / lo) / safe_d, 1.0 / lo)

    len_diff = np.zeros(m + 1)
    rec_diff = np.zeros(m + 1)
    ilo = np.searchsorted(thresholds, lo, side="left")
    ihi = np.searchsorted(thresholds, hi, side="left")
    np.add.at(len_diff, 0, length.sum())
    np.add.at(len_diff, ilo, -length)
    np.add.at(rec_diff, 0, full_recip.sum())
    np.add.at(rec_diff, ilo, -full_recip)
    len_out = np.cumsum(len_diff[:m])
    rec_out = np.cumsum(rec_diff[:m])

    counts = ihi - ilo
    if counts.any():
        e_idx = np.repeat(np.arange(len(length)), counts)
        th_idx = _ranges(ilo, counts)
        t = thresholds[th_idx]
        el, eh, eL = lo[e_idx], hi[e_idx], length[e_idx]
        dd = eh - el  # > 0 whenever the partial range [lo, hi) is non-empty
        len_out += np.bincount(th_idx, weights=eL * (eh - t) / dd, minlength=m)
        rec_out += np.bincount(th_idx, weights=eL * np.log(eh / t) / dd, minlength=m)
    return len_out, rec_out


def cg_csr(indptr, indices, data, diag, rhs, tol, maxiter):
    """Jacobi-preconditioned conjugate gradients on a CSR matrix.

    Returns (x, relative_residual, iterations, converged) where the
    relative residual is ||b - Ax|| / ||b|| on the unpreconditioned system.
    """
    n = rhs.shape[0]
    mat = scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    b = np.asarray(rhs, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0, True
    inv_diag = 1.0 / np.asarray(diag, dtype=np.float64)
    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rho = float(r @ z)
    relres = float(np.linalg.norm(r)) / bnorm
    it = 0
    while relres > tol and it < maxiter:
        q = mat @ p
        alpha = rho / float(p @ q)
        x += alpha * p
        r -= alpha * q
        relres = float(np.linalg.norm(r)) / bnorm
        if relres <= tol:
            it += 1
            break
        z = inv_diag * r
        rho_new = float(r @ z)
        p = z + (rho_new / rho) * p
        rho = rho_new
        it += 1
    return x, relres, it, relres <= tol
