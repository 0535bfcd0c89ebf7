# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled meter-grid kernels; same contracts as ``_pykernels``.

The loops are fused over grid points so no (N, d) phase matrix is formed.
Projection sums go through d x d grid kernels and then one quadratic form per row.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log

cnp.import_array()


def projection_sums(const double[::1] eigvals, rows, const double[::1] grid,
                    const double[::1] weights, double g):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] W = np.ascontiguousarray(
        np.atleast_2d(rows), dtype=np.complex128)
    cdef Py_ssize_t nr = W.shape[0], d = W.shape[1], n = grid.shape[0]
    cdef Py_ssize_t j, a, b, r
    cdef double m, w, ph, kr, ki, xr, xi, yr, yi, sr, si
    cdef double[::1] cre = np.empty(d), cim = np.empty(d)
    # K_k[a, b] = sum_j w_j m_j^k conj(e_a) e_b, with e_a = exp(-i g lambda_a m)
    cdef double[:, :, ::1] Kr = np.zeros((3, d, d)), Ki = np.zeros((3, d, d))
    for j in range(n):
        m = grid[j]
        w = weights[j]
        for a in range(d):
            ph = -g * eigvals[a] * m
            cre[a] = cos(ph)
            cim[a] = sin(ph)
        for a in range(d):
            for b in range(d):
                kr = cre[a] * cre[b] + cim[a] * cim[b]
                ki = cre[a] * cim[b] - cim[a] * cre[b]
                Kr[0, a, b] += w * kr
                Ki[0, a, b] += w * ki
                Kr[1, a, b] += w * m * kr
                Ki[1, a, b] += w * m * ki
                Kr[2, a, b] += w * m * m * kr
                Ki[2, a, b] += w * m * m * ki
    P = np.zeros(nr)
    QQ = np.zeros(nr)
    QOr = np.zeros(nr)
    QOi = np.zeros(nr)
    cdef double[::1] vP = P, vQQ = QQ, vQOr = QOr, vQOi = QOi
    for r in range(nr):
        for a in range(d):
            xr = W[r, a].real
            xi = -W[r, a].imag
            for b in range(d):
                yr = W[r, b].real
                yi = W[r, b].imag
                # conj(x_a) K[a, b] x_b
                sr = xr * yr - xi * yi
                si = xr * yi + xi * yr
                vP[r] += Kr[0, a, b] * sr - Ki[0, a, b] * si
                vQQ[r] += eigvals[a] * eigvals[b] * (Kr[2, a, b] * sr - Ki[2, a, b] * si)
                vQOr[r] += eigvals[a] * (Kr[1, a, b] * sr - Ki[1, a, b] * si)
                vQOi[r] += eigvals[a] * (Kr[1, a, b] * si + Ki[1, a, b] * sr)
    return P, QQ, QOr + 1j * QOi


cdef void _oq(const double[::1] eigvals, const double complex[::1] row, double m,
              double g, double* ore, double* oim, double* qre, double* qim) noexcept nogil:
    cdef Py_ssize_t a
    cdef double ph, c, s, cr, ci
    ore[0] = 0.0
    oim[0] = 0.0
    qre[0] = 0.0
    qim[0] = 0.0
    for a in range(eigvals.shape[0]):
        ph = -g * eigvals[a] * m
        c = cos(ph)
        s = sin(ph)
        cr = row[a].real * c - row[a].imag * s
        ci = row[a].real * s + row[a].imag * c
        ore[0] += cr
        oim[0] += ci
        qre[0] += eigvals[a] * cr
        qim[0] += eigvals[a] * ci
    qre[0] *= m
    qim[0] *= m


def cell_amplitudes(const double[::1] eigvals, row, const double[::1] grid,
                    amps, double g):
    cdef const double complex[::1] vrow = np.ascontiguousarray(row, dtype=np.complex128)
    cdef const double complex[::1] vamp = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef Py_ssize_t j, n = grid.shape[0]
    cdef double ore, oim, qre, qim
    out = np.empty(n, dtype=np.complex128)
    dout = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] vo = out, vd = dout
    for j in range(n):
        _oq(eigvals, vrow, grid[j], g, &ore, &oim, &qre, &qim)
        vo[j] = (ore + 1j * oim) * vamp[j]
        vd[j] = (qim - 1j * qre) * vamp[j]
    return out, dout


def cell_probabilities(const double[::1] eigvals, row, const double[::1] grid,
                       const double[::1] weights, double g):
    cdef const double complex[::1] vrow = np.ascontiguousarray(row, dtype=np.complex128)
    cdef Py_ssize_t j, n = grid.shape[0]
    cdef double ore, oim, qre, qim
    P = np.empty(n)
    dP = np.empty(n)
    cdef double[::1] vP = P, vdP = dP
    for j in range(n):
        _oq(eigvals, vrow, grid[j], g, &ore, &oim, &qre, &qim)
        vP[j] = weights[j] * (ore * ore + oim * oim)
        vdP[j] = 2.0 * weights[j] * (ore * qim - oim * qre)
    return P, dP


def loglik_counts(const double[::1] eigvals, row, const double[::1] grid,
                  const double[::1] weights, double g, counts, double floor):
    cdef const double complex[::1] vrow = np.ascontiguousarray(row, dtype=np.complex128)
    cdef const long long[::1] vc = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t j, n = grid.shape[0]
    cdef double ore, oim, qre, qim, p, dp, ll = 0.0, score = 0.0
    with nogil:
        for j in range(n):
            if vc[j] == 0:
                continue
            _oq(eigvals, vrow, grid[j], g, &ore, &oim, &qre, &qim)
            p = weights[j] * (ore * ore + oim * oim)
            dp = 2.0 * weights[j] * (ore * qim - oim * qre)
            if p < floor:
                p = floor
            ll += vc[j] * log(p)
            score += vc[j] * dp / p
    return ll, score
