"""Vectorized numpy implementations of the meter-grid kernels.

Shared conventions: ``rows[r, a] = <f_r|a><a|psi_i>`` are the projection
weights of system vector ``f_r`` on the eigenbasis of A, so that for each row

    o(m) = sum_a rows[a] exp(-i g a m),    q(m) = m sum_a a rows[a] exp(-i g a m),

and ``weights = |phi_i(m_j)|**2`` on the meter grid.
"""

import numpy as np


def _phases(eigvals, grid, g):
    return np.exp(-1j * g * np.multiply.outer(grid, eigvals))


def projection_sums(eigvals, rows, grid, weights, g):
    """Return ``(P, QQ, QO)``: grid averages of |o|^2, |q|^2 and conj(q) o per row.

    The grid sums only depend on eigenvalue pairs, so they are reduced to three
    d x d kernels first and each row is then a quadratic form.
    """
    rows = np.atleast_2d(rows)
    E = _phases(eigvals, grid, g)
    Ew = E.conj().T * weights
    K0 = Ew @ E
    K1 = (Ew * grid) @ E
    K2 = (Ew * grid**2) @ E
    lam = np.asarray(eigvals, dtype=float)
    rc = rows.conj()
    P = np.einsum("na,ab,nb->n", rc, K0, rows).real
    QQ = np.einsum("na,ab,nb->n", rc, K2 * np.outer(lam, lam), rows).real
    QO = np.einsum("na,ab,nb->n", rc, K1 * lam[:, None], rows)
    return P, QQ, QO


def cell_amplitudes(eigvals, row, grid, amps, g):
    """Unnormalized conditional meter amplitudes o(m) phi(m) and their g-derivative."""
    E = _phases(eigvals, grid, g)
    o = E @ row
    q = grid * ((E * eigvals) @ row)
    return o * amps, -1j * q * amps


def cell_probabilities(eigvals, row, grid, weights, g):
    """Joint probabilities of success and meter cell j, with their g-derivatives."""
    E = _phases(eigvals, grid, g)
    o = E @ row
    q = grid * ((E * eigvals) @ row)
    P = weights * (o.real**2 + o.imag**2)
    dP = 2.0 * weights * (o.real * q.imag - o.imag * q.real)
    return P, dP


def loglik_counts(eigvals, row, grid, weights, g, counts, floor):
    """Log-likelihood and score of meter-cell counts, sum_j n_j log P_j(g)."""
    P, dP = cell_probabilities(eigvals, row, grid, weights, g)
    mask = counts > 0
    Pm = np.maximum(P[mask], floor)
    n = counts[mask]
    return float(np.sum(n * np.log(Pm))), float(np.sum(n * dP[mask] / Pm))
