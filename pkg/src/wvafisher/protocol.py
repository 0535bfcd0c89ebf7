"""Kernels of the post-selected weak-measurement protocol.

For pre-selected state ``psi_i``, post-selected state ``psi_f``, system
observable ``A`` and meter ``M``, the interaction ``exp(-i g A M)`` leaves the
meter (after successful post-selection) in ``O(g)|phi_i>`` with

    O(g) = <psi_f| exp(-i g A M) |psi_i>,
    Q(g) = <psi_f| A M exp(-i g A M) |psi_i>  (so dO/dg = -i Q).

Both are diagonal in the M eigenbasis and are evaluated exactly on the meter
grid through the spectral decomposition of ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import NullPostselectionError, PostselectionImpossibleError
from .quantum import (HermitianObservable, MeterModel, SystemState, as_observable,
                      as_state)

DIVERGENCE_TOL = 1e-14
PF_UNDERFLOW = 1e-300


def overlap_delta(psi_i, psi_f) -> tuple[float, complex]:
    """Return ``(|<psi_f|psi_i>|, phase)``.

    Multiplying ``psi_f`` by ``phase`` makes the overlap real and non-negative.
    """
    ov = complex(np.vdot(as_state(psi_f).amplitudes, as_state(psi_i).amplitudes))
    mag = abs(ov)
    phase = ov / mag if mag > 0 else 1.0 + 0j
    return mag, phase


@dataclass(frozen=True)
class PostSelection:
    """Post-selected state, phase-aligned against a pre-selected state.

    ``delta`` is the real, non-negative overlap <psi_f|psi_i>.
    ``signed_delta`` keeps the sign of <A>/<A^2>^(1/2) for the optimal ansatz
    and equals ``delta`` otherwise.
    """

    psi_f: SystemState
    delta: float
    signed_delta: float


def align_postselection(psi_i, psi_f) -> PostSelection:
    delta, phase = overlap_delta(psi_i, psi_f)
    aligned = SystemState(as_state(psi_f).amplitudes * phase)
    return PostSelection(aligned, delta, delta)


def optimal_postselection(psi_i, A) -> PostSelection:
    """The ansatz A|psi_i> / <A^2>^(1/2)."""
    psi_i = as_state(psi_i)
    obs = as_observable(A)
    v = obs.matrix @ psi_i.amplitudes
    norm = float(np.linalg.norm(v))
    if norm < DIVERGENCE_TOL:
        raise NullPostselectionError("A|psi_i> vanishes; optimal post-selection undefined")
    signed = obs.expectation(psi_i.amplitudes) / norm
    sel = align_postselection(psi_i, SystemState.from_vector(v))
    return PostSelection(sel.psi_f, sel.delta, signed)


def matrix_element(psi_f, A, psi_i, n: int = 1) -> complex:
    """(A^n)_fi = <psi_f|A^n|psi_i>."""
    obs = as_observable(A)
    return complex(np.vdot(as_state(psi_f).amplitudes,
                           obs.power(n) @ as_state(psi_i).amplitudes))


@dataclass(frozen=True)
class WeakValue:
    value: complex
    divergent: bool

    def __abs__(self):
        return abs(self.value)


def weak_value(psi_i, psi_f, A) -> WeakValue:
    """A_w = <psi_f|A|psi_i> / <psi_f|psi_i>; flagged divergent near orthogonality."""
    psi_i, psi_f = as_state(psi_i), as_state(psi_f)
    den = complex(np.vdot(psi_f.amplitudes, psi_i.amplitudes))
    if abs(den) < DIVERGENCE_TOL:
        return WeakValue(complex(np.nan, np.nan), True)
    return WeakValue(matrix_element(psi_f, A, psi_i) / den, False)


def projection_row(psi_f, psi_i, obs: HermitianObservable) -> np.ndarray:
    """w_a = <f|a><a|psi_i> over the eigenvectors |a> of A."""
    V = obs.eigenvectors
    f = np.asarray(psi_f, dtype=complex)
    return np.conj(V.conj().T @ f) * (V.conj().T @ np.asarray(psi_i, dtype=complex))


def orthogonal_complement(psi_f) -> np.ndarray:
    """Rows form an orthonormal basis of the complement of ``psi_f``."""
    f = np.asarray(psi_f, dtype=complex)
    _, _, vh = np.linalg.svd(f.conj()[None, :])
    return vh[1:].conj()


@dataclass(frozen=True)
class PostselectionSums:
    """Meter-space averages at a given coupling.

    ``p_fail`` is accumulated directly from the complement projections, so it
    stays accurate when ``p_f`` is close to one.
    """

    g: float
    p_f: float
    p_fail: float
    qq: float
    qo: complex

    @property
    def dp_f(self) -> float:
        return -2.0 * self.qo.imag


@dataclass(frozen=True)
class Protocol:
    """A fixed (psi_i, psi_f, A, meter) configuration; g varies per call."""

    psi_i: SystemState
    psi_f: SystemState
    observable: HermitianObservable
    meter: MeterModel

    @classmethod
    def build(cls, psi_i, psi_f, A, meter: MeterModel) -> "Protocol":
        return cls(as_state(psi_i), as_state(psi_f), as_observable(A), meter)

    @cached_property
    def row(self) -> np.ndarray:
        return projection_row(self.psi_f.amplitudes, self.psi_i.amplitudes, self.observable)

    @cached_property
    def complement_rows(self) -> np.ndarray:
        comp = orthogonal_complement(self.psi_f.amplitudes)
        return np.array([projection_row(e, self.psi_i.amplitudes, self.observable)
                         for e in comp])

    @cached_property
    def _eigvals(self) -> np.ndarray:
        return np.ascontiguousarray(self.observable.eigenvalues, dtype=float)

    @property
    def a_max(self) -> float:
        return max(self.observable.max_abs_eigenvalue, 1e-300)

    @property
    def a_range(self) -> float:
        return self.observable.spread

    def sums(self, g: float) -> PostselectionSums:
        rows = np.vstack([self.row[None, :], self.complement_rows])
        P, QQ, QO = kernels.projection_sums(self._eigvals, rows, self.meter.grid,
                                            self.meter.weights, float(g))
        return PostselectionSums(float(g), float(P[0]), float(np.sum(P[1:])),
                                 float(QQ[0]), complex(QO[0]))

    def amplitudes(self, g: float) -> tuple[np.ndarray, np.ndarray]:
        """o(m_j) phi(m_j) and its g-derivative -i q(m_j) phi(m_j)."""
        return kernels.cell_amplitudes(self._eigvals, self.row, self.meter.grid,
                                       self.meter.amplitudes, float(g))

    def cell_probabilities(self, g: float) -> tuple[np.ndarray, np.ndarray]:
        return kernels.cell_probabilities(self._eigvals, self.row, self.meter.grid,
                                          self.meter.weights, float(g))

    def joint_state(self, g: float) -> np.ndarray:
        """exp(-i g A M)|psi_i>|phi_i> as a (d * N) vector, system index major."""
        V = self.observable.eigenvectors
        c = V.conj().T @ self.psi_i.amplitudes
        ph = np.exp(-1j * g * np.multiply.outer(self.observable.eigenvalues, self.meter.grid))
        return ((V * c) @ ph * self.meter.amplitudes).ravel()


@dataclass(frozen=True)
class MeterFunctions:
    g: float
    o_values: np.ndarray
    q_values: np.ndarray


def meter_functions(psi_i, psi_f, A, meter: MeterModel, g: float) -> MeterFunctions:
    proto = Protocol.build(psi_i, psi_f, A, meter)
    ones = np.ones(meter.n_points, dtype=complex)
    o, do = kernels.cell_amplitudes(proto._eigvals, proto.row, meter.grid, ones, float(g))
    return MeterFunctions(float(g), o, 1j * do)


def postselect_probability(psi_i, psi_f, A, meter: MeterModel, g: float) -> float:
    return Protocol.build(psi_i, psi_f, A, meter).sums(g).p_f


@dataclass(frozen=True)
class ConditionalMeterState:
    amplitudes: np.ndarray
    prob: float


def conditional_meter_state(psi_i, psi_f, A, meter: MeterModel,
                            g: float) -> ConditionalMeterState:
    proto = Protocol.build(psi_i, psi_f, A, meter)
    amps, _ = proto.amplitudes(g)
    p = float(np.sum(np.abs(amps) ** 2))
    if p <= PF_UNDERFLOW:
        raise PostselectionImpossibleError(f"post-selection probability {p:.3e} underflows")
    return ConditionalMeterState(amps / np.sqrt(p), p)


def near_eigenstate_fixture(a_state, b_state, epsilon: float) -> SystemState:
    """(|a> + eps|b>) / sqrt(1 + eps^2) for orthonormal |a>, |b>."""
    a = as_state(a_state).amplitudes
    b = as_state(b_state).amplitudes
    if abs(np.vdot(b, a)) > 1e-10:
        raise ValueError("a_state and b_state must be orthogonal")
    return SystemState((a + epsilon * b) / np.sqrt(1 + epsilon**2))
