"""Classical and quantum Fisher information of the post-selected protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DegenerateError, SingularInformationError
from .protocol import (PostselectionSums, Protocol, align_postselection, overlap_delta,
                       weak_value)
from .quantum import MeterModel, as_observable, as_state, meter_moment

PROB_FLOOR = 1e-15
DERIV_FLOOR = 1e-12


def classical_fisher(probabilities, derivatives, floor: float = PROB_FLOOR) -> float:
    """Fisher information sum_k (dP_k)^2 / P_k of a discrete outcome distribution.

    Outcomes below ``floor`` are skipped when their derivative is negligible
    and raise :class:`SingularInformationError` otherwise.
    """
    P = np.asarray(probabilities, dtype=float)
    dP = np.asarray(derivatives, dtype=float)
    if P.shape != dP.shape:
        raise ValueError("probabilities and derivatives must have the same shape")
    if np.any(P < -floor):
        raise ValueError("negative probability")
    if abs(P.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {P.sum()!r}, expected 1")
    if abs(dP.sum()) > 1e-9:
        raise ValueError(f"derivatives sum to {dP.sum()!r}, expected 0")
    small = P < floor
    bad = small & (np.abs(dP) >= DERIV_FLOOR)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise SingularInformationError(
            f"outcome {k} has P={P[k]:.3e} but dP/dx={dP[k]:.3e}")
    keep = ~small
    return float(np.sum(dP[keep] ** 2 / P[keep]))


def _check_normalized(psi, tol=1e-8):
    n2 = float(np.vdot(psi, psi).real)
    if abs(n2 - 1.0) > tol:
        raise DegenerateError(f"state_fn returned a state with norm^2 {n2!r}")


def qfi_pure(state_fn: Callable[[float], np.ndarray], g: float, step: float = 1e-5) -> float:
    """4[<dpsi|dpsi> - |<dpsi|psi>|^2] with a central-difference derivative."""
    psi = np.asarray(state_fn(g), dtype=complex)
    plus = np.asarray(state_fn(g + step), dtype=complex)
    minus = np.asarray(state_fn(g - step), dtype=complex)
    for v in (psi, plus, minus):
        _check_normalized(v)
    dpsi = (plus - minus) / (2 * step)
    return float(4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(dpsi, psi)) ** 2))


def qfi_fidelity(state_fn: Callable[[float], np.ndarray], g: float, step: float = 1e-5) -> float:
    """8(1 - |<psi(g)|psi(g+step)>|)/step^2, the fidelity route to the QFI."""
    a = np.asarray(state_fn(g), dtype=complex)
    b = np.asarray(state_fn(g + step), dtype=complex)
    _check_normalized(a)
    _check_normalized(b)
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    # 1 - |<a|b>| without cancellation: ||a - e^{ia} b||^2 / 2 minus norm drift
    diff = a - phase * b
    infid = 0.5 * np.vdot(diff, diff).real - 0.5 * (
        (np.vdot(a, a).real - 1.0) + (np.vdot(b, b).real - 1.0))
    return float(8 * infid / step**2)


def qfi_from_moments(a1: float, a2: float, m1: float, m2: float) -> float:
    """4[<A^2><M^2> - <A>^2<M>^2] for a separable initial state."""
    return 4.0 * (a2 * m2 - a1**2 * m1**2)


def qfi_coupling(psi_i, A, meter: MeterModel) -> float:
    """Quantum Fisher information on g of exp(-i g A M)|psi_i>|phi_i>."""
    obs = as_observable(A)
    psi = as_state(psi_i).amplitudes
    return qfi_from_moments(obs.expectation(psi, 1), obs.expectation(psi, 2),
                            meter_moment(meter, 1), meter_moment(meter, 2))


class MeasurementSpec(str, Enum):
    METER_EIGENBASIS = "meter_eigenbasis"
    CONJUGATE_BASIS = "conjugate_basis"
    COUNTS_ONLY = "counts_only"


@dataclass(frozen=True)
class FisherReport:
    g: float
    qfi: float
    fm: float
    fpf: float
    fps: float
    p_f: float
    delta: float
    weak_value: complex
    weak_value_divergent: bool = False
    fps_direct: float = math.nan

    @property
    def fm_over_qfi(self) -> float:
        return self.fm / self.qfi

    @property
    def fpf_over_qfi(self) -> float:
        return self.fpf / self.qfi

    @property
    def fps_over_qfi(self) -> float:
        return self.fps / self.qfi

    def as_dict(self) -> dict:
        wv = None if self.weak_value_divergent else [self.weak_value.real,
                                                     self.weak_value.imag]
        return {
            "g": self.g, "qfi": self.qfi, "fm": self.fm, "fpf": self.fpf,
            "fps": self.fps, "fps_direct": self.fps_direct, "p_f": self.p_f,
            "delta": self.delta, "weak_value": wv,
            "weak_value_divergent": self.weak_value_divergent,
            "fm_over_qfi": self.fm_over_qfi, "fpf_over_qfi": self.fpf_over_qfi,
            "fps_over_qfi": self.fps_over_qfi,
        }


def _fm_from_sums(s: PostselectionSums) -> float:
    if s.p_f <= PROB_FLOOR:
        raise DegenerateError(f"post-selection probability {s.p_f:.3e} too small for F_m")
    return 4.0 * (s.qq - abs(s.qo) ** 2 / s.p_f)


def _fpf_from_sums(s: PostselectionSums) -> float:
    # dp_f/dg = -2 Im<Q^+ O>; both binomial terms vanish with it
    im2 = s.qo.imag ** 2
    total = 0.0
    for p, label in ((s.p_f, "p_f"), (s.p_fail, "1 - p_f")):
        if p > PROB_FLOOR:
            total += 4.0 * im2 / p
        elif 2.0 * abs(s.qo.imag) >= DERIV_FLOOR:
            raise DegenerateError(
                f"binomial degenerate: {label} = {p:.3e} but dp_f/dg = {s.dp_f:.3e}")
    return total


def _fps_direct(s: PostselectionSums) -> float:
    out = s.qq
    if s.p_f > PROB_FLOOR:
        out -= s.qo.real ** 2 / s.p_f
    if s.p_fail > PROB_FLOOR:
        out += s.qo.imag ** 2 / s.p_fail
    return 4.0 * out


def _protocol(psi_i, psi_f, A, meter) -> Protocol:
    return psi_i if isinstance(psi_i, Protocol) else Protocol.build(psi_i, psi_f, A, meter)


def fm_bound(psi_i, psi_f, A, meter: MeterModel, g: float) -> float:
    """Meter information optimized over all meter POVMs, times p_f."""
    return _fm_from_sums(_protocol(psi_i, psi_f, A, meter).sums(g))


def fpf_info(psi_i, psi_f, A, meter: MeterModel, g: float) -> float:
    """Information carried by the post-selection success/failure statistics."""
    return _fpf_from_sums(_protocol(psi_i, psi_f, A, meter).sums(g))


def fps_total(psi_i, psi_f, A, meter: MeterModel, g: float) -> FisherReport:
    proto = _protocol(psi_i, psi_f, A, meter)
    s = proto.sums(g)
    fm = _fm_from_sums(s)
    fpf = _fpf_from_sums(s)
    direct = _fps_direct(s)
    qfi = qfi_coupling(proto.psi_i, proto.observable, proto.meter)
    if abs(direct - (fm + fpf)) > 1e-10 * max(1.0, qfi):
        raise DegenerateError(
            f"F_ps identity violated: direct {direct!r} vs sum {fm + fpf!r}")
    delta, _ = overlap_delta(proto.psi_i, proto.psi_f)
    wv = weak_value(proto.psi_i, proto.psi_f, proto.observable)
    return FisherReport(float(g), qfi, fm, fpf, fm + fpf, s.p_f, delta, wv.value,
                        wv.divergent, direct)


def measurement_fisher(psi_i, psi_f, A, meter: MeterModel, g: float,
                       spec: MeasurementSpec | str = MeasurementSpec.METER_EIGENBASIS) -> float:
    """Classical Fisher information of {fail} plus {success x meter cell}.

    Meter cells are grid points in the M eigenbasis, or in the basis reached
    by the unitary DFT of the grid amplitudes (``conjugate_basis``).
    """
    spec = MeasurementSpec(spec)
    proto = _protocol(psi_i, psi_f, A, meter)
    s = proto.sums(g)
    if spec is MeasurementSpec.COUNTS_ONLY:
        return _fpf_from_sums(s)
    P, dP = cell_distribution(proto, g, spec)
    return classical_fisher(np.concatenate([[s.p_fail], P]),
                            np.concatenate([[-s.dp_f], dP]))


def cell_distribution(proto: Protocol, g: float, spec: MeasurementSpec | str):
    """Joint probabilities P(success, cell j) and their g-derivatives."""
    spec = MeasurementSpec(spec)
    if spec is MeasurementSpec.METER_EIGENBASIS:
        return proto.cell_probabilities(g)
    if spec is MeasurementSpec.CONJUGATE_BASIS:
        amps, damps = proto.amplitudes(g)
        # the DFT is linear, so the derivative transforms with the amplitudes
        ft = np.fft.fft(amps, norm="ortho")
        dft = np.fft.fft(damps, norm="ortho")
        return ft.real**2 + ft.imag**2, 2.0 * (ft.real * dft.real + ft.imag * dft.imag)
    raise ValueError(f"no meter cells for {spec.value}")


# --- closed forms for a qubit with A = sigma_z and a balanced Gaussian meter ---

def _qubit_general(theta_i, theta_f, phi, x, delta):
    ci, si = math.cos(theta_i / 2), math.sin(theta_i / 2)
    cf, sf = math.cos(theta_f / 2), math.sin(theta_f / 2)
    a = ci * cf
    b = complex(math.cos(phi), math.sin(phi)) * si * sf
    rb = b.real
    e2 = math.exp(-2 * x)
    p_f = a * a + abs(b) ** 2 + 2 * a * rb * e2
    # 1 - p_f = |<psi_f_perp|psi_i>|^2 + 2 a Re(b) (1 - e^{-2x})
    perp = sf * ci - complex(math.cos(phi), -math.sin(phi)) * cf * si
    p_fail = abs(perp) ** 2 - 2 * a * rb * math.expm1(-2 * x)
    d2 = delta * delta
    fm = 4 * d2 * (a * a + abs(b) ** 2 - 2 * a * rb * e2 * (1 - 4 * x)
                   - 16 * a * a * rb * rb * x * math.exp(-4 * x) / p_f)
    num = 64 * x * d2 * a * a * rb * rb * math.exp(-4 * x)
    fpf = 0.0 if num == 0 else num / p_f + num / p_fail
    return p_f, fm, fpf, a, b


def qubit_closed_forms(theta_i: float, theta_f: float, phi: float, g_delta: float,
                       delta: float = 1.0, path: str = "auto") -> FisherReport:
    """Exact p_f, F_m and F_pf for A = sigma_z and a Gaussian meter.

    ``phi`` is the relative phase phi_f - phi_i. With ``path="auto"`` the
    dedicated expressions for theta_i == theta_f with phi = pi (optimal
    post-selection) or phi = 0 (post-selection in the initial state) are used;
    ``path="general"`` always uses the general expressions.
    """
    x = g_delta * g_delta
    qfi = 4 * delta * delta
    p_f, fm, fpf, a, b = _qubit_general(theta_i, theta_f, phi, x, delta)
    special = path == "auto" and theta_i == theta_f and phi in (0.0, math.pi)
    if special:
        th = theta_i
        c2, s2 = math.cos(th) ** 2, math.sin(th) ** 2
        e2 = math.exp(-2 * x)
        e4 = math.exp(-4 * x)
        if phi == math.pi:
            den = 2 * c2 - s2 * math.expm1(-2 * x)  # 1 + cos^2 - e^{-2x} sin^2
            fm_r = 0.5 * (1 + c2) + 0.5 * (1 - 4 * x) * e2 * s2 - 2 * x * e4 * s2 * s2 / den
            fpf_r = 4 * x * e4 * s2 / (den * (1 + e2)) if s2 else 0.0
        else:
            den = 1 + c2 + e2 * s2
            fm_r = 0.5 * (1 + c2) - 0.5 * (1 - 4 * x) * e2 * s2 - 2 * x * e4 * s2 * s2 / den
            fpf_r = 4 * x * e4 * s2 / (den * -math.expm1(-2 * x)) if s2 and x else 0.0
        fm, fpf = fm_r * qfi, fpf_r * qfi
    ov = a + b.conjugate()
    el = a - b.conjugate()
    divergent = abs(ov) < 1e-14
    wv = complex(math.nan, math.nan) if divergent else el / ov
    return FisherReport(g_delta / delta, qfi, fm, fpf, fm + fpf, p_f, abs(ov), wv, divergent)


def budget_batch(psi_i, psi_f, A, meter: MeterModel, g: float) -> dict:
    """F_m, F_pf, p_f and QFI for stacks of (psi_i, psi_f) rows sharing A, meter and g.

    ``psi_i`` and ``psi_f`` are (n, d) arrays; all projection rows go through a
    single kernel call.
    """
    from . import kernels

    obs = as_observable(A)
    pi = np.atleast_2d(np.asarray(psi_i, dtype=complex))
    pf = np.atleast_2d(np.asarray(psi_f, dtype=complex))
    if pi.shape != pf.shape or pi.shape[1] != obs.dim:
        raise ValueError("psi_i and psi_f must be (n, d) arrays matching A")
    n, d = pi.shape
    Vh = obs.eigenvectors.conj().T
    ci = pi @ Vh.T                                   # <a|psi_i>
    main = np.conj(pf @ Vh.T) * ci
    _, _, vh = np.linalg.svd(pf.conj()[:, None, :])
    comp = np.conj(vh[:, 1:, :].conj() @ Vh.T) * ci[:, None, :]
    rows = np.ascontiguousarray(np.concatenate([main, comp.reshape(-1, d)]))
    P, QQ, QO = kernels.projection_sums(np.ascontiguousarray(obs.eigenvalues, dtype=float),
                                        rows, meter.grid, meter.weights, float(g))
    p_f = P[:n]
    p_fail = P[n:].reshape(n, d - 1).sum(axis=1)
    qq, qo = QQ[:n], QO[:n]
    if np.any(p_f <= PROB_FLOOR):
        k = int(np.flatnonzero(p_f <= PROB_FLOOR)[0])
        raise DegenerateError(f"row {k}: post-selection probability {p_f[k]:.3e} too small")
    fm = 4.0 * (qq - np.abs(qo) ** 2 / p_f)
    im2 = qo.imag ** 2
    lost = p_fail <= PROB_FLOOR
    if np.any(lost & (2.0 * np.abs(qo.imag) >= DERIV_FLOOR)):
        raise DegenerateError("binomial degenerate: 1 - p_f vanishes with dp_f/dg nonzero")
    fpf = 4.0 * im2 / p_f + np.where(lost, 0.0, 4.0 * im2 / np.where(lost, 1.0, p_fail))
    a1 = np.einsum("ij,jk,ik->i", pi.conj(), obs.matrix, pi).real
    a2 = np.sum(np.abs(pi @ obs.matrix.T) ** 2, axis=1)
    qfi = qfi_from_moments(a1, a2, meter_moment(meter, 1), meter_moment(meter, 2))
    return {"p_f": p_f, "p_fail": p_fail, "fm": fm, "fpf": fpf, "fps": fm + fpf, "qfi": qfi}


def report_for(psi_i, psi_f, A, meter: MeterModel, g: float, align: bool = True) -> FisherReport:
    """Convenience wrapper: phase-align ``psi_f`` then build the full report."""
    if align:
        psi_f = align_postselection(psi_i, psi_f).psi_f
    return fps_total(psi_i, psi_f, A, meter, g)
