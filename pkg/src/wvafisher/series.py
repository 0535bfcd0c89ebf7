"""Weak-coupling expansions of the post-selection averages and Fisher limits.

Coefficient formulas are written with plain scalar arithmetic so they accept
Python/numpy complex numbers as well as ``mpmath.mpc`` (used by the
high-precision order-of-accuracy checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fisher import qfi_coupling, qubit_closed_forms
from .protocol import align_postselection, matrix_element, optimal_postselection
from .quantum import MeterModel, as_observable, as_state, meter_moment

SERIES_VALIDITY = 0.3


class SeriesTarget(str, Enum):
    P_F = "p_f"
    QQ = "QQ"
    QO_REAL = "QO_real"
    QO_IMAG = "QO_imag"
    QO = "QO"


def _c(z):
    return z.conjugate()


def p_f_coefficients(a, M):
    """Coefficients of g^0..g^4 of p_f = <O^+ O>.

    ``a[n]`` is (A^n)_fi with ``a[0] = delta`` real, ``M[k]`` is <M^k>.
    """
    d = a[0].real
    return [
        d * d * M[0],
        2 * d * a[1].imag * M[1],
        (abs(a[1]) ** 2 - d * a[2].real) * M[2],
        -(d * a[3] + 3 * _c(a[2]) * a[1]).imag / 3 * M[3],
        ((d * a[4] - 4 * _c(a[1]) * a[3]).real + 3 * abs(a[2]) ** 2) / 12 * M[4],
    ]


def qq_coefficients(a, M):
    """Coefficients of g^0..g^4 of <Q^+ Q>."""
    return [
        abs(a[1]) ** 2 * M[2],
        -2 * (_c(a[2]) * a[1]).imag * M[3],
        (abs(a[2]) ** 2 - (_c(a[3]) * a[1]).real) * M[4],
        -(a[4] * _c(a[1]) - 3 * a[3] * _c(a[2])).imag / 3 * M[5],
        ((a[5] * _c(a[1]) - 4 * a[4] * _c(a[2])).real + 3 * abs(a[3]) ** 2) / 12 * M[6],
    ]


def qo_coefficients(a, M):
    """Complex coefficients of g^0..g^4 of <Q^+ O>."""
    d = a[0].real
    return [
        d * _c(a[1]) * M[1],
        1j * (d * _c(a[2]) - abs(a[1]) ** 2) * M[2],
        (2 * _c(a[2]) * a[1] - a[2] * _c(a[1]) - _c(a[3]) * d) / 2 * M[3],
        -1j * (d * _c(a[4]) - 3 * _c(a[3]) * a[1] + 3 * abs(a[2]) ** 2
               - _c(a[1]) * a[3]) / 6 * M[4],
        (d * _c(a[5]) - 4 * _c(a[4]) * a[1] + 6 * _c(a[3]) * a[2]
         - 4 * _c(a[2]) * a[3] + _c(a[1]) * a[4]) / 24 * M[5],
    ]


def series_coefficients(target, a, M):
    target = SeriesTarget(target)
    if target is SeriesTarget.P_F:
        return p_f_coefficients(a, M)
    if target is SeriesTarget.QQ:
        return qq_coefficients(a, M)
    qo = qo_coefficients(a, M)
    if target is SeriesTarget.QO_REAL:
        return [c.real for c in qo]
    if target is SeriesTarget.QO_IMAG:
        return [c.imag for c in qo]
    return qo


def evaluate_series(coeffs, g):
    out = 0
    for c in reversed(coeffs):
        out = out * g + c
    return out


@dataclass(frozen=True)
class SeriesCoefficients:
    target: SeriesTarget
    coeffs: np.ndarray
    matrix_elements: np.ndarray
    moments: np.ndarray

    def __call__(self, g: float):
        return evaluate_series(list(self.coeffs), g)


def series_inputs(psi_i, psi_f, A, meter: MeterModel, moment_source: str = "auto"):
    """(A^n)_fi for n <= 5 (with psi_f phase-aligned) and <M^k> for k <= 6."""
    obs = as_observable(A)
    sel = align_postselection(psi_i, psi_f)
    a = np.array([sel.delta + 0j] + [matrix_element(sel.psi_f, obs, psi_i, n)
                                     for n in range(1, 6)])
    M = np.array([meter_moment(meter, k, moment_source) for k in range(7)])
    return a, M


def expand_moments_series(psi_i, psi_f, A, meter: MeterModel, target,
                          moment_source: str = "auto") -> SeriesCoefficients:
    a, M = series_inputs(psi_i, psi_f, A, meter, moment_source)
    target = SeriesTarget(target)
    coeffs = np.array(series_coefficients(target, list(a), list(M)))
    return SeriesCoefficients(target, coeffs, a, M)


@dataclass(frozen=True)
class SeriesFisher:
    fm: float
    fpf: float
    qfi: float
    valid: bool

    @property
    def fm_over_qfi(self) -> float:
        return self.fm / self.qfi

    @property
    def fpf_over_qfi(self) -> float:
        return self.fpf / self.qfi


def dip_fm(delta_fi: float, a_fi_abs: float, g: float, meter_delta: float) -> float:
    """Leading-order meter information near orthogonal post-selection."""
    w = (g * a_fi_abs * meter_delta) ** 2
    den = delta_fi**2 + w
    return 4 * delta_fi**2 * (a_fi_abs * meter_delta) ** 2 / den if den else 0.0


def dip_fpf(delta_fi: float, a_fi_abs: float, g: float, meter_delta: float) -> float:
    """Leading-order counting information near orthogonal post-selection."""
    w = (g * a_fi_abs * meter_delta) ** 2
    den = delta_fi**2 + w
    return 4 * w * (a_fi_abs * meter_delta) ** 2 / den if den else 0.0


def series_fisher(psi_i, psi_f, A, meter: MeterModel, g: float,
                  variant: str = "opt") -> SeriesFisher:
    """Leading-order F_m and F_pf.

    ``variant``:
      * ``"opt"`` -- optimal post-selection; ``psi_f`` is ignored.
      * ``"identity"`` -- post-selection in the initial state; ``psi_f`` ignored.
      * ``"generic_dip"`` -- arbitrary ``psi_f`` near the orthogonality dip.
    """
    obs = as_observable(A)
    psi_i = as_state(psi_i)
    delta_m = math.sqrt(meter_moment(meter, 2))
    qfi = qfi_coupling(psi_i, obs, meter)
    valid = g * delta_m * obs.max_abs_eigenvalue < SERIES_VALIDITY
    a1 = obs.expectation(psi_i.amplitudes, 1)
    a2 = obs.expectation(psi_i.amplitudes, 2)
    if variant == "opt":
        sel = optimal_postselection(psi_i, obs)
        d = sel.delta
        a3 = obs.expectation(psi_i.amplitudes, 3)
        # Z / (<A^2> Delta^2); equals 1 - delta^2 whenever A^2 is proportional to 1
        zeta = 1 - sel.signed_delta * a3 / a2**1.5
        x = g * g * a2 * delta_m**2
        d2 = d * d
        fm_r = d2 / (d2 + zeta * x) if d2 + zeta * x else 0.0
        den = d2 + (zeta - d2) * x
        fpf_r = zeta * x / den if den else 1.0
        return SeriesFisher(fm_r * qfi, fpf_r * qfi, qfi, valid)
    if variant == "identity":
        fm = 4 * a1 * a1 * delta_m**2
        return SeriesFisher(fm, 4 * (a2 - a1 * a1) * delta_m**2, qfi, valid)
    if variant == "generic_dip":
        sel = align_postselection(psi_i, psi_f)
        afi = abs(matrix_element(sel.psi_f, obs, psi_i))
        return SeriesFisher(dip_fm(sel.delta, afi, g, delta_m),
                            dip_fpf(sel.delta, afi, g, delta_m), qfi, valid)
    raise ValueError(f"unknown series variant {variant!r}")


class Regime(str, Enum):
    COUNTS_DOMINATED = "a_counts_dominated"
    METER_DOMINATED = "b_meter_dominated"
    CROSSOVER = "crossover"


REGIME_LOW = 1.0 / 3.0
REGIME_HIGH = 3.0


@dataclass(frozen=True)
class RegimeLabel:
    label: Regime
    epsilon: float
    ratio: float
    weak_value_criterion: float  # g |A_w| Delta


def classify_ratio(ratio: float) -> Regime:
    if ratio < REGIME_LOW:
        return Regime.COUNTS_DOMINATED
    if ratio > REGIME_HIGH:
        return Regime.METER_DOMINATED
    return Regime.CROSSOVER


def regime_classify(psi_i, A, meter: MeterModel, g: float) -> RegimeLabel:
    """Label the optimal post-selection by |delta| / (g <A^2>^(1/2) Delta)."""
    obs = as_observable(A)
    psi_i = as_state(psi_i)
    sel = optimal_postselection(psi_i, obs)
    delta_m = math.sqrt(meter_moment(meter, 2))
    root_a2 = math.sqrt(obs.expectation(psi_i.amplitudes, 2))
    d = sel.delta
    scale = g * root_a2 * delta_m
    ratio = d / scale if scale > 0 else math.inf
    eps = max(d, g * g, (d / g) ** 2 if g > 0 else math.inf)
    # for the optimal post-selection A_w = <A^2>/<A>, so g|A_w|Delta = 1 / ratio
    wv = 1.0 / ratio if ratio > 0 else math.inf
    return RegimeLabel(classify_ratio(ratio), eps, ratio, wv)


def near_eigenstate_ratio(psi_i, A, meter: MeterModel, g: float) -> float:
    """g^2 |Z(delta)| / (1 - delta^2) for the optimal post-selection."""
    obs = as_observable(A)
    psi = as_state(psi_i).amplitudes
    sel = optimal_postselection(psi, obs)
    a2 = obs.expectation(psi, 2)
    a3 = obs.expectation(psi, 3)
    z = (1 - sel.signed_delta * a3 / a2**1.5) * a2 * meter_moment(meter, 2)
    one_minus = 1 - sel.delta**2
    return g * g * abs(z) / one_minus


def dip_profile(theta_i: float, g_delta: float, theta_f_grid, delta: float = 1.0):
    """Rows ``(theta_f, fm_series, fm_exact, fpf_exact)`` across the overlap dip.

    Qubit with A = sigma_z, phi = pi and a Gaussian meter of width ``delta``.
    """
    g = g_delta / delta
    rows = []
    for tf in np.asarray(theta_f_grid, dtype=float):
        d_fi = math.cos((theta_i + tf) / 2)
        a_fi = abs(math.cos((theta_i - tf) / 2))
        rep = qubit_closed_forms(theta_i, tf, math.pi, g_delta, delta)
        rows.append((tf, dip_fm(d_fi, a_fi, g, delta), rep.fm, rep.fpf))
    return np.array(rows)
