import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import qubit_opt, random_hermitian, random_state
from wvafisher.fisher import fps_total
from wvafisher.protocol import Protocol, near_eigenstate_fixture
from wvafisher.quantum import SIGMA_Z, bloch_state, gaussian_meter
from wvafisher.series import (Regime, SeriesTarget, classify_ratio, dip_profile,
                              evaluate_series, expand_moments_series,
                              near_eigenstate_ratio, p_f_coefficients, qo_coefficients,
                              qq_coefficients, regime_classify, series_fisher)


def double_sum(a, M, shift_left, shift_right, moment_offset, order=4):
    """Coefficients of g^s in <(sum_n (-ig)^n/n! a_{n+l} M^{n+l})^+ (sum_k ... a_{k+r} M^{k+r})>."""
    out = []
    for s in range(order + 1):
        c = 0j
        for n in range(s + 1):
            k = s - n
            c += (1j) ** n * (-1j) ** k / (math.factorial(n) * math.factorial(k)) * \
                np.conj(a[n + shift_left]) * a[k + shift_right]
        out.append(c * M[s + moment_offset])
    return out


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_coefficients_match_double_sum(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=7) + 1j * rng.normal(size=7)
    a[0] = abs(a[0])
    M = rng.normal(size=8)
    np.testing.assert_allclose(p_f_coefficients(a, M), np.real(double_sum(a, M, 0, 0, 0)),
                               atol=1e-12)
    np.testing.assert_allclose(qq_coefficients(a, M), np.real(double_sum(a, M, 1, 1, 2)),
                               atol=1e-12)
    np.testing.assert_allclose(qo_coefficients(a, M), double_sum(a, M, 1, 0, 1), atol=1e-12)


def test_balanced_meter_kills_linear_p_f_term(meter1):
    rng = np.random.default_rng(0)
    s = expand_moments_series(random_state(rng, 3), random_state(rng, 3),
                              random_hermitian(rng, 3), meter1, "p_f")
    assert s.coeffs[1] == 0 and s.coeffs[3] == 0


def test_qubit_opt_coefficients(meter1):
    psi_i, psi_f = qubit_opt(math.pi / 3)
    pf = expand_moments_series(psi_i, psi_f, SIGMA_Z, meter1, SeriesTarget.P_F)
    assert pf.coeffs[0] == pytest.approx(0.25)
    assert pf.coeffs[2] == pytest.approx(0.75)
    qq = expand_moments_series(psi_i, psi_f, SIGMA_Z, meter1, "QQ")
    assert qq.coeffs[0] == pytest.approx(1.0)
    assert len(pf.matrix_elements) == 6 and len(pf.moments) == 7


@pytest.mark.parametrize("target", ["p_f", "QQ", "QO_real", "QO_imag"])
def test_truncation_order_in_double_precision(target):
    # a qutrit with complex amplitudes, so that every target is nonzero
    meter = gaussian_meter(1.0, 801)
    A = np.array([[1, 0.3 - 0.2j, 0], [0.3 + 0.2j, 0, 0.4j], [0, -0.4j, -0.5]])
    psi_i = np.array([0.6, 0.5 + 0.3j, 0.2 - 0.4j])
    psi_f = np.array([0.3j, 0.7, -0.4 + 0.2j])
    psi_i, psi_f = psi_i / np.linalg.norm(psi_i), psi_f / np.linalg.norm(psi_f)
    from wvafisher.protocol import align_postselection
    psi_f = align_postselection(psi_i, psi_f).psi_f
    proto = Protocol.build(psi_i, psi_f, A, meter)
    ser = expand_moments_series(psi_i, psi_f, A, meter, target, moment_source="grid")

    def exact(g):
        s = proto.sums(g)
        return {"p_f": s.p_f, "QQ": s.qq, "QO_real": s.qo.real, "QO_imag": s.qo.imag}[target]

    g = 0.08
    r1, r2 = abs(exact(g) - ser(g)), abs(exact(g / 2) - ser(g / 2))
    assert math.log2(r1 / r2) >= 4.5


def test_evaluate_series_horner():
    assert evaluate_series([1, 2, 3], 2.0) == 17


class TestSeriesFisher:
    def test_opt_example(self, meter1):
        psi = bloch_state(math.pi / 3)
        sf = series_fisher(psi, None, SIGMA_Z, meter1, 0.1, "opt")
        assert sf.fm_over_qfi == pytest.approx(0.25 / 0.2575, rel=1e-12)
        assert sf.fm_over_qfi == pytest.approx(0.970874, abs=1e-6)
        assert sf.valid

    def test_opt_matches_qubit_check_formulas(self, meter2):
        for theta in (0.3, 1.0, 2.0):
            d = math.cos(theta)
            g = 0.02
            x = (g * 2.0) ** 2
            sf = series_fisher(bloch_state(theta), None, SIGMA_Z, meter2, g, "opt")
            assert sf.fm_over_qfi == pytest.approx(d * d / (d * d + (1 - d * d) * x), rel=1e-12)
            assert sf.fpf_over_qfi == pytest.approx((1 - d * d) * x / (d * d + (1 - 2 * d * d) * x),
                                                    rel=1e-12)

    def test_generic_dip_half_plateau(self, meter1):
        g = 0.05
        # pick theta_f so that delta_fi = g |A_fi| Delta
        th_i = math.pi / 3
        from scipy.optimize import brentq
        f = lambda tf: math.cos((th_i + tf) / 2) - g * abs(math.cos((th_i - tf) / 2))
        tf = brentq(f, 1.5, 2 * math.pi / 3)
        a_fi = abs(math.cos((th_i - tf) / 2))
        sf = series_fisher(bloch_state(th_i), bloch_state(tf, math.pi), SIGMA_Z, meter1, g,
                           "generic_dip")
        assert sf.fm == pytest.approx(0.5 * 4 * a_fi**2, rel=1e-10)

    def test_identity_variant_equator(self, meter1):
        sf = series_fisher(bloch_state(math.pi / 2), None, SIGMA_Z, meter1, 0.01, "identity")
        assert sf.fm == pytest.approx(0, abs=1e-15)
        assert sf.fpf == pytest.approx(sf.qfi)

    def test_validity_flag_and_bad_variant(self, meter1):
        assert not series_fisher(bloch_state(1.0), None, SIGMA_Z, meter1, 0.5).valid
        with pytest.raises(ValueError):
            series_fisher(bloch_state(1.0), None, SIGMA_Z, meter1, 0.1, "nope")

    def test_opt_close_to_exact_in_regime_b(self, meter1):
        for theta in (0.3, 0.7, 1.0):
            for gd in (1e-2, 3e-2):
                psi_i, psi_f = qubit_opt(theta)
                rep = fps_total(psi_i, psi_f, SIGMA_Z, meter1, gd)
                if regime_classify(psi_i, SIGMA_Z, meter1, gd).label is not Regime.METER_DOMINATED:
                    continue
                sf = series_fisher(psi_i, None, SIGMA_Z, meter1, gd)
                assert abs(sf.fm - rep.fm) / rep.qfi <= 5 * gd**2


class TestRegime:
    @pytest.mark.parametrize("delta, label", [(0.5, Regime.METER_DOMINATED),
                                              (0.001, Regime.COUNTS_DOMINATED),
                                              (0.1, Regime.CROSSOVER)])
    def test_examples(self, meter1, delta, label):
        r = regime_classify(bloch_state(math.acos(delta)), SIGMA_Z, meter1, 0.1)
        assert r.label is label
        assert r.ratio == pytest.approx(delta / 0.1, rel=1e-9)
        assert r.weak_value_criterion == pytest.approx(0.1 / delta, rel=1e-9)

    def test_thresholds(self):
        assert classify_ratio(0.33) is Regime.COUNTS_DOMINATED
        assert classify_ratio(1.0) is Regime.CROSSOVER
        assert classify_ratio(3.01) is Regime.METER_DOMINATED

    def test_epsilon(self, meter1):
        r = regime_classify(bloch_state(math.acos(0.5)), SIGMA_Z, meter1, 0.1)
        assert r.epsilon == pytest.approx(max(0.5, 0.01, 25.0))

    def test_consistency_with_exact_budget(self, meter1):
        for theta in np.linspace(0.05, math.pi / 2, 30):
            for gd in (1e-2, 1e-1):
                psi_i, psi_f = qubit_opt(theta)
                r = regime_classify(psi_i, SIGMA_Z, meter1, gd)
                rep = fps_total(psi_i, psi_f, SIGMA_Z, meter1, gd)
                if r.label is Regime.COUNTS_DOMINATED:
                    assert rep.fpf_over_qfi >= 1 - 10 * r.epsilon
                elif r.label is Regime.METER_DOMINATED:
                    # the deficit scales as (g Delta / delta)^2 = 1 / ratio^2
                    assert rep.fm_over_qfi >= 1 - 10 / r.ratio**2
                    if rep.delta >= 0.5:
                        assert rep.fm_over_qfi >= 1 - 10 * gd**2


def test_near_eigenstate_ratio_scales_as_g_squared(meter1):
    psi = near_eigenstate_fixture([1, 0], [0, 1], 0.05)
    r1 = near_eigenstate_ratio(psi, SIGMA_Z, meter1, 0.02)
    r2 = near_eigenstate_ratio(psi, SIGMA_Z, meter1, 0.01)
    assert r1 / r2 == pytest.approx(4, rel=1e-9)


class TestDipProfile:
    def test_center_and_width(self):
        th_i, gd = math.pi / 3, 0.05
        grid = np.linspace(1.5, 2.7, 12001)
        rows = dip_profile(th_i, gd, grid)
        step = grid[1] - grid[0]
        assert abs(grid[np.argmin(rows[:, 2])] - 2 * math.pi / 3) <= step
        assert abs(grid[np.argmin(rows[:, 1])] - 2 * math.pi / 3) <= step

    def test_fpf_fills_the_dip(self):
        th_i = math.pi / 3
        tf = 2 * math.pi / 3
        for gd in (1e-2, 1e-3):
            row = dip_profile(th_i, gd, [tf])[0]
            a_fi = math.cos((th_i - tf) / 2)
            assert row[3] == pytest.approx(4 * a_fi**2, rel=10 * gd)

    def test_series_tracks_exact_away_from_center(self):
        rows = dip_profile(math.pi / 3, 1e-2, np.linspace(0.5, 1.8, 50))
        np.testing.assert_allclose(rows[:, 1], rows[:, 2], rtol=5e-3)


def test_precise_model_matches_double_grid():
    from wvafisher.precise import gaussian_grid_model
    rng = np.random.default_rng(12)
    psi_i, psi_f, A = random_state(rng, 3), random_state(rng, 3), random_hermitian(rng, 3)
    from wvafisher.protocol import align_postselection
    psi_f = align_postselection(psi_i, psi_f).psi_f.amplitudes
    model = gaussian_grid_model(psi_i, psi_f, A, 1.3, n_points=101, dps=30)
    s = Protocol.build(psi_i, psi_f, A, gaussian_meter(1.3, 101)).sums(0.2)
    p, qq, qo = model.averages(0.2)
    assert float(p) == pytest.approx(s.p_f, rel=1e-12)
    assert float(qq) == pytest.approx(s.qq, rel=1e-12)
    assert complex(qo) == pytest.approx(s.qo, rel=1e-11)
