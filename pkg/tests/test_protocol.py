import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import qubit_opt, random_hermitian, random_state
from wvafisher.errors import NullPostselectionError, PostselectionImpossibleError
from wvafisher.protocol import (Protocol, align_postselection, conditional_meter_state,
                                matrix_element, meter_functions, near_eigenstate_fixture,
                                optimal_postselection, orthogonal_complement,
                                overlap_delta, postselect_probability, weak_value)
from wvafisher.quantum import SIGMA_X, SIGMA_Z, as_observable, bloch_state, gaussian_meter


def test_overlap_delta_examples():
    psi = bloch_state(math.pi / 3)
    assert overlap_delta(psi, psi)[0] == pytest.approx(1, abs=1e-15)
    assert overlap_delta(psi, bloch_state(math.pi / 3, math.pi))[0] == pytest.approx(0.5)
    assert overlap_delta([1, 0], [0, 1])[0] == 0


def test_alignment_makes_overlap_real():
    psi_i = bloch_state(1.0, 0.3)
    psi_f = bloch_state(2.0, 2.5).amplitudes * np.exp(0.7j)
    sel = align_postselection(psi_i, psi_f)
    ov = np.vdot(sel.psi_f.amplitudes, psi_i.amplitudes)
    assert abs(ov.imag) < 1e-12 and ov.real >= 0
    assert ov.real == pytest.approx(sel.delta)


@pytest.mark.parametrize("psi_i, expect_f, expect_delta", [
    ([1, 0], [1, 0], 1.0),
    ([1 / math.sqrt(2), 1 / math.sqrt(2)], [1 / math.sqrt(2), -1 / math.sqrt(2)], 0.0),
    (bloch_state(math.pi / 3).amplitudes, bloch_state(math.pi / 3, math.pi).amplitudes, 0.5),
])
def test_optimal_postselection(psi_i, expect_f, expect_delta):
    sel = optimal_postselection(psi_i, SIGMA_Z)
    assert abs(abs(np.vdot(expect_f, sel.psi_f.amplitudes)) - 1) < 1e-12
    assert sel.delta == pytest.approx(expect_delta, abs=1e-15)


def test_optimal_postselection_null_vector():
    with pytest.raises(NullPostselectionError):
        optimal_postselection([1, 0], np.diag([0.0, 1.0]))


def test_optimal_postselection_signed_delta():
    sel = optimal_postselection(bloch_state(2 * math.pi / 3), SIGMA_Z)
    assert sel.delta == pytest.approx(0.5)
    assert sel.signed_delta == pytest.approx(-0.5)


def test_weak_value_examples():
    psi_i, psi_f = qubit_opt(math.pi / 3)
    assert weak_value(psi_i, psi_f, SIGMA_Z).value == pytest.approx(2)
    assert weak_value(psi_i, psi_i, SIGMA_Z).value == pytest.approx(0.5)
    wv = weak_value([1, 0], [0, 1], SIGMA_X)
    assert wv.divergent and math.isnan(wv.value.real)


@settings(max_examples=40)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_opt_weak_value_times_delta(d, seed):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, d)
    A = random_hermitian(rng, d)
    sel = optimal_postselection(psi, A)
    wv = weak_value(psi, sel.psi_f, A)
    a2 = as_observable(A).expectation(psi, 2)
    # A_w = <A^2>/<A> carries the sign of <A>, so pair it with the signed overlap
    if sel.delta > 1e-6:
        assert abs(wv.value * sel.signed_delta - math.sqrt(a2)) < 1e-12 * max(1, math.sqrt(a2)) / sel.delta


def test_meter_functions_at_zero_coupling(meter1):
    psi_i, psi_f = qubit_opt(math.pi / 3)
    mf = meter_functions(psi_i, psi_f, SIGMA_Z, meter1, 0.0)
    np.testing.assert_allclose(mf.o_values, 0.5, atol=1e-15)
    nz = meter1.grid != 0
    np.testing.assert_allclose(mf.q_values[nz] / meter1.grid[nz], 1.0, atol=1e-14)


def test_meter_functions_bounded(meter1):
    rng = np.random.default_rng(1)
    psi_i, psi_f, A = random_state(rng, 3), random_state(rng, 3), random_hermitian(rng, 3)
    proto = Protocol.build(psi_i, psi_f, A, meter1)
    mf = meter_functions(psi_i, psi_f, A, meter1, 0.3)
    assert np.max(np.abs(mf.o_values)) <= np.sum(np.abs(proto.row)) + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_do_dg_equals_minus_i_q(backend, meter1, seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 3
    psi_i, psi_f, A = random_state(rng, d), random_state(rng, d), random_hermitian(rng, d)
    g, h = 0.2, 1e-6
    mf = meter_functions(psi_i, psi_f, A, meter1, g)
    plus = meter_functions(psi_i, psi_f, A, meter1, g + h).o_values
    minus = meter_functions(psi_i, psi_f, A, meter1, g - h).o_values
    scale = as_observable(A).max_abs_eigenvalue * meter1.m_max
    assert np.max(np.abs((plus - minus) / (2 * h) + 1j * mf.q_values)) <= 1e-6 * scale


@pytest.mark.parametrize("theta, gd, expected", [
    (math.pi / 3, 0.0, 0.25),
    (math.pi / 3, 0.1, 0.257425),
    (math.pi / 2, 0.1, 0.009901),
])
def test_postselect_probability_examples(backend, meter1, theta, gd, expected):
    psi_i, psi_f = qubit_opt(theta)
    assert postselect_probability(psi_i, psi_f, SIGMA_Z, meter1, gd) == pytest.approx(
        expected, abs=5e-7)


def test_p_fail_complements_p_f(backend, meter2):
    rng = np.random.default_rng(3)
    for d in (2, 3, 4):
        psi_i, psi_f, A = random_state(rng, d), random_state(rng, d), random_hermitian(rng, d)
        s = Protocol.build(psi_i, psi_f, A, meter2).sums(0.17)
        assert 0 <= s.p_f <= 1 and 0 <= s.p_fail <= 1
        assert s.p_f + s.p_fail == pytest.approx(1, abs=1e-12)


def test_orthogonal_complement_is_orthonormal():
    rng = np.random.default_rng(0)
    f = random_state(rng, 4)
    c = orthogonal_complement(f)
    basis = np.vstack([f[None, :], c])
    np.testing.assert_allclose(basis.conj() @ basis.T, np.eye(4), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.integers(0, 1000))
def test_global_phase_invariance(alpha, beta, seed):
    meter = gaussian_meter(1.0, 201)
    rng = np.random.default_rng(seed)
    psi_i, psi_f, A = random_state(rng, 3), random_state(rng, 3), random_hermitian(rng, 3)
    ref = Protocol.build(psi_i, psi_f, A, meter).sums(0.3)
    rot = Protocol.build(psi_i * np.exp(1j * alpha), psi_f * np.exp(1j * beta), A, meter).sums(0.3)
    assert abs(ref.p_f - rot.p_f) < 1e-12
    assert abs(ref.qq - rot.qq) < 1e-12
    assert abs(abs(ref.qo) - abs(rot.qo)) < 1e-12
    assert abs(overlap_delta(psi_i, psi_f)[0]
               - overlap_delta(psi_i * np.exp(1j * alpha), psi_f * np.exp(1j * beta))[0]) < 1e-12
    assert abs(abs(weak_value(psi_i, psi_f, A).value)
               - abs(weak_value(psi_i * np.exp(1j * alpha), psi_f * np.exp(1j * beta), A).value)
               ) < 1e-12 * max(1, abs(weak_value(psi_i, psi_f, A).value))


def test_p_f_at_zero_coupling_is_overlap_squared(meter1):
    rng = np.random.default_rng(11)
    for _ in range(10):
        psi_i, psi_f, A = random_state(rng, 3), random_state(rng, 3), random_hermitian(rng, 3)
        p = postselect_probability(psi_i, psi_f, A, meter1, 0.0)
        assert abs(p - abs(np.vdot(psi_f, psi_i)) ** 2) < 1e-12


def test_conditional_meter_state(meter1):
    psi = bloch_state(math.pi / 3)
    st0 = conditional_meter_state(psi, psi, SIGMA_Z, meter1, 0.0)
    assert st0.prob == pytest.approx(1)
    np.testing.assert_allclose(st0.amplitudes, meter1.amplitudes, atol=1e-14)
    psi_i, psi_f = qubit_opt(math.pi / 3)
    st1 = conditional_meter_state(psi_i, psi_f, SIGMA_Z, meter1, 0.0)
    assert st1.prob == pytest.approx(0.25)
    np.testing.assert_allclose(st1.amplitudes, meter1.amplitudes, atol=1e-14)
    st2 = conditional_meter_state(psi_i, psi_f, SIGMA_Z, meter1, 0.1)
    assert abs(np.sum(np.abs(st2.amplitudes) ** 2) - 1) < 1e-10
    assert 0 <= st2.prob <= 1


def test_conditional_state_impossible(meter1):
    with pytest.raises(PostselectionImpossibleError):
        conditional_meter_state([1, 0], [0, 1], SIGMA_Z, meter1, 0.2)


def test_near_eigenstate_fixture():
    a, b = np.array([1, 0]), np.array([0, 1])
    assert np.allclose(near_eigenstate_fixture(a, b, 0.0).amplitudes, a)
    assert optimal_postselection(near_eigenstate_fixture(a, b, 0.0), SIGMA_Z).delta == pytest.approx(1)

    def one_minus_delta2(eps):
        return 1 - optimal_postselection(near_eigenstate_fixture(a, b, eps), SIGMA_Z).delta ** 2

    assert one_minus_delta2(0.1) == pytest.approx(0.039212, abs=1e-6)
    assert one_minus_delta2(0.1) / one_minus_delta2(0.05) == pytest.approx(4, rel=0.05)
    with pytest.raises(ValueError):
        near_eigenstate_fixture(a, np.array([1, 1]) / math.sqrt(2), 0.1)


def test_joint_state_normalized_and_marginal(meter1):
    psi_i, psi_f = qubit_opt(1.1)
    proto = Protocol.build(psi_i, psi_f, SIGMA_Z, meter1)
    joint = proto.joint_state(0.2).reshape(2, -1)
    assert abs(np.vdot(joint, joint).real - 1) < 1e-12
    proj = psi_f.amplitudes.conj() @ joint
    amps, _ = proto.amplitudes(0.2)
    np.testing.assert_allclose(proj, amps, atol=1e-14)


def test_matrix_element_power():
    psi = bloch_state(0.7, 0.2)
    assert matrix_element(psi, SIGMA_Z, psi, 2) == pytest.approx(1)
    assert matrix_element(psi, SIGMA_Z, psi, 0) == pytest.approx(1)
