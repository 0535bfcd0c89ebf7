import math

import numpy as np

from wvafisher.quantum import bloch_state


def qubit_opt(theta):
    """(psi_i, psi_f_opt) for A = sigma_z."""
    return bloch_state(theta, 0.0), bloch_state(theta, math.pi)


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (m + m.conj().T) / 2

