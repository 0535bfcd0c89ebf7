"""Finite-dimensional system states, Hermitian observables and the gridded meter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NotHermitianError, NotNormalizedError

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemState:
    """Normalized pure state of the system, stored as a complex amplitude vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size < 2:
            raise ValueError(f"system dimension must be >= 2, got {amps.size}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NotNormalizedError(f"state norm^2 = {norm2!r}, expected 1")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_vector(cls, vec) -> "SystemState":
        """Normalize an arbitrary nonzero vector."""
        vec = np.asarray(vec, dtype=complex).ravel()
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(vec / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __len__(self):
        return self.dim


def as_state(psi) -> SystemState:
    if isinstance(psi, SystemState):
        return psi
    return SystemState(psi)


@dataclass(frozen=True)
class QubitAngles:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")


def bloch_state(theta: float, phi: float = 0.0) -> SystemState:
    """Return cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>.

    ``|0>`` and ``|1>`` are the +1 and -1 eigenvectors of sigma_z. ``phi`` is
    taken modulo 2 pi so that equivalent angles give bitwise identical states.
    """
    if isinstance(theta, QubitAngles):
        theta, phi = theta.theta, theta.phi
    phi = math.fmod(phi, 2 * math.pi)
    if phi < 0:
        phi += 2 * math.pi
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    # exact values on the real axis, so that phi=pi gives a real state
    if phi == 0.0:
        phase = 1.0 + 0j
    elif phi == math.pi:
        phase = -1.0 + 0j
    else:
        phase = complex(math.cos(phi), math.sin(phi))
    return SystemState(np.array([c, phase * s], dtype=complex))


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class HermitianObservable:
    """Hermitian matrix together with its spectral decomposition.

    Eigenvalues are ascending; the columns of ``eigenvectors`` are orthonormal.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def spread(self) -> float:
        """Largest minus smallest eigenvalue."""
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    @property
    def max_abs_eigenvalue(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def power(self, n: int) -> np.ndarray:
        """Matrix power built from the spectral data."""
        v = self.eigenvectors
        return (v * self.eigenvalues**n) @ v.conj().T

    def expectation(self, psi, n: int = 1) -> float:
        """<psi|A^n|psi> evaluated in the eigenbasis (always real)."""
        c = self.eigenvectors.conj().T @ np.asarray(psi, dtype=complex)
        return float(np.sum(np.abs(c) ** 2 * self.eigenvalues**n))


def spectral_decompose(A, tol: float = HERMITIAN_TOL) -> HermitianObservable:
    """Eigen-decompose a Hermitian matrix.

    The phase of each eigenvector is fixed by making its largest-magnitude
    component real and positive (first such component on ties).
    """
    if isinstance(A, HermitianObservable):
        return A
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.conj().T)) > tol * scale:
        raise NotHermitianError("matrix is not Hermitian")
    A = 0.5 * (A + A.conj().T)
    evals, evecs = np.linalg.eigh(A)
    for k in range(evecs.shape[1]):
        col = evecs[:, k]
        mags = np.abs(col)
        j = int(np.argmax(mags >= mags.max() * (1 - 1e-12)))
        evecs[:, k] = col * (np.conj(col[j]) / mags[j])
        evecs[j, k] = mags[j]
    return HermitianObservable(_frozen(A), _frozen(evals), _frozen(evecs))


def as_observable(A) -> HermitianObservable:
    return A if isinstance(A, HermitianObservable) else spectral_decompose(A)


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def gaussian_moment(delta: float, k: int) -> float:
    """E[m^k] for a centered normal variable of standard deviation ``delta``."""
    if k % 2:
        return 0.0
    return _double_factorial(k - 1) * delta**k


@dataclass(frozen=True)
class MeterModel:
    """Pure meter state sampled on a grid of M eigenvalues.

    ``amplitudes`` already carry the quadrature weights, so that
    ``sum |amplitudes|**2 == 1`` and grid sums are expectation values.
    """

    grid: np.ndarray
    amplitudes: np.ndarray
    delta: float
    analytic_moments: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if grid.shape != amps.shape or grid.ndim != 1:
            raise ValueError("grid and amplitudes must be 1-D arrays of equal length")
        norm2 = float(np.sum(np.abs(amps) ** 2))
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NotNormalizedError(f"meter norm^2 = {norm2!r}, expected 1")
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "weights", _frozen(np.abs(amps) ** 2))

    @classmethod
    def from_wavefunction(cls, grid, amplitudes) -> "MeterModel":
        """Normalize arbitrary grid amplitudes; Delta is taken as <M^2>^(1/2)."""
        amps = np.asarray(amplitudes, dtype=complex)
        amps = amps / np.sqrt(np.sum(np.abs(amps) ** 2))
        grid = np.asarray(grid, dtype=float)
        delta = float(np.sqrt(np.sum(np.abs(amps) ** 2 * grid**2)))
        return cls(grid, amps, delta)

    @property
    def n_points(self) -> int:
        return self.grid.size

    @property
    def m_max(self) -> float:
        return float(np.max(np.abs(self.grid)))

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def grid_moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.grid**k))

    @property
    def is_balanced(self) -> bool:
        return abs(self.grid_moment(1)) <= 1e-10 * self.delta


def gaussian_meter(delta: float, n_points: int = 2001,
                   half_width_sigmas: float = 8.0) -> MeterModel:
    """Centered Gaussian meter, |phi(m)|^2 normal with variance ``delta**2``.

    The grid is uniform on ``[-W delta, W delta]`` and exactly symmetric, so
    the origin is a grid point and odd grid moments vanish to rounding.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError(f"n_points must be odd and >= 3, got {n_points}")
    if not half_width_sigmas > 0:
        raise ValueError("half_width_sigmas must be positive")
    half = (n_points - 1) // 2
    h = half_width_sigmas * delta / half
    pos = np.arange(1, half + 1) * h
    grid = np.concatenate([-pos[::-1], [0.0], pos])
    trap = np.full(n_points, h)
    trap[[0, -1]] = h / 2
    amps = np.exp(-grid**2 / (4 * delta**2)) * np.sqrt(trap)
    amps /= np.sqrt(np.sum(amps**2))
    return MeterModel(grid, amps.astype(complex), float(delta),
                      analytic_moments=lambda k: gaussian_moment(delta, k))


def meter_moment(meter: MeterModel, k: int, source: str = "auto") -> float:
    """<M^k> of the meter.

    ``source`` is ``"grid"``, ``"analytic"`` or ``"auto"`` (analytic when the
    meter carries a closed-form provider, grid otherwise).
    """
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if source == "grid" or (source == "auto" and meter.analytic_moments is None):
        return meter.grid_moment(k)
    if meter.analytic_moments is None:
        raise ValueError("meter has no analytic moment provider")
    return float(meter.analytic_moments(k))
