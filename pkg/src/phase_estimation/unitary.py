"""
Qubit-controlled quadrature kicks e^{iε 2^k x_θ}, built in the eigenbasis
of the truncated quadrature operator.
"""
from functools import lru_cache
from typing import Tuple
import logging

import numpy as np
from scipy.linalg import eigh

from src.config.settings import settings
from src.evaluation.statistics import ReferenceCdf
from src.fockspace.operators import quadrature_operator, support_radius
from src.fockspace.phase_space import quadrature_pdf
from src.fockspace.states import DEFAULT_CONVENTION, AnyState, CavityState, QuadratureConvention

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-6
SUPPORT_MASS = 1e-6
EPSILON_MARGIN = 2.0


@lru_cache(maxsize=8)
def _eigensystem(theta: float, n_fock: int, c: float) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = eigh(quadrature_operator(theta, QuadratureConvention(c), n_fock))
    values.setflags(write=False)
    vectors.setflags(write=False)
    return values, vectors


def quadrature_eigensystem(
    theta: float,
    n_fock: int,
    convention: QuadratureConvention = DEFAULT_CONVENTION
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors (columns) of the truncated x_θ."""
    return _eigensystem(float(theta), int(n_fock), float(convention.c))


def kick_phases(epsilon: float, eigenvalues: np.ndarray, power: int = 0) -> np.ndarray:
    """
    Phases ε 2^power λ_j reduced to [0, 2π).

    The reduction scales the fraction u = ελ/(2π) by 2^power with ldexp,
    which is exact, so large powers do not lose the low-order bits to a
    product ε 2^power λ.
    """
    fraction = epsilon * np.asarray(eigenvalues) / (2 * np.pi)
    return 2 * np.pi * np.mod(np.ldexp(fraction, power), 1.0)


def boundary_weight(vectors: np.ndarray, eigenvalues: np.ndarray, window: float) -> float:
    """Largest top-Fock-level weight among eigenvectors with |λ| ≤ window."""
    inside = np.abs(eigenvalues) <= window
    if not np.any(inside):
        return 0.0
    return float(np.max(np.abs(vectors[-1, inside]) ** 2))


def controlled_phase_unitary(
    epsilon: float,
    k: int,
    theta: float,
    n_fock: int,
    convention: QuadratureConvention = DEFAULT_CONVENTION
) -> np.ndarray:
    """
    |g><g| ⊗ 1 + |e><e| ⊗ exp(iε 2^k x_θ) on qubit ⊗ cavity.

    Returns:
        (2 n_fock) x (2 n_fock) unitary, qubit index major (g block first)
    """
    values, vectors = quadrature_eigensystem(theta, n_fock, convention)
    if epsilon > 0:
        window = np.pi / (epsilon * 2 ** k)
        weight = boundary_weight(vectors, values, window)
        if weight > TAIL_TOLERANCE:
            logger.warning(
                f"Eigenvectors of x_theta inside |x| <= {window:.3f} reach the truncation "
                f"boundary with weight {weight:.2e}; increase n_fock"
            )
    kick = (vectors * np.exp(1j * kick_phases(epsilon, values, k))) @ vectors.conj().T
    unitary = np.zeros((2 * n_fock, 2 * n_fock), dtype=np.complex128)
    unitary[:n_fock, :n_fock] = np.eye(n_fock)
    unitary[n_fock:, n_fock:] = kick
    return unitary


def support_half_width(
    state: AnyState,
    theta: float = 0.0,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    mass: float = SUPPORT_MASS
) -> float:
    """Half-width x_max holding all but `mass` of the quadrature distribution."""
    radius = support_radius(state.n_fock, convention)
    grid = np.linspace(-radius, radius, settings.ks_grid_points)
    density = quadrature_pdf(state, theta, grid, convention, check_normalization=False)
    low, high = ReferenceCdf.from_density(grid, density).quantile([0.5 * mass, 1.0 - 0.5 * mass])
    return float(max(abs(low), abs(high)))


def default_epsilon(state: AnyState, theta: float = 0.0, convention: QuadratureConvention = DEFAULT_CONVENTION) -> float:
    """ε = π / (x_max + 2)."""
    return float(np.pi / (support_half_width(state, theta, convention) + EPSILON_MARGIN))


def quadrature_eigenstate(
    x0: float,
    theta: float,
    n_fock: int,
    convention: QuadratureConvention = DEFAULT_CONVENTION
) -> Tuple[CavityState, float]:
    """Eigenvector of the truncated x_θ whose eigenvalue is closest to x0."""
    values, vectors = quadrature_eigensystem(theta, n_fock, convention)
    j = int(np.argmin(np.abs(values - x0)))
    return CavityState(vectors[:, j], f"eigenstate({values[j]:.4f})"), float(values[j])


def pad_state(state: CavityState, n_fock: int) -> np.ndarray:
    """Amplitudes embedded in a larger Fock space."""
    if state.n_fock > n_fock:
        raise ValueError(f"State dimension {state.n_fock} exceeds working dimension {n_fock}")
    amps = np.zeros(n_fock, dtype=np.complex128)
    amps[:state.n_fock] = state.amps
    return amps
