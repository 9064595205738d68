"""
Ladder operators, quadratures and quadrature wavefunctions.
"""
from functools import lru_cache

import numpy as np

from src.fockspace.states import DEFAULT_CONVENTION, QuadratureConvention

HERMITIAN_TOLERANCE = 1e-10


@lru_cache(maxsize=32)
def _annihilation(n_fock: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_fock)), 1).astype(np.complex128)
    a.setflags(write=False)
    return a


def annihilation(n_fock: int) -> np.ndarray:
    return _annihilation(n_fock).copy()


def creation(n_fock: int) -> np.ndarray:
    return _annihilation(n_fock).conj().T.copy()


def number(n_fock: int) -> np.ndarray:
    return np.diag(np.arange(n_fock)).astype(np.complex128)


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOLERANCE) -> bool:
    return bool(np.max(np.abs(matrix - matrix.conj().T)) <= tol)


def quadrature_operator(
    theta: float,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    n_fock: int = 30
) -> np.ndarray:
    """
    x_θ = c (a† e^{iθ} + a e^{-iθ}) as a tridiagonal Hermitian matrix.

    θ = 0 gives x, θ = π/2 gives p = i c (a† - a).
    """
    a = _annihilation(n_fock)
    x_theta = convention.c * (a.conj().T * np.exp(1j * theta) + a * np.exp(-1j * theta))
    return 0.5 * (x_theta + x_theta.conj().T)


def hermite_functions(x: np.ndarray, n_fock: int, convention: QuadratureConvention = DEFAULT_CONVENTION) -> np.ndarray:
    """
    Position wavefunctions ψ_n(x), n = 0..n_fock-1, in the given convention.

    Stable upward recurrence in the dimensionless coordinate X = x / (c√2):
    ψ_{n+1} = √(2/(n+1)) X ψ_n - √(n/(n+1)) ψ_{n-1}.

    Returns:
        array of shape (n_fock, len(x))
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    scale = convention.scale
    X = x / scale
    psi = np.zeros((n_fock, x.size), dtype=np.float64)
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * X ** 2)
    if n_fock > 1:
        psi[1] = np.sqrt(2.0) * X * psi[0]
    for n in range(1, n_fock - 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * X * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    # density in x, not X
    return psi / np.sqrt(scale)


def quadrature_bras(theta: float, x: np.ndarray, n_fock: int, convention: QuadratureConvention = DEFAULT_CONVENTION) -> np.ndarray:
    """
    Rows u(x) with <x_θ|ψ> = Σ_n u_n(x) c_n, i.e. u_n = e^{-inθ} ψ_n(x).

    Returns:
        complex array of shape (len(x), n_fock)
    """
    phases = np.exp(-1j * theta * np.arange(n_fock))
    return (hermite_functions(x, n_fock, convention) * phases[:, np.newaxis]).T


def support_radius(n_fock: int, convention: QuadratureConvention = DEFAULT_CONVENTION, margin: float = 3.0) -> float:
    """Quadrature radius beyond which every level below n_fock has negligible weight."""
    return convention.scale * (np.sqrt(2 * n_fock + 1) + margin)
