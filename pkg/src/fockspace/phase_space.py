"""
Quadrature densities and phase-space quasi-probabilities.

The Wigner routine is the iterative Laguerre-free recursion used by
strawberryfields/MrMustard, with ħ = 1 so that the dimensionless
quadrature (a + a†)/√2 has vacuum variance 1/2; other conventions are
obtained by rescaling the axes.
"""
import logging

import numpy as np
from numba import njit
from scipy.integrate import trapezoid

from src.fockspace.operators import quadrature_bras
from src.fockspace.states import (
    DEFAULT_CONVENTION,
    AnyState,
    CavityState,
    QuadratureConvention,
    as_density,
)
from src.utils.exceptions import GridError

logger = logging.getLogger(__name__)

PDF_NORMALIZATION_TOLERANCE = 1e-4
MARGINAL_CHUNK = 128


def _pure_components(state: AnyState):
    """(weights, amplitude rows) of a pure state or of a spectral decomposition."""
    if isinstance(state, CavityState):
        return np.ones(1), state.amps[np.newaxis, :]
    weights, vectors = state.spectral()
    keep = weights > 1e-14
    return weights[keep], vectors[:, keep].T


def quadrature_pdf(
    state: AnyState,
    theta: float,
    grid: np.ndarray,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    check_normalization: bool = True
) -> np.ndarray:
    """
    P_θ(x) = |Σ_n c_n e^{-inθ} ψ_n(x)|², summed over the spectral
    decomposition for mixed states.

    Args:
        state: CavityState or DensityMatrix
        theta: quadrature angle in radians
        grid: increasing x values
        convention: quadrature scaling
        check_normalization: require ∫P dx = 1 within 1e-4 on the grid

    Returns:
        density values on grid
    """
    grid = np.asarray(grid, dtype=np.float64)
    n_fock = state.n_fock
    bras = quadrature_bras(theta, grid, n_fock, convention)
    weights, rows = _pure_components(state)
    overlaps = bras @ rows.T
    density = np.abs(overlaps) ** 2 @ weights

    if check_normalization:
        total = trapezoid(density, grid)
        if abs(total - 1.0) > PDF_NORMALIZATION_TOLERANCE:
            raise GridError(
                f"Quadrature density integrates to {total:.6f} on the grid; widen or refine it"
            )
    return density


@njit(cache=False)
def _wigner_iterative(rho, X, P):
    cutoff = rho.shape[0]
    grid = (X + 1j * P) / np.sqrt(2.0)
    wmat_prev = np.zeros((cutoff, grid.shape[0], grid.shape[1]), dtype=np.complex128)
    wmat_next = np.zeros((cutoff, grid.shape[0], grid.shape[1]), dtype=np.complex128)

    wmat_prev[0] = np.exp(-2.0 * np.abs(grid) ** 2) / np.pi
    W = np.real(rho[0, 0]) * np.real(wmat_prev[0])

    for n in range(1, cutoff):
        wmat_prev[n] = (2.0 * grid * wmat_prev[n - 1]) / np.sqrt(n)
        W += 2 * np.real(rho[0, n] * wmat_prev[n])

    for m in range(1, cutoff):
        wmat_next[m] = (2 * np.conj(grid) * wmat_prev[m] - np.sqrt(m) * wmat_prev[m - 1]) / np.sqrt(m)
        W += np.real(rho[m, m] * wmat_next[m])

        for n in range(m + 1, cutoff):
            wmat_next[n] = (2 * grid * wmat_next[n - 1] - np.sqrt(m) * wmat_prev[n - 1]) / np.sqrt(n)
            W += 2 * np.real(rho[m, n] * wmat_next[n])
        wmat_prev[:] = wmat_next

    return W


def wigner(
    state: AnyState,
    x: np.ndarray,
    p: np.ndarray,
    convention: QuadratureConvention = DEFAULT_CONVENTION
) -> np.ndarray:
    """
    Wigner function on the (x, p) grid.

    Returns:
        array W[i, j] = W(x_i, p_j)
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    scale = convention.scale
    X = np.outer(x, np.ones_like(p)) / scale
    P = np.outer(np.ones_like(x), p) / scale
    rho = np.ascontiguousarray(as_density(state).elements)
    return _wigner_iterative(rho, X, P) / scale ** 2


def husimi_q(state: AnyState, beta: np.ndarray) -> np.ndarray:
    """Q(β) = <β|ρ|β>/π on an array of complex points."""
    beta = np.asarray(beta, dtype=np.complex128)
    n_fock = state.n_fock
    flat = beta.ravel()
    # rows <β|n> = e^{-|β|²/2} β*^n / √n!
    bras = np.empty((flat.size, n_fock), dtype=np.complex128)
    bras[:, 0] = np.exp(-0.5 * np.abs(flat) ** 2)
    for n in range(1, n_fock):
        bras[:, n] = bras[:, n - 1] * np.conj(flat) / np.sqrt(n)
    weights, rows = _pure_components(state)
    q = (np.abs(bras @ rows.T) ** 2 @ weights) / np.pi
    return q.reshape(beta.shape)


def husimi_marginal(
    state: AnyState,
    axis: str,
    grid: np.ndarray,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    n_integration: int = 801
) -> np.ndarray:
    """
    Marginal density of an ideal heterodyne outcome J = x + i p along
    one axis, in quadrature units (β = J / (2c)).

    Args:
        axis: "re" (x marginal) or "im" (p marginal)
        grid: values of the kept coordinate
    """
    if axis not in ("re", "im"):
        raise ValueError(f"axis must be 're' or 'im', got {axis}")
    grid = np.asarray(grid, dtype=np.float64)
    half_width = max(np.max(np.abs(grid)), 8.0 * convention.scale)
    other = np.linspace(-half_width, half_width, n_integration)
    if axis == "re":
        J = grid[:, np.newaxis] + 1j * other[np.newaxis, :]
    else:
        J = other[np.newaxis, :] + 1j * grid[:, np.newaxis]
    scale = 2 * convention.c
    marginal = np.empty(grid.size, dtype=np.float64)
    for start in range(0, grid.size, MARGINAL_CHUNK):
        rows = slice(start, start + MARGINAL_CHUNK)
        q = husimi_q(state, J[rows] / scale) / scale ** 2
        marginal[rows] = trapezoid(q, other, axis=1)
    return marginal
