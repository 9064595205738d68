"""
Kraus operators of one collision: Jaynes-Cummings interaction with a
ground-state qubit, qubit readout in a chosen basis, and cavity loss.
"""
from typing import Tuple
import logging

import numpy as np

from src.collision.schedule import LOSS_WARNING_THRESHOLD, MeasurementBasis
from src.fockspace.operators import number
from src.fockspace.states import AnyState, CavityState, as_density

logger = logging.getLogger(__name__)


def interaction_unitary_blocks(phi: float, n_fock: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact blocks of U = exp(-iφ(aσ₊ + a†σ₋)) with the qubit starting in |g>.

    K_g|n> = cos(φ√n)|n>, K_e|n> = -i sin(φ√n)|n-1>.

    Returns:
        (K_g, K_e) as dense n_fock x n_fock matrices
    """
    root_n = np.sqrt(np.arange(n_fock))
    k_g = np.diag(np.cos(phi * root_n)).astype(np.complex128)
    k_e = np.zeros((n_fock, n_fock), dtype=np.complex128)
    k_e[np.arange(n_fock - 1), np.arange(1, n_fock)] = -1j * np.sin(phi * root_n[1:])
    return k_g, k_e


def measurement_kraus(phi: float, basis: MeasurementBasis, n_fock: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Kraus pair (K_+, K_-) for reading the qubit out after one interaction.

    Equatorial bases give K_± = (K_g ± e^{iχ} K_e)/√2 with χ = -θ_q. For the
    Z basis, +1 is the ground outcome (K_g) and -1 the excited one (K_e).
    """
    k_g, k_e = interaction_unitary_blocks(phi, n_fock)
    if not basis.is_equatorial:
        return k_g, k_e
    phase = np.exp(1j * basis.chi)
    return (k_g + phase * k_e) / np.sqrt(2), (k_g - phase * k_e) / np.sqrt(2)


def outcome_probabilities(state: AnyState, phi: float, basis: MeasurementBasis) -> Tuple[float, float]:
    """Probabilities of the +1 and -1 outcomes for the next collision."""
    k_plus, k_minus = measurement_kraus(phi, basis, state.n_fock)
    rho = as_density(state).elements
    p_plus = float(np.real(np.trace(k_plus @ rho @ k_plus.conj().T)))
    p_minus = float(np.real(np.trace(k_minus @ rho @ k_minus.conj().T)))
    return p_plus, p_minus


def loss_kraus(kappa: float, t_step: float, n_fock: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Single-jump amplitude-damping pair for one step of duration t_step.

    L_0|n> = e^{-λn/2}|n>, L_1|n> = √(1-e^{-λ}) √n e^{-λ(n-1)/2}|n-1>,
    λ = κ t_step.
    """
    lam = kappa * t_step
    if lam > LOSS_WARNING_THRESHOLD:
        logger.warning(f"kappa*t_step = {lam:.4f}; single-jump completeness deficit is large")
    levels = np.arange(n_fock)
    l0 = np.diag(np.exp(-0.5 * lam * levels)).astype(np.complex128)
    l1 = np.zeros((n_fock, n_fock), dtype=np.complex128)
    if lam > 0:
        upper = levels[1:]
        l1[upper - 1, upper] = np.sqrt(-np.expm1(-lam)) * np.sqrt(upper) * np.exp(-0.5 * lam * (upper - 1))
    return l0, l1


def completeness_deficit(operators) -> float:
    """Spectral norm of 1 - Σ K†K."""
    operators = list(operators)
    n_fock = operators[0].shape[0]
    total = sum(k.conj().T @ k for k in operators)
    return float(np.linalg.norm(np.eye(n_fock) - total, ord=2))


def excitation_probability(state: CavityState, phi: float, exact: bool = False) -> float:
    """
    Probability that the collision excites the qubit.

    Args:
        state: cavity state before the collision
        phi: interaction strength
        exact: use <ψ|K_e†K_e|ψ> instead of the small-φ form φ²<a†a>

    Returns:
        p_e
    """
    if not exact:
        return float(phi ** 2 * state.mean_photon_number())
    _, k_e = interaction_unitary_blocks(phi, state.n_fock)
    return float(np.real(np.vdot(state.amps, k_e.conj().T @ k_e @ state.amps)))


def small_phi_blocks(phi: float, n_fock: int) -> Tuple[np.ndarray, np.ndarray]:
    """Leading-order blocks K_g ≈ 1 - (φ²/2) a†a and K_e ≈ -iφ a."""
    k_g = np.eye(n_fock, dtype=np.complex128) - 0.5 * phi ** 2 * number(n_fock)
    k_e = np.zeros((n_fock, n_fock), dtype=np.complex128)
    k_e[np.arange(n_fock - 1), np.arange(1, n_fock)] = -1j * phi * np.sqrt(np.arange(1, n_fock))
    return k_g, k_e
