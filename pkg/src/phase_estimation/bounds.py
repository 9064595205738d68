"""
Error bounds for the phase-estimation protocols.
"""
import logging

import numpy as np

logger = logging.getLogger(__name__)


def chernoff_bound(delta: float, epsilon: float, n_m: int) -> float:
    """
    Upper bound on P(|x̃ - x| ≥ δ) for non-adaptive estimation with N_m
    rounds on each of the real and imaginary parts.

    An error εδ in phase needs one of the two estimated components 2p̃ - 1
    to be off by at least sin(εδ)/√2; Hoeffding's inequality on each and a
    union bound give 4 exp(-N_m sin²(εδ) / 4). Valid for εδ ≤ π/2.
    It is conservative: sin²/4 ≤ sin/(2√2), so it never falls below the
    Chernoff form 4 exp(-N_m sin(εδ) / (2√2)).

    Args:
        delta: error in quadrature units
        epsilon: kick strength
        n_m: rounds per component

    Returns:
        bound, capped at 1
    """
    angle = epsilon * delta
    if angle < 0:
        raise ValueError(f"delta and epsilon must be non-negative, got {delta}, {epsilon}")
    if angle > np.pi / 2:
        logger.warning(f"epsilon * delta = {angle:.3f} > pi/2; the bound no longer applies and is reported as 1")
        return 1.0
    return float(min(1.0, 4.0 * np.exp(-n_m * np.sin(angle) ** 2 / 4.0)))


def iterative_error_bound(delta: float, epsilon: float, n_m: int) -> float:
    """
    Upper bound 1 / (2(e - 1)) on P(|x̃ - x| > δ) for iterative estimation,
    where e = εδ 2^{N_m} / (2π) is the error counted in units of the last
    bit. Returns 1 when e ≤ 1.5, where the bound is vacuous.
    """
    if delta < 0 or epsilon < 0:
        raise ValueError(f"delta and epsilon must be non-negative, got {delta}, {epsilon}")
    units = epsilon * delta * np.ldexp(1.0, n_m) / (2 * np.pi)
    if units <= 1.5:
        return 1.0
    return float(1.0 / (2.0 * (units - 1.0)))


def empirical_error_rate(estimates: np.ndarray, truth: float, delta: float) -> float:
    """Fraction of estimates further than δ from the true value."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.size == 0:
        raise ValueError("No estimates")
    return float(np.mean(np.abs(estimates - truth) >= delta))
