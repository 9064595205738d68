"""
Collection efficiency, readout contrast and how many steps a schedule
needs to empty the cavity.
"""
from dataclasses import dataclass, asdict
from typing import Dict, Any, Optional, Sequence, Union
import logging

import numpy as np

from src.collision.schedule import CollisionSchedule
from src.records.filters import lossy_normalization

logger = logging.getLogger(__name__)

ILL_CONDITIONED_EFFICIENCY = 0.5
DEFAULT_MAX_STEPS = 100000


def collection_efficiency(phi: float, dt: float, kappa: float, t_step: Optional[float] = None) -> float:
    """η = γ / (γ + (T/Δt) κ) with γ = φ²/Δt, i.e. φ² / (φ² + κT)."""
    t_step = dt if t_step is None else t_step
    emission = phi ** 2
    return float(emission / (emission + kappa * t_step))


def readout_contrast(p_read_err: float) -> float:
    """η_m = 1 - 2p for a symmetric flip probability p."""
    if not 0.0 <= p_read_err < 0.5:
        raise ValueError(f"p_read_err must lie in [0, 0.5), got {p_read_err}")
    return 1.0 - 2.0 * p_read_err


def readout_efficiency(p_read_err: float) -> float:
    """Efficiency η_q = η_m² equivalent to a readout flip probability."""
    return readout_contrast(p_read_err) ** 2


@dataclass(frozen=True)
class EfficiencyCompensation:
    """Detection efficiency handed to the tomography POVM."""
    eta: float
    eta_q: float = 1.0

    @property
    def eta_det(self) -> float:
        return self.eta * self.eta_q

    @property
    def ill_conditioned(self) -> bool:
        return self.eta_det <= ILL_CONDITIONED_EFFICIENCY

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["eta_det"] = self.eta_det
        return payload


def compensate_efficiency(eta: float, eta_q: float = 1.0) -> EfficiencyCompensation:
    """
    Package a detection efficiency for compensation.

    Args:
        eta: cavity collection efficiency in (0, 1]
        eta_q: efficiency attributed to qubit readout error

    Returns:
        EfficiencyCompensation with η_det = η_q η
    """
    if not 0.0 < eta <= 1.0 or not 0.0 < eta_q <= 1.0:
        raise ValueError(f"Efficiencies must lie in (0, 1], got eta={eta}, eta_q={eta_q}")
    compensation = EfficiencyCompensation(float(eta), float(eta_q))
    if compensation.ill_conditioned:
        logger.warning(
            f"Detection efficiency {compensation.eta_det:.3f} <= {ILL_CONDITIONED_EFFICIENCY}; "
            f"loss compensation is ill-conditioned"
        )
    return compensation


def efficiency_from_schedule(schedule: CollisionSchedule, eta_q: float = 1.0) -> EfficiencyCompensation:
    """
    Collection efficiency of a schedule.

    Constant coupling uses the closed form φ²/(φ² + κT); ramps use the
    collected fraction of the discrete emission integral.
    """
    if schedule.kappa == 0 or schedule.n_bit == 0:
        eta = 1.0
    elif schedule.is_constant:
        eta = collection_efficiency(float(schedule.phi[0]), schedule.dt, schedule.kappa, schedule.t_step)
    else:
        eta = lossy_normalization(schedule.phi, schedule.loss_per_step)
    return compensate_efficiency(eta, eta_q)


def _decay_profile(phi: Union[float, Sequence[float]], loss_per_step: float, max_steps: int) -> np.ndarray:
    """Σ_{m<N}(φ_m² + κT) for N = 0..max_steps; a sequence is continued with its last value."""
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    if phi.size < max_steps:
        phi = np.concatenate([phi, np.full(max_steps - phi.size, phi[-1])])
    return np.concatenate([[0.0], np.cumsum(phi[:max_steps] ** 2 + loss_per_step)])


def steps_to_vacuum(
    phi: Union[float, Sequence[float]],
    loss_per_step: float = 0.0,
    fraction: float = 0.95,
    photon_distribution: Optional[np.ndarray] = None,
    max_steps: int = DEFAULT_MAX_STEPS
) -> Optional[int]:
    """
    Smallest number of steps after which the cavity is predicted empty.

    Without a photon distribution the rule is <a†a>_N ≤ (1 - fraction) <a†a>_0.
    With one, the vacuum population Σ_n p_n (1 - e^{-S_N})^n must reach
    `fraction`, S_N being the accumulated decay exponent.

    Returns:
        N, or None if the criterion is not met within max_steps
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    exponents = _decay_profile(phi, loss_per_step, max_steps)
    if photon_distribution is None:
        reached = exponents >= -np.log1p(-fraction)
    else:
        p = np.asarray(photon_distribution, dtype=np.float64)
        emptied = -np.expm1(-exponents)
        vacuum = np.power.outer(emptied, np.arange(p.size)) @ p
        reached = vacuum >= fraction
    if not np.any(reached):
        logger.warning(f"Cavity not emptied to {fraction:.0%} within {max_steps} steps")
        return None
    return int(np.argmax(reached))
