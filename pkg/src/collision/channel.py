"""
Unconditional density-matrix evolution under the collision schedule.

Averaging over all readout outcomes, one collision is the channel
ρ → K_g ρ K_g† + K_e ρ K_e†, preceded by the single-jump loss channel.
The trajectory ensemble converges to this evolution.
"""
from typing import List, Tuple, Union
import logging

import numpy as np

from src.collision.kraus import interaction_unitary_blocks, loss_kraus
from src.collision.schedule import CollisionSchedule
from src.fockspace.states import AnyState, DensityMatrix, as_density

logger = logging.getLogger(__name__)


def _apply(operators, rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in operators)


def evolve_density_matrix(
    state0: AnyState,
    schedule: CollisionSchedule,
    return_population: bool = False
) -> Union[DensityMatrix, Tuple[DensityMatrix, np.ndarray]]:
    """
    Evolve the initial state through every step of the schedule.

    Args:
        state0: initial cavity state
        schedule: collision schedule (readout basis and errors do not matter here)
        return_population: also return <a†a> after each step

    Returns:
        final DensityMatrix, optionally with the population trace
    """
    rho = np.array(as_density(state0).elements, dtype=np.complex128)
    n_fock = rho.shape[0]
    loss_ops = loss_kraus(schedule.kappa, schedule.t_step, n_fock) if schedule.kappa > 0 else None
    levels = np.arange(n_fock)
    population: List[float] = []

    cache = {}
    for phi in schedule.phi:
        if loss_ops is not None:
            rho = _apply(loss_ops, rho)
            # single-jump pair is not trace preserving
            rho /= np.trace(rho).real
        key = float(phi)
        if key not in cache:
            cache[key] = interaction_unitary_blocks(key, n_fock)
        rho = _apply(cache[key], rho)
        population.append(float(np.real(np.diag(rho)) @ levels))

    rho = 0.5 * (rho + rho.conj().T)
    final = DensityMatrix(rho / np.trace(rho).real)
    logger.debug(f"Channel evolution over {schedule.n_bit} steps, final <n>={final.mean_photon_number():.4e}")
    if return_population:
        return final, np.array(population)
    return final
