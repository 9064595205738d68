"""
Trajectory engine: repeated loss, interaction and qubit readout on a pure
cavity state, sampled with per-trajectory counter-based random streams.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional
import logging
import math

import numpy as np
from numba import njit
from tqdm import tqdm

from src.collision.schedule import CollisionSchedule, MeasurementRecord, TrajectoryResult
from src.config.settings import settings
from src.fockspace.states import CavityState, DensityMatrix
from src.utils.exceptions import NormalizationUnderflowError, TrajectoryError
from src.utils.rng import step_uniforms

logger = logging.getLogger(__name__)

UNDERFLOW_NORM = 1e-14
VALIDITY_LIMIT = 0.1
CHUNK_SIZE = 64


@njit(nogil=True, cache=False)
def _trajectory_kernel(amps, phi, chi, equatorial, lam, p_flip, uniforms, population):
    """
    Evolve amps in place. Returns (outcomes, failed_step) with
    failed_step = -1 when every step kept a finite norm.
    """
    n_fock = amps.shape[0]
    n_bit = phi.shape[0]
    outcomes = np.empty(n_bit, dtype=np.int8)
    branch_g = np.empty(n_fock, dtype=np.complex128)
    branch_e = np.empty(n_fock, dtype=np.complex128)
    sqrt_level = np.sqrt(np.arange(n_fock).astype(np.float64))
    decay = np.exp(-0.5 * lam * np.arange(n_fock).astype(np.float64))
    jump = math.sqrt(-math.expm1(-lam)) if lam > 0.0 else 0.0
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    for step in range(n_bit):
        # unmonitored loss
        if lam > 0.0:
            p_stay = 0.0
            p_jump = 0.0
            for k in range(n_fock):
                weight = amps[k].real ** 2 + amps[k].imag ** 2
                p_stay += weight * decay[k] ** 2
                if k > 0:
                    p_jump += weight * (jump * sqrt_level[k] * decay[k - 1]) ** 2
            if uniforms[step, 0] * (p_stay + p_jump) < p_jump:
                for k in range(n_fock - 1):
                    amps[k] = jump * sqrt_level[k + 1] * decay[k] * amps[k + 1]
                amps[n_fock - 1] = 0.0
            else:
                for k in range(n_fock):
                    amps[k] = decay[k] * amps[k]
            norm = np.sqrt(np.sum(np.abs(amps) ** 2))
            if norm < UNDERFLOW_NORM:
                return outcomes, step
            amps /= norm

        # interaction blocks applied to the vector
        angle = phi[step]
        for k in range(n_fock):
            branch_g[k] = np.cos(angle * sqrt_level[k]) * amps[k]
            if k < n_fock - 1:
                branch_e[k] = -1j * np.sin(angle * sqrt_level[k + 1]) * amps[k + 1]
            else:
                branch_e[k] = 0.0

        if equatorial[step]:
            phase = np.exp(1j * chi[step])
            plus = (branch_g + phase * branch_e) * inv_sqrt2
            p_plus = np.sum(np.abs(plus) ** 2)
            if uniforms[step, 1] < p_plus:
                amps[:] = plus
                outcome = 1
            else:
                amps[:] = (branch_g - phase * branch_e) * inv_sqrt2
                outcome = -1
        else:
            p_excited = np.sum(np.abs(branch_e) ** 2)
            if uniforms[step, 1] < p_excited:
                amps[:] = branch_e
                outcome = -1
            else:
                amps[:] = branch_g
                outcome = 1

        norm = np.sqrt(np.sum(np.abs(amps) ** 2))
        if norm < UNDERFLOW_NORM:
            return outcomes, step
        amps /= norm

        # classical mis-read of the stored bit
        if uniforms[step, 2] < p_flip:
            outcome = -outcome
        outcomes[step] = outcome

        if population.shape[0] > 0:
            total = 0.0
            for k in range(n_fock):
                total += k * (amps[k].real ** 2 + amps[k].imag ** 2)
            population[step, 0] = total
            population[step, 1] = amps[0].real ** 2 + amps[0].imag ** 2

    return outcomes, -1


def _schedule_arrays(schedule: CollisionSchedule):
    chi = np.array([b.chi for b in schedule.basis_seq], dtype=np.float64)
    equatorial = np.array([b.is_equatorial for b in schedule.basis_seq], dtype=np.bool_)
    return np.ascontiguousarray(schedule.phi), chi, equatorial


def run_trajectory(
    state0: CavityState,
    schedule: CollisionSchedule,
    seed: int,
    index: int,
    record_population: bool = True
) -> TrajectoryResult:
    """
    Run one trajectory.

    Args:
        state0: normalized initial cavity state
        schedule: collision schedule
        seed: global seed
        index: trajectory index; (seed, index) fixes every random draw
        record_population: keep <a†a> after each step

    Returns:
        TrajectoryResult
    """
    if abs(state0.norm - 1.0) > 1e-10:
        raise ValueError(f"Initial state is not normalized (norm={state0.norm:.12f})")

    phi, chi, equatorial = _schedule_arrays(schedule)
    uniforms = step_uniforms(seed, index, schedule.n_bit)
    amps = np.array(state0.amps, dtype=np.complex128, copy=True)
    # columns: <a†a> and vacuum population after each step
    population = np.zeros((schedule.n_bit if record_population else 0, 2), dtype=np.float64)

    outcomes, failed_step = _trajectory_kernel(
        amps, phi, chi, equatorial, float(schedule.loss_per_step), float(schedule.p_read_err), uniforms, population
    )
    if failed_step >= 0:
        raise NormalizationUnderflowError(
            f"Conditional state norm fell below {UNDERFLOW_NORM} at step {failed_step}"
        )

    record = MeasurementRecord(outcomes, schedule.basis_seq, schedule.times)
    return TrajectoryResult(
        index=index,
        record=record,
        final_state=CavityState(amps, state0.label),
        population_trace=population[:, 0].copy() if record_population else None,
        vacuum_trace=population[:, 1].copy() if record_population else None,
    )


def _run_chunk(state0, schedule, seed, indices, record_population) -> List[TrajectoryResult]:
    results = []
    for index in indices:
        try:
            results.append(run_trajectory(state0, schedule, seed, index, record_population))
        except Exception as e:
            raise TrajectoryError(index, e) from e
    return results


def run_ensemble(
    state0: CavityState,
    schedule: CollisionSchedule,
    n_traj: int,
    seed: int,
    workers: Optional[int] = None,
    record_population: bool = True,
    offset: int = 0
) -> List[TrajectoryResult]:
    """
    Run n_traj independent trajectories on a bounded thread pool.

    Trajectory i uses stream (seed, offset + i), so results do not depend on
    the number of workers or on completion order.
    """
    if n_traj < 0:
        raise ValueError(f"n_traj must be non-negative, got {n_traj}")
    if n_traj == 0:
        return []

    workers = max(1, workers or settings.workers)
    indices = list(range(offset, offset + n_traj))
    chunks = [indices[i:i + CHUNK_SIZE] for i in range(0, n_traj, CHUNK_SIZE)]
    logger.info(
        f"Running {n_traj} trajectories ({state0.label}, n_bit={schedule.n_bit}) on {workers} worker(s)"
    )

    results: List[TrajectoryResult] = []
    try:
        if workers == 1:
            for chunk in tqdm(chunks, desc="trajectories", disable=not settings.show_progress):
                results.extend(_run_chunk(state0, schedule, seed, chunk, record_population))
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures = [
                    executor.submit(_run_chunk, state0, schedule, seed, chunk, record_population)
                    for chunk in chunks
                ]
                for future in tqdm(futures, desc="trajectories", disable=not settings.show_progress):
                    results.extend(future.result())
    except TrajectoryError as e:
        logger.error(f"Ensemble aborted: {e}")
        raise

    return results


def mean_population_trace(results: List[TrajectoryResult]) -> np.ndarray:
    """Ensemble-mean <a†a> after each step."""
    traces = [r.population_trace for r in results if r.population_trace is not None]
    if not traces:
        raise ValueError("No population traces recorded")
    return np.mean(np.vstack(traces), axis=0)


def mean_vacuum_trace(results: List[TrajectoryResult]) -> np.ndarray:
    """Ensemble-mean vacuum population after each step."""
    traces = [r.vacuum_trace for r in results if r.vacuum_trace is not None]
    if not traces:
        raise ValueError("No vacuum traces recorded")
    return np.mean(np.vstack(traces), axis=0)


def ensemble_density_matrix(results: List[TrajectoryResult]) -> DensityMatrix:
    """Unconditional final state: average of the conditional final states."""
    return DensityMatrix.from_states([r.final_state for r in results])


@dataclass
class ValidityReport:
    """Per-step excitation probabilities along a population trace."""
    excitation_trace: np.ndarray
    max_excitation: float
    step_of_max: int
    valid: bool


def predicted_population(mean_photons: float, schedule: CollisionSchedule) -> np.ndarray:
    """<a†a> before each step, <n>_0 exp(-Σ_{m<n}(φ_m² + κT))."""
    decay = np.concatenate([[0.0], np.cumsum(schedule.phi ** 2 + schedule.loss_per_step)[:-1]])
    return mean_photons * np.exp(-decay)


def validity_report(
    state: CavityState,
    schedule: CollisionSchedule,
    population_trace: Optional[np.ndarray] = None,
    limit: float = VALIDITY_LIMIT
) -> ValidityReport:
    """
    Check the weak-interaction condition p_e = φ_n² <a†a>_n < limit.

    Args:
        state: initial state
        schedule: collision schedule
        population_trace: ensemble-mean population after each step; the
            population before step n is then trace[n-1]. Without it the
            exponential-decay prediction is used.
        limit: largest acceptable excitation probability
    """
    if schedule.n_bit == 0:
        return ValidityReport(np.zeros(0), 0.0, -1, True)
    if population_trace is None:
        before = predicted_population(state.mean_photon_number(), schedule)
    else:
        before = np.concatenate([[state.mean_photon_number()], np.asarray(population_trace)[:-1]])
    excitation = schedule.phi ** 2 * before
    step = int(np.argmax(excitation))
    report = ValidityReport(excitation, float(excitation[step]), step, bool(excitation[step] < limit))
    if not report.valid:
        logger.warning(
            f"Excitation probability {report.max_excitation:.3f} at step {step} exceeds {limit}"
        )
    return report
