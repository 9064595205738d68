"""
Iterative, non-adaptive and adaptive phase estimation of e^{iε x_θ}.
"""
from dataclasses import replace
from functools import lru_cache
from typing import List, Optional, Tuple
import logging

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from src.evaluation.statistics import EmpiricalSample
from src.fockspace.states import CavityState
from src.phase_estimation.base_estimator import (
    BasePhaseEstimator,
    EigenFrame,
    PhaseEstConfig,
    PhaseEstimate,
)

logger = logging.getLogger(__name__)

REAL_PHASE = 0.0
IMAGINARY_PHASE = -np.pi / 2
TIE_TOLERANCE = 1e-12
LIKELIHOOD_FLOOR = 1e-300


class IterativePhaseEstimator(BasePhaseEstimator):
    """
    Textbook iterative phase estimation, least-significant bit first.

    Round r applies the kick with power 2^{N_m - r} and back-rotates the
    qubit by the bits already known, so each round reads one binary digit
    of εx/(2π).
    """

    mode = "iterative"

    def n_rounds(self, config: PhaseEstConfig) -> int:
        return config.n_m

    def estimate(self, frame: EigenFrame, uniforms: np.ndarray, config: PhaseEstConfig):
        omega = 0.0
        outcomes = np.zeros(config.n_m, dtype=np.int8)
        phases = np.zeros(config.n_m)
        for r, power in enumerate(range(config.n_m - 1, -1, -1)):
            omega /= 2
            phases[r] = -2 * np.pi * omega
            outcomes[r] = frame.measure(power, phases[r], uniforms[r])
            omega += outcomes[r] / 2
        return 2 * np.pi * omega, outcomes, phases


class NonAdaptivePhaseEstimator(BasePhaseEstimator):
    """
    N_m rounds on the real part and N_m on the imaginary part of <e^{iεx}>,
    interleaved; φ̃ = arg[(2p̃_R - 1) + i(2p̃_I - 1)].
    """

    mode = "nonadaptive"

    def n_rounds(self, config: PhaseEstConfig) -> int:
        return 2 * config.n_m

    def estimate(self, frame: EigenFrame, uniforms: np.ndarray, config: PhaseEstConfig):
        n = self.n_rounds(config)
        phases = np.where(np.arange(n) % 2 == 0, REAL_PHASE, IMAGINARY_PHASE)
        outcomes = np.array([frame.measure(0, phases[r], uniforms[r]) for r in range(n)], dtype=np.int8)
        p_real = float(np.mean(outcomes[0::2] == 0))
        p_imag = float(np.mean(outcomes[1::2] == 0))
        return float(np.angle((2 * p_real - 1) + 1j * (2 * p_imag - 1))), outcomes, phases


@lru_cache(maxsize=4)
def _adaptive_tables(grid_points: int, candidates: int):
    """φ grid, candidate phases, likelihoods L[c, x, g] and their logs."""
    grid = -np.pi + 2 * np.pi * (np.arange(grid_points) + 1) / grid_points
    phases = 2 * np.pi * np.arange(candidates) / candidates
    bits = np.array([0.0, 1.0])
    likelihood = np.cos(0.5 * (grid[None, None, :] + phases[:, None, None] + np.pi * bits[None, :, None])) ** 2
    log_likelihood = np.log(np.clip(likelihood, LIKELIHOOD_FLOOR, None))
    for table in (grid, phases, likelihood, log_likelihood):
        table.setflags(write=False)
    return grid, phases, likelihood, log_likelihood


def adaptive_posterior(outcomes: np.ndarray, phases: np.ndarray, grid_points: int = 1024) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalized posterior over φ after rounds with the given outcomes and
    measurement phases, from a flat prior.

    Returns:
        (grid, probabilities) with probabilities summing to 1
    """
    grid, _, _, _ = _adaptive_tables(grid_points, 2)
    log_post = np.zeros(grid_points)
    for bit, phase in zip(outcomes, phases):
        log_post += 2 * np.log(np.clip(np.abs(np.cos(0.5 * (grid + phase + np.pi * bit))), 1e-150, None))
    return grid, np.exp(log_post - logsumexp(log_post))


class AdaptivePhaseEstimator(BasePhaseEstimator):
    """
    Bayesian adaptive phase estimation on a discretized φ grid.

    Each round picks, from a uniform candidate set, the measurement phase
    maximizing Σ_x |∫dφ e^{iφ} P(x|φ) P(φ)|, the expected sharpness of the
    next posterior. The posterior is kept in the log domain.
    """

    mode = "adaptive"

    def n_rounds(self, config: PhaseEstConfig) -> int:
        return config.n_m

    def select_phase(self, log_post: np.ndarray, config: PhaseEstConfig) -> int:
        """Index of the best candidate phase; ties go to the lowest index."""
        grid, _, likelihood, _ = _adaptive_tables(config.grid_points, config.candidates)
        weights = np.exp(log_post - log_post.max() + 1j * grid)
        scores = np.abs(np.einsum("cxg,g->cx", likelihood, weights)).sum(axis=1)
        best = scores.max()
        return int(np.flatnonzero(scores >= best - TIE_TOLERANCE * max(1.0, best))[0])

    def estimate(self, frame: EigenFrame, uniforms: np.ndarray, config: PhaseEstConfig):
        grid, candidates, _, log_likelihood = _adaptive_tables(config.grid_points, config.candidates)
        log_post = np.full(config.grid_points, -np.log(config.grid_points))
        outcomes = np.zeros(config.n_m, dtype=np.int8)
        phases = np.zeros(config.n_m)
        for r in range(config.n_m):
            # flat prior: every phase is equally good, start at 0
            c = 0 if r == 0 else self.select_phase(log_post, config)
            phases[r] = candidates[c]
            outcomes[r] = frame.measure(0, phases[r], uniforms[r])
            log_post = log_post + log_likelihood[c, outcomes[r]]
            log_post -= logsumexp(log_post)
        phi = float(np.angle(np.sum(np.exp(log_post + 1j * grid))))
        return phi, outcomes, phases


ESTIMATORS = {
    IterativePhaseEstimator.mode: IterativePhaseEstimator,
    NonAdaptivePhaseEstimator.mode: NonAdaptivePhaseEstimator,
    AdaptivePhaseEstimator.mode: AdaptivePhaseEstimator,
}


def estimator_for(config: PhaseEstConfig) -> BasePhaseEstimator:
    return ESTIMATORS[config.mode](config)


def run_iterative_pe(state: CavityState, config: PhaseEstConfig, seed: int, index: int = 0) -> PhaseEstimate:
    """One run of least-significant-bit-first iterative phase estimation."""
    return IterativePhaseEstimator(replace(config, mode="iterative")).run(state, seed, index)


def run_nonadaptive_pe(state: CavityState, config: PhaseEstConfig, seed: int, index: int = 0) -> PhaseEstimate:
    """One run of 2 N_m fixed-phase rounds (real and imaginary parts)."""
    return NonAdaptivePhaseEstimator(replace(config, mode="nonadaptive")).run(state, seed, index)


def run_adaptive_pe(state: CavityState, config: PhaseEstConfig, seed: int, index: int = 0) -> PhaseEstimate:
    """One run of Bayesian adaptive phase estimation."""
    return AdaptivePhaseEstimator(replace(config, mode="adaptive")).run(state, seed, index)


def run_phase_estimation(
    state: CavityState,
    config: PhaseEstConfig,
    n_runs: int,
    seed: int,
    workers: Optional[int] = None
) -> List[PhaseEstimate]:
    """Ensemble of independent runs with the protocol named by config.mode."""
    return estimator_for(config).run_many(state, n_runs, seed, workers)


def estimates_frame(estimates: List[PhaseEstimate]) -> pd.DataFrame:
    """Per-run table with columns index, x_tilde, phi_tilde, outcomes."""
    return pd.DataFrame(
        [e.to_row() for e in estimates], columns=["index", "x_tilde", "phi_tilde", "outcomes"]
    )


def estimates_sample(estimates: List[PhaseEstimate], metadata: Optional[dict] = None) -> EmpiricalSample:
    """x̃ values of an ensemble as an EmpiricalSample for KS checks."""
    values = np.array([e.x_tilde for e in estimates], dtype=np.float64)
    return EmpiricalSample(values, metadata or {})
