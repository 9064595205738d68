"""
Base estimator for phase-estimation homodyne.
"""
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Any, Optional, Tuple
import logging

import numpy as np
from tqdm import tqdm

from src.config.settings import settings
from src.fockspace.states import DEFAULT_CONVENTION, CavityState, QuadratureConvention
from src.phase_estimation.unitary import (
    default_epsilon,
    kick_phases,
    pad_state,
    quadrature_eigensystem,
    support_half_width,
)
from src.utils.exceptions import NormalizationUnderflowError
from src.utils.rng import stream

logger = logging.getLogger(__name__)

MODES = ("iterative", "nonadaptive", "adaptive")
STREAM_LABEL = "phase-est"
UNDERFLOW_PROBABILITY = 1e-300


def wrap_phase(phi: float) -> float:
    """Map an angle to (-π, π]."""
    wrapped = float(np.angle(np.exp(1j * phi)))
    return float(np.pi) if np.isclose(wrapped, -np.pi) else wrapped


@dataclass
class PhaseEstConfig:
    """Settings of one phase-estimation protocol."""
    n_m: int
    mode: str = "iterative"
    epsilon: Optional[float] = None  # None: π / (x_max + 2) for the input state
    theta: float = 0.0
    n_fock: Optional[int] = None  # working dimension, settings.pe_n_fock when None
    grid_points: int = 1024
    candidates: int = 64
    convention: QuadratureConvention = DEFAULT_CONVENTION
    track_photons: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"Unknown phase-estimation mode '{self.mode}', expected one of {MODES}")
        if self.n_m < 1:
            raise ValueError(f"n_m must be at least 1, got {self.n_m}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.grid_points < 8 or self.candidates < 2:
            raise ValueError("Adaptive grids need at least 8 phase points and 2 candidates")

    def resolved(self, state: CavityState) -> "PhaseEstConfig":
        """Copy with ε and the working dimension filled in for `state`."""
        n_fock = self.n_fock or max(settings.pe_n_fock, state.n_fock)
        epsilon = self.epsilon or default_epsilon(state, self.theta, self.convention)
        x_max = support_half_width(state, self.theta, self.convention)
        if epsilon * x_max >= np.pi:
            logger.warning(
                f"epsilon * x_max = {epsilon * x_max:.3f} >= pi; the estimate of {state.label} "
                f"wraps around and no longer equals a homodyne measurement"
            )
        return replace(self, epsilon=float(epsilon), n_fock=int(n_fock))


@dataclass
class PhaseEstimate:
    """Result of one phase-estimation run."""
    x_tilde: float
    phi_tilde: float
    outcomes: np.ndarray  # 0 = g, 1 = e
    phases: np.ndarray  # measurement phase of each round
    mode: str
    epsilon: float
    index: int = 0
    photon_trace: Optional[np.ndarray] = None

    def outcome_string(self) -> str:
        return "".join(str(int(bit)) for bit in self.outcomes)

    def to_row(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "x_tilde": self.x_tilde,
            "phi_tilde": self.phi_tilde,
            "outcomes": self.outcome_string(),
        }


class EigenFrame:
    """
    Cavity amplitudes in the eigenbasis of x_θ.

    Every controlled kick is diagonal here, so one round costs O(n_fock).
    """

    def __init__(self, state: CavityState, config: PhaseEstConfig):
        values, vectors = quadrature_eigensystem(config.theta, config.n_fock, config.convention)
        self.values = values
        self.vectors = vectors
        self.epsilon = config.epsilon
        self.amps = vectors.conj().T @ pad_state(state, config.n_fock)
        self._levels = np.arange(config.n_fock, dtype=np.float64)
        self.photon_trace: Optional[List[float]] = [self.photon_number()] if config.track_photons else None

    def kick(self, power: int) -> np.ndarray:
        return np.exp(1j * kick_phases(self.epsilon, self.values, power))

    def probability_g(self, power: int, phase: float) -> float:
        """P(g) = (1 + Re(e^{iφ} <e^{iε2^k x}>)) / 2."""
        mean_kick = np.sum(np.abs(self.amps) ** 2 * self.kick(power))
        return float(0.5 * (1.0 + np.real(np.exp(1j * phase) * mean_kick)))

    def measure(self, power: int, phase: float, u: float) -> int:
        """
        One round: controlled kick, phase φ on the qubit, X-basis readout.

        Returns:
            0 for g, 1 for e; the amplitudes collapse onto (1 ± e^{iφ}E)/2
        """
        kick = self.kick(power)
        mean_kick = np.sum(np.abs(self.amps) ** 2 * kick)
        p_g = float(0.5 * (1.0 + np.real(np.exp(1j * phase) * mean_kick)))
        bit = 0 if u < p_g else 1
        sign = 1.0 if bit == 0 else -1.0
        probability = p_g if bit == 0 else 1.0 - p_g
        if probability < UNDERFLOW_PROBABILITY:
            raise NormalizationUnderflowError(f"Outcome {bit} drawn with probability {probability:.3e}")
        self.amps = 0.5 * (1.0 + sign * np.exp(1j * phase) * kick) * self.amps
        self.amps /= np.sqrt(probability)
        if self.photon_trace is not None:
            self.photon_trace.append(self.photon_number())
        return bit

    def photon_number(self) -> float:
        fock = self.vectors @ self.amps
        return float(np.dot(self._levels, np.abs(fock) ** 2))


class BasePhaseEstimator(ABC):
    """Abstract base class for phase-estimation protocols."""

    mode: str = ""

    def __init__(self, config: PhaseEstConfig):
        """Initialize the estimator with its protocol settings."""
        self.config = config

    @abstractmethod
    def n_rounds(self, config: PhaseEstConfig) -> int:
        """Number of qubit measurements per run."""
        pass

    @abstractmethod
    def estimate(
        self,
        frame: EigenFrame,
        uniforms: np.ndarray,
        config: PhaseEstConfig
    ) -> Tuple[float, np.ndarray, np.ndarray]:
        """
        Run every round of the protocol on one cavity.

        Args:
            frame: cavity amplitudes in the x_θ eigenbasis (updated in place)
            uniforms: one uniform draw per round
            config: resolved settings (ε and working dimension set)

        Returns:
            (phase estimate, outcome bits, measurement phases)
        """
        pass

    def run(self, state: CavityState, seed: int, index: int = 0) -> PhaseEstimate:
        """
        Estimate x_θ of one cavity prepared in `state`.

        Args:
            state: input cavity state
            seed: global seed
            index: run index selecting the random stream

        Returns:
            PhaseEstimate with x̃ = φ̃ / ε
        """
        return self._run_resolved(state, self.config.resolved(state), seed, index)

    def _run_resolved(self, state: CavityState, config: PhaseEstConfig, seed: int, index: int) -> PhaseEstimate:
        frame = EigenFrame(state, config)
        uniforms = stream(seed, index, STREAM_LABEL).random(self.n_rounds(config))
        phi, outcomes, phases = self.estimate(frame, uniforms, config)
        phi = wrap_phase(phi)
        return PhaseEstimate(
            x_tilde=phi / config.epsilon,
            phi_tilde=phi,
            outcomes=np.asarray(outcomes, dtype=np.int8),
            phases=np.asarray(phases, dtype=np.float64),
            mode=self.mode,
            epsilon=config.epsilon,
            index=index,
            photon_trace=None if frame.photon_trace is None else np.array(frame.photon_trace),
        )

    def run_many(
        self,
        state: CavityState,
        n_runs: int,
        seed: int,
        workers: Optional[int] = None
    ) -> List[PhaseEstimate]:
        """Independent runs on a bounded thread pool; run i uses stream (seed, i)."""
        if n_runs < 0:
            raise ValueError(f"n_runs must be non-negative, got {n_runs}")
        if n_runs == 0:
            return []
        config = self.config.resolved(state)
        workers = max(1, workers or settings.workers)
        logger.info(
            f"Running {n_runs} {self.mode} phase-estimation runs ({state.label}, N_m={config.n_m}, "
            f"epsilon={config.epsilon:.4f}) on {workers} worker(s)"
        )
        progress = {"desc": self.mode, "disable": not settings.show_progress}
        if workers == 1:
            return [self._run_resolved(state, config, seed, i) for i in tqdm(range(n_runs), **progress)]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(self._run_resolved, state, config, seed, i) for i in range(n_runs)]
            return [f.result() for f in tqdm(futures, **progress)]
