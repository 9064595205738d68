"""
Iterative maximum-likelihood (RρR) state reconstruction from binned
homodyne samples.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Union
import json
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config.settings import settings
from src.evaluation.statistics import EmpiricalSample
from src.fockspace.operators import support_radius
from src.fockspace.states import (
    DEFAULT_CONVENTION,
    CavityState,
    DensityMatrix,
    QuadratureConvention,
    fidelity,
)
from src.tomography.povm import build_povm

logger = logging.getLogger(__name__)

ANGLE_TOLERANCE = 1e-9
MIN_DILUTION = 1e-6


@dataclass
class TomographyDataset:
    """Homodyne samples at several quadrature angles."""
    samples: List[Tuple[float, EmpiricalSample]]
    n_fock: int
    eta_used: float = 1.0
    convention: QuadratureConvention = DEFAULT_CONVENTION

    def __post_init__(self):
        for theta, sample in self.samples:
            if not -ANGLE_TOLERANCE <= theta < np.pi - ANGLE_TOLERANCE:
                raise ValueError(f"Quadrature angle {theta} outside [0, pi)")
            if sample.is_complex:
                raise ValueError("Tomography needs real homodyne samples")
            sample.require_values()
        if not 0.0 < self.eta_used <= 1.0:
            raise ValueError(f"eta_used must lie in (0, 1], got {self.eta_used}")

    @property
    def angles(self) -> np.ndarray:
        return np.array([theta for theta, _ in self.samples])

    @property
    def n_samples(self) -> int:
        return sum(len(sample) for _, sample in self.samples)

    def bin_edges(self, bin_width: float) -> np.ndarray:
        """Common symmetric bin edges covering the Fock support and every sample."""
        largest = max(float(np.max(np.abs(sample.values))) for _, sample in self.samples)
        half = max(support_radius(self.n_fock, self.convention), largest + bin_width)
        n_half = int(np.ceil(half / bin_width))
        return np.arange(-n_half, n_half + 1) * bin_width

    def to_frame(self) -> pd.DataFrame:
        frames = [pd.DataFrame({"theta": theta, "J": sample.values}) for theta, sample in self.samples]
        return pd.concat(frames, ignore_index=True)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        n_fock: int,
        eta_used: float = 1.0,
        convention: QuadratureConvention = DEFAULT_CONVENTION
    ) -> "TomographyDataset":
        samples = [
            (float(theta), EmpiricalSample(group["J"].to_numpy(), {"theta": float(theta)}))
            for theta, group in frame.groupby("theta", sort=True)
        ]
        return cls(samples, n_fock, eta_used, convention)


@dataclass
class ReconstructionResult:
    """Output of the likelihood maximization."""
    rho: DensityMatrix
    iterations: int
    log_likelihood_trace: np.ndarray
    converged: bool
    fidelity_vs_target: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "real": np.real(self.rho.elements).tolist(),
            "imag": np.imag(self.rho.elements).tolist(),
            "fidelity": self.fidelity_vs_target,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_log_likelihood": float(self.log_likelihood_trace[-1]) if self.log_likelihood_trace.size else None,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @staticmethod
    def rho_from_json(path: Union[str, Path]) -> DensityMatrix:
        payload = json.loads(Path(path).read_text())
        return DensityMatrix(np.array(payload["real"]) + 1j * np.array(payload["imag"]))


def _observed_elements(dataset: TomographyDataset, bin_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Stack of POVM elements for every non-empty (angle, bin) and their counts."""
    edges = dataset.bin_edges(bin_width)
    centers = 0.5 * (edges[1:] + edges[:-1])
    elements, counts = [], []
    for theta, sample in dataset.samples:
        hist, _ = np.histogram(sample.values, bins=edges)
        povm = build_povm(theta, centers, dataset.eta_used, dataset.n_fock, dataset.convention, bin_width)
        observed = hist > 0
        elements.append(povm.elements[observed])
        counts.append(hist[observed])
    return np.concatenate(elements), np.concatenate(counts).astype(np.float64)


def _log_likelihood(probabilities: np.ndarray, counts: np.ndarray) -> float:
    return float(np.sum(counts * np.log(np.clip(probabilities, 1e-300, None))))


def _probabilities(elements: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("kmn,nm->k", elements, rho))


def mle_reconstruct(
    dataset: TomographyDataset,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
    bin_width: Optional[float] = None,
    target: Optional[CavityState] = None
) -> ReconstructionResult:
    """
    Maximize the binned homodyne likelihood with the RρR iteration.

    Each step uses R = Σ_k (f_k / p_k) Π_k. If a full step lowers the
    likelihood it is diluted, (1 + εR)ρ(1 + εR), halving ε until the
    likelihood increases.

    Args:
        dataset: samples at ≥ 2 distinct angles
        max_iter: iteration cap (settings.tomography_max_iter)
        tol: stop when max |Δρ| < tol (settings.tomography_tol)
        bin_width: bin width in quadrature units (settings.tomography_bin_width)
        target: optional pure state for the fidelity report

    Returns:
        ReconstructionResult
    """
    max_iter = max_iter or settings.tomography_max_iter
    tol = tol or settings.tomography_tol
    bin_width = bin_width or settings.tomography_bin_width

    distinct = np.unique(np.round(dataset.angles, 9))
    if distinct.size < 2:
        raise ValueError(f"Reconstruction needs at least 2 distinct angles, got {distinct.size}")

    elements, counts = _observed_elements(dataset, bin_width)
    frequencies = counts / counts.sum()
    n_fock = dataset.n_fock
    identity = np.eye(n_fock, dtype=np.complex128)
    rho = identity / n_fock
    probabilities = _probabilities(elements, rho)
    likelihood = _log_likelihood(probabilities, counts)
    trace = [likelihood]
    converged = False
    dilutions = 0

    logger.info(
        f"MLE over {distinct.size} angles, {int(counts.sum())} samples, "
        f"{elements.shape[0]} occupied bins, eta={dataset.eta_used}"
    )

    iteration = 0
    for iteration in tqdm(range(1, max_iter + 1), desc="RρR", disable=not settings.show_progress):
        R = np.einsum("k,kmn->mn", frequencies / np.clip(probabilities, 1e-300, None), elements)

        step_scale = None
        candidate = R @ rho @ R
        candidate = 0.5 * (candidate + candidate.conj().T)
        candidate /= np.trace(candidate).real
        candidate_probs = _probabilities(elements, candidate)
        candidate_likelihood = _log_likelihood(candidate_probs, counts)

        epsilon = 1.0
        while candidate_likelihood < likelihood and epsilon > MIN_DILUTION:
            step_scale = epsilon
            diluted = identity + epsilon * R
            candidate = diluted @ rho @ diluted
            candidate = 0.5 * (candidate + candidate.conj().T)
            candidate /= np.trace(candidate).real
            candidate_probs = _probabilities(elements, candidate)
            candidate_likelihood = _log_likelihood(candidate_probs, counts)
            epsilon *= 0.5
        if step_scale is not None:
            dilutions += 1
            logger.debug(f"Iteration {iteration}: diluted step epsilon={step_scale:.3e}")
        if candidate_likelihood < likelihood:
            # no ascent direction left at this resolution
            converged = True
            break

        change = float(np.max(np.abs(candidate - rho)))
        rho, probabilities, likelihood = candidate, candidate_probs, candidate_likelihood
        trace.append(likelihood)
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning(f"MLE did not converge within {max_iter} iterations; returning last iterate")

    result_rho = DensityMatrix(rho)
    result = ReconstructionResult(
        rho=result_rho,
        iterations=iteration,
        log_likelihood_trace=np.array(trace),
        converged=converged,
        diagnostics={"dilutions": dilutions, "bin_width": bin_width, "eta_used": dataset.eta_used},
    )
    if target is not None:
        result.fidelity_vs_target = fidelity(result_rho, target)
        logger.info(f"Reconstruction fidelity vs {target.label}: {result.fidelity_vs_target:.5f}")
    return result
