"""
Mode-matching filter functions f(t_n) for turning a qubit record into a
quadrature estimate.

All filters are linear in the convention constant c; c = 1/√2 gives the
homodyne normalization Σ f² → 1/2 for constant coupling.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, Optional, Sequence, Union
import logging

import numpy as np
import pandas as pd

from src.fockspace.states import DEFAULT_CONVENTION
from src.utils.exceptions import DivergentNormalizationError

logger = logging.getLogger(__name__)

FILTER_KINDS = ("constant", "time-dependent", "lossy-optimal")
MIN_NORMALIZATION = 1e-12


@dataclass(frozen=True)
class FilterWeights:
    """Precomputed filter values for one schedule."""
    weights: np.ndarray
    convention_c: float
    kind: str
    times: np.ndarray
    parameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        times = np.array(self.times, dtype=np.float64, copy=True)
        if weights.shape != times.shape:
            raise ValueError(f"weights {weights.shape} and times {times.shape} differ in shape")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("Filter weights must be finite and non-negative")
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"Unknown filter kind '{self.kind}'")
        weights.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "times", times)

    @property
    def n_bit(self) -> int:
        return self.weights.size

    def sum_of_squares(self) -> float:
        """Σ f², the variance a record of unbiased ±1 outcomes produces."""
        return float(np.sum(self.weights ** 2))

    def rescaled(self, convention_c: float) -> "FilterWeights":
        return FilterWeights(
            self.weights * convention_c / self.convention_c, convention_c, self.kind, self.times, dict(self.parameters)
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t_n": self.times, "f": self.weights})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        logger.debug(f"Wrote {self.kind} filter ({self.n_bit} steps) to {path}")
        return path


def _decay_exponents(phi_seq: np.ndarray) -> np.ndarray:
    """Left-Riemann Σ_{m<n} φ_m², i.e. ∫_0^{t_n} γ dt."""
    return np.concatenate([[0.0], np.cumsum(phi_seq ** 2)[:-1]]) if phi_seq.size else np.zeros(0)


def filter_constant(phi: float, dt: float, n_bit: int, c: float = DEFAULT_CONVENTION.c) -> FilterWeights:
    """
    f(t_n) = c√2 · √(γΔt/2) · e^{-γ t_n/2} with γ = φ²/Δt and t_n = nΔt.

    Args:
        phi: interaction strength per step
        dt: interaction interval Δt
        n_bit: number of steps
        c: quadrature convention constant

    Returns:
        FilterWeights of kind "constant"
    """
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    n = np.arange(n_bit)
    weights = c * phi * np.exp(-0.5 * phi ** 2 * n)
    return FilterWeights(weights, c, "constant", n * dt, {"phi": phi, "dt": dt})


def filter_time_dependent(phi_seq: Sequence[float], dt: float, c: float = DEFAULT_CONVENTION.c) -> FilterWeights:
    """f(t_n) = c√2 · √(γ(t_n)Δt/2) · exp(-½ Σ_{m<n} γ(t_m)Δt)."""
    phi_seq = np.asarray(phi_seq, dtype=np.float64)
    if np.any(phi_seq <= 0):
        raise ValueError("Every phi in the sequence must be positive")
    weights = c * phi_seq * np.exp(-0.5 * _decay_exponents(phi_seq))
    return FilterWeights(weights, c, "time-dependent", np.arange(phi_seq.size) * dt, {"dt": dt})


def lossy_normalization(phi_seq: np.ndarray, loss_per_step: float) -> float:
    """
    Discrete ∫_0^∞ γ e^{-κt - ∫γ} dt: the fraction of the cavity field
    collected by the qubit rather than lost.

    Each step contributes its exact emission (1 - e^{-φ_n²}); the tail
    after the last step continues with the last coupling.
    """
    if phi_seq.size == 0:
        return 0.0
    exponents = _decay_exponents(phi_seq) + loss_per_step * np.arange(phi_seq.size)
    collected = np.sum(-np.expm1(-phi_seq ** 2) * np.exp(-exponents))
    last = phi_seq[-1] ** 2
    remaining = np.exp(-(np.sum(phi_seq ** 2) + loss_per_step * phi_seq.size))
    tail = remaining * (-np.expm1(-last)) / (-np.expm1(-last - loss_per_step))
    return float(collected + tail)


def filter_lossy_optimal(
    phi_seq: Sequence[float],
    dt: float,
    kappa: float,
    eta_m: float = 1.0,
    c: float = DEFAULT_CONVENTION.c,
    t_step: Optional[float] = None
) -> FilterWeights:
    """
    Best mode-matching filter in the presence of cavity loss and readout
    contrast η_m:

    f(t_n) = (1/η_m) c√2 √(γ(t_n)Δt/2) e^{-κ t_n/2 - ½∫γ} / D

    Args:
        phi_seq: per-step interaction strengths
        dt: interaction interval Δt
        kappa: cavity loss rate
        eta_m: readout contrast in (0.5, 1]
        c: quadrature convention constant
        t_step: full step duration T; loss per step is κT (defaults to Δt)

    Returns:
        FilterWeights of kind "lossy-optimal"
    """
    phi_seq = np.asarray(phi_seq, dtype=np.float64)
    if not 0.5 < eta_m <= 1.0:
        raise ValueError(f"eta_m must lie in (0.5, 1], got {eta_m}")
    if np.any(phi_seq <= 0):
        raise ValueError("Every phi in the sequence must be positive")
    loss_per_step = kappa * (t_step if t_step is not None else dt)

    if phi_seq.size == 0:
        return FilterWeights(np.zeros(0), c, "lossy-optimal", np.zeros(0), {"dt": dt, "kappa": kappa, "eta_m": eta_m})

    norm = lossy_normalization(phi_seq, loss_per_step)
    if norm < MIN_NORMALIZATION:
        logger.error(f"Lossy filter normalization {norm:.3e} vanished")
        raise DivergentNormalizationError(f"Filter normalization integral is {norm:.3e}")

    exponents = _decay_exponents(phi_seq) + loss_per_step * np.arange(phi_seq.size)
    weights = c * phi_seq * np.exp(-0.5 * exponents) / (eta_m * norm)
    return FilterWeights(
        weights,
        c,
        "lossy-optimal",
        np.arange(phi_seq.size) * dt,
        {"dt": dt, "kappa": kappa, "eta_m": eta_m, "loss_per_step": loss_per_step, "normalization": norm},
    )


def predicted_variance(kappa_over_gamma: float, eta_m: float = 1.0, c: float = DEFAULT_CONVENTION.c) -> float:
    """Variance (1 + κ/γ)/(2η_m²) of the lossy-optimal estimate (c = 1/√2), c²(1 + κ/γ)/η_m² in general."""
    return c ** 2 * (1.0 + kappa_over_gamma) / eta_m ** 2


def chebyshev_bound(delta: float, kappa_over_gamma: float, eta_m: float = 1.0, c: float = DEFAULT_CONVENTION.c) -> float:
    """P(|J - <x_θ>| ≥ δ) ≤ variance / δ², capped at 1."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return float(min(1.0, predicted_variance(kappa_over_gamma, eta_m, c) / delta ** 2))
