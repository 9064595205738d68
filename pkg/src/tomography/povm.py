"""
Binned homodyne POVMs, optionally pre-composed with an amplitude-damping
channel to compensate a known detection efficiency.
"""
from dataclasses import dataclass
from functools import lru_cache
import logging

import numpy as np
from scipy.special import gammaln

from src.fockspace.operators import quadrature_bras
from src.fockspace.states import DEFAULT_CONVENTION, AnyState, QuadratureConvention, as_density
from src.utils.exceptions import CompletenessError

logger = logging.getLogger(__name__)

COMPLETENESS_WARNING = 1e-3
COMPLETENESS_LIMIT = 1e-2
STABLE_EFFICIENCY = 0.5


@dataclass(frozen=True)
class BinnedPovm:
    """POVM elements for the bins of one quadrature angle."""
    theta: float
    centers: np.ndarray
    bin_width: float
    eta: float
    elements: np.ndarray  # (n_bins, n_fock, n_fock)

    @property
    def n_fock(self) -> int:
        return self.elements.shape[1]

    def completeness_deficit(self) -> float:
        total = np.sum(self.elements, axis=0)
        return float(np.max(np.abs(total - np.eye(self.n_fock))))

    def probabilities(self, state: AnyState) -> np.ndarray:
        """Bin probabilities tr(Π_b ρ)."""
        rho = as_density(state).elements
        return np.real(np.einsum("bmn,nm->b", self.elements, rho))


@lru_cache(maxsize=16)
def _damping_operators(eta: float, n_fock: int) -> np.ndarray:
    """
    Kraus operators A_k of the pure-loss channel with transmissivity η:
    <n-k|A_k|n> = √C(n,k) η^{(n-k)/2} (1-η)^{k/2}.
    """
    ops = np.zeros((n_fock, n_fock, n_fock), dtype=np.float64)
    for k in range(n_fock):
        n = np.arange(k, n_fock)
        log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        log_amp = 0.5 * (log_binom + (n - k) * np.log(eta))
        if k > 0:
            log_amp += 0.5 * k * np.log1p(-eta) if eta < 1 else -np.inf
        ops[k, n - k, n] = np.exp(log_amp)
    ops.setflags(write=False)
    return ops


def apply_loss_adjoint(elements: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss Λ_η†(Π) = Σ_k A_k† Π A_k applied to a stack of operators."""
    if eta >= 1.0:
        return elements
    ops = _damping_operators(float(eta), elements.shape[1])
    result = np.zeros_like(elements)
    for a_k in ops:
        if not np.any(a_k):
            continue
        result += a_k.T @ elements @ a_k
    return result


def apply_loss(state: AnyState, eta: float) -> np.ndarray:
    """Schrödinger-picture loss Λ_η(ρ) = Σ_k A_k ρ A_k†."""
    rho = as_density(state).elements
    if eta >= 1.0:
        return np.array(rho)
    ops = _damping_operators(float(eta), rho.shape[0])
    return sum(a_k @ rho @ a_k.T for a_k in ops)


def build_povm(
    theta: float,
    centers: np.ndarray,
    eta: float = 1.0,
    n_fock: int = 30,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    bin_width: float = None,
    check: bool = True
) -> BinnedPovm:
    """
    Binned projectors Π_b = Λ_η†(|x_b><x_b|) Δx for quadrature x_θ.

    Args:
        theta: quadrature angle
        centers: equally spaced bin centers
        eta: detection efficiency to compensate, in (0.5, 1]
        n_fock: Hilbert-space dimension
        convention: quadrature scaling
        bin_width: bin width (defaults to the center spacing)
        check: verify Σ_b Π_b = 1

    Returns:
        BinnedPovm
    """
    centers = np.asarray(centers, dtype=np.float64)
    if bin_width is None:
        if centers.size < 2:
            raise ValueError("Need at least two bin centers to infer the bin width")
        bin_width = float(centers[1] - centers[0])
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if eta <= STABLE_EFFICIENCY:
        logger.warning(f"Efficiency {eta:.3f} <= {STABLE_EFFICIENCY}; compensated POVM is ill-conditioned")

    bras = quadrature_bras(theta, centers, n_fock, convention)
    elements = np.einsum("bm,bn->bmn", bras.conj(), bras) * bin_width
    elements = apply_loss_adjoint(elements, eta)
    povm = BinnedPovm(float(theta), centers, float(bin_width), float(eta), elements)

    if check:
        deficit = povm.completeness_deficit()
        if deficit > COMPLETENESS_LIMIT:
            logger.error(f"POVM at theta={theta:.4f} misses identity by {deficit:.3e}")
            raise CompletenessError(
                f"Binned POVM elements sum to identity only within {deficit:.3e}; widen the bin range"
            )
        if deficit > COMPLETENESS_WARNING:
            logger.warning(f"POVM completeness deficit {deficit:.3e} at theta={theta:.4f}")
    return povm
