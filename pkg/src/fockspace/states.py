"""
Cavity states in a truncated Fock basis.
"""
from dataclasses import dataclass, field
from typing import Union
import logging

import numpy as np
from scipy.linalg import eigh, expm

from src.utils.exceptions import DimensionMismatchError, TruncationError

logger = logging.getLogger(__name__)

TOP_LEVEL_TOLERANCE = 1e-8
NORM_TOLERANCE = 1e-10
STATE_KINDS = ("vacuum", "fock", "coherent", "displaced", "cat", "squeezed")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class QuadratureConvention:
    """Scaling constant c of x_θ = c (a† e^{iθ} + a e^{-iθ})."""
    c: float = 1 / np.sqrt(2)

    def __post_init__(self):
        if not any(np.isclose(self.c, allowed) for allowed in (0.5, 1 / np.sqrt(2), 1.0)):
            raise ValueError(f"Unsupported quadrature convention c={self.c}")

    @property
    def vacuum_variance(self) -> float:
        return self.c ** 2

    @property
    def scale(self) -> float:
        """Ratio between this convention and the dimensionless (a + a†)/√2 quadrature."""
        return self.c * np.sqrt(2)

    @classmethod
    def from_name(cls, name: str) -> "QuadratureConvention":
        table = {"half": 0.5, "sqrt_half": 1 / np.sqrt(2), "unit": 1.0}
        if name not in table:
            raise ValueError(f"Unknown convention '{name}', expected one of {sorted(table)}")
        return cls(table[name])


DEFAULT_CONVENTION = QuadratureConvention()


@dataclass(frozen=True)
class CavityState:
    """Pure cavity state: amplitudes c_n over |0>..|n_fock-1>."""
    amps: np.ndarray
    label: str = ""

    def __post_init__(self):
        amps = np.asarray(self.amps)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError(f"Amplitude vector must be 1-D and non-empty, got shape {amps.shape}")
        object.__setattr__(self, "amps", _frozen(amps))

    @property
    def n_fock(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "CavityState":
        norm = self.norm
        if norm == 0.0:
            raise ZeroDivisionError("Cannot normalize the zero vector")
        return CavityState(self.amps / norm, self.label)

    def photon_distribution(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.n_fock), self.photon_distribution()))

    def expectation(self, operator: np.ndarray) -> complex:
        if operator.shape != (self.n_fock, self.n_fock):
            raise DimensionMismatchError(
                f"Operator shape {operator.shape} does not match n_fock={self.n_fock}"
            )
        return complex(np.vdot(self.amps, operator @ self.amps))

    def phase_rotated(self, theta: float) -> "CavityState":
        """Multiply c_n by e^{-inθ}."""
        return CavityState(self.amps * np.exp(-1j * theta * np.arange(self.n_fock)), self.label)

    def top_population(self) -> float:
        return float(abs(self.amps[-1]) ** 2)

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed cavity state."""
    elements: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        elements = np.asarray(self.elements)
        if elements.ndim != 2 or elements.shape[0] != elements.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {elements.shape}")
        object.__setattr__(self, "elements", _frozen(elements))
        if self.validate:
            self.check()

    @property
    def n_fock(self) -> int:
        return self.elements.shape[0]

    def check(self, tol: float = 1e-10) -> None:
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("Density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > tol:
            raise ValueError(f"Density matrix trace is {np.trace(rho).real}, expected 1")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-9:
            raise ValueError("Density matrix has negative eigenvalues")

    def spectral(self) -> tuple:
        """Eigenvalues (clipped at zero) and eigenvectors as columns."""
        weights, vectors = eigh(self.elements)
        return np.clip(weights, 0.0, None), vectors

    def photon_distribution(self) -> np.ndarray:
        return np.real(np.diag(self.elements))

    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.n_fock), self.photon_distribution()))

    def expectation(self, operator: np.ndarray) -> complex:
        if operator.shape != self.elements.shape:
            raise DimensionMismatchError(
                f"Operator shape {operator.shape} does not match n_fock={self.n_fock}"
            )
        return complex(np.trace(self.elements @ operator))

    @classmethod
    def from_states(cls, states, weights=None) -> "DensityMatrix":
        """Incoherent mixture of pure states (uniform weights by default)."""
        states = list(states)
        if not states:
            raise ValueError("Need at least one state for a mixture")
        weights = np.full(len(states), 1.0 / len(states)) if weights is None else np.asarray(weights)
        rho = sum(w * np.outer(s.amps, s.amps.conj()) for w, s in zip(weights, states))
        rho = 0.5 * (rho + rho.conj().T)
        return cls(rho / np.trace(rho).real)


AnyState = Union[CavityState, DensityMatrix]


def as_density(state: AnyState) -> DensityMatrix:
    return state.density_matrix() if isinstance(state, CavityState) else state


def _coherent_amplitudes(alpha: complex, n_fock: int) -> np.ndarray:
    amps = np.zeros(n_fock, dtype=np.complex128)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, n_fock):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def _generated_amplitudes(n_fock: int, alpha: complex, r: float, padding: int) -> np.ndarray:
    """D(α) S(r) |0> built in an enlarged space, then truncated."""
    dim = n_fock + padding
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(np.complex128)
    adag = a.conj().T
    vector = np.zeros(dim, dtype=np.complex128)
    vector[0] = 1.0
    if r != 0.0:
        vector = expm(0.5 * r * (a @ a - adag @ adag)) @ vector
    if alpha != 0:
        vector = expm(alpha * adag - np.conj(alpha) * a) @ vector
    return vector[:n_fock]


def prepare_state(
    kind: str,
    n_fock: int,
    alpha: complex = 0.0,
    n: int = 0,
    r: float = 0.0,
    check_truncation: bool = True
) -> CavityState:
    """
    Prepare a normalized cavity state.

    Args:
        kind: one of vacuum, fock, coherent (alias displaced), cat, squeezed
        n_fock: truncation dimension
        alpha: coherent amplitude (coherent, cat, displaced squeezed)
        n: photon number for Fock states
        r: squeezing parameter (x variance e^{-2r}/2 for c=1/√2)
        check_truncation: raise if the top level holds ≥ 1e-8 population

    Returns:
        CavityState
    """
    if n_fock < 1:
        raise ValueError(f"n_fock must be positive, got {n_fock}")
    if not np.isfinite(abs(alpha)):
        raise ValueError("alpha must be finite")

    amps = np.zeros(n_fock, dtype=np.complex128)
    if kind == "vacuum":
        amps[0] = 1.0
        label = "vacuum"
    elif kind == "fock":
        if not 0 <= n < n_fock:
            raise TruncationError(f"Fock level {n} does not fit in n_fock={n_fock}")
        amps[n] = 1.0
        label = f"fock({n})"
    elif kind in ("coherent", "displaced"):
        amps = _coherent_amplitudes(alpha, n_fock)
        label = f"coherent({alpha})"
    elif kind == "cat":
        parity = 1.0 + (-1.0) ** np.arange(n_fock)
        amps = _coherent_amplitudes(alpha, n_fock) * parity
        amps /= np.sqrt(2 * (1 + np.exp(-2 * abs(alpha) ** 2)))
        label = f"cat({alpha})"
    elif kind == "squeezed":
        amps = _generated_amplitudes(n_fock, alpha, r, padding=max(40, n_fock))
        label = f"squeezed(r={r}, alpha={alpha})"
    else:
        raise ValueError(f"Unknown state kind '{kind}', expected one of {STATE_KINDS}")

    top = float(abs(amps[-1]) ** 2)
    if check_truncation and n_fock > 1 and top >= TOP_LEVEL_TOLERANCE:
        raise TruncationError(
            f"{label} leaves population {top:.2e} in level {n_fock - 1}; increase n_fock"
        )

    state = CavityState(amps, label).normalized()
    logger.debug(f"Prepared {label} in n_fock={n_fock}, <n>={state.mean_photon_number():.4f}")
    return state


def from_amplitudes(amps, label: str = "custom") -> CavityState:
    """Wrap user amplitudes as a normalized state."""
    return CavityState(np.asarray(amps, dtype=np.complex128), label).normalized()


def random_state(n_fock: int, n_populated: int, rng: np.random.Generator) -> CavityState:
    """Random pure state spread over the lowest n_populated levels."""
    amps = np.zeros(n_fock, dtype=np.complex128)
    amps[:n_populated] = rng.normal(size=n_populated) + 1j * rng.normal(size=n_populated)
    return CavityState(amps, f"random({n_populated})").normalized()


def fidelity(rho: AnyState, psi: CavityState) -> float:
    """F = <ψ|ρ|ψ>, clipped to [0, 1]."""
    rho = as_density(rho)
    if rho.n_fock != psi.n_fock:
        raise DimensionMismatchError(
            f"Density matrix dimension {rho.n_fock} does not match state dimension {psi.n_fock}"
        )
    value = np.real(np.vdot(psi.amps, rho.elements @ psi.amps))
    return float(np.clip(value, 0.0, 1.0))


def trace_distance(first: AnyState, second: AnyState) -> float:
    first, second = as_density(first), as_density(second)
    if first.n_fock != second.n_fock:
        raise DimensionMismatchError("Trace distance needs equal dimensions")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(first.elements - second.elements))))
