"""
Collision schedules, measurement bases and trajectory records.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Any, Optional, Sequence, Tuple
import logging

import numpy as np

from src.fockspace.states import CavityState

logger = logging.getLogger(__name__)

PHI_SWAP = np.pi / 2
LOSS_WARNING_THRESHOLD = 0.05
ANGLE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MeasurementBasis:
    """
    Qubit measurement basis.

    Equatorial bases are described by the axis angle θ_q in the qubit xy
    plane (X is θ_q = 0, Y is θ_q = π/2); measuring along θ_q estimates the
    cavity quadrature x_{θ_q + π/2}. Z is a photodetection basis.
    """
    name: str  # X, Y, Z or axis
    theta_q: float = 0.0

    @classmethod
    def x(cls) -> "MeasurementBasis":
        return cls("X", 0.0)

    @classmethod
    def y(cls) -> "MeasurementBasis":
        return cls("Y", np.pi / 2)

    @classmethod
    def z(cls) -> "MeasurementBasis":
        return cls("Z", 0.0)

    @classmethod
    def axis(cls, theta_q: float) -> "MeasurementBasis":
        theta_q = float(np.mod(theta_q, 2 * np.pi))
        if np.isclose(theta_q, 0.0, atol=ANGLE_TOLERANCE) or np.isclose(theta_q, 2 * np.pi, atol=ANGLE_TOLERANCE):
            return cls.x()
        if np.isclose(theta_q, np.pi / 2, atol=ANGLE_TOLERANCE):
            return cls.y()
        return cls("axis", theta_q)

    @classmethod
    def for_quadrature(cls, theta: float) -> "MeasurementBasis":
        """Basis whose outcomes estimate the quadrature x_θ."""
        return cls.axis(theta - np.pi / 2)

    @classmethod
    def parse(cls, label: str) -> "MeasurementBasis":
        """Inverse of `label`: X, Y, Z or A(<theta_q>)."""
        label = label.strip()
        if label in ("X", "Y", "Z"):
            return getattr(cls, label.lower())()
        if label.startswith("A(") and label.endswith(")"):
            return cls.axis(float(label[2:-1]))
        raise ValueError(f"Unknown basis label '{label}'")

    @property
    def is_equatorial(self) -> bool:
        return self.name != "Z"

    @property
    def chi(self) -> float:
        """Relative phase of the excited branch in K_± = (K_g ± e^{iχ} K_e)/√2."""
        return -self.theta_q

    @property
    def quadrature_angle(self) -> float:
        return float(np.mod(self.theta_q + np.pi / 2, 2 * np.pi))

    @property
    def label(self) -> str:
        if self.name == "axis":
            return f"A({self.theta_q:.12g})"
        return self.name

    def matches(self, other: "MeasurementBasis") -> bool:
        if self.is_equatorial != other.is_equatorial:
            return False
        if not self.is_equatorial:
            return True
        delta = np.angle(np.exp(1j * (self.theta_q - other.theta_q)))
        return abs(delta) <= ANGLE_TOLERANCE


@dataclass(frozen=True)
class CollisionSchedule:
    """Per-step coupling, timing, loss and readout parameters of one trajectory."""
    phi: np.ndarray
    basis_seq: Tuple[MeasurementBasis, ...]
    dt: float = 1e-6
    t_step: Optional[float] = None
    kappa: float = 0.0
    p_read_err: float = 0.0

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64, copy=True).ravel()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "basis_seq", tuple(self.basis_seq))
        if self.t_step is None:
            object.__setattr__(self, "t_step", float(self.dt))
        self.validate()

    def validate(self) -> None:
        if np.any(~np.isfinite(self.phi)) or np.any(self.phi <= 0) or np.any(self.phi > PHI_SWAP + 1e-12):
            raise ValueError("Interaction strengths must satisfy 0 < phi <= pi/2")
        if len(self.basis_seq) != self.phi.size:
            raise ValueError(
                f"basis_seq has {len(self.basis_seq)} entries but the schedule has {self.phi.size} steps"
            )
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_step < self.dt:
            raise ValueError(f"t_step ({self.t_step}) must be at least dt ({self.dt})")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if not 0.0 <= self.p_read_err < 0.5:
            raise ValueError(f"p_read_err must lie in [0, 0.5), got {self.p_read_err}")
        if self.loss_per_step > LOSS_WARNING_THRESHOLD:
            logger.warning(
                f"kappa*t_step = {self.loss_per_step:.4f} exceeds {LOSS_WARNING_THRESHOLD}; "
                f"single-jump loss model is inaccurate"
            )

    @property
    def n_bit(self) -> int:
        return self.phi.size

    @property
    def gamma(self) -> np.ndarray:
        """Effective emission rate γ(t_n) = φ_n² / Δt."""
        return self.phi ** 2 / self.dt

    @property
    def loss_per_step(self) -> float:
        return self.kappa * self.t_step

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_bit) * self.dt

    @property
    def is_constant(self) -> bool:
        return self.n_bit == 0 or bool(np.allclose(self.phi, self.phi[0], rtol=0, atol=1e-15))

    @property
    def readout_contrast(self) -> float:
        """η_m with E[recorded] = η_m E[true outcome]."""
        return 1.0 - 2.0 * self.p_read_err

    def replace(self, **changes) -> "CollisionSchedule":
        return replace(self, **changes)

    def for_quadrature(self, theta: float) -> "CollisionSchedule":
        """Same coupling and timing, every step measured along the axis for x_θ."""
        return self.replace(basis_seq=(MeasurementBasis.for_quadrature(theta),) * self.n_bit)

    def with_n_bit(self, n_bit: int) -> "CollisionSchedule":
        """Truncated (or constant-extended) copy used by n_bit sweeps."""
        if n_bit <= self.n_bit:
            return self.replace(phi=self.phi[:n_bit], basis_seq=self.basis_seq[:n_bit])
        if self.n_bit == 0 or not self.is_constant or len({b.label for b in self.basis_seq}) > 2:
            raise ValueError("Only constant schedules can be extended")
        extra = n_bit - self.n_bit
        period = min(len({b.label for b in self.basis_seq}), 2)
        bases = tuple(self.basis_seq[i % period] for i in range(n_bit))
        phi = np.concatenate([self.phi, np.full(extra, self.phi[0])])
        return self.replace(phi=phi, basis_seq=bases)

    def summary(self) -> Dict[str, Any]:
        return {
            "n_bit": self.n_bit,
            "phi_first": float(self.phi[0]) if self.n_bit else None,
            "phi_last": float(self.phi[-1]) if self.n_bit else None,
            "dt": self.dt,
            "t_step": self.t_step,
            "kappa": self.kappa,
            "p_read_err": self.p_read_err,
            "bases": sorted({b.label for b in self.basis_seq}),
        }

    # Constructors

    @classmethod
    def constant(
        cls,
        phi: float,
        n_bit: int,
        basis: MeasurementBasis,
        dt: float = 1e-6,
        t_step: Optional[float] = None,
        kappa: float = 0.0,
        p_read_err: float = 0.0
    ) -> "CollisionSchedule":
        return cls(np.full(n_bit, phi), (basis,) * n_bit, dt, t_step, kappa, p_read_err)

    @classmethod
    def homodyne(cls, phi: float, n_bit: int, theta: float = 0.0, **kwargs) -> "CollisionSchedule":
        """Constant coupling, every step measured along the axis that maps to x_θ."""
        return cls.constant(phi, n_bit, MeasurementBasis.for_quadrature(theta), **kwargs)

    @classmethod
    def heterodyne(cls, phi, n_bit: int, **kwargs) -> "CollisionSchedule":
        """Alternating Y, X measurements; phi may be a scalar or a per-step sequence."""
        bases = tuple(MeasurementBasis.y() if n % 2 == 0 else MeasurementBasis.x() for n in range(n_bit))
        phi = np.broadcast_to(np.asarray(phi, dtype=np.float64), (n_bit,))
        return cls(phi, bases, **kwargs)

    @classmethod
    def ramp(
        cls,
        phi0: float,
        slope: float,
        n_bit: int,
        basis: MeasurementBasis,
        phi_max: float = PHI_SWAP,
        **kwargs
    ) -> "CollisionSchedule":
        """Linear ramp φ(n) = φ0 + slope·n, clipped at phi_max."""
        phi = np.minimum(phi0 + slope * np.arange(n_bit), phi_max)
        return cls(phi, (basis,) * n_bit, **kwargs)

    @classmethod
    def from_sequence(cls, phi: Sequence[float], bases: Sequence[MeasurementBasis], **kwargs) -> "CollisionSchedule":
        return cls(np.asarray(phi, dtype=np.float64), tuple(bases), **kwargs)


@dataclass(frozen=True)
class MeasurementRecord:
    """Recorded outcomes X_n ∈ {+1, -1} of one trajectory."""
    outcomes: np.ndarray
    bases: Tuple[MeasurementBasis, ...]
    times: np.ndarray

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=np.int8)
        if not (outcomes.size == len(self.bases) == np.asarray(self.times).size):
            raise ValueError(
                f"Record vectors differ in length: outcomes={outcomes.size}, "
                f"bases={len(self.bases)}, times={np.asarray(self.times).size}"
            )
        if outcomes.size and not np.all(np.abs(outcomes) == 1):
            raise ValueError("Outcomes must be +1 or -1")
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n_bit(self) -> int:
        return self.outcomes.size

    def bitstring(self) -> str:
        """'0' for +1 and '1' for -1, step order."""
        return "".join("0" if o > 0 else "1" for o in self.outcomes)

    def basis_string(self) -> str:
        return " ".join(b.label for b in self.bases)

    @classmethod
    def from_strings(cls, bits: str, bases: str, dt: float) -> "MeasurementRecord":
        outcomes = np.array([1 if b == "0" else -1 for b in bits], dtype=np.int8)
        basis_seq = tuple(MeasurementBasis.parse(b) for b in bases.split()) if bases else ()
        return cls(outcomes, basis_seq, np.arange(outcomes.size) * dt)


@dataclass
class TrajectoryResult:
    """Record and conditional final state of one trajectory."""
    index: int
    record: MeasurementRecord
    final_state: CavityState
    population_trace: Optional[np.ndarray] = field(default=None, repr=False)
    vacuum_trace: Optional[np.ndarray] = field(default=None, repr=False)
