"""
Assembly of homodyne, heterodyne and photocount values from measurement
records.
"""
from dataclasses import dataclass
from typing import Iterable, List, Optional, Union
import logging

import numpy as np

from src.collision.schedule import MeasurementBasis, MeasurementRecord, TrajectoryResult
from src.records.filters import FilterWeights
from src.utils.exceptions import BasisMismatchError, BasisPatternError, DimensionMismatchError

logger = logging.getLogger(__name__)

HETERODYNE_SCALE = 2.0


@dataclass(frozen=True)
class DyneValue:
    """Measurement value of one trajectory."""
    value: Union[float, complex]
    angle: Optional[float] = None  # quadrature angle, homodyne only

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"Measurement value {self.value} is not finite")


def _records(items: Iterable) -> List[MeasurementRecord]:
    return [item.record if isinstance(item, TrajectoryResult) else item for item in items]


def _check_length(record: MeasurementRecord, weights: FilterWeights) -> None:
    if record.n_bit != weights.n_bit:
        raise DimensionMismatchError(
            f"Record has {record.n_bit} steps but the filter has {weights.n_bit}"
        )


def _check_homodyne_bases(record: MeasurementRecord, theta: float) -> None:
    expected = MeasurementBasis.for_quadrature(theta)
    for n, basis in enumerate(record.bases):
        if not basis.matches(expected):
            raise BasisMismatchError(
                f"Step {n} was measured in {basis.label}; quadrature angle {theta:.4f} needs {expected.label}"
            )


def _check_heterodyne_bases(record: MeasurementRecord) -> None:
    y, x = MeasurementBasis.y(), MeasurementBasis.x()
    for n, basis in enumerate(record.bases):
        expected = y if n % 2 == 0 else x
        if not basis.matches(expected):
            raise BasisPatternError(f"Step {n} was measured in {basis.label}, expected {expected.label}")


def assemble_homodyne(record: MeasurementRecord, weights: FilterWeights, theta: float = 0.0) -> DyneValue:
    """
    J_hom = Σ_n f(t_n) X_n.

    Args:
        record: measurement record, every step on the axis mapping to x_θ
        weights: filter weights with one entry per step
        theta: quadrature angle

    Returns:
        DyneValue with a real value
    """
    _check_length(record, weights)
    _check_homodyne_bases(record, theta)
    return DyneValue(float(np.dot(weights.weights, record.outcomes)), theta)


def _paired_weights(n_bit: int, weights: FilterWeights):
    n_pairs = n_bit // 2
    if n_bit % 2:
        logger.warning(f"Heterodyne record has odd length {n_bit}; dropping the unpaired final step")
    return n_pairs, weights.weights[0:2 * n_pairs:2], weights.weights[1:2 * n_pairs:2]


def assemble_heterodyne(record: MeasurementRecord, weights: FilterWeights) -> DyneValue:
    """
    J_het = 2 Σ_k [f(t_{2k}) (-Y_{2k}) + i f(t_{2k+1}) X_{2k+1}].

    Y steps estimate -x, so their sign is flipped and Re(J) estimates x.
    """
    _check_length(record, weights)
    _check_heterodyne_bases(record)
    n_pairs, f_y, f_x = _paired_weights(record.n_bit, weights)
    y = record.outcomes[0:2 * n_pairs:2]
    x = record.outcomes[1:2 * n_pairs:2]
    value = HETERODYNE_SCALE * (np.dot(f_y, -y) + 1j * np.dot(f_x, x))
    return DyneValue(complex(value))


def assemble_photocount(record: MeasurementRecord) -> int:
    """Number of excited (-1) outcomes in a Z-basis record."""
    for n, basis in enumerate(record.bases):
        if basis.is_equatorial:
            raise BasisMismatchError(f"Step {n} was measured in {basis.label}; photocounting needs Z")
    return int(np.sum(record.outcomes < 0))


def _outcome_matrix(records: List[MeasurementRecord], n_bit: int) -> np.ndarray:
    if not records:
        return np.zeros((0, n_bit), dtype=np.float64)
    return np.vstack([r.outcomes for r in records]).astype(np.float64)


def homodyne_samples(items: Iterable, weights: FilterWeights, theta: float = 0.0) -> np.ndarray:
    """Vector of J_hom over an ensemble of records or trajectory results."""
    records = _records(items)
    checked = set()
    for record in records:
        _check_length(record, weights)
        if id(record.bases) not in checked:
            _check_homodyne_bases(record, theta)
            checked.add(id(record.bases))
    return _outcome_matrix(records, weights.n_bit) @ weights.weights


def heterodyne_samples(items: Iterable, weights: FilterWeights) -> np.ndarray:
    """Complex vector of J_het over an ensemble."""
    records = _records(items)
    checked = set()
    for record in records:
        _check_length(record, weights)
        if id(record.bases) not in checked:
            _check_heterodyne_bases(record)
            checked.add(id(record.bases))
    outcomes = _outcome_matrix(records, weights.n_bit)
    n_pairs, f_y, f_x = _paired_weights(weights.n_bit, weights)
    y = outcomes[:, 0:2 * n_pairs:2]
    x = outcomes[:, 1:2 * n_pairs:2]
    return HETERODYNE_SCALE * (-(y @ f_y) + 1j * (x @ f_x))


def photocount_samples(items: Iterable) -> np.ndarray:
    return np.array([assemble_photocount(r) for r in _records(items)], dtype=np.int64)
