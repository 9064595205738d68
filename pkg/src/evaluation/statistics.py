"""
Empirical statistics for measurement samples: reference CDFs, the
Kolmogorov-Smirnov distance, histograms and moment summaries.
"""
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Tuple, Union
import logging

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from src.config.settings import settings
from src.fockspace.operators import support_radius
from src.fockspace.phase_space import husimi_marginal, quadrature_pdf
from src.fockspace.states import DEFAULT_CONVENTION, AnyState, QuadratureConvention
from src.utils.exceptions import EmptySampleError

logger = logging.getLogger(__name__)

CDF_TAIL_TOLERANCE = 1e-6
REFERENCE_MARGIN = 6.0


@dataclass
class EmpiricalSample:
    """Measurement values (real for homodyne, complex for heterodyne) with run metadata."""
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values).ravel()

    def __len__(self) -> int:
        return self.values.size

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def require_values(self) -> None:
        if self.values.size == 0:
            raise EmptySampleError(f"Sample '{self.metadata.get('label', '')}' is empty")

    def real_part(self) -> "EmpiricalSample":
        return EmpiricalSample(np.real(self.values), {**self.metadata, "component": "re"})

    def imag_part(self) -> "EmpiricalSample":
        return EmpiricalSample(np.imag(self.values), {**self.metadata, "component": "im"})

    def mean(self) -> Union[float, complex]:
        self.require_values()
        value = np.mean(self.values)
        return complex(value) if self.is_complex else float(value)

    def variance(self) -> float:
        """Sample variance; for complex values the per-axis variances are summed."""
        self.require_values()
        return float(np.var(self.values, ddof=1)) if self.values.size > 1 else 0.0

    def standard_error(self) -> float:
        return float(np.sqrt(self.variance() / len(self)))

    def summary(self) -> Dict[str, Any]:
        self.require_values()
        if self.is_complex:
            re, im = self.real_part(), self.imag_part()
            return {
                "n": len(self),
                "mean_re": re.mean(), "mean_im": im.mean(),
                "var_re": re.variance(), "var_im": im.variance(),
                "se_re": re.standard_error(), "se_im": im.standard_error(),
            }
        return {
            "n": len(self),
            "mean": self.mean(),
            "variance": self.variance(),
            "standard_error": self.standard_error(),
        }

    def to_frame(self) -> pd.DataFrame:
        if self.is_complex:
            return pd.DataFrame({"J_re": np.real(self.values), "J_im": np.imag(self.values)})
        return pd.DataFrame({"J": self.values})


@dataclass
class ReferenceCdf:
    """Reference cumulative distribution tabulated on an increasing grid."""
    grid: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.cdf = np.asarray(self.cdf, dtype=np.float64)
        if self.grid.shape != self.cdf.shape or self.grid.size < 2:
            raise ValueError("Reference grid and CDF must have equal length >= 2")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("Reference grid must be strictly increasing")
        if np.any(np.diff(self.cdf) < 0):
            raise ValueError("Reference CDF must be non-decreasing")
        if self.cdf[0] > CDF_TAIL_TOLERANCE or self.cdf[-1] < 1.0 - CDF_TAIL_TOLERANCE:
            raise ValueError(
                f"Reference CDF does not span [0, 1] (ends {self.cdf[0]:.2e}, {self.cdf[-1]:.8f}); widen the grid"
            )

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.cdf, left=0.0, right=1.0)

    def quantile(self, u) -> np.ndarray:
        """Inverse CDF by linear interpolation."""
        cdf, index = np.unique(self.cdf, return_index=True)
        return np.interp(u, cdf, self.grid[index])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF sampling."""
        return self.quantile(rng.random(n))

    def density(self) -> Tuple[np.ndarray, np.ndarray]:
        centers = 0.5 * (self.grid[1:] + self.grid[:-1])
        return centers, np.diff(self.cdf) / np.diff(self.grid)

    @classmethod
    def from_density(cls, grid: np.ndarray, density: np.ndarray) -> "ReferenceCdf":
        """Trapezoidal integration of a density, normalized to end at 1."""
        cdf = cumulative_trapezoid(np.clip(density, 0.0, None), grid, initial=0.0)
        if cdf[-1] <= 0:
            raise ValueError("Density integrates to zero on the grid")
        return cls(grid, np.maximum.accumulate(cdf / cdf[-1]))

    @classmethod
    def gaussian(cls, mean: float, variance: float, n_points: Optional[int] = None) -> "ReferenceCdf":
        std = np.sqrt(variance)
        grid = np.linspace(mean - 10 * std, mean + 10 * std, n_points or settings.ks_grid_points)
        cdf = stats.norm.cdf(grid, loc=mean, scale=std)
        cdf[0], cdf[-1] = 0.0, 1.0
        return cls(grid, cdf)


def _peak_location(density_fn, radius: float) -> float:
    coarse = np.linspace(-radius, radius, 801)
    return float(coarse[np.argmax(density_fn(coarse))])


def reference_cdf(
    state: AnyState,
    theta: float = 0.0,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    n_points: Optional[int] = None
) -> ReferenceCdf:
    """
    CDF of the ideal homodyne distribution of x_θ, on ±(x_peak + 6) in
    c = 1/√2 units.
    """
    n_points = n_points or settings.ks_grid_points
    radius = support_radius(state.n_fock, convention)
    peak = _peak_location(lambda x: quadrature_pdf(state, theta, x, convention, check_normalization=False), radius)
    half_width = abs(peak) + REFERENCE_MARGIN * convention.scale
    grid = np.linspace(-half_width, half_width, n_points)
    density = quadrature_pdf(state, theta, grid, convention)
    return ReferenceCdf.from_density(grid, density)


def husimi_reference_cdf(
    state: AnyState,
    axis: str,
    convention: QuadratureConvention = DEFAULT_CONVENTION,
    n_points: Optional[int] = None
) -> ReferenceCdf:
    """CDF of one axis of the ideal heterodyne outcome J_het."""
    n_points = n_points or settings.ks_grid_points
    radius = support_radius(state.n_fock, convention)
    coarse = np.linspace(-radius, radius, 201)
    peak = float(coarse[np.argmax(husimi_marginal(state, axis, coarse, convention, n_integration=201))])
    half_width = abs(peak) + REFERENCE_MARGIN * convention.scale * np.sqrt(2)
    grid = np.linspace(-half_width, half_width, n_points)
    return ReferenceCdf.from_density(grid, husimi_marginal(state, axis, grid, convention))


def ks_statistic(sample: EmpiricalSample, ref: ReferenceCdf) -> float:
    """
    sup_x |F_meas(x) - P_ref(x)|, evaluated on both sides of every sample
    jump and at every reference grid point.
    """
    sample.require_values()
    if sample.is_complex:
        raise ValueError("KS statistic needs a real-valued sample; use real_part() or imag_part()")
    x = np.sort(sample.values.astype(np.float64))
    n = x.size
    ref_at_x = ref(x)
    steps = np.arange(1, n + 1) / n
    d_plus = np.max(steps - ref_at_x)
    d_minus = np.max(ref_at_x - (steps - 1.0 / n))
    empirical_on_grid = np.searchsorted(x, ref.grid, side="right") / n
    d_grid = np.max(np.abs(empirical_on_grid - ref.cdf))
    return float(min(1.0, max(d_plus, d_minus, d_grid)))


def ks_critical_value(n: int, confidence: float = 0.99) -> float:
    """Quantile of the exact one-sample Kolmogorov distribution."""
    return float(stats.kstwo.ppf(confidence, n))


@dataclass
class Histogram:
    """Normalized 1D histogram."""
    density: np.ndarray
    edges: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "left": self.edges[:-1], "right": self.edges[1:], "center": self.centers, "density": self.density,
        })


@dataclass
class Histogram2D:
    """Normalized 2D histogram of complex samples (x along Re, p along Im)."""
    density: np.ndarray
    x_edges: np.ndarray
    y_edges: np.ndarray

    def integral(self) -> float:
        areas = np.outer(np.diff(self.x_edges), np.diff(self.y_edges))
        return float(np.sum(self.density * areas))

    def to_frame(self) -> pd.DataFrame:
        xc = 0.5 * (self.x_edges[1:] + self.x_edges[:-1])
        yc = 0.5 * (self.y_edges[1:] + self.y_edges[:-1])
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        return pd.DataFrame({"x": X.ravel(), "p": Y.ravel(), "density": self.density.ravel()})


def histogram(sample: EmpiricalSample, bins: Union[int, np.ndarray] = 50, value_range=None) -> Union[Histogram, Histogram2D]:
    """
    Density-normalized histogram; complex samples give a 2D histogram.

    Args:
        sample: non-empty sample
        bins: number of bins or explicit edges
        value_range: (low, high), or ((x_low, x_high), (p_low, p_high)) for 2D

    Returns:
        Histogram or Histogram2D
    """
    sample.require_values()
    if sample.is_complex:
        density, x_edges, y_edges = np.histogram2d(
            np.real(sample.values), np.imag(sample.values), bins=bins, range=value_range, density=True
        )
        return Histogram2D(density, x_edges, y_edges)
    density, edges = np.histogram(sample.values, bins=bins, range=value_range, density=True)
    return Histogram(density, edges)
