"""
Parameter sweeps: how KS distance, reconstruction infidelity and residual
cavity population depend on n_bit, φ, n_traj, loss and readout error.
"""
from dataclasses import dataclass
from typing import Dict, Any, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from src.collision.engine import run_ensemble
from src.collision.schedule import CollisionSchedule, TrajectoryResult
from src.evaluation.statistics import EmpiricalSample, ReferenceCdf, ks_statistic, reference_cdf
from src.fockspace.states import DEFAULT_CONVENTION, CavityState, QuadratureConvention
from src.records.assembly import homodyne_samples
from src.records.efficiency import efficiency_from_schedule, readout_efficiency, steps_to_vacuum
from src.records.filters import FilterWeights, filter_constant, filter_lossy_optimal, filter_time_dependent
from src.tomography.mle import TomographyDataset, mle_reconstruct
from src.utils.rng import derive_seed

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("n_bit", "phi", "n_traj", "p_read_err", "kappa")
VACUUM_RULES = ("population", "vacuum")
FILTER_CHOICES = ("auto", "constant", "time-dependent", "lossy-optimal")


def filter_for_schedule(
    schedule: CollisionSchedule,
    kind: str = "auto",
    convention: QuadratureConvention = DEFAULT_CONVENTION
) -> FilterWeights:
    """
    Filter weights matching a schedule.

    "auto" picks the constant filter for constant coupling and the
    time-dependent one otherwise; both leave loss and readout contrast
    to the tomography POVM.
    """
    if kind not in FILTER_CHOICES:
        raise ValueError(f"Unknown filter '{kind}', expected one of {FILTER_CHOICES}")
    c = convention.c
    if kind == "auto":
        kind = "constant" if schedule.is_constant and schedule.n_bit else "time-dependent"
    if kind == "constant":
        if not schedule.is_constant:
            raise ValueError("Constant filter requested for a non-constant schedule")
        phi = float(schedule.phi[0]) if schedule.n_bit else 1.0
        return filter_constant(phi, schedule.dt, schedule.n_bit, c)
    if kind == "time-dependent":
        return filter_time_dependent(schedule.phi, schedule.dt, c)
    return filter_lossy_optimal(
        schedule.phi, schedule.dt, schedule.kappa, schedule.readout_contrast, c, schedule.t_step
    )


def sample_homodyne(
    state: CavityState,
    schedule: CollisionSchedule,
    theta: float,
    n_traj: int,
    seed: int,
    weights: Optional[FilterWeights] = None,
    workers: Optional[int] = None,
    offset: int = 0
) -> Tuple[EmpiricalSample, List[TrajectoryResult]]:
    """Run a homodyne ensemble at angle θ and assemble its J values."""
    schedule = schedule.for_quadrature(theta)
    weights = weights or filter_for_schedule(schedule)
    results = run_ensemble(state, schedule, n_traj, seed, workers, offset=offset)
    values = homodyne_samples(results, weights, theta) if results else np.zeros(0)
    metadata = {"label": state.label, "theta": theta, "seed": seed, "schedule": schedule.summary()}
    return EmpiricalSample(values, metadata), results


def vacuum_crossing(
    trace: np.ndarray,
    fraction: float = 0.95,
    initial: Optional[float] = None,
    mode: str = "population"
) -> Optional[int]:
    """
    Number of steps after which an ensemble-mean trace meets the
    emptied-cavity criterion.

    Args:
        trace: value after each step (population or vacuum population)
        fraction: 0.95 for the 95% vacuum rule
        initial: <a†a> before the first step (population mode)
        mode: "population" (<a†a> ≤ (1 - fraction) initial) or "vacuum" (P_0 ≥ fraction)

    Returns:
        steps, or None if never reached
    """
    trace = np.asarray(trace, dtype=np.float64)
    if mode == "population":
        if initial is None:
            raise ValueError("Population mode needs the initial photon number")
        reached = trace <= (1.0 - fraction) * initial
    elif mode == "vacuum":
        reached = trace >= fraction
    else:
        raise ValueError(f"Unknown mode '{mode}'")
    if not np.any(reached):
        return None
    return int(np.argmax(reached)) + 1


def first_crossing(frame: pd.DataFrame, column: str, threshold: float, parameter: str = "param") -> Optional[float]:
    """First sweep value at which `column` reaches `threshold`."""
    reached = frame[frame[column] >= threshold]
    if reached.empty:
        return None
    return float(reached[parameter].iloc[0])


@dataclass
class SweepSpec:
    """One parameter sweep around a base schedule."""
    parameter: str
    values: Sequence[float]
    state: CavityState
    schedule: CollisionSchedule
    n_traj: int
    seed: int
    repetitions: int = 1
    theta: float = 0.0
    n_angles: int = 0
    compensate: bool = False
    filter_kind: str = "auto"
    vacuum_fraction: Optional[float] = None
    vacuum_rule: str = "population"
    convention: QuadratureConvention = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"Cannot sweep '{self.parameter}', expected one of {SWEEP_PARAMETERS}")
        if self.vacuum_rule not in VACUUM_RULES:
            raise ValueError(f"Unknown vacuum rule '{self.vacuum_rule}', expected one of {VACUUM_RULES}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")

    def point(self, value: float) -> Tuple[CollisionSchedule, int]:
        """Schedule and trajectory count of one sweep point."""
        schedule, n_traj = self.schedule, self.n_traj
        if self.parameter == "n_bit":
            schedule = schedule.with_n_bit(int(value))
        elif self.parameter == "phi":
            schedule = schedule.replace(phi=np.full(schedule.n_bit, float(value)))
        elif self.parameter == "n_traj":
            n_traj = int(value)
        elif self.parameter == "p_read_err":
            schedule = schedule.replace(p_read_err=float(value))
        elif self.parameter == "kappa":
            schedule = schedule.replace(kappa=float(value))

        if self.vacuum_fraction is not None and self.parameter != "n_bit":
            # "population": <a†a>_N ≤ (1 - fraction) <a†a>_0; "vacuum": P_0 ≥ fraction
            distribution = self.state.photon_distribution() if self.vacuum_rule == "vacuum" else None
            n_bit = steps_to_vacuum(schedule.phi, schedule.loss_per_step, self.vacuum_fraction, distribution)
            if n_bit is None:
                raise ValueError(f"Sweep point {self.parameter}={value} never empties the cavity")
            schedule = schedule.with_n_bit(n_bit)
        return schedule, n_traj


@dataclass
class SweepPoint:
    """Measured quantities for one (sweep value, repetition)."""
    param: float
    repetition: int
    n_bit: int
    ks: float
    final_population: float
    vacuum_fraction: float
    eta: float
    infidelity: Optional[float] = None
    infidelity_compensated: Optional[float] = None


class SweepTracker:
    """Collects sweep points and aggregates them per sweep value."""

    def __init__(self, parameter: str):
        self.parameter = parameter
        self.points: List[SweepPoint] = []

    def record_point(self, point: SweepPoint):
        self.points.append(point)
        logger.info(
            f"{self.parameter}={point.param:g} rep {point.repetition}: KS={point.ks:.4f}, "
            f"<n>={point.final_population:.4f}, infidelity={point.infidelity}"
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per sweep value with mean and std over repetitions."""
        if not self.points:
            return pd.DataFrame()
        raw = pd.DataFrame([p.__dict__ for p in self.points])
        metrics = ["ks", "final_population", "vacuum_fraction", "infidelity", "infidelity_compensated"]
        grouped = raw.groupby("param", sort=False)
        table = grouped[["n_bit", "eta"]].first()
        for metric in metrics:
            values = raw[metric].astype(float)
            table[f"{metric}_mean"] = values.groupby(raw["param"], sort=False).mean()
            table[f"{metric}_std"] = values.groupby(raw["param"], sort=False).std(ddof=0)
        table["repetitions"] = grouped.size()
        table = table.reset_index()
        table.insert(0, "parameter", self.parameter)
        return table

    def get_summary_stats(self) -> Dict[str, Any]:
        if not self.points:
            return {}
        table = self.to_frame()
        best = table.loc[table["ks_mean"].idxmin()]
        summary = {
            "parameter": self.parameter,
            "points": len(table),
            "repetitions": int(table["repetitions"].max()),
            "best_ks_param": float(best["param"]),
            "best_ks": float(best["ks_mean"]),
        }
        if table["infidelity_mean"].notna().any():
            best_fid = table.loc[table["infidelity_mean"].idxmin()]
            summary["best_infidelity_param"] = float(best_fid["param"])
            summary["best_infidelity"] = float(best_fid["infidelity_mean"])
        return summary


def _tomography_infidelities(spec, schedule, n_traj, seed, first_sample, workers):
    angles = np.arange(spec.n_angles) * np.pi / spec.n_angles
    weights = filter_for_schedule(schedule, spec.filter_kind, spec.convention)
    samples = [(float(angles[0]), first_sample)]
    for k, angle in enumerate(angles[1:], start=1):
        sample, _ = sample_homodyne(spec.state, schedule, angle, n_traj, seed, weights, workers, offset=k * n_traj)
        samples.append((float(angle), sample))

    n_fock = spec.state.n_fock
    plain = mle_reconstruct(TomographyDataset(samples, n_fock, 1.0, spec.convention), target=spec.state)
    compensated = None
    if spec.compensate:
        eta = efficiency_from_schedule(schedule, readout_efficiency(schedule.p_read_err)).eta_det
        result = mle_reconstruct(TomographyDataset(samples, n_fock, eta, spec.convention), target=spec.state)
        compensated = 1.0 - result.fidelity_vs_target
    return 1.0 - plain.fidelity_vs_target, compensated


def convergence_study(spec: SweepSpec, workers: Optional[int] = None) -> pd.DataFrame:
    """
    Run every sweep point `repetitions` times.

    Repetition r uses seed derive_seed(seed, r) at every sweep point, so
    nested sweeps (n_bit) share their random streams.

    Returns:
        DataFrame with one row per sweep value (see SweepTracker.to_frame)
    """
    tracker = SweepTracker(spec.parameter)
    theta = 0.0 if spec.n_angles else spec.theta
    reference: ReferenceCdf = reference_cdf(spec.state, theta, spec.convention)
    logger.info(
        f"Sweeping {spec.parameter} over {len(spec.values)} values x {spec.repetitions} repetitions "
        f"for {spec.state.label}"
    )

    for value in spec.values:
        schedule, n_traj = spec.point(value)
        eta = efficiency_from_schedule(schedule).eta
        weights = filter_for_schedule(schedule.for_quadrature(theta), spec.filter_kind, spec.convention)
        for repetition in range(spec.repetitions):
            seed = derive_seed(spec.seed, repetition)
            sample, results = sample_homodyne(spec.state, schedule, theta, n_traj, seed, weights, workers)
            finals = [r.final_state for r in results]
            point = SweepPoint(
                param=float(value),
                repetition=repetition,
                n_bit=schedule.n_bit,
                ks=ks_statistic(sample, reference),
                final_population=float(np.mean([s.mean_photon_number() for s in finals])),
                vacuum_fraction=float(np.mean([s.photon_distribution()[0] for s in finals])),
                eta=eta,
            )
            if spec.n_angles:
                point.infidelity, point.infidelity_compensated = _tomography_infidelities(
                    spec, schedule, n_traj, seed, sample, workers
                )
            tracker.record_point(point)

    return tracker.to_frame()
