"""
Calibration of the efficiency η_q equivalent to qubit readout error.

A readout flip shrinks the filtered homodyne signal towards zero, which
looks like a vacuum admixture. Fitting the center of a coherent-state
histogram at each readout fidelity and comparing it with the error-free
center gives η_q = (center / center_ideal)².
"""
from typing import Optional, Sequence
import logging

import numpy as np
import pandas as pd
from scipy import stats

from src.collision.engine import run_ensemble
from src.collision.schedule import CollisionSchedule
from src.fockspace.states import CavityState
from src.records.assembly import homodyne_samples
from src.records.filters import filter_time_dependent
from src.utils.exceptions import FitError

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 10


def fit_gaussian_center(values: np.ndarray) -> tuple:
    """Maximum-likelihood Gaussian (center, width) of a sample."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < MIN_FIT_SAMPLES:
        raise FitError(f"Need at least {MIN_FIT_SAMPLES} samples for a Gaussian fit, got {values.size}")
    center, width = stats.norm.fit(values)
    if not np.isfinite(center) or width <= 0:
        raise FitError(f"Gaussian fit failed (center={center}, width={width})")
    return float(center), float(width)


def calibrate_eta_q(
    state: CavityState,
    schedule: CollisionSchedule,
    readout_fidelities: Sequence[float],
    n_traj: int,
    seed: int,
    theta: float = 0.0,
    workers: Optional[int] = None
) -> pd.DataFrame:
    """
    Sweep readout fidelity and report the equivalent efficiency.

    Every sweep point reuses the same random streams, so the state
    trajectories are identical and only the mis-read bits differ.

    Args:
        state: coherent input state with a nonzero center along x_θ
        schedule: homodyne schedule for angle θ (its p_read_err is replaced)
        readout_fidelities: values of 1 - p_read_err in (0.5, 1]
        n_traj: trajectories per point
        seed: global seed shared by all points
        theta: quadrature angle

    Returns:
        DataFrame with columns readout_fidelity, p_read_err, center, width, eta_q
    """
    weights = filter_time_dependent(schedule.phi, schedule.dt)

    def center_at(p_read_err: float):
        results = run_ensemble(state, schedule.replace(p_read_err=p_read_err), n_traj, seed, workers, False)
        return fit_gaussian_center(homodyne_samples(results, weights, theta))

    ideal_center, ideal_width = center_at(0.0)
    if abs(ideal_center) < 1e-9:
        raise FitError("Error-free center is zero; calibrate with a displaced state")

    rows = []
    for readout_fidelity in readout_fidelities:
        p_read_err = 1.0 - readout_fidelity
        center, width = (ideal_center, ideal_width) if p_read_err == 0 else center_at(p_read_err)
        eta_q = (center / ideal_center) ** 2
        rows.append({
            "readout_fidelity": readout_fidelity,
            "p_read_err": p_read_err,
            "center": center,
            "width": width,
            "eta_q": eta_q,
        })
        logger.info(f"Readout fidelity {readout_fidelity:.4f}: eta_q = {eta_q:.4f}")
    return pd.DataFrame(rows)
