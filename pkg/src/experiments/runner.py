"""
Experiment orchestration behind the command-line subcommands.
"""
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Union
import logging
import time

import numpy as np
import pandas as pd

from src.collision.engine import run_ensemble
from src.collision.schedule import CollisionSchedule, MeasurementBasis
from src.config.settings import settings
from src.data_preparation.config_loader import ExperimentConfig
from src.data_preparation.datasets import (
    build_manifest,
    read_values,
    records_frame,
    values_frame,
    write_json,
    write_records,
    write_table,
    write_values,
)
from src.evaluation.convergence import SweepSpec, convergence_study, filter_for_schedule
from src.evaluation.statistics import (
    EmpiricalSample,
    histogram,
    husimi_reference_cdf,
    ks_critical_value,
    ks_statistic,
    reference_cdf,
)
from src.fockspace.operators import quadrature_operator
from src.phase_estimation.estimators import estimates_frame, estimates_sample, run_phase_estimation
from src.records.assembly import heterodyne_samples, homodyne_samples
from src.records.efficiency import EfficiencyCompensation, efficiency_from_schedule, readout_efficiency
from src.tomography.mle import TomographyDataset, mle_reconstruct

logger = logging.getLogger(__name__)

MISMATCH_STANDARD_ERRORS = 5.0
HISTOGRAM_BINS = 60


class ExperimentRunner:
    """Runs one configured experiment and writes its datasets."""

    def __init__(self, config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None):
        """Initialize the runner from a validated configuration."""
        self.config = config
        self.out_dir = Path(out_dir or config.output.directory)
        self.state = config.state.build()
        self.convention = config.state.quadrature_convention()
        self.workers = config.run.workers or settings.workers
        logger.info(f"ExperimentRunner initialized for '{config.name}' ({self.state.label}) -> {self.out_dir}")

    def _path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.config.output.prefix}_{suffix}"

    def _finish(self, command: str, outputs: Dict[str, Path], started: float, summary: Dict[str, Any]) -> Dict[str, Any]:
        outputs = {key: str(path) for key, path in outputs.items()}
        manifest = build_manifest(
            self.config.to_dict(), command, outputs, time.perf_counter() - started, summary, self.workers
        )
        outputs["manifest"] = str(write_json(manifest, self._path(f"{command}_manifest.json")))
        logger.info(f"{command} complete: {len(outputs)} files in {self.out_dir}")
        return {"command": command, "outputs": outputs, "summary": summary}

    def homodyne_schedule(self, theta: float) -> CollisionSchedule:
        return self.config.schedule.build(MeasurementBasis.for_quadrature(theta))

    def _collect(self) -> Tuple[List, List[Tuple[Optional[float], EmpiricalSample]], Any]:
        """Run the ensembles of a simulate call: (record frames, samples, filter)."""
        run = self.config.run
        frames, samples, weights = [], [], None
        if run.mode == "heterodyne":
            schedule = self.config.schedule.build_heterodyne()
            weights = filter_for_schedule(schedule, run.filter, self.convention)
            results = run_ensemble(self.state, schedule, run.n_traj, run.seed, self.workers, False)
            values = heterodyne_samples(results, weights) if results else np.zeros(0, dtype=np.complex128)
            frames.append(records_frame(results))
            samples.append((None, EmpiricalSample(values, {"label": self.state.label, "mode": run.mode})))
            return frames, samples, weights

        for k, theta in enumerate(run.angles):
            schedule = self.homodyne_schedule(theta)
            weights = filter_for_schedule(schedule, run.filter, self.convention)
            # angle k continues the trajectory numbering so angles never share streams
            results = run_ensemble(
                self.state, schedule, run.n_traj, run.seed, self.workers, False, offset=k * run.n_traj
            )
            values = homodyne_samples(results, weights, theta) if results else np.zeros(0)
            frames.append(records_frame(results, theta))
            samples.append((theta, EmpiricalSample(values, {"label": self.state.label, "theta": theta})))
        return frames, samples, weights

    def simulate(self) -> Dict[str, Any]:
        """
        Generate a dataset: raw records, assembled values, filter and manifest.

        Returns:
            dict with command, output paths and a moment summary
        """
        if self.config.run.mode == "phase-est":
            return self.phase_est()
        started = time.perf_counter()
        frames, samples, weights = self._collect()
        outputs = {
            "records": write_records(pd.concat(frames, ignore_index=True), self._path("records.csv")),
            "values": write_values(values_frame(samples), self._path("values.csv")),
            "filter": weights.to_csv(self._path("filter.csv")),
        }
        summary = {
            "mode": self.config.run.mode,
            "n_traj": self.config.run.n_traj,
            "efficiency": self.efficiency().to_dict(),
            "samples": [
                {"theta": theta, **(sample.summary() if len(sample) else {"n": 0})} for theta, sample in samples
            ],
        }
        return self._finish("simulate", outputs, started, summary)

    def efficiency(self) -> EfficiencyCompensation:
        return efficiency_from_schedule(
            self.homodyne_schedule(0.0), readout_efficiency(self.config.schedule.p_read_err)
        )

    def _expected_mean(self, theta: float) -> float:
        """<x_θ> as seen through the filter: shrunk by √η_det unless the filter compensates loss."""
        operator = quadrature_operator(theta, self.convention, self.state.n_fock)
        scale = 1.0 if self.config.run.filter == "lossy-optimal" else np.sqrt(self.efficiency().eta_det)
        return float(scale * np.real(self.state.expectation(operator)))

    def analyze(self, values_path: Union[str, Path]) -> Dict[str, Any]:
        """
        KS statistics, histograms and moments of a values file against the
        configured state.
        """
        started = time.perf_counter()
        outputs, rows = {}, []
        for theta, sample in read_values(values_path):
            sample.require_values()
            if sample.is_complex:
                for axis, part in (("re", sample.real_part()), ("im", sample.imag_part())):
                    ks = ks_statistic(part, husimi_reference_cdf(self.state, axis, self.convention))
                    rows.append({"theta": None, "axis": axis, "ks": ks, **part.summary()})
                outputs["histogram"] = write_table(histogram(sample, HISTOGRAM_BINS).to_frame(), self._path("histogram2d.csv"))
                continue

            ks = ks_statistic(sample, reference_cdf(self.state, theta, self.convention))
            row = {"theta": theta, "axis": "x", "ks": ks, **sample.summary()}
            expected = self._expected_mean(theta)
            if abs(row["mean"] - expected) > MISMATCH_STANDARD_ERRORS * max(row["standard_error"], 1e-12):
                logger.warning(
                    f"Sample mean {row['mean']:.4f} at theta={theta:.4f} is far from <x_theta>={expected:.4f} "
                    f"of {self.state.label}; the reference state may not match the data"
                )
            rows.append(row)
            outputs[f"histogram_{len(outputs)}"] = write_table(
                histogram(sample, HISTOGRAM_BINS).to_frame().assign(theta=theta),
                self._path(f"histogram_theta{theta:.4f}.csv"),
            )

        table = pd.DataFrame(rows)
        table["ks_critical_99"] = [ks_critical_value(int(n)) for n in table["n"]]
        outputs["statistics"] = write_table(table, self._path("statistics.csv"))
        summary = {"max_ks": float(table["ks"].max()), "rows": table.to_dict(orient="records")}
        return self._finish("analyze", outputs, started, summary)

    def reconstruct(self, values_path: Union[str, Path], eta: Optional[float] = None) -> Dict[str, Any]:
        """
        Maximum-likelihood state from a multi-angle values file.

        Args:
            values_path: values CSV with ≥ 2 angles
            eta: efficiency to compensate; when None and run.compensate is set,
                 the schedule's η·η_q is used
        """
        started = time.perf_counter()
        if eta is None:
            eta = 1.0
            if self.config.run.compensate:
                eta = self.efficiency().eta_det
        samples = [(theta, sample) for theta, sample in read_values(values_path) if theta is not None]
        dataset = TomographyDataset(samples, self.state.n_fock, eta, self.convention)
        result = mle_reconstruct(dataset, target=self.state)
        outputs = {"rho": result.to_json(self._path("rho.json"))}
        summary = {
            "fidelity": result.fidelity_vs_target,
            "iterations": result.iterations,
            "converged": result.converged,
            "eta_used": eta,
        }
        return self._finish("reconstruct", outputs, started, summary)

    def sweep(self) -> Dict[str, Any]:
        """Convergence table for the configured sweep section."""
        section = self.config.sweep
        if section is None:
            raise ValueError("Configuration has no [sweep] section")
        started = time.perf_counter()
        run = self.config.run
        spec = SweepSpec(
            parameter=section.parameter,
            values=section.values,
            state=self.state,
            schedule=self.homodyne_schedule(run.theta),
            n_traj=run.n_traj,
            seed=run.seed,
            repetitions=section.repetitions,
            theta=run.theta,
            n_angles=section.n_angles,
            compensate=section.compensate,
            filter_kind=run.filter,
            vacuum_fraction=section.vacuum_fraction,
            vacuum_rule=section.vacuum_rule,
            convention=self.convention,
        )
        table = convergence_study(spec, self.workers)
        outputs = {"sweep": write_table(table, self._path(f"sweep_{section.parameter}.csv"))}
        summary = {"parameter": section.parameter, "points": len(table)}
        return self._finish("sweep", outputs, started, summary)

    def phase_est(self) -> Dict[str, Any]:
        """Phase-estimation ensemble: per-run x̃ and outcome strings."""
        started = time.perf_counter()
        run = self.config.run
        pe_config = self.config.phase_est.build(run.theta, self.convention)
        estimates = run_phase_estimation(self.state, pe_config, run.n_traj, run.seed, self.workers)
        outputs = {"phase_est": write_table(estimates_frame(estimates), self._path("phase_est.csv"))}
        summary = {"protocol": pe_config.mode, "n_m": pe_config.n_m, "n_runs": len(estimates)}
        if estimates:
            sample = estimates_sample(estimates, {"label": self.state.label, "theta": run.theta})
            summary["epsilon"] = estimates[0].epsilon
            summary["ks"] = ks_statistic(sample, reference_cdf(self.state, run.theta, self.convention))
            summary.update(sample.summary())
        return self._finish("phase-est", outputs, started, summary)
