"""
Dataset persistence: measurement records, assembled values, phase-estimation
runs and run manifests.
"""
from pathlib import Path
from typing import Dict, List, Any, Iterable, Optional, Tuple, Union
import copy
import json
import logging

import numpy as np
import pandas as pd

from src import __version__
from src.collision.schedule import MeasurementRecord, TrajectoryResult
from src.evaluation.statistics import EmpiricalSample

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
RECORD_COLUMNS = ["index", "theta", "outcomes", "bases"]


def _prepare(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def records_frame(results: Iterable[TrajectoryResult], theta: Optional[float] = None) -> pd.DataFrame:
    """One row per trajectory: index, quadrature angle, outcome bitstring, basis labels."""
    rows = [
        {
            "index": r.index,
            "theta": theta,
            "outcomes": r.record.bitstring(),
            "bases": r.record.basis_string(),
        }
        for r in results
    ]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def write_records(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} records to {path}")
    return path


def read_records(path: Union[str, Path], dt: float) -> List[Tuple[Optional[float], MeasurementRecord]]:
    """
    Records written by write_records.

    Returns:
        list of (theta, MeasurementRecord); theta is None for heterodyne rows
    """
    frame = pd.read_csv(path, dtype={"outcomes": str, "bases": str}, keep_default_na=False)
    records = []
    for row in frame.itertuples(index=False):
        theta = None if row.theta == "" or pd.isna(row.theta) else float(row.theta)
        records.append((theta, MeasurementRecord.from_strings(row.outcomes, row.bases, dt)))
    return records


def values_frame(samples: List[Tuple[Optional[float], EmpiricalSample]]) -> pd.DataFrame:
    """Assembled values: columns theta, J for homodyne; J_re, J_im for heterodyne."""
    frames = []
    for theta, sample in samples:
        if sample.is_complex:
            frames.append(pd.DataFrame({"J_re": np.real(sample.values), "J_im": np.imag(sample.values)}))
        else:
            frames.append(pd.DataFrame({"theta": theta, "J": sample.values}))
    if not frames:
        return pd.DataFrame(columns=["theta", "J"])
    return pd.concat(frames, ignore_index=True)


def write_values(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} values to {path}")
    return path


def read_values(path: Union[str, Path]) -> List[Tuple[Optional[float], EmpiricalSample]]:
    """Inverse of values_frame: one sample per angle, or one complex sample."""
    frame = pd.read_csv(path)
    if {"J_re", "J_im"} <= set(frame.columns):
        values = frame["J_re"].to_numpy() + 1j * frame["J_im"].to_numpy()
        return [(None, EmpiricalSample(values, {"source": str(path)}))]
    if not {"theta", "J"} <= set(frame.columns):
        raise ValueError(f"{path} has neither (theta, J) nor (J_re, J_im) columns")
    return [
        (float(theta), EmpiricalSample(group["J"].to_numpy(), {"theta": float(theta), "source": str(path)}))
        for theta, group in frame.groupby("theta", sort=True)
    ]


def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Generic CSV table (histograms, sweeps, phase-estimation runs)."""
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote table with {len(frame)} rows to {path}")
    return path


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = _prepare(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def build_manifest(
    config: Dict[str, Any],
    command: str,
    outputs: Dict[str, str],
    wall_time: float,
    extra: Optional[Dict[str, Any]] = None,
    workers: Optional[int] = None
) -> Dict[str, Any]:
    """
    Run manifest. The "config" entry alone reproduces the run. Worker count
    and wall time do not change any output and live under "run_info", the
    only block that differs between reruns of the same seed.
    """
    config = copy.deepcopy(config)
    configured_workers = config.get("run", {}).pop("workers", None)
    manifest = {
        "command": command,
        "code_version": __version__,
        "config": config,
        "seed": config["run"]["seed"],
        "outputs": outputs,
        "run_info": {
            "workers": workers if workers is not None else configured_workers,
            "wall_time_s": round(float(wall_time), 3),
        },
    }
    if extra:
        manifest["summary"] = extra
    return manifest
