"""Result persistence and experimental-overlay ingestion.

CSV for tabular series, JSON for provenance records.  Numeric CSV cells
use repr() so every value round-trips bit-exact; record timestamps honor
SOURCE_DATE_EPOCH so identical runs can produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import RunConfig, config_hash
from .dtc import PhaseDiagram
from .ensemble import FitResult, TraceStats
from .errors import ConfigError

__all__ = [
    "ExperimentSeries",
    "NON_REPRODUCED_EFFECTS",
    "record_timestamp",
    "build_record",
    "write_json_record",
    "write_trace_csv",
    "write_phase_csv",
    "write_boundary_csv",
    "write_sweep_csv",
    "ingest_experiment",
]

# Open-system / hardware observations that a closed-system simulation does
# not reproduce; kept machine-readable so reports can say so explicitly.
NON_REPRODUCED_EFFECTS = (
    "experimental spin-lock 1/e times (about 50 and 73 us) set by drive "
    "noise and T1 processes outside the closed-system model",
    "experimental WAHUHA-echo late-time saturation floor from pulse "
    "imperfections and open-system relaxation",
    "absolute experimental readout contrast (cavity/optics calibration); "
    "simulated coherences are normalized to the ideal closed-system scale",
)


def record_timestamp() -> str:
    """UTC ISO timestamp; SOURCE_DATE_EPOCH pins it for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return datetime.fromtimestamp(t, tz=timezone.utc).isoformat()


def _fmt(x: float) -> str:
    return repr(float(x))


def build_record(cfg: RunConfig, kind: str, payload: dict,
                 fits: dict | None = None) -> dict:
    return {
        "schema": "dipolarxy-result-v1",
        "kind": kind,
        "version": __version__,
        "created_utc": record_timestamp(),
        "config": cfg.normalized,
        "config_hash": config_hash(cfg),
        "payload": payload,
        "fits": fits or {},
    }


def write_json_record(path, record: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def trace_payload(stats: TraceStats) -> dict:
    return {
        "times_us": [float(t) for t in stats.times],
        "coherence_mean": [float(v) for v in stats.mean],
        "coherence_stderr": [None if math.isnan(s) else float(s)
                             for s in stats.stderr],
        "n_realizations": stats.n_realizations,
    }


def fit_payload(fit: FitResult) -> dict:
    return {"model": fit.model, "t_1e_us": fit.t_1e, "beta": fit.beta,
            "amplitude": fit.amplitude, "residual": fit.residual}


def write_trace_csv(path, stats: TraceStats) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_us", "coherence_mean", "coherence_stderr"])
        for t, v, s in zip(stats.times, stats.mean, stats.stderr):
            w.writerow([_fmt(t), _fmt(v), "" if math.isnan(s) else _fmt(s)])


def write_phase_csv(path, diagram: PhaseDiagram) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "epsilon_over_pi", "s_half_sq"])
        for i, tau in enumerate(diagram.tau_grid):
            for j, eps in enumerate(diagram.eps_grid):
                w.writerow([_fmt(tau * 1e3), _fmt(eps / math.pi),
                            _fmt(diagram.intensity[i, j])])


def write_boundary_csv(path, diagram: PhaseDiagram) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "eps_star_over_pi"])
        for tau, eps in zip(diagram.boundary_tau, diagram.boundary_eps):
            w.writerow([_fmt(tau * 1e3), _fmt(eps / math.pi)])


def write_sweep_csv(path, param: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([param, "final_coherence_mean", "final_coherence_stderr",
                    "t_1e_us", "beta"])
        for r in rows:
            se = r.get("stderr")
            fit = r.get("fit")
            w.writerow([
                _fmt(r["value"]), _fmt(r["mean"]),
                "" if se is None or math.isnan(se) else _fmt(se),
                _fmt(fit.t_1e) if fit else "",
                _fmt(fit.beta) if fit else "",
            ])


@dataclass(frozen=True)
class ExperimentSeries:
    """Measured trace for overlay; err is None when the column is absent."""

    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None


def ingest_experiment(path) -> ExperimentSeries:
    """Parse a time_us,coherence[,err] CSV with line-numbered diagnostics."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError as exc:
        raise ConfigError(f"experiment file not found: {path}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}:1: empty file") from None
        header = [h.strip() for h in header]
        if header[:2] != ["time_us", "coherence"] or \
                header[2:] not in ([], ["err"]):
            raise ConfigError(
                f"{path}:1: header must be time_us,coherence[,err], "
                f"got {','.join(header)}")
        has_err = len(header) == 3
        times, values, errors = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}:{lineno}: expected {len(header)} columns, "
                    f"got {len(row)}")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
                if has_err:
                    errors.append(float(row[2]))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    t = np.asarray(times)
    if t.size == 0:
        raise ConfigError(f"{path}: no data rows")
    uniq, counts = np.unique(t, return_counts=True)
    if uniq.size != t.size:
        raise ConfigError(
            f"{path}: duplicated time value {float(uniq[counts > 1][0])!r}")
    return ExperimentSeries(t, np.asarray(values),
                            np.asarray(errors) if has_err else None)
