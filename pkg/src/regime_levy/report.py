"""Calibration report assembly and the on-disk formats.

JSON carries structured results (reports, manifests, summaries), CSV
carries matrices and curves. Floats are written with ``repr``, which
round-trips IEEE doubles exactly, and JSON keys are sorted, so identical
inputs and configuration produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .diagnostics import DiagnosticsReport
from .errors import DataError
from .nig import FitResult, NigParams
from .regime_em import EmTrace, ProbabilityMatrix, RegimeModel
from .stage2 import RegimeNigFits


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


@dataclass(frozen=True)
class CalibrationReport:
    """Everything a calibration run produces, ready for serialization."""

    model: RegimeModel
    stationary: np.ndarray
    initial_distribution: np.ndarray
    trace: EmTrace
    stage2: RegimeNigFits
    threshold: float
    diagnostics: DiagnosticsReport
    provenance: dict

    def to_dict(self) -> dict:
        fits = []
        for i, fit in enumerate(self.stage2.fits):
            entry: dict = {"count": self.stage2.counts[i]}
            if fit is None:
                entry["error"] = self.stage2.errors.get(i, "under-populated")
            else:
                entry.update(alpha=fit.params.alpha, beta=fit.params.beta,
                             delta=fit.params.delta, mu=fit.params.mu,
                             loglik=fit.loglik, iterations=fit.iterations,
                             converged=fit.converged,
                             init=dict(alpha=fit.init_used.alpha,
                                       beta=fit.init_used.beta,
                                       delta=fit.init_used.delta,
                                       mu=fit.init_used.mu))
            fits.append(entry)
        return {
            "version": __version__,
            "stage1": {
                "regimes": [
                    {"kappa": float(self.model.kappa[i]),
                     "theta": float(self.model.theta[i]),
                     "sigma": float(self.model.sigma[i])}
                    for i in range(self.model.K)
                ],
                "transition_matrix": [_floats(row) for row in self.model.Pi],
                "stationary_distribution": _floats(self.stationary),
                "initial_distribution": _floats(self.initial_distribution),
                "trace": {
                    "loglik_by_iter": _floats(self.trace.loglik_by_iter),
                    "iterations": self.trace.iterations,
                    "stop_reason": self.trace.stop_reason,
                },
            },
            "stage2": {"threshold": self.threshold, "fits": fits},
            "diagnostics": {
                "rcm": self.diagnostics.rcm,
                "p_indicator": self.diagnostics.p_indicator,
                "p_error": self.diagnostics.p_error,
            },
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationReport":
        stage1 = data["stage1"]
        regimes = stage1["regimes"]
        model = RegimeModel(
            kappa=np.array([r["kappa"] for r in regimes]),
            theta=np.array([r["theta"] for r in regimes]),
            sigma=np.array([r["sigma"] for r in regimes]),
            Pi=np.array(stage1["transition_matrix"]))
        trace = EmTrace(loglik_by_iter=tuple(stage1["trace"]["loglik_by_iter"]),
                        iterations=stage1["trace"]["iterations"],
                        stop_reason=stage1["trace"]["stop_reason"])
        fits = []
        counts = []
        errors = {}
        for i, entry in enumerate(data["stage2"]["fits"]):
            counts.append(entry["count"])
            if "error" in entry:
                errors[i] = entry["error"]
                fits.append(None)
            else:
                params = NigParams(entry["alpha"], entry["beta"],
                                   entry["delta"], entry["mu"])
                init = NigParams(**entry["init"])
                fits.append(FitResult(params=params, loglik=entry["loglik"],
                                      iterations=entry["iterations"],
                                      converged=entry["converged"],
                                      init_used=init))
        diag = data["diagnostics"]
        return cls(model=model,
                   stationary=np.array(stage1["stationary_distribution"]),
                   initial_distribution=np.array(stage1["initial_distribution"]),
                   trace=trace,
                   stage2=RegimeNigFits(fits=tuple(fits), counts=tuple(counts),
                                        errors=errors),
                   threshold=data["stage2"]["threshold"],
                   diagnostics=DiagnosticsReport(rcm=diag["rcm"],
                                                 p_indicator=diag["p_indicator"],
                                                 p_error=diag["p_error"]),
                   provenance=data["provenance"])


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def write_smoothed_csv(path, dates, smoothed: ProbabilityMatrix) -> None:
    k = smoothed.K
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("date," + ",".join(f"regime_{i}" for i in range(k)) + "\n")
        for date, row in zip(dates, smoothed.values):
            cells = ",".join(repr(float(v)) for v in row)
            handle.write(f"{date.isoformat()},{cells}\n")


def read_smoothed_csv(path) -> ProbabilityMatrix:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().strip().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(lines) < 2:
        raise DataError(f"{path}: no probability rows")
    header = lines[0].split(",")
    k = sum(1 for name in header if name.startswith("regime_"))
    if k < 2:
        raise DataError(f"{path}: expected regime_<i> columns, got {header}")
    offset = len(header) - k
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append([float(c) for c in cells[offset:]])
    return ProbabilityMatrix(np.array(rows), "smoothed")


def write_labels_csv(path, dates, labels) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("date,regime\n")
        for date, label in zip(dates, labels):
            handle.write(f"{date.isoformat()},{int(label)}\n")


def write_matrix_csv(path, returns: np.ndarray) -> None:
    """Simulated return matrix: t, asset_0000, asset_0001, ..."""
    horizon, n_assets = returns.shape
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("t," + ",".join(f"asset_{a:04d}" for a in range(n_assets)) + "\n")
        for t in range(horizon):
            cells = ",".join(repr(float(v)) for v in returns[t])
            handle.write(f"{t},{cells}\n")


def write_series_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for row in rows:
            cells = ",".join(repr(float(v)) if isinstance(v, float) else str(v)
                             for v in row)
            handle.write(cells + "\n")


def model_from_source(data: dict) -> tuple[RegimeModel, tuple[NigParams, ...]]:
    """Extract (RegimeModel, per-regime NIG laws) from a calibration report
    or from a bare model document with the same stage1/stage2 field names."""
    if "stage1" in data:
        stage1 = data["stage1"]
        nig_entries = data.get("stage2", {}).get("fits", [])
    else:
        stage1 = data
        nig_entries = data.get("nig", [])
    try:
        Pi = np.array(stage1["transition_matrix"], dtype=float)
        regimes = stage1.get("regimes")
        if regimes:
            model = RegimeModel(kappa=np.array([r["kappa"] for r in regimes]),
                                theta=np.array([r["theta"] for r in regimes]),
                                sigma=np.array([r["sigma"] for r in regimes]),
                                Pi=Pi)
        else:
            k = Pi.shape[0]
            model = RegimeModel(kappa=np.ones(k), theta=np.zeros(k),
                                sigma=np.ones(k), Pi=Pi)
        laws = []
        for entry in nig_entries:
            if "error" in entry:
                raise DataError("model source has an unfitted regime: "
                                + entry["error"])
            laws.append(NigParams(alpha=entry["alpha"], beta=entry["beta"],
                                  delta=entry["delta"], mu=entry["mu"]))
    except (KeyError, TypeError) as exc:
        raise DataError(f"model source missing field: {exc}") from exc
    if len(laws) != model.K:
        raise DataError(f"model source has {len(laws)} NIG laws for "
                        f"{model.K} regimes")
    return model, tuple(laws)
