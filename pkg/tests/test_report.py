import json

import numpy as np
import pytest

from regime_levy.diagnostics import DiagnosticsReport
from regime_levy.errors import DataError
from regime_levy.nig import FitResult, NigParams
from regime_levy.regime_em import EmTrace, ProbabilityMatrix, RegimeModel
from regime_levy.report import (
    CalibrationReport,
    model_from_source,
    read_smoothed_csv,
    sha256_file,
    write_json,
    write_smoothed_csv,
)
from regime_levy.stage2 import RegimeNigFits


def _sample_report() -> CalibrationReport:
    model = RegimeModel(kappa=np.array([1.01, 1.08]),
                        theta=np.array([0.001, -0.0015]),
                        sigma=np.array([0.009, 0.063]),
                        Pi=np.array([[0.98, 0.02], [0.06, 0.94]]))
    params = NigParams(alpha=41.8416, beta=0.295358, delta=0.026838, mu=-0.00015)
    fit = FitResult(params=params, loglik=12345.6789, iterations=321,
                    converged=True, init_used=params)
    stage2 = RegimeNigFits(fits=(fit, None), counts=(7000, 5),
                           errors={1: "regime 1: 5 classified observations, need 8"})
    return CalibrationReport(
        model=model,
        stationary=np.array([0.75, 0.25]),
        initial_distribution=np.array([0.5, 0.5]),
        trace=EmTrace(loglik_by_iter=(100.0, 150.5, 151.25), iterations=2,
                      stop_reason="tolerance"),
        stage2=stage2,
        threshold=0.5,
        diagnostics=DiagnosticsReport(rcm=8.63, p_indicator=91.39, p_error=0.10),
        provenance={"input_sha256": "ab" * 32, "config": {"seed": None}})


def test_report_round_trips_losslessly(tmp_path):
    report = _sample_report()
    path = tmp_path / "report.json"
    write_json(path, report.to_dict())
    loaded = CalibrationReport.from_dict(json.loads(path.read_text()))
    assert loaded.to_dict() == report.to_dict()
    np.testing.assert_array_equal(loaded.model.Pi, report.model.Pi)
    assert loaded.stage2.fits[0].params == report.stage2.fits[0].params
    assert loaded.stage2.fits[1] is None
    assert loaded.trace == report.trace


def test_smoothed_csv_round_trips(tmp_path):
    import datetime as dt
    values = np.array([[0.123456789012345678, 0.876543210987654322],
                       [1.0, 0.0]])
    values /= values.sum(axis=1, keepdims=True)
    matrix = ProbabilityMatrix(values, "smoothed")
    dates = [dt.date(2020, 1, 2), dt.date(2020, 1, 3)]
    path = tmp_path / "smoothed.csv"
    write_smoothed_csv(path, dates, matrix)
    loaded = read_smoothed_csv(path)
    np.testing.assert_array_equal(loaded.values, matrix.values)


def test_model_from_source_accepts_report_and_bare_model(tmp_path):
    report = _sample_report()
    report_dict = report.to_dict()
    # A report with an unfitted regime cannot drive a simulation.
    with pytest.raises(DataError, match="unfitted"):
        model_from_source(report_dict)

    bare = {
        "transition_matrix": [[0.9, 0.1], [0.2, 0.8]],
        "nig": [{"alpha": 2.0, "beta": 0.0, "delta": 1.0, "mu": 0.0},
                {"alpha": 5.0, "beta": 1.0, "delta": 0.5, "mu": 0.1}],
    }
    model, laws = model_from_source(bare)
    assert model.K == 2
    assert laws[1].alpha == 5.0

    with pytest.raises(DataError, match="missing field"):
        model_from_source({"nig": []})


def test_sha256_matches_known_digest(tmp_path):
    path = tmp_path / "payload.bin"
    path.write_bytes(b"abc")
    assert sha256_file(path) == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
