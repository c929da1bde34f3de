"""Command line entry point: calibrate, diagnose, simulate, portfolio.

All randomness flows from the explicit ``--seed`` flag, every run echoes
its configuration and the SHA-256 of its input into the persisted output,
and identical invocations produce byte-identical files. Exit codes:
0 success, 2 configuration error, 3 I/O error, 4 numerical failure,
5 degenerate model. ``REGIME_LEVY_LOG`` controls log verbosity.
"""

from __future__ import annotations

import functools
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data_ingest import ColumnMapping, load_prices, to_log_returns, write_returns_csv
from .diagnostics import diagnose as run_diagnostics
from .diagnostics import rcm as compute_rcm
from .diagnostics import smoothed_probability_indicator
from .errors import (
    DataError,
    DegenerateRegimeError,
    NumericalError,
    RegimeLevyError,
    UnderPopulatedRegimeError,
)
from .portfolio import (
    UniverseSpec,
    components_for_threshold,
    diversification_curve,
    factor_weights,
    pca,
    simulate_universe_with_path,
)
from .regime_em import default_init, em_estimate, stationary_distribution
from .report import (
    CalibrationReport,
    model_from_source,
    read_json,
    read_smoothed_csv,
    sha256_file,
    write_json,
    write_labels_csv,
    write_matrix_csv,
    write_series_csv,
    write_smoothed_csv,
)
from .stage2 import assign_regimes, fit_per_regime, require_complete

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_DEGENERATE = 5

_DIAG_MATCH_TOL = 1e-9


def _fail(category: str, code: int, message: str):
    click.echo(f"error category={category}: {message}", err=True)
    sys.exit(code)


def _mapped_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DegenerateRegimeError, UnderPopulatedRegimeError) as exc:
            _fail("degenerate_model", EXIT_DEGENERATE, str(exc))
        except NumericalError as exc:
            _fail("numerical_failure", EXIT_NUMERICAL, str(exc))
        except (DataError, OSError) as exc:
            _fail("io_error", EXIT_IO, str(exc))
        except (ValueError, RegimeLevyError) as exc:
            _fail("configuration_error", EXIT_CONFIG, str(exc))
    return wrapper


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.version_option(version=__version__, prog_name="regime-levy")
def main():
    """Regime-switching NIG calibration and portfolio-diversification lab."""
    level = os.environ.get("REGIME_LEVY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(dir_okay=False), help="Delimited price file.")
@click.option("--date-col", default="date", show_default=True)
@click.option("--price-col", default="close", show_default=True)
@click.option("--delimiter", default=",", show_default=True)
@click.option("--regimes", "n_regimes", default=2, show_default=True,
              help="Number of regimes K.")
@click.option("--eps", default=1e-6, show_default=True,
              help="Log-likelihood stopping tolerance.")
@click.option("--max-iter", default=500, show_default=True)
@click.option("--threshold", default=0.5, show_default=True,
              help="Classification confidence threshold.")
@click.option("--p-error", default=0.10, show_default=True,
              help="Error level of the smoothed probability indicator.")
@click.option("--out", "out_path", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@_mapped_errors
def calibrate(input_path, date_col, price_col, delimiter, n_regimes, eps,
              max_iter, threshold, p_error, out_path, figures):
    """Two-stage calibration: EM regime estimation, then per-regime NIG fits."""
    mapping = ColumnMapping(date_col=date_col, price_col=price_col,
                            delimiter=delimiter)
    prices = load_prices(input_path, mapping)
    returns = to_log_returns(prices, source_id=Path(input_path).name)

    init = default_init(returns.values, n_regimes)
    initial = stationary_distribution(init.Pi)
    model, smoothed, trace = em_estimate(returns.values, K=n_regimes, init=init,
                                         eps=eps, max_iter=max_iter,
                                         initial=initial)
    assignment = assign_regimes(smoothed, threshold)
    fits = require_complete(fit_per_regime(returns.values, assignment))
    diagnostics = run_diagnostics(smoothed, p_error)

    config = {"input": str(input_path), "date_col": date_col,
              "price_col": price_col, "delimiter": delimiter,
              "regimes": n_regimes, "eps": eps, "max_iter": max_iter,
              "threshold": threshold, "p_error": p_error, "seed": None}
    report = CalibrationReport(
        model=model,
        stationary=stationary_distribution(model.Pi),
        initial_distribution=initial,
        trace=trace,
        stage2=fits,
        threshold=threshold,
        diagnostics=diagnostics,
        provenance={"input_sha256": sha256_file(input_path),
                    "n_prices": len(prices), "n_returns": len(returns),
                    "source_id": returns.source_id, "config": config,
                    "toolkit_version": __version__})

    out = _out_dir(out_path)
    write_json(out / "report.json", report.to_dict())
    write_returns_csv(returns, out / "returns.csv")
    write_smoothed_csv(out / "smoothed.csv", returns.dates, smoothed)
    write_labels_csv(out / "regimes.csv", returns.dates, assignment.labels)
    if figures:
        from . import plots
        plots.regime_overview(out / "fig_regimes.png", returns.dates,
                              returns.values, assignment.labels)
        plots.smoothed_probabilities(out / "fig_smoothed.png", returns.dates,
                                     smoothed.values)
        plots.loglik_trace(out / "fig_loglik.png", trace.loglik_by_iter)

    click.echo(f"calibrated {n_regimes} regimes on {len(returns)} returns "
               f"({trace.iterations} EM sweeps, {trace.stop_reason})")
    for i in range(model.K):
        click.echo(f"  regime {i}: kappa={model.kappa[i]:.6f} "
                   f"theta={model.theta[i]:.6e} sigma={model.sigma[i]:.6e} "
                   f"n={fits.counts[i]}")
    click.echo(f"  RCM={diagnostics.rcm:.4f} "
               f"p-indicator({p_error:g})={diagnostics.p_indicator:.4f}")
    click.echo(f"  wrote {out}")


@main.command()
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              help="report.json from calibrate (smoothed.csv expected beside it).")
@click.option("--smoothed", "smoothed_path", type=click.Path(dir_okay=False),
              help="Standalone smoothed-probability CSV.")
@click.option("--p-error", default=0.10, show_default=True)
@click.option("--out", "out_path", type=click.Path(file_okay=False))
@_mapped_errors
def diagnose(report_path, smoothed_path, p_error, out_path):
    """Recompute classification diagnostics from persisted probabilities."""
    if report_path is None and smoothed_path is None:
        raise ValueError("pass --report and/or --smoothed")
    if smoothed_path is None:
        smoothed_path = Path(report_path).parent / "smoothed.csv"
    smoothed = read_smoothed_csv(smoothed_path)

    if report_path is not None:
        embedded = read_json(report_path)["diagnostics"]
        rcm_here = compute_rcm(smoothed)
        indicator_here = smoothed_probability_indicator(smoothed,
                                                        embedded["p_error"])
        if abs(rcm_here - embedded["rcm"]) > _DIAG_MATCH_TOL or \
                abs(indicator_here - embedded["p_indicator"]) > _DIAG_MATCH_TOL:
            raise NumericalError(
                f"recomputed diagnostics (RCM {rcm_here!r}, indicator "
                f"{indicator_here!r}) do not match the report "
                f"(RCM {embedded['rcm']!r}, indicator {embedded['p_indicator']!r})")

    result = run_diagnostics(smoothed, p_error)
    payload = {"rcm": result.rcm, "p_indicator": result.p_indicator,
               "p_error": result.p_error}
    import json
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if out_path:
        out = _out_dir(out_path)
        write_json(out / "diagnostics.json",
                   {**payload,
                    "config": {"smoothed_source": str(smoothed_path),
                               "smoothed_sha256": sha256_file(smoothed_path),
                               "report": report_path and str(report_path),
                               "p_error": p_error,
                               "toolkit_version": __version__}})


def _load_model(report_path, model_path):
    if (report_path is None) == (model_path is None):
        raise ValueError("pass exactly one of --report / --model")
    source = report_path or model_path
    return model_from_source(read_json(source)), str(source)


def _universe_config(source, assets, horizon, loading, idio_scale, seed):
    return {"model_source": source, "model_sha256": sha256_file(source),
            "assets": assets, "horizon": horizon, "loading": loading,
            "idio_scale": idio_scale, "seed": seed,
            "toolkit_version": __version__}


@main.command()
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--model", "model_path", type=click.Path(dir_okay=False),
              help="Bare model JSON (transition_matrix + nig laws).")
@click.option("--assets", default=100, show_default=True)
@click.option("--horizon", default=1000, show_default=True)
@click.option("--loading", default=1.0, show_default=True,
              help="Loading of every asset on the common regime-driven draw.")
@click.option("--idio-scale", default=1.0, show_default=True)
@click.option("--seed", required=True, type=int,
              help="Master seed; required for reproducibility.")
@click.option("--out", "out_path", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@_mapped_errors
def simulate(report_path, model_path, assets, horizon, loading, idio_scale,
             seed, out_path, figures):
    """Simulate a Markov-modulated NIG return universe."""
    (model, laws), source = _load_model(report_path, model_path)
    spec = UniverseSpec(n_assets=assets, horizon=horizon, model=model,
                        regime_nig=laws, loading=loading,
                        idio_scale=idio_scale, seed=seed)
    returns, regime_path = simulate_universe_with_path(spec)

    out = _out_dir(out_path)
    write_matrix_csv(out / "sim_returns.csv", returns)
    write_series_csv(out / "sim_regimes.csv", "t,regime",
                     [(t, int(z)) for t, z in enumerate(regime_path)])
    write_json(out / "manifest.json",
               {"config": _universe_config(source, assets, horizon, loading,
                                           idio_scale, seed)})
    if figures:
        from . import plots
        plots.simulated_paths(out / "fig_simulation.png", returns, regime_path)
    click.echo(f"simulated {assets} assets over {horizon} periods (seed {seed})")
    click.echo(f"  wrote {out}")


@main.command()
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--model", "model_path", type=click.Path(dir_okay=False))
@click.option("--assets", default=100, show_default=True)
@click.option("--horizon", default=5000, show_default=True)
@click.option("--loading", default=1.0, show_default=True)
@click.option("--idio-scale", default=1.0, show_default=True)
@click.option("--trials", default=200, show_default=True)
@click.option("--sizes", default="1,2,5,10,20,50,100", show_default=True,
              help="Comma-separated portfolio sizes for the diversification curve.")
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@_mapped_errors
def portfolio(report_path, model_path, assets, horizon, loading, idio_scale,
              trials, sizes, seed, out_path, figures):
    """PCA factor analysis and the random-portfolio diversification study."""
    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise ValueError(f"cannot parse --sizes {sizes!r}") from exc
    (model, laws), source = _load_model(report_path, model_path)
    spec = UniverseSpec(n_assets=assets, horizon=horizon, model=model,
                        regime_nig=laws, loading=loading,
                        idio_scale=idio_scale, seed=seed)
    returns = simulate_universe_with_path(spec)[0]

    decomposition = pca(returns)
    needed = {tau: components_for_threshold(decomposition, tau)
              for tau in (0.90, 0.95)}
    weights = factor_weights(decomposition, returns, needed[0.95])
    curve = diversification_curve(spec, size_list, trials, returns=returns)

    out = _out_dir(out_path)
    write_series_csv(out / "eigenvalues.csv", "component,eigenvalue",
                     [(i + 1, float(v)) for i, v in enumerate(decomposition.eigenvalues)])
    write_series_csv(out / "explained.csv", "component,explained_fraction",
                     [(i + 1, float(v))
                      for i, v in enumerate(decomposition.explained_fraction)])
    write_series_csv(out / "weights.csv", "asset,weight",
                     [(a, float(w)) for a, w in enumerate(weights.weights)])
    write_series_csv(out / "diversification_curve.csv",
                     "size,mean_risk,risk_dispersion,mean_es_1pct",
                     [(p.size, p.mean_risk, p.risk_dispersion, p.mean_es)
                      for p in curve])
    config = _universe_config(source, assets, horizon, loading, idio_scale, seed)
    config.update(trials=trials, sizes=size_list)
    write_json(out / "summary.json",
               {"components_for_threshold": {"0.90": needed[0.90],
                                             "0.95": needed[0.95]},
                "factors_used": needed[0.95],
                "config": config})
    if figures:
        from . import plots
        plots.explained_variance(out / "fig_explained.png",
                                 decomposition.explained_fraction)
        plots.weight_profile(out / "fig_weights.png", weights.weights)
        plots.diversification(out / "fig_diversification.png", curve)
    click.echo(f"{needed[0.95]} components explain 95% of variance, "
               f"{needed[0.90]} explain 90% (assets={assets}, seed={seed})")
    click.echo(f"  wrote {out}")


if __name__ == "__main__":
    main()
