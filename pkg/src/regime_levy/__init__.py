"""Regime-switching mean-reverting models with Normal-Inverse-Gaussian jumps.

The package splits into a calibration pipeline (price ingestion, a
two-stage EM estimator for the regime dynamics, per-regime NIG fits,
classification diagnostics) and a simulation side (Markov-modulated NIG
universes, PCA factor analysis, diversification experiments). The
``regime-levy`` command line wires the two together.
"""

__version__ = "0.1.0"

from .bessel import bessel_k
from .data_ingest import (
    ColumnMapping,
    EmpiricalMoments,
    PriceSeries,
    ReturnSeries,
    empirical_moments,
    load_prices,
    to_log_returns,
    write_returns_csv,
)
from .diagnostics import (
    DiagnosticsReport,
    diagnose,
    rcm,
    smoothed_probability_indicator,
)
from .errors import (
    DataError,
    DegenerateRegimeError,
    InfeasibleMomentsError,
    NumericalError,
    RegimeLevyError,
    UnderPopulatedRegimeError,
)
from .nig import (
    FitResult,
    NigParams,
    nig_fit_mle,
    nig_fit_mom,
    nig_levy_density,
    nig_log_cumulant,
    nig_logpdf,
    nig_mean,
    nig_pdf,
    nig_sample,
    nig_variance,
)
from .regime_em import (
    EmTrace,
    ProbabilityMatrix,
    RegimeModel,
    conditional_density,
    default_init,
    em_estimate,
    hamilton_filter,
    kim_smoother,
    m_step,
    stationary_distribution,
)
from .stage2 import (
    UNCLASSIFIED,
    RegimeAssignment,
    RegimeNigFits,
    assign_regimes,
    fit_per_regime,
    require_complete,
)
from .portfolio import (
    CurvePoint,
    PcaResult,
    UniverseSpec,
    WeightVector,
    components_for_threshold,
    diversification_curve,
    expected_shortfall,
    factor_weights,
    pca,
    simulate_universe,
    simulate_universe_with_path,
)
