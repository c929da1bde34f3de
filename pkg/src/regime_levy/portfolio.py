"""Simulated multi-asset universes and the diversification experiment.

A universe shares one hidden regime chain. Each period every asset earns

    r_{t,a} = loading_a * C_t + idio_scale_a * E_{t,a}

where C_t and the E_{t,a} are independent NIG draws from the regime
active at t. PCA on the sample covariance then answers how many
statistical factors a variance threshold requires, a factor-model
minimum-variance allocation gives portfolio weights, and random
equally-weighted subsets trace risk as a function of portfolio size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nig import NigParams, nig_sample
from .regime_em import RegimeModel, stationary_distribution

_RIDGE_FACTOR = 1e-10


@dataclass(frozen=True)
class UniverseSpec:
    """Dimensions, regime model, per-regime NIG laws, and coupling knobs."""

    n_assets: int
    horizon: int
    model: RegimeModel
    regime_nig: tuple[NigParams, ...]
    loading: float | np.ndarray = 1.0
    idio_scale: float | np.ndarray = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_assets < 2:
            raise ValueError(f"need at least 2 assets, got {self.n_assets}")
        if self.horizon < 2:
            raise ValueError(f"need horizon >= 2, got {self.horizon}")
        if len(self.regime_nig) != self.model.K:
            raise ValueError("one NIG law per regime required")
        for name in ("loading", "idio_scale"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float),
                                  (self.n_assets,)).copy()
            if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PcaResult:
    """Eigenstructure of a sample covariance matrix."""

    eigenvalues: np.ndarray          # descending, >= 0
    explained_fraction: np.ndarray   # cumulative shares, last = 1
    components: np.ndarray           # orthonormal columns, aligned with eigenvalues

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must sum to 1")


def simulate_regime_path(model: RegimeModel, horizon: int,
                         rng: np.random.Generator) -> np.ndarray:
    """One path of the hidden chain, started from its stationary law."""
    pi0 = stationary_distribution(model.Pi)
    cum_rows = np.cumsum(model.Pi, axis=1)
    uniforms = rng.random(horizon)
    path = np.empty(horizon, dtype=np.int64)
    path[0] = int(np.searchsorted(np.cumsum(pi0), uniforms[0], side="right"))
    for t in range(1, horizon):
        path[t] = int(np.searchsorted(cum_rows[path[t - 1]], uniforms[t],
                                      side="right"))
    return np.minimum(path, model.K - 1)


def _regime_modulated_draws(path: np.ndarray, laws: tuple[NigParams, ...],
                            per_step: int, rng: np.random.Generator) -> np.ndarray:
    """(horizon, per_step) draws, row t from the law of the regime active at t."""
    out = np.empty((path.shape[0], per_step))
    for i, law in enumerate(laws):
        idx = np.flatnonzero(path == i)
        if idx.size:
            out[idx] = nig_sample(law, idx.size * per_step, rng).reshape(idx.size,
                                                                         per_step)
    return out


def simulate_universe_with_path(spec: UniverseSpec) -> tuple[np.ndarray, np.ndarray]:
    """((horizon, n_assets) returns, regime path); identical for identical
    spec + seed."""
    streams = np.random.SeedSequence(spec.seed).spawn(3)
    chain_rng, common_rng, idio_rng = (np.random.default_rng(s) for s in streams)
    path = simulate_regime_path(spec.model, spec.horizon, chain_rng)
    common = _regime_modulated_draws(path, spec.regime_nig, 1, common_rng)[:, 0]
    idio = _regime_modulated_draws(path, spec.regime_nig, spec.n_assets, idio_rng)
    return np.outer(common, spec.loading) + idio * spec.idio_scale, path


def simulate_universe(spec: UniverseSpec) -> np.ndarray:
    """(horizon, n_assets) return matrix; identical for identical spec + seed."""
    return simulate_universe_with_path(spec)[0]


def pca(returns: np.ndarray) -> PcaResult:
    """Eigendecomposition of the sample covariance (mean removed, n-1 norm)."""
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2 or returns.shape[0] < 2:
        raise ValueError("returns must be a (horizon, n_assets) matrix, horizon >= 2")
    if not np.all(np.isfinite(returns)):
        raise ValueError("returns contain non-finite entries")
    cov = np.cov(returns, rowvar=False)
    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]
    total = eigenvalues.sum()
    if total <= 0.0:
        raise ValueError("covariance has no variance to explain")
    explained = np.cumsum(eigenvalues) / total
    explained[-1] = 1.0
    return PcaResult(eigenvalues=eigenvalues, explained_fraction=explained,
                     components=vectors)


def components_for_threshold(result: PcaResult, tau: float) -> int:
    """Smallest m whose cumulative explained fraction reaches tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    # Tiny slack so exact-arithmetic ties (equal eigenvalues) resolve as expected.
    hits = np.flatnonzero(result.explained_fraction >= tau - 1e-12)
    return int(hits[0]) + 1


def sample_covariance(returns: np.ndarray) -> np.ndarray:
    return np.cov(np.asarray(returns, dtype=float), rowvar=False)


def _symmetrize_duplicates(weights: np.ndarray, returns: np.ndarray) -> np.ndarray:
    """Give exactly identical asset columns exactly identical weights."""
    returns = np.asarray(returns)
    seen: dict[bytes, list[int]] = {}
    for a in range(returns.shape[1]):
        seen.setdefault(returns[:, a].tobytes(), []).append(a)
    for group in seen.values():
        if len(group) > 1:
            weights[group] = weights[group].mean()
    return weights


def factor_weights(result: PcaResult, returns: np.ndarray, m: int) -> WeightVector:
    """Minimum-variance weights from an m-factor covariance reconstruction.

    Sigma_hat = V_m Lambda_m V_m' plus a diagonal residual that restores
    the sample variances; w is proportional to Sigma_hat^{-1} 1. A
    singular reconstruction (exactly collinear assets) falls back to a
    small ridge, and identical assets, whose split is variance-neutral,
    tie-break to equal weights.
    """
    if not 1 <= m <= result.n:
        raise ValueError(f"m must lie in [1, {result.n}], got {m}")
    cov = sample_covariance(returns)
    v = result.components[:, :m]
    lam = result.eigenvalues[:m]
    sigma_hat = (v * lam) @ v.T
    residual = np.clip(np.diag(cov) - np.diag(sigma_hat), 0.0, None)
    sigma_hat = sigma_hat + np.diag(residual)

    ones = np.ones(result.n)
    well_conditioned = np.linalg.cond(sigma_hat) < 1e12
    if not well_conditioned:
        ridge = _RIDGE_FACTOR * np.trace(sigma_hat) / result.n
        sigma_hat = sigma_hat + max(ridge, np.finfo(float).tiny) * np.eye(result.n)
    try:
        raw = np.linalg.solve(sigma_hat, ones)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "factor covariance not invertible even with ridge") from exc
    if not np.all(np.isfinite(raw)) or raw.sum() == 0.0:
        raise np.linalg.LinAlgError("factor covariance solve produced no usable weights")
    if not well_conditioned:
        raw = _symmetrize_duplicates(raw, returns)
    return WeightVector(weights=raw / raw.sum())


def expected_shortfall(returns: np.ndarray, level: float = 0.01) -> float:
    """Mean loss in the worst ``level`` tail, reported as a positive number."""
    losses = -np.asarray(returns, dtype=float)
    var = np.quantile(losses, 1.0 - level)
    tail = losses[losses >= var]
    return float(tail.mean())


@dataclass(frozen=True)
class CurvePoint:
    size: int
    mean_risk: float
    risk_dispersion: float
    mean_es: float


def diversification_curve(spec: UniverseSpec, sizes, trials: int,
                          es_level: float = 0.01,
                          returns: np.ndarray | None = None) -> list[CurvePoint]:
    """Risk of random equally-weighted portfolios as a function of size.

    One universe is simulated from ``spec``; for each size s, ``trials``
    random s-subsets are equally weighted and the standard deviation and
    expected shortfall of the portfolio return path are recorded. Trial
    subsets come from substreams derived from (seed, size, trial), so the
    curve is reproducible regardless of evaluation order. Pass ``returns``
    to reuse an already simulated matrix for the same spec.
    """
    sizes = [int(s) for s in sizes]
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    if any(s < 1 or s > spec.n_assets for s in sizes):
        raise ValueError(f"sizes must lie in [1, {spec.n_assets}]")
    if returns is None:
        returns = simulate_universe(spec)
    points = []
    for size in sizes:
        stds = np.empty(trials)
        shortfalls = np.empty(trials)
        for trial in range(trials):
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.seed, size, trial]))
            members = np.sort(rng.choice(spec.n_assets, size=size, replace=False))
            port = returns[:, members].mean(axis=1)
            stds[trial] = port.std(ddof=1)
            shortfalls[trial] = expected_shortfall(port, es_level)
        points.append(CurvePoint(size=size, mean_risk=float(stds.mean()),
                                 risk_dispersion=float(stds.std(ddof=0)),
                                 mean_es=float(shortfalls.mean())))
    return points
