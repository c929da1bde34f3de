"""Stage-1 estimation of the K-regime mean-reverting model.

The observed series x_t follows, conditional on the hidden regime i,

    x_t | x_{t-1}, Z_t = i  ~  N(kappa_i theta_i + (1 - kappa_i) x_{t-1}, sigma_i^2)

with Z a first-order Markov chain on K states (row-stochastic transition
matrix Pi, daily grid, dt = 1 absorbed into kappa and sigma). Estimation
alternates a Hamilton forward filter plus Kim backward smoother (E step)
with closed-form weighted least-squares updates (M step) until the
log-likelihood gain falls under a tolerance.

Time indexing: the first return has no predecessor, so it contributes no
conditional density; probability matrices still carry one row per return,
with row 0 pinned to the initial regime distribution in the filter and
smoothed backwards like any other row.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegimeError, NumericalError

log = logging.getLogger(__name__)

_KAPPA_FLOOR = 1e-6
_MIN_REGIME_WEIGHT = 1e-8
_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RegimeModel:
    """Per-regime (kappa, theta, sigma) and the transition matrix Pi."""

    kappa: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray
    Pi: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        Pi = np.asarray(self.Pi, dtype=float)
        for name, arr in (("kappa", kappa), ("theta", theta), ("sigma", sigma)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "Pi", Pi)
        k = kappa.shape[0]
        if k < 2:
            raise ValueError(f"need at least 2 regimes, got {k}")
        if theta.shape != (k,) or sigma.shape != (k,) or Pi.shape != (k, k):
            raise ValueError("inconsistent regime model shapes")
        if np.any(sigma <= 0.0) or not np.all(np.isfinite(sigma)):
            raise ValueError("all sigma must be positive finite")
        if not (np.all(np.isfinite(kappa)) and np.all(np.isfinite(theta))):
            raise ValueError("kappa and theta must be finite")
        if np.any(Pi < 0.0) or np.any(Pi > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(Pi.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise ValueError("every row of Pi must sum to 1")

    @property
    def K(self) -> int:
        return self.kappa.shape[0]

    def permuted(self, order) -> "RegimeModel":
        """The same model with regimes relabelled by ``order``."""
        idx = np.asarray(order)
        return RegimeModel(kappa=self.kappa[idx], theta=self.theta[idx],
                           sigma=self.sigma[idx], Pi=self.Pi[np.ix_(idx, idx)])


@dataclass(frozen=True)
class ProbabilityMatrix:
    """T x K regime probabilities, one row per return."""

    values: np.ndarray
    kind: str  # "filtered" | "predicted" | "smoothed"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] == 0:
            raise ValueError("probability matrix must be a nonempty T x K array")
        if self.kind not in ("filtered", "predicted", "smoothed"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.max(np.abs(values.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("every row must sum to 1")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EmTrace:
    """Log-likelihood path of an EM run."""

    loglik_by_iter: tuple[float, ...]
    iterations: int
    stop_reason: str  # "max-iters" | "tolerance"


def _as_array(returns) -> np.ndarray:
    values = np.asarray(getattr(returns, "values", returns), dtype=float)
    if values.ndim != 1 or values.shape[0] < 1:
        raise ValueError("returns must be a nonempty 1-d series")
    return values


def stationary_distribution(Pi: np.ndarray) -> np.ndarray:
    """Left eigenvector of Pi with eigenvalue 1, normalized to a distribution."""
    Pi = np.asarray(Pi, dtype=float)
    k = Pi.shape[0]
    a = Pi.T - np.eye(k)
    a[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("transition matrix has no unique stationary distribution") from exc
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def conditional_density(x_t: float, x_prev: float, regime: int,
                        model: RegimeModel) -> float:
    """Gaussian transition density of regime ``regime`` at (x_prev -> x_t)."""
    if not 0 <= regime < model.K:
        raise ValueError(f"regime index {regime} out of range")
    mean = model.kappa[regime] * model.theta[regime] \
        + (1.0 - model.kappa[regime]) * x_prev
    sd = model.sigma[regime]
    z = (x_t - mean) / sd
    return math.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * sd)


def _density_matrix(x: np.ndarray, model: RegimeModel) -> np.ndarray:
    """Row t >= 1 holds the per-regime conditional densities of x[t]; row 0 is unused."""
    T = x.shape[0]
    dens = np.ones((T, model.K))
    if T > 1:
        mean = model.kappa * model.theta + np.outer(x[:-1], 1.0 - model.kappa)
        z = (x[1:, None] - mean) / model.sigma
        dens[1:] = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * model.sigma)
    return dens


def hamilton_filter(returns, model: RegimeModel, initial):
    """Forward filter: per-step Bayes updates with scaling.

    Returns (filtered, predicted, loglik). Row 0 of both matrices is the
    initial regime distribution (the first return carries no conditional
    density); the log-likelihood is the sum of the log normalizing
    constants of steps 1..T-1.
    """
    x = _as_array(returns)
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (model.K,) or abs(initial.sum() - 1.0) > 1e-10 \
            or np.any(initial < 0.0):
        raise ValueError("initial must be a probability vector of length K")

    T = x.shape[0]
    dens = _density_matrix(x, model)
    filtered = np.empty((T, model.K))
    predicted = np.empty((T, model.K))
    filtered[0] = initial
    predicted[0] = initial
    pit = model.Pi.T
    loglik = 0.0
    for t in range(1, T):
        pred = pit @ filtered[t - 1]
        joint = pred * dens[t]
        norm = joint.sum()
        if not norm > 0.0 or not math.isfinite(norm):
            raise NumericalError(
                f"all regime densities underflowed at step t={t}")
        predicted[t] = pred
        filtered[t] = joint / norm
        loglik += math.log(norm)
    return (ProbabilityMatrix(filtered, "filtered"),
            ProbabilityMatrix(predicted, "predicted"),
            float(loglik))


def kim_smoother(filtered: ProbabilityMatrix, predicted: ProbabilityMatrix,
                 model: RegimeModel) -> ProbabilityMatrix:
    """Backward recursion from filtered to smoothed probabilities."""
    f = filtered.values
    p = predicted.values
    if f.shape != p.shape:
        raise ValueError("filtered and predicted must come from one filter pass")
    T, K = f.shape
    smoothed = np.empty_like(f)
    smoothed[-1] = f[-1]
    for t in range(T - 2, -1, -1):
        # ratio_j = smoothed_{t+1,j} / predicted_{t+1,j}; a vanished predicted
        # probability forces the smoothed one to vanish too, so 0/0 -> 0.
        alive = p[t + 1] > 0.0
        ratio = np.where(alive, smoothed[t + 1], 0.0) / np.where(alive, p[t + 1], 1.0)
        row = f[t] * (model.Pi @ ratio)
        total = row.sum()
        if not total > 0.0:
            raise NumericalError(f"smoother lost all mass at step t={t}")
        smoothed[t] = row / total
    return ProbabilityMatrix(smoothed, "smoothed")


def m_step(returns, smoothed: ProbabilityMatrix, prev: RegimeModel,
           filtered: ProbabilityMatrix | None = None,
           predicted: ProbabilityMatrix | None = None) -> RegimeModel:
    """Closed-form maximizers given the smoothed regime probabilities.

    (kappa_i, theta_i) solve the probability-weighted least-squares
    regression x_t = a_i + b_i x_{t-1} with kappa_i = 1 - b_i and
    theta_i = a_i / kappa_i; sigma_i is the root of the weighted mean
    squared residual. The transition update needs the filter pass; if
    ``filtered``/``predicted`` are not supplied it is recomputed from
    ``prev`` with its stationary initial distribution.
    """
    x = _as_array(returns)
    if x.shape[0] != smoothed.T:
        raise ValueError("smoothed matrix and returns length disagree")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 returns for an M step")
    if filtered is None or predicted is None:
        filtered, predicted, _ = hamilton_filter(
            x, prev, stationary_distribution(prev.Pi))

    w = smoothed.values[1:]            # weight of the pair (x_{t-1}, x_t)
    x_prev = x[:-1]
    x_cur = x[1:]
    K = smoothed.K

    kappa = np.empty(K)
    theta = np.empty(K)
    sigma = np.empty(K)
    for i in range(K):
        wi = w[:, i]
        sw = wi.sum()
        if sw < _MIN_REGIME_WEIGHT:
            raise DegenerateRegimeError(
                f"regime {i} retained total smoothed weight {sw:.3e}")
        sx = wi @ x_prev
        sy = wi @ x_cur
        sxx = wi @ (x_prev * x_prev)
        sxy = wi @ (x_prev * x_cur)
        det = sw * sxx - sx * sx
        if det <= 0.0:
            raise DegenerateRegimeError(
                f"regime {i} has a singular weighted regression")
        b = (sw * sxy - sx * sy) / det
        a = (sy - b * sx) / sw
        k_i = 1.0 - b
        if abs(k_i) < _KAPPA_FLOOR:
            log.warning("regime %d: kappa ~ 0, theta unidentifiable; flooring", i)
            k_i = math.copysign(_KAPPA_FLOOR, k_i if k_i != 0.0 else 1.0)
        resid = x_cur - a - b * x_prev
        mse = (wi @ (resid * resid)) / sw
        if mse <= 0.0:
            raise DegenerateRegimeError(f"regime {i} has zero residual variance")
        kappa[i] = k_i
        theta[i] = a / k_i
        sigma[i] = math.sqrt(mse)

    # Transition update: expected transition counts over expected visits,
    # then row renormalization.
    p_next = predicted.values[1:]
    alive = p_next > 0.0
    ratio = np.where(alive, smoothed.values[1:], 0.0) / np.where(alive, p_next, 1.0)
    xi = prev.Pi * (filtered.values[:-1].T @ ratio)
    visits = filtered.values[:-1].sum(axis=0)
    if np.any(visits < _MIN_REGIME_WEIGHT):
        raise DegenerateRegimeError("a regime has no filtered visits")
    Pi = xi / visits[:, None]
    Pi = np.clip(Pi, 0.0, None)
    Pi /= Pi.sum(axis=1, keepdims=True)
    return RegimeModel(kappa=kappa, theta=theta, sigma=sigma, Pi=Pi)


def default_init(returns, K: int = 2) -> RegimeModel:
    """Deterministic starting model: calm/turbulent split on |r - mean|.

    For K = 2 the split is at the 70th percentile of absolute deviations;
    for larger K the deviations are cut at equally spaced quantiles. Each
    group seeds its own least-squares AR(1) estimate, and Pi starts at
    0.9 on the diagonal.
    """
    x = _as_array(returns)
    if K < 2:
        raise ValueError(f"need at least 2 regimes, got {K}")
    dev = np.abs(x - x.mean())
    if K == 2:
        edges = [float(np.quantile(dev, 0.7))]
    else:
        edges = [float(np.quantile(dev, q)) for q in np.arange(1, K) / K]
    group = np.searchsorted(edges, dev, side="right")

    kappa = np.empty(K)
    theta = np.empty(K)
    sigma = np.empty(K)
    for i in range(K):
        mask = group[1:] == i
        xp, xc = x[:-1][mask], x[1:][mask]
        seeded = False
        if xp.shape[0] >= 3 and np.var(xp) > 0.0:
            b, a = np.polyfit(xp, xc, 1)
            resid = xc - a - b * xp
            if abs(1.0 - b) >= _KAPPA_FLOOR and resid.std() > 0.0:
                kappa[i] = 1.0 - b
                theta[i] = a / kappa[i]
                sigma[i] = float(resid.std())
                seeded = True
        if not seeded:
            members = x[group == i]
            kappa[i] = 1.0
            theta[i] = float(members.mean()) if members.size else float(x.mean())
            spread = float(members.std()) if members.size else float(x.std())
            sigma[i] = max(spread, 1e-8)
    Pi = np.full((K, K), 0.1 / (K - 1))
    np.fill_diagonal(Pi, 0.9)
    return RegimeModel(kappa=kappa, theta=theta, sigma=sigma, Pi=Pi)


def em_estimate(returns, K: int = 2, init: RegimeModel | None = None,
                eps: float = 1e-6, max_iter: int = 500, initial=None):
    """Alternate E and M steps until the log-likelihood gain drops below eps.

    Returns (model, smoothed, trace). The initial regime distribution
    defaults to the stationary distribution of the *initial* Pi and is
    held fixed across iterations, which preserves exact monotone ascent
    of the likelihood. The trace records the log-likelihood of the model
    at the start of each sweep plus a final evaluation of the returned
    model.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    x = _as_array(returns)
    if x.shape[0] < 4:
        raise ValueError("need at least 4 returns to estimate a regime model")
    model = init if init is not None else default_init(x, K)
    if model.K != K:
        raise ValueError(f"init has {model.K} regimes, expected {K}")
    if initial is None:
        initial = stationary_distribution(model.Pi)
    else:
        initial = np.asarray(initial, dtype=float)

    filtered, predicted, loglik = hamilton_filter(x, model, initial)
    smoothed = kim_smoother(filtered, predicted, model)
    trace = [loglik]
    iterations = 0
    stop_reason = "max-iters"
    while iterations < max_iter:
        new_model = m_step(x, smoothed, model, filtered, predicted)
        filtered, predicted, loglik = hamilton_filter(x, new_model, initial)
        smoothed = kim_smoother(filtered, predicted, new_model)
        model = new_model
        iterations += 1
        trace.append(loglik)
        log.debug("EM sweep %d: loglik %.10f", iterations, loglik)
        if trace[-1] - trace[-2] < eps:
            stop_reason = "tolerance"
            break
    return model, smoothed, EmTrace(loglik_by_iter=tuple(trace),
                                    iterations=iterations,
                                    stop_reason=stop_reason)
