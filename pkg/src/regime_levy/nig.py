r"""The Normal-Inverse-Gaussian distribution engine.

Density, log-cumulant transform, closed-form moments, Levy-measure
density, exact sampling, and fitting. The Barndorff-Nielsen (alpha, beta,
delta, mu) parametrization is used throughout:

    f(x) = (alpha delta / pi) exp(delta gamma + beta (x - mu))
           K_1(alpha sqrt(delta^2 + (x - mu)^2)) / sqrt(delta^2 + (x - mu)^2)

with gamma = sqrt(alpha^2 - beta^2). alpha controls tail heaviness, beta
skewness, delta scale, mu location; admissibility requires alpha > |beta|
and delta > 0.

Fitting is maximum likelihood (derivative-free simplex in an
unconstrained reparametrization) initialized by the closed-form method
of moments. Sampling uses the normal variance-mean mixture with an
inverse-Gaussian mixing variance drawn by the Michael-Schucany-Haas
transformation, which is exact and rejection-free.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .bessel import bessel_k1e
from .data_ingest import EmpiricalMoments
from .errors import InfeasibleMomentsError

_MOM_FEASIBILITY_EPS = 1e-6
_MOM_KURT_FLOOR = 0.1          # mildly leptokurtic rescue for infeasible samples
_NEAR_GAUSSIAN_SHAPE = 1e6     # delta*gamma beyond this is effectively normal


class NearGaussianWarning(UserWarning):
    """Moment inversion produced an almost-Gaussian shape (huge alpha)."""


@dataclass(frozen=True)
class NigParams:
    """NIG parameter vector with the admissibility invariant built in."""

    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "mu"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.alpha <= abs(self.beta):
            raise ValueError(
                f"need alpha > |beta| for a proper NIG law, got "
                f"alpha={self.alpha}, beta={self.beta}")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha ** 2 - self.beta ** 2)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit."""

    params: NigParams
    loglik: float
    iterations: int
    converged: bool
    init_used: NigParams


def nig_logpdf(x, p: NigParams):
    """Log density, numerically stable far into the tails."""
    x = np.asarray(x, dtype=float)
    u = x - p.mu
    root = np.sqrt(p.delta ** 2 + u ** 2)
    w = p.alpha * root
    return (math.log(p.alpha * p.delta / math.pi) + p.delta * p.gamma
            + p.beta * u + np.log(bessel_k1e(w)) - w - np.log(root))


def nig_pdf(x, p: NigParams):
    """Density of NIG(alpha, beta, delta, mu)."""
    return np.exp(nig_logpdf(x, p))


def nig_log_cumulant(z: float, p: NigParams) -> float:
    """Log-cumulant transform phi(z) = mu z + delta (gamma - sqrt(alpha^2 - (beta+z)^2)).

    Defined for |beta + z| < alpha; outside that strip the transform
    diverges and a ValueError is raised.
    """
    shifted = p.beta + z
    if abs(shifted) >= p.alpha:
        raise ValueError(
            f"log-cumulant undefined: |beta + z| = {abs(shifted)} >= alpha = {p.alpha}")
    return p.mu * z + p.delta * (p.gamma - math.sqrt(p.alpha ** 2 - shifted ** 2))


def nig_mean(p: NigParams) -> float:
    """E[X] = mu + delta beta / gamma."""
    return p.mu + p.delta * p.beta / p.gamma


def nig_variance(p: NigParams) -> float:
    """Var[X] = delta alpha^2 / gamma^3."""
    return p.delta * p.alpha ** 2 / p.gamma ** 3


def nig_skewness(p: NigParams) -> float:
    return 3.0 * p.beta / (p.alpha * math.sqrt(p.delta * p.gamma))


def nig_excess_kurtosis(p: NigParams) -> float:
    return 3.0 * (1.0 + 4.0 * (p.beta / p.alpha) ** 2) / (p.delta * p.gamma)


def nig_levy_density(x, p: NigParams):
    """Pointwise Levy-measure density e^{beta x} delta alpha K_1(alpha|x|) / (pi |x|).

    The measure is singular at the origin, so x = 0 is rejected.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x == 0.0):
        raise ValueError("Levy density is singular at x = 0")
    ax = np.abs(x)
    w = p.alpha * ax
    log_density = (p.beta * x + math.log(p.delta * p.alpha / math.pi) - np.log(ax)
                   + np.log(bessel_k1e(w)) - w)
    out = np.exp(log_density)
    return float(out) if out.ndim == 0 else out


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _inverse_gaussian(mean: float, shape: float, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """IG(mean, shape) draws via the Michael-Schucany-Haas transformation."""
    nu = rng.standard_normal(n) ** 2
    y = mean * nu
    x = mean * (1.0 + (y - np.sqrt(y * (4.0 * shape + y))) / (2.0 * shape))
    use_x = rng.random(n) <= mean / (mean + x)
    return np.where(use_x, x, mean ** 2 / x)


def nig_sample(p: NigParams, n: int, seed) -> np.ndarray:
    """n i.i.d. draws via the normal variance-mean mixture.

    The mixing variance V is inverse Gaussian with mean delta/gamma and
    shape delta^2, and X = mu + beta V + sqrt(V) Z. Fixed seed gives an
    identical sample; pass a Generator to share a stream.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 draws, got {n}")
    rng = _as_rng(seed)
    v = _inverse_gaussian(p.delta / p.gamma, p.delta ** 2, n, rng)
    return p.mu + p.beta * v + np.sqrt(v) * rng.standard_normal(n)


def nig_fit_mom(m: EmpiricalMoments, shrink_infeasible: bool = False) -> NigParams:
    """Closed-form moment inversion: parameters whose first four analytic
    moments reproduce the sample ones.

    Feasibility requires 3 * excess_kurtosis > 5 * skewness^2 (and both
    positive variance and excess kurtosis). Infeasible inputs raise
    InfeasibleMomentsError unless ``shrink_infeasible`` is set, in which
    case excess kurtosis is floored at a mildly leptokurtic level and
    |skewness| shrunk until 3 k = 5 s^2 + eps, keeping the inversion total
    for initialization. (Flooring kurtosis near zero instead would start
    the MLE on the flat near-Gaussian ridge, where the simplex stalls.)
    """
    if m.variance <= 0.0 or m.skewness is None or m.excess_kurtosis is None:
        raise InfeasibleMomentsError("moment fit needs a non-degenerate sample")
    skew = m.skewness
    kurt = m.excess_kurtosis
    if 3.0 * kurt <= 5.0 * skew ** 2:
        if not shrink_infeasible:
            raise InfeasibleMomentsError(
                f"3*excess_kurtosis = {3 * kurt:.6g} must exceed "
                f"5*skewness^2 = {5 * skew ** 2:.6g}")
        kurt = max(kurt, _MOM_KURT_FLOOR)
        if 3.0 * kurt <= 5.0 * skew ** 2 + _MOM_FEASIBILITY_EPS:
            skew = math.copysign(
                math.sqrt((3.0 * kurt - _MOM_FEASIBILITY_EPS) / 5.0), skew)

    shape = 3.0 / (kurt - 4.0 * skew ** 2 / 3.0)          # delta * gamma
    rho2 = skew ** 2 / (3.0 * kurt - 4.0 * skew ** 2)     # (beta/alpha)^2
    rho = math.copysign(math.sqrt(rho2), skew)
    gamma = math.sqrt(shape / (m.variance * (1.0 - rho2)))
    delta = shape / gamma
    alpha = gamma / math.sqrt(1.0 - rho2)
    beta = rho * alpha
    mu = m.mean - delta * beta / gamma
    if shape > _NEAR_GAUSSIAN_SHAPE:
        warnings.warn(
            "moments are nearly Gaussian; fitted alpha is extreme and the "
            "shape is weakly identified", NearGaussianWarning, stacklevel=2)
    return NigParams(alpha=alpha, beta=beta, delta=delta, mu=mu)


def _unpack(vec: np.ndarray) -> NigParams:
    a, b, d, m = (float(v) for v in vec)
    alpha = abs(b) + math.exp(min(a, 500.0))
    delta = math.exp(min(max(d, -500.0), 500.0))
    return NigParams(alpha=alpha, beta=b, delta=delta, mu=m)


def _pack(p: NigParams) -> np.ndarray:
    return np.array([math.log(p.alpha - abs(p.beta)), p.beta,
                     math.log(p.delta), p.mu])


def nig_fit_mle(data, init: NigParams | None = None, max_iter: int = 2000,
                tol: float = 1e-10) -> FitResult:
    """Maximum-likelihood fit by Nelder-Mead simplex search.

    The search runs in an unconstrained reparametrization
    (alpha = |beta| + e^a, delta = e^d), so every iterate is admissible.
    The returned log-likelihood never falls below the initial point's.
    ``init`` defaults to the method-of-moments inversion of the sample
    (with the infeasibility fallback enabled).
    """
    data = np.asarray(getattr(data, "values", data), dtype=float)
    if data.shape[0] < 8:
        raise ValueError(f"need at least 8 observations for MLE, got {data.shape[0]}")
    if init is None:
        from .data_ingest import empirical_moments
        init = nig_fit_mom(empirical_moments(data), shrink_infeasible=True)

    def negloglik(vec: np.ndarray) -> float:
        try:
            params = _unpack(vec)
        except (ValueError, OverflowError):
            return 1e300
        value = -float(np.sum(nig_logpdf(data, params)))
        return value if math.isfinite(value) else 1e300

    result = minimize(negloglik, _pack(init), method="Nelder-Mead",
                      options={"maxiter": max_iter, "xatol": tol,
                               "fatol": tol, "adaptive": False})
    params = _unpack(result.x)
    return FitResult(params=params, loglik=-float(result.fun),
                     iterations=int(result.nit), converged=bool(result.success),
                     init_used=init)
