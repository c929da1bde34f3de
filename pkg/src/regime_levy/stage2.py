"""Stage-2 estimation: hard regime classification and per-regime NIG fits.

Each return is assigned to its most probable regime from the smoothed
probabilities (argmax, with observations below a confidence threshold, or
exactly tied, marked unclassified and excluded). One NIG law is then
fitted per regime by maximum likelihood with a method-of-moments start.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data_ingest import empirical_moments
from .errors import UnderPopulatedRegimeError
from .nig import FitResult, nig_fit_mle, nig_fit_mom
from .regime_em import ProbabilityMatrix

log = logging.getLogger(__name__)

UNCLASSIFIED = -1
MIN_REGIME_OBS = 8


@dataclass(frozen=True)
class RegimeAssignment:
    """Hard regime labels, one per return; UNCLASSIFIED (-1) marks dropouts."""

    labels: np.ndarray
    n_regimes: int
    threshold: float
    rule: str = "max-probability"

    @property
    def T(self) -> int:
        return self.labels.shape[0]

    @property
    def unclassified(self) -> int:
        return int((self.labels == UNCLASSIFIED).sum())


@dataclass(frozen=True)
class RegimeNigFits:
    """Per-regime NIG fits; a regime that could not be fitted carries None
    plus an explanatory message in ``errors``."""

    fits: tuple[FitResult | None, ...]
    counts: tuple[int, ...]
    errors: dict[int, str]

    @property
    def complete(self) -> bool:
        return all(fit is not None for fit in self.fits)


def assign_regimes(smoothed: ProbabilityMatrix, threshold: float = 0.5) -> RegimeAssignment:
    """argmax classification with a confidence threshold.

    An observation is unclassified when its maximum smoothed probability
    falls below ``threshold`` or when the maximum is not unique (a tie
    carries no regime information at any threshold >= 0.5).
    """
    if not 0.5 <= threshold < 1.0:
        raise ValueError(f"threshold must lie in [0.5, 1), got {threshold}")
    probs = smoothed.values
    labels = probs.argmax(axis=1).astype(np.int64)
    top = probs.max(axis=1)
    tied = (probs == top[:, None]).sum(axis=1) > 1
    labels[(top < threshold) | tied] = UNCLASSIFIED
    return RegimeAssignment(labels=labels, n_regimes=smoothed.K, threshold=threshold)


def fit_per_regime(returns, assignment: RegimeAssignment,
                   min_obs: int = MIN_REGIME_OBS,
                   max_iter: int = 2000) -> RegimeNigFits:
    """Fit one NIG law to each regime's classified subsample.

    A regime with fewer than ``min_obs`` classified observations is
    recorded as under-populated instead of fitted; callers that need
    every regime check ``RegimeNigFits.complete``.
    """
    values = np.asarray(getattr(returns, "values", returns), dtype=float)
    if values.shape[0] != assignment.T:
        raise ValueError("returns and assignment lengths disagree")

    fits: list[FitResult | None] = []
    counts: list[int] = []
    errors: dict[int, str] = {}
    for i in range(assignment.n_regimes):
        subsample = values[assignment.labels == i]
        counts.append(int(subsample.shape[0]))
        if subsample.shape[0] < min_obs:
            message = (f"regime {i}: {subsample.shape[0]} classified observations, "
                       f"need {min_obs}")
            log.warning("under-populated %s", message)
            errors[i] = message
            fits.append(None)
            continue
        init = nig_fit_mom(empirical_moments(subsample), shrink_infeasible=True)
        fits.append(nig_fit_mle(subsample, init=init, max_iter=max_iter))
    return RegimeNigFits(fits=tuple(fits), counts=tuple(counts), errors=errors)


def require_complete(fits: RegimeNigFits) -> RegimeNigFits:
    """Raise UnderPopulatedRegimeError unless every regime was fitted."""
    if not fits.complete:
        raise UnderPopulatedRegimeError("; ".join(fits.errors.values()))
    return fits
