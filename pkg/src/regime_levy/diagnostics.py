"""Regime-classification quality metrics.

The Ang-Bekaert regime classification measure (RCM) scores how sharply
the smoothed probabilities separate regimes: 0 means every row is a unit
vector (perfect classification), 100 means every row is uniform (no
classification). The smoothed probability indicator reports the share of
time steps classified at a given error level p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regime_em import ProbabilityMatrix


@dataclass(frozen=True)
class DiagnosticsReport:
    rcm: float
    p_indicator: float
    p_error: float


def rcm(smoothed: ProbabilityMatrix, K: int | None = None) -> float:
    """RCM(K) = 100 (1 - K/(K-1) * mean_t sum_i (P_ti - 1/K)^2)."""
    probs = smoothed.values
    if probs.size == 0:
        raise ValueError("empty probability matrix")
    k = K if K is not None else probs.shape[1]
    if k < 2:
        raise ValueError(f"need at least 2 regimes, got {k}")
    if probs.shape[1] != k:
        raise ValueError(f"matrix has {probs.shape[1]} regimes, expected {k}")
    spread = float(np.mean(np.sum((probs - 1.0 / k) ** 2, axis=1)))
    return 100.0 * (1.0 - k / (k - 1.0) * spread)


def smoothed_probability_indicator(smoothed: ProbabilityMatrix,
                                   p: float = 0.10) -> float:
    """Percentage of rows whose maximum probability exceeds 1 - p."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must lie in (0, 0.5), got {p}")
    top = smoothed.values.max(axis=1)
    return 100.0 * float(np.mean(top > 1.0 - p))


def diagnose(smoothed: ProbabilityMatrix, p: float = 0.10) -> DiagnosticsReport:
    return DiagnosticsReport(rcm=rcm(smoothed),
                             p_indicator=smoothed_probability_indicator(smoothed, p),
                             p_error=p)
