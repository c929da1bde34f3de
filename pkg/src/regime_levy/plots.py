"""Figure rendering for the CLI report paths.

Every figure goes to a PNG next to the delimited output it illustrates.
Rendering uses the Agg backend and fixed metadata, so identical inputs
produce byte-identical image files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

_SAVEFIG_KW = {"dpi": 120, "metadata": {"Software": f"regime-levy {__version__}"}}
_REGIME_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:purple",
                  "tab:orange", "tab:brown")


def _color(i: int) -> str:
    return _REGIME_COLORS[i % len(_REGIME_COLORS)]


def _finish(fig, path) -> str:
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
    return str(path)


def regime_overview(path, dates, returns, labels) -> str:
    """Log returns colored by the assigned regime."""
    fig, ax = plt.subplots(figsize=(10, 4))
    returns = np.asarray(returns)
    labels = np.asarray(labels)
    for i in sorted(set(labels.tolist())):
        mask = labels == i
        name = "unclassified" if i < 0 else f"regime {i}"
        color = "0.6" if i < 0 else _color(i)
        ax.plot(np.asarray(dates)[mask], returns[mask], ".", ms=2.5,
                color=color, label=name)
    ax.set_ylabel("log return")
    ax.legend(loc="upper right", markerscale=4, fontsize=8)
    fig.autofmt_xdate()
    fig.tight_layout()
    return _finish(fig, path)


def smoothed_probabilities(path, dates, smoothed) -> str:
    fig, ax = plt.subplots(figsize=(10, 3))
    values = np.asarray(smoothed)
    for i in range(values.shape[1]):
        ax.plot(dates, values[:, i], lw=0.8, color=_color(i), label=f"regime {i}")
    ax.set_ylabel("smoothed probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", fontsize=8)
    fig.autofmt_xdate()
    fig.tight_layout()
    return _finish(fig, path)


def loglik_trace(path, loglik_by_iter) -> str:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(range(len(loglik_by_iter)), loglik_by_iter, marker="o", ms=3)
    ax.set_xlabel("EM sweep")
    ax.set_ylabel("log-likelihood")
    fig.tight_layout()
    return _finish(fig, path)


def simulated_paths(path, returns, regime_path) -> str:
    """Cumulative return of the first few simulated assets, regimes shaded."""
    fig, ax = plt.subplots(figsize=(10, 4))
    returns = np.asarray(returns)
    regime_path = np.asarray(regime_path)
    t = np.arange(returns.shape[0])
    for a in range(min(returns.shape[1], 5)):
        ax.plot(t, returns[:, a].cumsum(), lw=0.8, label=f"asset {a}")
    top = int(regime_path.max()) if regime_path.size else 0
    if top > 0:
        in_top = regime_path == top
        edges = np.flatnonzero(np.diff(np.concatenate(([0], in_top.view(np.int8), [0]))))
        for lo, hi in zip(edges[::2], edges[1::2]):
            ax.axvspan(lo, hi, color=_color(top), alpha=0.15, lw=0)
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative log return")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def explained_variance(path, explained_fraction, thresholds=(0.90, 0.95)) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    values = np.asarray(explained_fraction)
    ax.plot(range(1, values.shape[0] + 1), values, lw=1.2)
    for tau in thresholds:
        ax.axhline(tau, color="0.5", ls="--", lw=0.8)
        ax.text(1, tau, f" {tau:.0%}", va="bottom", fontsize=8, color="0.35")
    ax.set_xlabel("components")
    ax.set_ylabel("cumulative explained variance")
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    return _finish(fig, path)


def weight_profile(path, weights) -> str:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    weights = np.asarray(weights)
    ax.bar(range(len(weights)), weights, width=1.0)
    ax.set_xlabel("asset")
    ax.set_ylabel("weight")
    fig.tight_layout()
    return _finish(fig, path)


def diversification(path, points) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = [p.size for p in points]
    risk = np.array([p.mean_risk for p in points])
    spread = np.array([p.risk_dispersion for p in points])
    es = [p.mean_es for p in points]
    ax.plot(sizes, risk, marker="o", ms=3, label="mean std dev")
    ax.fill_between(sizes, risk - spread, risk + spread, alpha=0.2, lw=0)
    ax.plot(sizes, es, marker="s", ms=3, label="mean 1% expected shortfall")
    ax.set_xlabel("portfolio size")
    ax.set_ylabel("risk")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)
