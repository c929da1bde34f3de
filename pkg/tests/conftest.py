import datetime as dt
import math

import numpy as np
import pytest

from regime_levy.nig import NigParams, nig_sample, nig_variance
from regime_levy.regime_em import RegimeModel, stationary_distribution

# Reference NIG parameter sets at daily equity-index scale: a calm regime
# with light tails and a turbulent one with heavy tails and a wider spread.
CALM_NIG = NigParams(alpha=150.0919, beta=-16.2944, delta=0.011949, mu=0.001276)
TURBULENT_NIG = NigParams(alpha=41.8416, beta=0.295358, delta=0.026838, mu=-0.00015)

FIXTURE_SEED = 20260114
FIXTURE_T = 10_000
SIGMA_RATIO = 7.0


def _centered(alpha: float, beta: float, target_std: float) -> NigParams:
    """NIG law with mean 0 and the requested standard deviation."""
    gamma = math.sqrt(alpha ** 2 - beta ** 2)
    delta = target_std ** 2 * gamma ** 3 / alpha ** 2
    return NigParams(alpha=alpha, beta=beta, delta=delta,
                     mu=-delta * beta / gamma)


class TwoRegimeFixture:
    """Synthetic two-regime series with NIG conditional noise.

    x_t = kappa_i theta_i + (1 - kappa_i) x_{t-1} + eta_t, with eta_t a
    zero-mean NIG draw of the active regime. sigma holds the true noise
    standard deviations (ratio 7), and the turbulent regime occupies the
    minority of days.
    """

    def __init__(self):
        calm_std = math.sqrt(nig_variance(CALM_NIG))
        self.noise = (
            _centered(CALM_NIG.alpha, CALM_NIG.beta, calm_std),
            _centered(TURBULENT_NIG.alpha, TURBULENT_NIG.beta,
                      SIGMA_RATIO * calm_std),
        )
        self.model = RegimeModel(
            kappa=np.array([1.011003, 1.082196]),
            theta=np.array([0.000994, -0.00154]),
            sigma=np.array([calm_std, SIGMA_RATIO * calm_std]),
            Pi=np.array([[0.98, 0.02], [0.06, 0.94]]))

        rng = np.random.default_rng(FIXTURE_SEED)
        T = FIXTURE_T
        pi0 = stationary_distribution(self.model.Pi)
        cum_rows = np.cumsum(self.model.Pi, axis=1)
        z = np.empty(T, dtype=np.int64)
        z[0] = int(np.searchsorted(np.cumsum(pi0), rng.random()))
        uniforms = rng.random(T)
        for t in range(1, T):
            z[t] = int(np.searchsorted(cum_rows[z[t - 1]], uniforms[t]))
        eta = np.where(z == 0,
                       nig_sample(self.noise[0], T, rng),
                       nig_sample(self.noise[1], T, rng))
        x = np.empty(T)
        x[0] = self.model.theta[0]
        for t in range(1, T):
            i = z[t]
            x[t] = self.model.kappa[i] * self.model.theta[i] \
                + (1.0 - self.model.kappa[i]) * x[t - 1] + eta[t]
        self.regimes = z
        self.returns = x


@pytest.fixture(scope="session")
def two_regime_fixture() -> TwoRegimeFixture:
    return TwoRegimeFixture()


def write_price_csv(path, returns, start=dt.date(2000, 1, 3), first_price=1000.0):
    prices = first_price * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("date,close\n")
        for i, price in enumerate(prices):
            day = start + dt.timedelta(days=i)
            handle.write(f"{day.isoformat()},{float(price)!r}\n")
    return path


@pytest.fixture(scope="session")
def fixture_prices_csv(two_regime_fixture, tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "two_regime_prices.csv"
    return write_price_csv(path, two_regime_fixture.returns)


@pytest.fixture(scope="session")
def small_prices_csv(two_regime_fixture, tmp_path_factory):
    """First 1500 returns of the fixture, for fast CLI runs."""
    path = tmp_path_factory.mktemp("data") / "small_prices.csv"
    return write_price_csv(path, two_regime_fixture.returns[:1500])
