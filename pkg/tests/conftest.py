import numpy as np
import pytest

from batsurv.survdata import SurvivalDataset, TimeGrid


def make_ph_data(n, beta, censor_rate=0.0, seed=0, tail_power=3.0):
    """Proportional-hazards data with cumulative hazard t**p * exp(beta.x).

    The polynomial baseline keeps durations in a compact range, unlike the
    exponential generator, so equidistant grids stay informative for the
    discrete-time models.
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=np.float64)
    X = rng.standard_normal((n, beta.size))
    E = rng.exponential(size=n)
    T = (E * np.exp(-X @ beta)) ** (1.0 / tail_power)
    if censor_rate > 0:
        C = rng.exponential(size=n) ** (1.0 / tail_power) * np.quantile(T, 0.7)
        durations = np.minimum(T, C)
        events = (T <= C).astype(int)
    else:
        durations, events = T, np.ones(n, dtype=int)
    return SurvivalDataset.from_arrays(X, durations, events, duration_unit="time")


def quantile_grid(durations, k):
    """Cut points at duration quantiles (covers the maximum)."""
    qs = np.quantile(np.asarray(durations), np.linspace(0.0, 1.0, k + 1)[1:])
    return TimeGrid(np.unique(qs))


def random_monotone_curves(rng, times, n, lo=0.2):
    """Random non-increasing survival curves sampled on ``times``."""
    from batsurv.models import SurvivalCurve

    curves = []
    for _ in range(n):
        vals = np.minimum.accumulate(rng.uniform(lo, 1.0, size=len(times)))
        curves.append(SurvivalCurve(np.asarray(times, dtype=float), vals))
    return curves


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
