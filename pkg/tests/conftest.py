import numpy as np
import pytest

from bayes_surrogate.priors import resolve_priors
from bayes_surrogate.timeseries import TimeSeries


def make_series(seed=0, n=30, span=100.0, amp=0.0, freq=0.1, phase=0.3, sigma=1.0, offset=0.0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, span, n))
    sig = np.full(n, sigma) if np.isscalar(sigma) else np.asarray(sigma)
    y = amp * np.cos(2 * np.pi * freq * x + phase) + offset + rng.normal(0.0, 1.0, n) * sig
    return TimeSeries(x, y, sig)


def on_grid_frequency(ts, k, oversample=10.0):
    """Frequency of grid node ``k`` for the default ``f_min = 2 / T``."""
    return 2.0 / ts.span + k / (oversample * ts.span)


@pytest.fixture
def noisy():
    return make_series(seed=11)


@pytest.fixture
def priors_for():
    def build(ts, **kw):
        kw.setdefault("f_max", 0.5)
        return resolve_priors(ts, **kw)

    return build
