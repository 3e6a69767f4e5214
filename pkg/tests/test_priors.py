import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bayes_surrogate.errors import ConfigError
from bayes_surrogate.priors import (
    PriorConfig,
    log_prior_amplitude_pair,
    log_prior_coefficient,
    log_prior_frequency,
    log_prior_jitter,
    prior_nd,
    prior_nf,
    resolve_priors,
)

from conftest import make_series


def cfg(**kw):
    base = dict(a0=1.0, a_max=50.0, b0=1.0, b_max=40.0, f_min=1e-3, f_max=1.0,
                jitter_cutoff=10.0, jitter_scale=1.0)
    base.update(kw)
    return PriorConfig(**base).validate()


def test_nf_geometric_example():
    c = cfg(alpha=0.5, nf_max=2)
    assert [prior_nf(n, c) for n in range(3)] == [0.25, 0.5, 0.25]
    assert prior_nf(3, c) == 0.0


@pytest.mark.parametrize("alpha,nf_max", [(0.3, 4), (0.5, 5), (0.1, 1)])
def test_nf_ratio_and_sum(alpha, nf_max):
    c = cfg(alpha=alpha, nf_max=nf_max)
    p = [prior_nf(n, c) for n in range(nf_max + 1)]
    assert sum(p) == pytest.approx(1.0, abs=1e-15)
    for n in range(1, nf_max):
        assert p[n + 1] / p[n] == pytest.approx(alpha, rel=1e-14)


def test_alpha_too_large():
    with pytest.raises(ConfigError):
        cfg(alpha=0.5, nf_max=2).replace(alpha=0.9).validate()


def test_nd_two_point():
    c = cfg(beta=0.5, nd_max=1)
    assert (prior_nd(0, c), prior_nd(1, c), prior_nd(2, c)) == (0.5, 0.5, 0.0)
    c = cfg(beta=0.25, nd_min=1, nd_max=3)
    p = [prior_nd(n, c) for n in range(5)]
    assert p[0] == 0.0 and p[4] == 0.0
    assert sum(p) == pytest.approx(1.0)
    assert p[3] / p[2] == pytest.approx(0.25)


def test_frequency_examples():
    c = cfg(f_min=1e-3, f_max=1.0)
    assert math.exp(log_prior_frequency(0.1, c)) == pytest.approx(1 / (0.1 * math.log(1000)))
    lo = math.exp(log_prior_frequency(c.f_min, c)) * c.f_min
    hi = math.exp(log_prior_frequency(c.f_max, c)) * c.f_max
    assert lo == pytest.approx(hi, rel=1e-14)
    assert log_prior_frequency(2.0, c) == -math.inf


def test_frequency_unit_invariance():
    c = cfg(f_min=1e-3, f_max=1.0)
    k = 86400.0
    c2 = c.replace(f_min=c.f_min / k, f_max=c.f_max / k)
    # density transforms with the Jacobian only
    assert log_prior_frequency(0.1 / k, c2) - math.log(k) == pytest.approx(
        log_prior_frequency(0.1, c), abs=1e-12)


def test_amplitude_ring_ratio():
    c = cfg(a0=2.0)
    def radial(a):
        return 2 * math.pi * a * math.exp(log_prior_amplitude_pair(a, 0.0, c))
    assert radial(0.1 * c.a0) / radial(10 * c.a0) == pytest.approx(10.0, rel=1e-12)


def test_amplitude_phase_uniform():
    c = cfg()
    phis = np.linspace(-math.pi, math.pi, 13)
    vals = log_prior_amplitude_pair(3 * np.sin(phis), 3 * np.cos(phis), c)
    assert np.ptp(vals) < 1e-12


def test_amplitude_floor_and_support():
    c = cfg(a0=1.0, a_max=5.0)
    assert log_prior_amplitude_pair(0.0, 0.0, c) == math.inf
    floored = log_prior_amplitude_pair(0.0, 0.0, c, floor=True)
    assert floored == pytest.approx(log_prior_amplitude_pair(1e-3, 0.0, c))
    assert log_prior_amplitude_pair(4.0, 4.0, c) == -math.inf


def test_coefficient_examples():
    c = cfg(b0=1.0, b_max=math.e - 1)
    assert math.exp(log_prior_coefficient(0.0, c, signed=False)) == pytest.approx(1.0, abs=1e-15)
    c = cfg()
    assert log_prior_coefficient(3.0, c) == log_prior_coefficient(-3.0, c)
    assert log_prior_coefficient(-0.1, c, signed=False) == -math.inf
    assert log_prior_coefficient(41.0, c) == -math.inf
    # analytic antiderivative log(|b| + b0)
    total = 2 * 0.5 * (math.log(c.b_max + c.b0) - math.log(c.b0)) / math.log1p(c.b_max / c.b0)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_resolve_defaults():
    ts = make_series(seed=1, sigma=np.linspace(0.5, 2.0, 30))
    pr = resolve_priors(ts, f_max=0.4)
    prec = np.mean(1.0 / ts.sigma ** 2) ** -0.5
    assert pr.a0 == pytest.approx(prec) and pr.b0 == pytest.approx(prec)
    assert pr.f_min == pytest.approx(2.0 / ts.span)
    assert pr.a_max >= 10 * np.ptp(ts.y)
    assert pr.b_max >= 10 * np.max(np.abs(ts.y))
    with pytest.raises(ConfigError):
        resolve_priors(ts)


def test_round_trip():
    c = cfg(jitter_prior="halfnormal")
    assert PriorConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigError):
        PriorConfig.from_dict({**c.to_dict(), "bogus": 1})


def test_invalid_orderings():
    with pytest.raises(ConfigError):
        cfg(a_max=0.5)
    with pytest.raises(ConfigError):
        cfg(f_min=2.0)
    with pytest.raises(ConfigError):
        cfg(jitter_prior="flat")


@settings(max_examples=25, deadline=None)
@given(a0=st.floats(0.01, 10), ratio=st.floats(2, 1e4), prior=st.sampled_from(["mjeff", "cutoff", "halfnormal"]),
       jmin=st.sampled_from([0.0, 0.05]))
def test_densities_normalized(a0, ratio, prior, jmin):
    c = cfg(a0=a0, a_max=a0 * ratio, b0=a0, b_max=a0 * ratio, jitter_prior=prior,
            jitter_min=jmin * a0, jitter_cutoff=5 * a0, jitter_scale=a0)
    f = lambda a: 2 * math.pi * a * math.exp(log_prior_amplitude_pair(a, 0.0, c))
    val, _ = integrate.quad(f, 0, c.a_max, points=[c.a0], limit=200, epsabs=0, epsrel=1e-10)
    assert val == pytest.approx(1.0, abs=1e-6)
    g = lambda s: math.exp(log_prior_jitter(s, c))
    lo, hi = c.jitter_min, (min(c.jitter_cutoff, c.b_max) if prior == "cutoff" else c.b_max)
    # split so quad resolves the half-normal bulk on a long support
    cuts = [lo] + [v for v in (c.b0, 10 * c.b0) if lo < v < hi] + [hi]
    val = sum(integrate.quad(g, u, v, limit=200, epsabs=1e-13, epsrel=1e-10)[0]
              for u, v in zip(cuts[:-1], cuts[1:]))
    assert val == pytest.approx(1.0, abs=1e-6)
