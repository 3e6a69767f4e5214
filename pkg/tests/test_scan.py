import json
import math

import numpy as np
import pytest

from bayes_surrogate.errors import GridError
from bayes_surrogate.jitter import make_jitter_grid, marginalize_jitter
from bayes_surrogate.linear import batch_log_evidence, build_design
from bayes_surrogate.priors import log_prior_frequency, resolve_priors
from bayes_surrogate.scan import (
    FrequencyGrid,
    advance_trig,
    make_grid,
    retained_prefix,
    scan_1d,
    scan_2d,
    scan_greedy,
    scan_nf0,
    seed_trig,
    trig_block,
    truncate_nf,
)
from bayes_surrogate.timeseries import TimeSeries

from conftest import make_series


def grid_for(ts, count, oversample=10.0):
    f_min = 2.0 / ts.span
    step = 1.0 / (oversample * ts.span)
    return make_grid(ts, f_min, f_min + (count - 1) * step, oversample)


def test_grid_arithmetic():
    ts = TimeSeries([0.0, 50.0, 100.0], [0, 0, 0], [1, 1, 1])
    g = make_grid(ts, 0.02, 0.52, oversample=1)
    assert g.step == pytest.approx(0.01)
    assert g.count == 51
    assert g.nodes[-1] == pytest.approx(0.52)


def test_grid_large_scale():
    ts = TimeSeries([0.0, 1000.0, 2740.0], [0, 0, 0], [1, 1, 1])
    g = make_grid(ts, 2 / 2740, 1.0, oversample=65)
    assert 1e5 < g.count < 3e5


def test_grid_errors():
    ts = TimeSeries([0.0, 50.0, 100.0], [0, 0, 0], [1, 1, 1])
    with pytest.raises(GridError):
        make_grid(ts, 0.5, 0.5)
    with pytest.raises(GridError) as err:
        make_grid(ts, 0.02, 100.0, max_nodes=1000)
    assert "oversample" in str(err.value)
    with pytest.raises(GridError):
        FrequencyGrid(0.1, 0.1001, 1.0)


def test_advance_once():
    x = np.linspace(-50, 50, 31)
    t = advance_trig(seed_trig(x, 0.3, 1e-3))
    np.testing.assert_allclose(t.sin, np.sin(2 * np.pi * 0.301 * x), atol=1e-12)
    np.testing.assert_allclose(t.cos, np.cos(2 * np.pi * 0.301 * x), atol=1e-12)


def test_origin_row_fixed():
    x = np.array([0.0, 3.0])
    t = seed_trig(x, 0.05, 0.01, reseed=7)
    for _ in range(100):
        t = advance_trig(t)
        assert (t.sin[0], t.cos[0]) == (0.0, 1.0)


def test_trig_block_independent_of_request():
    ts = make_series()
    g = grid_for(ts, 3000)
    s_all, c_all = trig_block(ts.x, g, 0, 3000)
    s_mid, c_mid = trig_block(ts.x, g, 1500, 2100)
    np.testing.assert_array_equal(s_all[1500:2100], s_mid)
    np.testing.assert_array_equal(c_all[1500:2100], c_mid)
    direct = np.sin(2 * np.pi * np.outer(g.nodes, ts.x))
    assert np.max(np.abs(s_all - direct)) < 1e-9


def test_nf0_matches_jitter_module(noisy, priors_for):
    pr = priors_for(noisy)
    s = scan_nf0(noisy, 1, pr)
    ref = marginalize_jitter(noisy, build_design(noisy, [], 1), pr, make_jitter_grid(pr))
    assert s.log_total == pytest.approx(ref, abs=1e-9)


def test_scan_1d_matches_single_path(priors_for):
    ts = make_series(seed=3, amp=2.0)
    pr = priors_for(ts)
    g = grid_for(ts, 300)
    s = scan_1d(ts, g, 0, pr)
    for k in (0, 17, 150, 299):
        d = build_design(ts, [g.node(k)], 0)
        ref = marginalize_jitter(ts, d, pr, make_jitter_grid(pr))
        assert s.log_evidence[k] == pytest.approx(ref, abs=1e-8)
    assert s.log_weight[5] == pytest.approx(log_prior_frequency(g.node(5), pr) + math.log(g.step))
    assert s.log_weight[0] == pytest.approx(log_prior_frequency(g.node(0), pr) + math.log(g.step / 2))


def test_frequency_weights_riemann(priors_for):
    ts = make_series()
    g = grid_for(ts, 2000)
    pr = priors_for(ts, f_max=g.nodes[-1])
    total = np.exp(log_prior_frequency(g.nodes, pr) + g.log_weights).sum()
    assert abs(total - 1) <= 2 / g.count
    big = make_grid(TimeSeries([0.0, 2740.0], [0, 0], [1, 1]), 2 / 2740, 1.0, 10)
    pr = resolve_priors(TimeSeries([0.0, 2740.0], [0, 0], [1, 1]), f_max=1.0)
    total = np.exp(log_prior_frequency(big.nodes, pr) + big.log_weights).sum()
    assert abs(total - 1) <= 2 / big.count


def noise_scans():
    out = []
    for seed in range(20):
        ts = make_series(seed=seed)
        g = grid_for(ts, 2000)
        out.append(scan_1d(ts, g, 0, resolve_priors(ts, f_max=g.nodes[-1])))
    return out


@pytest.fixture(scope="module")
def noise_runs():
    return noise_scans()


@pytest.mark.xfail(strict=True, reason="noise peaks of 30-point series exceed 50/M in some seeds")
def test_pure_noise_peak_below_50_uniform(noise_runs):
    worst = max(s.posterior.max() * s.grid.count for s in noise_runs)
    assert worst < 50


def test_pure_noise_not_localized(noise_runs):
    # contrast with the injected case below, where +-3 nodes hold > 0.99
    near = []
    for s in noise_runs:
        k = int(np.argmax(s.posterior))
        near.append(s.posterior[max(k - 3, 0):k + 4].sum())
    assert np.median(near) < 0.2


def test_injected_on_grid(priors_for):
    ts0 = make_series(seed=4)
    g = grid_for(ts0, 400)
    k = 123
    ts = make_series(seed=4, amp=10.0, freq=g.node(k))
    s = scan_1d(ts, g, 0, priors_for(ts, f_max=g.nodes[-1]))
    assert s.best == (k,)
    near = np.abs(s.tuples[:, 0] - k) <= 3
    assert s.posterior[near].sum() > 0.99


def test_threads_bit_identical(priors_for):
    ts = make_series(seed=5, amp=3.0)
    g = grid_for(ts, 1000)
    pr = priors_for(ts, f_max=g.nodes[-1])
    a = scan_1d(ts, g, 0, pr, reseed=128)
    b = scan_1d(ts, g, 0, pr, reseed=128, threads=4)
    np.testing.assert_array_equal(a.log_evidence, b.log_evidence)
    s1 = scan_greedy(ts, g, 2, 0, pr, a, reseed=128)
    s4 = scan_greedy(ts, g, 2, 0, pr, a, reseed=128, threads=4)
    np.testing.assert_array_equal(s1.log_evidence, s4.log_evidence)
    assert s1.log_total == s4.log_total


def two_sinusoids(seed, g, i, j, amp=10.0):
    rng = np.random.default_rng(seed)
    ts = make_series(seed=seed)
    y = ts.y + amp * np.sin(2 * np.pi * g.node(i) * ts.x + 0.4) \
        + amp * np.cos(2 * np.pi * g.node(j) * ts.x + rng.uniform(0, 6))
    return ts.with_values(y=y)


def test_scan_2d_recovers_pair(priors_for):
    ts0 = make_series(seed=6)
    g = grid_for(ts0, 120)
    ts = two_sinusoids(6, g, 30, 77)
    s = scan_2d(ts, g, 0, priors_for(ts, f_max=g.nodes[-1]))
    i, j = s.best
    assert abs(i - 30) <= 1 and abs(j - 77) <= 1


def test_scan_2d_smoke_normalized(noisy, priors_for):
    g = grid_for(noisy, 60)
    s = scan_2d(noisy, g, 0, priors_for(noisy, f_max=g.nodes[-1]))
    assert s.posterior.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(s.tuples[:, 0] + 2 < s.tuples[:, 1])
    with pytest.raises(GridError):
        scan_2d(noisy, g, 0, priors_for(noisy, f_max=g.nodes[-1]), max_pairs=100)


def test_column_block_swap(noisy, priors_for):
    pr = priors_for(noisy)
    da = build_design(noisy, [0.11], -1).matrix
    db = build_design(noisy, [0.29], -1).matrix
    poly = np.ones((len(noisy), 1))
    ab = batch_log_evidence(noisy.y, noisy.sigma, np.hstack([db, poly]), 1, da[:, :1].T, da[:, 1:].T, [0.3], pr)
    ba = batch_log_evidence(noisy.y, noisy.sigma, np.hstack([da, poly]), 1, db[:, :1].T, db[:, 1:].T, [0.3], pr)
    assert ab[0, 0] == pytest.approx(ba[0, 0], abs=1e-10)


def test_greedy_single_sinusoid(priors_for):
    ts0 = make_series(seed=7)
    g = grid_for(ts0, 200)
    ts = make_series(seed=7, amp=10.0, freq=g.node(60))
    pr = priors_for(ts, f_max=g.nodes[-1])
    s1 = scan_1d(ts, g, 0, pr)
    assert s1.retained.size <= 10
    s2 = scan_greedy(ts, g, 2, 0, pr, s1)
    log_b21 = math.log(pr.alpha) + s2.log_total - s1.log_total
    assert log_b21 < 0
    assert s2.n_evaluations <= g.count * s1.retained.size
    assert len({tuple(t) for t in s2.tuples}) == s2.tuples.shape[0]


def test_greedy_never_exceeds_exact(priors_for):
    ts0 = make_series(seed=8)
    g = grid_for(ts0, 80)
    ts = two_sinusoids(8, g, 20, 51, amp=2.0)
    pr = priors_for(ts, f_max=g.nodes[-1])
    s1 = scan_1d(ts, g, 0, pr, epsilon=1e-2)
    greedy = scan_greedy(ts, g, 2, 0, pr, s1, epsilon=1e-2)
    exact = scan_2d(ts, g, 0, pr)
    assert greedy.log_total <= exact.log_total + 1e-9


def test_epsilon_one_keeps_argmax(noisy, priors_for):
    g = grid_for(noisy, 100)
    s = scan_1d(noisy, g, 0, priors_for(noisy, f_max=g.nodes[-1]), epsilon=1.0)
    assert s.retained.tolist() == [int(np.argmax(s.posterior))]


def test_retained_prefix_minimal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.dirichlet(np.full(40, 0.3))
        eps = 10 ** rng.uniform(-6, -0.5)
        r = retained_prefix(p, eps)
        assert p[r].sum() >= 1 - eps - 1e-12
        assert p[r[:-1]].sum() < 1 - eps
        assert np.all(np.diff(p[r]) <= 0)


def test_truncation_examples():
    t = truncate_nf([0.01, 0.98, 0.01], 1e-3, nf_max=2)
    assert (t.n_stop, t.fired, t.warning) == (2, False, True)
    t = truncate_nf([0.999, 1e-6], 1e-3)
    assert (t.n_stop, t.fired) == (1, True)


def test_result_serialization(noisy, priors_for):
    g = grid_for(noisy, 50)
    s = scan_1d(noisy, g, 0, priors_for(noisy, f_max=g.nodes[-1]))
    doc = json.loads(s.to_json())
    assert doc["n_tuples"] == 50 and doc["nf"] == 1
    lines = s.grid_csv().splitlines()
    assert lines[0] == "f1,log_evidence,posterior" and len(lines) == 51
    assert float(lines[1].split(",")[0]) == g.node(0)


@pytest.mark.xfail(strict=True, reason="noise-only nf=2 mass stays near 1e-2 of lower levels")
def test_noise_truncation_fires_by_two():
    # firing at nf <= 2 depends only on levels 0..2, so nf_max=2 is enough
    from bayes_surrogate.analysis import analyze

    fired = 0
    for seed in range(20):
        ts = make_series(seed=seed)
        a = analyze(ts, f_max=0.2, nf_max=2)
        fired += truncate_nf(a.posterior.nf_probability, 1e-3, nf_max=3).fired
    assert fired >= 18
