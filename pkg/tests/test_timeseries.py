import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayes_surrogate.errors import ParseError, ValidationError
from bayes_surrogate.linear import build_design, fit_linear, laplace_log_evidence, uncenter_coefficients
from bayes_surrogate.priors import resolve_priors
from bayes_surrogate.timeseries import (
    Observation,
    TimeSeries,
    center_abscissa,
    dumps_timeseries,
    load_timeseries,
    save_timeseries,
)

from conftest import make_series


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_three_rows(tmp_path):
    ts = load_timeseries(write(tmp_path, "0,0,1\n1,1,1\n2,0,1\n"))
    assert len(ts) == 3
    assert ts.span == 2.0


def test_zero_sigma_names_row(tmp_path):
    text = "x,y,sigma\n0,0,1\n1,1,0\n2,0,1\n"
    with pytest.raises(ValidationError) as err:
        load_timeseries(write(tmp_path, text))
    assert err.value.row == 3
    assert "row 3" in str(err.value)


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_timeseries(write(tmp_path, "0,0,1\n1,nan,1\n2,0,1\n"))


def test_malformed_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_timeseries(write(tmp_path, "0,0,1\n1,1\n"))
    assert err.value.row == 2
    with pytest.raises(ParseError):
        load_timeseries(write(tmp_path, "0,0,1\n1,abc,1\n"))


def test_sorted_and_order_kept(tmp_path):
    ts = load_timeseries(write(tmp_path, "# comment\n2,5,1\n0,3,1\n1,4,2\n"))
    np.testing.assert_array_equal(ts.x, [0, 1, 2])
    np.testing.assert_array_equal(ts.y, [3, 4, 5])
    np.testing.assert_array_equal(ts.order, [1, 2, 0])


def test_header_columns_by_name(tmp_path):
    ts = load_timeseries(write(tmp_path, "sigma,x,y\n1,0,5\n2,1,6\n1,3,7\n"))
    np.testing.assert_array_equal(ts.sigma, [1, 2, 1])
    np.testing.assert_array_equal(ts.y, [5, 6, 7])


def test_kind_comment_and_json(tmp_path):
    ts = load_timeseries(write(tmp_path, "# kind: transit_timing\n0,1,1\n1,2,1\n2,3,1\n"))
    assert ts.kind == "transit_timing"
    doc = {"kind": "doppler", "observations": [[0, 1, 1], [1, 2, 1], [2, 2, 1]]}
    ts = load_timeseries(write(tmp_path, json.dumps(doc), "d.json"))
    assert ts.kind == "doppler" and len(ts) == 3


def test_duplicates_recorded():
    ts = TimeSeries([0, 1, 1, 2], [0, 1, 2, 3], [1, 1, 1, 1])
    assert ts.n_duplicates == 1
    assert len(ts.observations) == 4
    assert isinstance(ts.observations[0], Observation)


def test_immutable():
    ts = TimeSeries([0, 1, 2], [0, 1, 2], [1, 1, 1])
    with pytest.raises(ValueError):
        ts.y[0] = 5.0


def test_analysis_minimum():
    with pytest.raises(ValidationError):
        TimeSeries([0, 1], [0, 1], [1, 1]).validate_for_analysis()
    with pytest.raises(ValidationError):
        TimeSeries([5, 5, 5], [0, 1, 2], [1, 1, 1]).validate_for_analysis()


def test_center_examples():
    c, off = center_abscissa(TimeSeries([0, 10, 20], [1, 2, 3], [1, 1, 1]))
    np.testing.assert_array_equal(c.x, [-10, 0, 10])
    assert off == 10
    c, off = center_abscissa(TimeSeries([5, 5, 5], [1, 2, 3], [1, 1, 1]))
    np.testing.assert_array_equal(c.x, [0, 0, 0])
    assert off == 5


def test_centered_slope_matches_direct_fit():
    rng = np.random.default_rng(4)
    x = np.array([0.0, 1.0, 2.0])
    y = 3.0 - 0.7 * x + rng.normal(0, 0.1, 3)
    ts = TimeSeries(x, y, np.ones(3))
    d = build_design(ts, [], 1)
    fit = fit_linear(ts, d, 0.0)
    coeffs = uncenter_coefficients(fit.coeffs, (), 1, d.offset)
    # direct least squares on the raw abscissa
    oracle = np.linalg.lstsq(np.column_stack([np.ones(3), x]), y, rcond=None)[0]
    assert math.isclose(coeffs[1], oracle[1], rel_tol=1e-10)
    assert math.isclose(coeffs[0], oracle[0], rel_tol=1e-10)


def test_translation_invariance():
    ts = make_series(seed=2, amp=3.0)
    shifted = ts.with_values(x=ts.x + 2450000.0)
    pr = resolve_priors(ts, f_max=0.5)
    for nd in (0, 1, 2):
        a = laplace_log_evidence(ts, build_design(ts, [0.1], nd), 0.3, pr)
        b = laplace_log_evidence(shifted, build_design(shifted, [0.1], nd), 0.3, pr)
        assert abs(a - b) < 1e-8


def test_permutation_invariance():
    ts = make_series(seed=5, amp=2.0)
    perm = np.random.default_rng(0).permutation(len(ts))
    other = TimeSeries(ts.x[perm], ts.y[perm], ts.sigma[perm])
    pr = resolve_priors(ts, f_max=0.5)
    a = laplace_log_evidence(ts, build_design(ts, [0.1], 1), 0.2, pr)
    b = laplace_log_evidence(other, build_design(other, [0.1], 1), 0.2, pr)
    assert a == pytest.approx(b, abs=1e-10)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite, positive), min_size=1, max_size=20),
       st.sampled_from(["csv", "json"]))
def test_round_trip_bit_identical(tmp_path_factory, rows, fmt):
    x, y, s = map(np.array, zip(*rows))
    ts = TimeSeries(x, y, s, kind="doppler")
    path = tmp_path_factory.mktemp("rt") / f"d.{fmt}"
    save_timeseries(ts, path)
    back = load_timeseries(path)
    again = dumps_timeseries(back, fmt)
    assert again == dumps_timeseries(ts, fmt)
    assert back == ts
    assert back.kind == "doppler"
