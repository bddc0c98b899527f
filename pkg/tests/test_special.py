from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sps

from stoplab.special import log_cf_factor, log_gammainc, log_gammaincc, log_pq, log_upper_gamma

mp.mp.dps = 40

SHAPES = [0.25, 0.5, 1.0 / 1.5, 1.0, 2.0]
ARGS = [0.0, 1e-8, 0.01, 0.3, 0.9, 1.4, 1.5, 2.0, 2.999, 3.0, 3.001, 10.0, 40.0, 200.0, 700.0, 2000.0]


def _mp_logq(a, x):
    return float(mp.log(mp.gammainc(a, x, mp.inf, regularized=True)))


def _mp_logp(a, x):
    return float(mp.log(mp.gammainc(a, 0, x, regularized=True)))


@pytest.mark.parametrize("a", SHAPES)
@pytest.mark.parametrize("x", ARGS)
def test_log_q_matches_mpmath(a, x):
    got = log_gammaincc(a, x)
    want = _mp_logq(a, x)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("a", SHAPES)
@pytest.mark.parametrize("x", [v for v in ARGS if v > 0])
def test_log_p_matches_mpmath(a, x):
    assert log_gammainc(a, x) == pytest.approx(_mp_logp(a, x), rel=1e-12, abs=1e-14)


def test_far_tail_stays_finite_where_scipy_underflows():
    # Q(0.5, 2000) ~ e^-2000; the plain value is 0 in double precision
    assert sps.gammaincc(0.5, 2000.0) == 0.0
    got = log_gammaincc(0.5, 2000.0)
    assert math.isfinite(got)
    assert got == pytest.approx(_mp_logq(0.5, 2000.0), rel=1e-13)


def test_edge_arguments():
    lp, lq = log_pq(1.5, 0.0)
    assert lp == -math.inf and lq == 0.0
    lp, lq = log_pq(1.5, math.inf)
    assert lp == 0.0 and lq == -math.inf


def test_array_path_agrees_with_scalar_path():
    x = np.array(ARGS)
    for a in SHAPES:
        lp, lq = log_pq(a, x)
        for i, xi in enumerate(ARGS):
            sp_, sq_ = log_pq(a, xi)
            assert lq[i] == pytest.approx(sq_, rel=1e-14, abs=1e-300)
            if xi > 0:
                assert lp[i] == pytest.approx(sp_, rel=1e-14, abs=1e-300)


def test_upper_gamma_and_cf_factor():
    for a, x in [(0.5, 3.0), (1.0, 5.0), (2.0, 50.0)]:
        want = float(mp.log(mp.gammainc(a, x, mp.inf)))
        assert log_upper_gamma(a, x) == pytest.approx(want, rel=1e-13)
        # Gamma(a, x) = x^a e^-x h
        assert log_cf_factor(a, x) == pytest.approx(want - a * math.log(x) + x, rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("a, x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5), (1.0, math.nan)])
def test_bad_arguments(a, x):
    with pytest.raises(ValueError):
        log_pq(a, x)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(min_value=0.2, max_value=3.0),
    x=st.floats(min_value=1e-6, max_value=600.0),
)
def test_p_and_q_are_complementary(a, x):
    lp, lq = log_pq(a, x)
    assert math.exp(lp) + math.exp(lq) == pytest.approx(1.0, abs=1e-13)
    q = sps.gammaincc(a, x)
    if q > 1e-290:
        assert lq == pytest.approx(math.log(q), rel=1e-9, abs=1e-12)
