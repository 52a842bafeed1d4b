import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bd_rate_oracle
from erpladder.bdrate import BDRateError, RDCurve, bd_rate, format_curve, read_curve

REF = RDCurve((1.0, 2.5, 6.0, 15.0, 40.0), (31.0, 34.2, 37.1, 40.3, 43.0))


def test_identity_and_uniform_shifts():
    assert abs(bd_rate(REF, REF)) <= 1e-9
    assert bd_rate(REF, REF.scaled(2.0)) == pytest.approx(100.0, abs=0.01)
    assert bd_rate(REF, REF.scaled(0.5)) == pytest.approx(-50.0, abs=0.01)


curve_pts = st.lists(st.floats(0.5, 50), min_size=4, max_size=8, unique=True).map(sorted)


@st.composite
def curves(draw):
    rates = draw(curve_pts)
    steps = draw(st.lists(st.floats(0.3, 5), min_size=len(rates), max_size=len(rates)))
    q = np.cumsum(steps) + 25
    return RDCurve(tuple(rates), tuple(q))


@settings(max_examples=60, deadline=None)
@given(curves(), st.floats(0.2, 5))
def test_multiplicative_antisymmetry(c, k):
    ab = bd_rate(c, c.scaled(k))
    ba = bd_rate(c.scaled(k), c)
    assert (1 + ab / 100) * (1 + ba / 100) == pytest.approx(1, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(curves(), curves(), st.floats(0.01, 100))
def test_rescaling_invariance(a, b, k):
    try:
        base = bd_rate(a, b)
    except BDRateError:
        return
    assert bd_rate(a.scaled(k), b.scaled(k)) == pytest.approx(base, rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(curves(), curves())
def test_matches_independent_oracle(a, b):
    try:
        got = bd_rate(a, b)
    except BDRateError:
        return
    want = bd_rate_oracle(a.rates, a.qualities, b.rates, b.qualities)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def _with_point_on_curve(c, q):
    r = 10 ** float(c._interpolant()(q))
    return RDCurve.from_points(list(zip(c.rates, c.qualities)) + [(r, q)])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.1), st.floats(0.05, 5.0), st.floats(31, 42))
def test_point_on_interpolant_when_log_rate_is_affine(slope, r0, q):
    # rates stay within 0.05..100 Mbps, like real ladders
    qs = (30.0, 33.0, 36.0, 39.0, 43.0)
    c = RDCurve(tuple(r0 * 10 ** (slope * (v - 30.0)) for v in qs), qs)
    if any(abs(q - v) < 1e-3 for v in qs):
        return
    assert abs(bd_rate(REF, _with_point_on_curve(c, q)) - bd_rate(REF, c)) < 1e-6


@pytest.mark.xfail(strict=True, reason=(
    "a monotone cubic is not invariant under knot insertion: the new knot "
    "changes neighbouring slopes, moving BD-rate by ~0.1-0.2 points here"
))
def test_point_on_interpolant_general_curve():
    test = RDCurve((1.3, 3.1, 7.0, 18.0, 44.0), (31.5, 34.0, 37.5, 40.0, 42.5))
    assert abs(bd_rate(REF, _with_point_on_curve(test, 38.7)) - bd_rate(REF, test)) < 1e-6


def test_errors():
    with pytest.raises(BDRateError, match="no quality overlap"):
        bd_rate(REF, RDCurve((1, 2, 3, 4), (50, 51, 52, 53)))
    with pytest.raises(BDRateError, match="at least 4"):
        RDCurve((1, 2, 3), (1, 2, 3))
    with pytest.raises(BDRateError, match="strictly increasing"):
        RDCurve((1, 2, 2, 4), (1, 2, 3, 4))
    with pytest.raises(BDRateError, match="monotone"):
        RDCurve((1, 2, 3, 4), (1, 3, 2, 4))
    with pytest.raises(BDRateError, match="positive"):
        RDCurve((0, 2, 3, 4), (1, 2, 3, 4))


def test_csv_roundtrip():
    text = format_curve(zip(REF.rates, REF.qualities))
    back = read_curve(io.StringIO(text))
    assert back.rates == REF.rates
    np.testing.assert_allclose(back.qualities, REF.qualities, atol=1e-6)
    with pytest.raises(BDRateError, match="header"):
        read_curve(io.StringIO("rate,q\n1,2\n"))
