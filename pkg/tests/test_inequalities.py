import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpmart import inequalities as iq
from jumpmart.errors import DomainError

mpmath = pytest.importorskip("mpmath")
mp = mpmath.mp


def oracle_middle(lemma, x, p, alpha=None):
    """Middle expression at 60 digits."""
    with mpmath.workdps(60):
        x, p = mpmath.mpf(x), mpmath.mpf(p)
        if lemma == "log1":
            return float(mpmath.log(1 + p * x) - p * mpmath.log(1 + x))
        if lemma == "log2":
            return float(p * mpmath.log(1 + x) - mpmath.log(1 + p * x))
        if lemma == "pred1":
            return float(1 + p * x - (1 + x) ** p)
        if lemma == "pred2":
            return float((1 + x) ** p - 1 - p * x)
        beta = mpmath.sqrt(1 - mpmath.mpf(alpha))
        numer = p * (1 - beta) * x + (1 + beta * x) ** p
        return float(mpmath.log(numer) - p * mpmath.log(1 + x))


def margin(lemma, x, p, alpha=None):
    if lemma == "alpha_lambda":
        return iq.margin_alpha_lambda(x, p, alpha)
    return {"log1": iq.margin_log1, "log2": iq.margin_log2, "pred1": iq.margin_pred1, "pred2": iq.margin_pred2}[
        lemma
    ](x, p)


def test_log1_examples():
    for lam in (0.0, 0.3, 1.0):
        m = iq.margin_log1(0.0, lam)
        assert (m.middle, m.lower_margin, m.upper_margin) == (0.0, 0.0, 0.0)
    for x in (1e-6, 0.5, 30.0):
        m = iq.margin_log1(x, 1.0)
        assert m.middle == pytest.approx(0.0, abs=1e-15) and m.upper_margin == pytest.approx(0.0, abs=1e-13)
    m = iq.margin_log1(1.0, 0.5)
    assert m.middle == pytest.approx(math.log(1.5 / math.sqrt(2)), rel=1e-14)
    assert m.middle == pytest.approx(0.058891, abs=1e-6)
    assert m.upper_margin == pytest.approx(0.066109, abs=1e-6)


def test_log2_examples():
    for x in (0.0, 0.4, 17.0):
        m = iq.margin_log2(x, 1.0)
        assert abs(m.middle) <= 1e-15 and abs(m.upper_margin) <= 1e-15
    m = iq.margin_log2(1.0, 2.0)
    assert m.middle == pytest.approx(math.log(4 / 3), rel=1e-14)
    assert m.upper_margin == pytest.approx(1 - math.log(4 / 3), rel=1e-14)
    assert m.holds()


def test_pred_examples():
    m = iq.margin_pred1(1.0, 0.5)
    assert m.middle == pytest.approx(1.5 - math.sqrt(2), rel=1e-14)
    assert m.upper_margin == pytest.approx(0.125 - (1.5 - math.sqrt(2)), rel=1e-13)
    assert iq.margin_pred1(3.0, 0.0).middle == 0.0
    assert iq.margin_pred1(0.0, 0.4).middle == 0.0
    m = iq.margin_pred2(1.0, 1.5)
    assert m.middle == pytest.approx(2**1.5 - 2.5, rel=1e-14)
    assert m.upper_margin == pytest.approx(0.375 - (2**1.5 - 2.5), rel=1e-13)
    for x in (0.1, 2.0, 90.0):
        assert abs(iq.margin_pred2(x, 1.0).middle) <= 4 * np.spacing(max(1.0, x))
    for x in (1e-6, 1e-3, 0.5, 1.0, 7.3, 100.0):
        m = iq.margin_pred2(x, 2.0)
        # zero up to the cancellation error of the direct formula
        assert m.middle == pytest.approx(x * x, rel=1e-12)
        assert abs(m.upper_margin) <= 1e-12 * x * x


def test_pred2_refuses_large_a():
    with pytest.raises(DomainError):
        iq.margin_pred2(1.0, 2.5)
    # the bound really fails there, so refusing is not overcautious
    mid, _, up = iq.pred2_array(10.0, 3.0)
    assert up < 0


def test_domain_errors():
    with pytest.raises(DomainError):
        iq.margin_log1(-0.1, 0.5)
    with pytest.raises(DomainError):
        iq.margin_log1(1.0, 1.5)
    with pytest.raises(DomainError):
        iq.margin_log2(1.0, 0.5)
    with pytest.raises(DomainError):
        iq.margin_alpha_lambda(1.0, 0.5, 1.2)
    with pytest.raises(DomainError):
        iq.limit_ratio(0.0, 0.5, 0.5)


def test_alpha_lambda_examples():
    beta = math.sqrt(0.5)
    expected = math.log((0.5 * (1 - beta) + math.sqrt(1 + beta)) / math.sqrt(2))
    m = iq.margin_alpha_lambda(1.0, 0.5, 0.5)
    assert m.middle == pytest.approx(expected, rel=1e-14)
    assert m.middle == pytest.approx(0.027064, abs=1e-6)
    assert m.upper_margin == pytest.approx(0.0625 - expected, rel=1e-13)
    for x in (0.0, 1e-7, 0.3, 50.0):
        m = iq.margin_alpha_lambda(x, 0.35, 0.0)
        assert abs(m.middle) <= 1e-15 and abs(m.upper_margin) <= 1e-15


LEMMA_PARAMS = [("log1", 0.3), ("log1", 0.9), ("log2", 1.7), ("log2", 6.0), ("pred1", 0.25), ("pred2", 1.4)]


@pytest.mark.parametrize("lemma,p", LEMMA_PARAMS)
@pytest.mark.parametrize("x", [1e-8, 3e-6, 9.99e-5, 1e-4, 1.0001e-4, 2e-3, 0.7, 12.0, 100.0])
def test_against_high_precision(lemma, p, x):
    m = margin(lemma, x, p)
    assert m.middle == pytest.approx(oracle_middle(lemma, x, p), rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("lam,alpha", [(0.3, 0.2), (0.5, 0.5), (0.8, 0.95), (0.6, 1.0)])
@pytest.mark.parametrize("x", [1e-8, 5e-5, 9.99e-5, 1.0001e-4, 0.01, 1.0, 100.0])
def test_alpha_lambda_against_high_precision(lam, alpha, x):
    m = iq.margin_alpha_lambda(x, lam, alpha)
    assert m.middle == pytest.approx(oracle_middle("alpha_lambda", x, lam, alpha), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0.0, 100.0), lam=st.floats(0.0, 1.0))
def test_alpha_one_is_log1(x, lam):
    a = iq.margin_alpha_lambda(x, lam, 1.0)
    b = iq.margin_log1(x, lam)
    scale = max(1.0, abs(b.middle))
    assert abs(a.middle - b.middle) <= 1e-12 * scale
    assert abs(a.upper_margin - b.upper_margin) <= 1e-12 * scale


@settings(max_examples=300, deadline=None)
@given(x=st.floats(0.0, 100.0), lam=st.floats(0.0, 1.0), alpha=st.floats(0.0, 1.0))
def test_alpha_lambda_holds_pointwise(x, lam, alpha):
    assert iq.margin_alpha_lambda(x, lam, alpha).holds()


@settings(max_examples=300, deadline=None)
@given(x=st.floats(0.0, 100.0), lam=st.floats(0.0, 1.0), a=st.floats(1.0, 2.0))
def test_all_lemmas_hold_pointwise(x, lam, a):
    for m in (iq.margin_log1(x, lam), iq.margin_log2(x, a), iq.margin_pred1(x, lam), iq.margin_pred2(x, a)):
        assert m.holds()


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_limit_ratio(lam, alpha):
    limit = iq.limit_value(lam, alpha)
    assert abs(iq.limit_ratio(1e-4, lam, alpha) - limit) <= 1e-3
    # linear convergence: |ratio - limit| <= C x for small x
    xs = np.array([1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    errs = np.array([abs(iq.limit_ratio(x, lam, alpha) - limit) for x in xs])
    c = np.max(errs / xs)
    assert c < 1.0
    assert np.all(errs[1:] <= errs[:-1])


def test_limit_ratio_examples():
    assert iq.limit_ratio(1e-4, 0.5, 0.5) == pytest.approx(0.0625, abs=1e-3)
    assert iq.limit_ratio(1e-4, 0.5, 1.0) == pytest.approx(0.125, abs=1e-3)
    for lam in (0.0, 1.0):
        for alpha in (0.0, 0.4, 1.0):
            assert abs(iq.limit_ratio(1e-3, lam, alpha)) <= 1e-6


def test_sample_points_cover_box():
    pts = iq.sample_points("alpha_lambda", 4096, 3)
    assert pts["x"].size == 4096 + 8
    assert pts["x"].min() == 0.0 and pts["x"].max() == 100.0
    inner = pts["x"][8:]
    assert inner.min() >= 1e-8 and inner.max() <= 100.0
    # log-uniform: about half the mass below the geometric midpoint 1e-3
    assert abs(np.mean(inner < 1e-3) - 0.5) < 0.02
    again = iq.sample_points("alpha_lambda", 4096, 3)
    assert all(np.array_equal(pts[k], again[k]) for k in pts)


def test_search_reports_worst_points():
    for s in iq.check_all(20_000, 1):
        assert s.passed
        assert s.worst_relative >= -1e-9
        rows = s.csv_rows()
        assert len(rows) == 2 and rows[0][0] == s.lemma
        assert len(rows[0]) == len(iq.CSV_COLUMNS)


def test_search_detects_violation():
    # pred2 over a box that includes a > 2 must fail
    box = iq._SUITE["pred2"]
    try:
        iq._SUITE["pred2"] = (box[0], box[1], ((1.0, 4.0),))
        assert not iq.search_lemma("pred2", 4096, 0).passed
    finally:
        iq._SUITE["pred2"] = box
