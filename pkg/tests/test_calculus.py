import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpmart.calculus import (
    batch_blend,
    batch_log_exponential,
    batch_variation,
    log_stochastic_exponential,
    quadratic_variation,
    sde_residual_check,
    stochastic_exponential,
)
from jumpmart.errors import DomainError, UnsupportedModelError
from jumpmart.generators import generate, log1p_minus, simulate_batch
from jumpmart.paths import JumpLaw, ModelSpec, SamplePath
from jumpmart.rng import RngStream

EMPTY = np.empty(0)


def test_zero_path():
    path = generate(ModelSpec.zero(), RngStream(1))
    var = quadratic_variation(path, 1.0)
    assert var.qv == 0 and var.pqv == 0
    assert stochastic_exponential(path, 1.0) == 1.0
    assert sde_residual_check(path) == 0.0


def test_poisson_variation_example():
    spec = ModelSpec.compensated_poisson(1.0, 1.0, 1.0)
    path = SamplePath(spec, EMPTY, EMPTY, np.array([0.2, 0.5, 0.8]), np.ones(3))
    var = quadratic_variation(path, 1.0)
    assert (var.qv, var.pqv, var.qv_cont) == (3.0, 1.0, 0.0)
    assert var.blend(0.25) == pytest.approx(0.25 * 3 + 0.75 * 1)
    assert stochastic_exponential(path, 1.0) == pytest.approx(8 * math.exp(-1), rel=1e-15)
    with pytest.raises(DomainError):
        quadratic_variation(path, 2.0)


def test_stopped_variation_and_exponential():
    a, b = 0.5, 0.4
    theta = (1 + b) * math.log1p(a) - a
    for rep in range(50):
        path = generate(ModelSpec.stopped_scaled_cpp(a, b), RngStream(2, rep))
        var = quadratic_variation(path, math.inf)
        assert var.qv == pytest.approx(a * a * path.n_jumps, rel=1e-15)
        assert var.pqv == pytest.approx(a * a * path.stop_time, rel=1e-15)
        closed = theta * path.stop_time - math.log1p(a)
        assert log_stochastic_exponential(path, math.inf) == pytest.approx(closed, rel=1e-12, abs=1e-13)


def test_poisson_closed_form_every_path():
    spec = ModelSpec.compensated_poisson(1.0, 1.0, 1.0)
    for rep in range(2000):
        path = generate(spec, RngStream(31, rep))
        value = stochastic_exponential(path, 1.0)
        closed = 2.0**path.n_jumps * math.exp(-1.0)
        assert abs(value / closed - 1) <= 1e-12


def test_brownian_exponential():
    spec = ModelSpec.brownian(0.8, 2.0)
    path = generate(spec, RngStream(7), step=2.0**-6)
    b_t = path.value(2.0)
    assert log_stochastic_exponential(path, 2.0) == pytest.approx(b_t - 0.5 * 0.64 * 2.0, rel=1e-15)
    with pytest.raises(UnsupportedModelError):
        sde_residual_check(path)


def test_large_jump_count_no_overflow():
    # 5000 unit jumps: the product form overflows, the log form does not
    times = np.linspace(1e-3, 1.0, 5000)
    path = SamplePath(ModelSpec.compensated_poisson(5000.0, 1.0, 1.0), EMPTY, EMPTY, times, np.ones(5000))
    log_e = log_stochastic_exponential(path, 1.0)
    assert log_e == pytest.approx(5000 * math.log(2) - 5000, rel=1e-12)


@pytest.mark.parametrize("x", [1e-14, 1e-9, 3e-5, 9.9e-5, 1e-4, 2e-4, 0.3, 1.0, 50.0])
def test_small_jump_series(x):
    mpmath = pytest.importorskip("mpmath")
    with mpmath.workdps(50):
        exact = float(mpmath.log1p(mpmath.mpf(x)) - mpmath.mpf(x))
    assert log1p_minus(x) == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec.compensated_poisson(2.0, 0.6, 3.0),
        ModelSpec.stopped_scaled_cpp(0.5, 0.4),
        ModelSpec.compound_poisson(3.0, JumpLaw.exponential(0.5), 2.0),
    ],
    ids=lambda s: s.kind,
)
def test_sde_residual(spec):
    worst = max(sde_residual_check(generate(spec, RngStream(5, rep))) for rep in range(1000))
    assert worst <= 1e-10


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    t1=st.floats(0.0, 2.0),
    t2=st.floats(0.0, 2.0),
    kind=st.sampled_from(["cp", "compound", "brownian"]),
)
def test_variation_monotone(seed, t1, t2, kind):
    spec = {
        "cp": ModelSpec.compensated_poisson(2.0, 0.7, 2.0),
        "compound": ModelSpec.compound_poisson(2.0, JumpLaw.uniform(0.0, 1.0), 2.0),
        "brownian": ModelSpec.brownian(1.3, 2.0),
    }[kind]
    path = generate(spec, RngStream(seed), step=2.0**-5)
    lo, hi = sorted((t1, t2))
    v1, v2 = quadratic_variation(path, lo), quadratic_variation(path, hi)
    assert v1.qv <= v2.qv and v1.pqv <= v2.pqv


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), alphas=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6))
def test_blend_interpolates(seed, alphas):
    path = generate(ModelSpec.compensated_poisson(1.5, 1.0, 1.0), RngStream(seed))
    var = quadratic_variation(path, 1.0)
    assert var.blend(1.0) == var.qv and var.blend(0.0) == var.pqv
    alphas = sorted(alphas)
    values = [var.blend(al) for al in alphas]
    steps = np.diff(values)
    tol = 1e-12 * max(1.0, var.qv, var.pqv)
    if var.qv >= var.pqv:
        assert np.all(steps >= -tol)
    else:
        assert np.all(steps <= tol)


def test_qv_minus_pqv_unbiased():
    n = 200_000
    spec = ModelSpec.compensated_poisson(1.0, 0.8, 1.0)
    qv, pqv, _ = batch_variation(simulate_batch(spec, n, 77))
    diff = qv - pqv
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(n)


def test_batch_blend_identity():
    spec = ModelSpec.stopped_scaled_cpp(0.5, 0.4)
    batch = simulate_batch(spec, 1000, 3)
    blend = batch_blend(batch, 0.3)
    t_b = batch.end_time
    expected = 0.25 * (0.3 * ((1.4) * t_b - 1) + 0.7 * t_b)
    np.testing.assert_allclose(blend, expected, rtol=1e-12, atol=1e-14)
    logs = batch_log_exponential(batch)
    np.testing.assert_allclose(logs, (1.4 * math.log(1.5) - 0.5) * t_b - math.log(1.5), rtol=1e-12, atol=1e-14)
