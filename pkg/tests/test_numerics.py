import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pytest import approx

from conebm.errors import ConvergenceError, QuadratureError
from conebm.numerics import (
    ZERO_TERM,
    FdStencil,
    QuadControl,
    SeriesControl,
    SignedLogTerm,
    apply_dual_forward,
    apply_generator,
    histogram,
    integrate,
    log_two_sinh_exp,
    signed_log_add,
    signed_term,
    sum_bilateral,
    zscores,
)

finite = st.floats(min_value=-700.0, max_value=700.0)


def test_alternating_gaussian_series():
    res = sum_bilateral(lambda n: SignedLogTerm(-float(n * n), 1 if n % 2 == 0 else -1))
    brute = math.fsum((-1) ** n * math.exp(-n * n) for n in range(-10, 11))
    assert res.value == approx(brute, abs=1e-12)
    assert res.value == approx(0.3006258, abs=1e-7)
    assert res.bound < 1e-14


def test_gaussian_series_is_twice_the_half_sum():
    res = sum_bilateral(lambda n: SignedLogTerm(-float(n * n), 1))
    assert res.value == approx(2 * 0.886319, abs=1e-6)
    assert res.value == approx(math.fsum(math.exp(-n * n) for n in range(-10, 11)), abs=1e-12)


def test_zero_series():
    res = sum_bilateral(lambda n: ZERO_TERM)
    assert res.value == 0.0
    assert res.terms_used == 1
    assert res.sign == 0


def test_non_convergence():
    with pytest.raises(ConvergenceError):
        sum_bilateral(lambda n: SignedLogTerm(-float(abs(n)), 1), SeriesControl(abs_tol=1e-16, max_terms=4))
    with pytest.raises(ValueError):
        SeriesControl(max_terms=3)


def test_underflowing_terms_keep_log_value():
    # every term is below the smallest double but the sum is well defined in logs
    res = sum_bilateral(lambda n: SignedLogTerm(-1000.0 - n * n, 1), SeriesControl(abs_tol=1e-14, rel_tol=1e-17))
    assert res.value == 0.0
    assert res.log_abs == approx(-1000.0 + math.log(1.7726372048266521))


@given(st.floats(min_value=0.05, max_value=5.0), st.floats(min_value=-3.0, max_value=3.0))
def test_symmetric_inputs_are_bit_identical(c, shift):
    a = sum_bilateral(lambda n: SignedLogTerm(shift - c * n * n, 1 if n % 2 == 0 else -1))
    b = sum_bilateral(lambda n: SignedLogTerm(shift - c * (-n) * (-n), 1 if n % 2 == 0 else -1))
    assert a.value == b.value


@given(finite, st.sampled_from([-1, 1]), finite, st.sampled_from([-1, 1]))
def test_signed_log_add_matches_float(la, sa, lb, sb):
    r = signed_log_add(SignedLogTerm(la, sa), SignedLogTerm(lb, sb))
    assert not math.isnan(r.log_magnitude)
    if max(la, lb) < 700:
        exact = sa * math.exp(la) + sb * math.exp(lb)
        # float subtraction loses digits under cancellation, and exp(log) loses
        # about |log| ulps; compare on the operand scale
        scale = max(math.exp(la), math.exp(lb))
        rel = 1e-13 + 4e-16 * max(abs(la), abs(lb))
        assert r.value == approx(exact, abs=rel * scale + 1e-300)


@given(finite, st.sampled_from([-1, 1]))
def test_cancellation_gives_sign_zero(l, s):
    r = signed_log_add(SignedLogTerm(l, s), SignedLogTerm(l, -s))
    assert r.sign == 0


def test_signed_term_and_roundtrip():
    assert signed_term(-math.inf, 1) == ZERO_TERM
    assert signed_term(1.0, 0) == ZERO_TERM
    assert SignedLogTerm.from_value(-2.5).value == approx(-2.5)
    assert SignedLogTerm.from_value(0.0) == ZERO_TERM


@given(st.floats(min_value=-30.0, max_value=30.0), st.floats(min_value=-20.0, max_value=20.0))
def test_log_two_sinh_exp(a, b):
    t = log_two_sinh_exp(a, b)
    assert t.value == approx(2 * math.sinh(a) * math.exp(b), rel=1e-12, abs=1e-300)


def test_integrate_examples():
    v, _ = integrate(lambda x: x * x, 0.0, 1.0)
    assert v == approx(1 / 3, abs=1e-12)
    v, _ = integrate(lambda x: math.exp(-x), 0.0, math.inf, envelope=lambda c: math.exp(-c))
    assert v == approx(1.0, abs=1e-10)
    assert integrate(math.sin, 2.0, 2.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        integrate(math.sin, 1.0, 0.0)


def test_integrate_rejects_tail_above_envelope():
    with pytest.raises(QuadratureError):
        integrate(lambda x: math.exp(-x), 0.0, math.inf, envelope=lambda c: 1e-3 * math.exp(-c))


def test_integrate_reports_failure():
    # a near-nonintegrable singularity with one subdivision cannot converge
    with pytest.raises(QuadratureError):
        integrate(lambda x: 1.0 / abs(x - 0.3) ** 0.9, 0.0, 1.0, QuadControl(max_subdivisions=1))


BATTERY = [
    (lambda x: x ** 5, 0.0, 2.0, 64 / 6),
    (math.exp, 0.0, 1.0, math.e - 1.0),
    (math.sin, 0.0, math.pi, 2.0),
    (lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, math.pi / 4),
    (lambda x: math.sqrt(x), 0.0, 1.0, 2 / 3),
    (lambda x: math.log(x), 1.0, 2.0, 2 * math.log(2) - 1),
    (lambda x: math.exp(-x * x), -3.0, 3.0, math.sqrt(math.pi) * math.erf(3.0)),
    (lambda x: math.cos(10 * x), 0.0, 1.0, math.sin(10.0) / 10),
    (lambda x: x * math.exp(-x), 0.0, math.inf, 1.0),
    (lambda x: 1.0 / (1.0 + x) ** 2, 0.0, math.inf, 1.0),
]


@pytest.mark.parametrize("f,a,b,exact", BATTERY)
def test_integrate_error_estimate_covers_error(f, a, b, exact):
    v, err = integrate(f, a, b)
    assert abs(v - exact) <= max(err, 1e-15)
    assert v == approx(exact, rel=1e-8)


def test_generator_exact_for_affine_and_bilinear():
    g = 0.3
    s = FdStencil(1e-3)
    assert apply_generator(lambda x, y: x, (1.0, 2.0), g, s) == approx(1 - g, abs=1e-10)
    assert apply_generator(lambda x, y: y, (1.0, 2.0), g, s) == approx(g, abs=1e-10)
    x, y = 1.3, 0.6
    assert apply_generator(lambda x, y: x * y, (x, y), g, s) == approx(-1 + (1 - g) * y + g * x, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.3, 0.8, 1.2])
def test_generator_second_order_on_exponentials(alpha):
    from conebm.geometry import saddle_point

    g = 0.4
    sp = saddle_point(alpha, g)
    h = lambda x, y: math.exp(x * sp.p + y * sp.q)  # noqa: E731
    r1 = abs(apply_generator(h, (1.0, 1.0), g, FdStencil(2e-2)))
    r2 = abs(apply_generator(h, (1.0, 1.0), g, FdStencil(1e-2)))
    assert r1 / r2 == approx(4.0, rel=0.05)


def test_dual_forward_on_free_gaussian():
    g = 0.5
    q = lambda t, y: math.exp(-((y - g * t) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)  # noqa: E731
    r1 = abs(apply_dual_forward(q, 1.0, 0.7, g, FdStencil(2e-2)))
    r2 = abs(apply_dual_forward(q, 1.0, 0.7, g, FdStencil(1e-2)))
    assert r2 < 1e-4
    assert r1 / r2 == approx(4.0, rel=0.1)


def test_stencil_validation():
    with pytest.raises(ValueError):
        FdStencil(0.0)
    with pytest.raises(ValueError):
        FdStencil(1e-3, order=4)


def test_histogram_normalisation():
    samples = np.array([0.1, 0.2, 0.25, 0.7, 5.0])
    h = histogram(samples, np.array([0.0, 0.5, 1.0]), total=10)
    assert h.counts.tolist() == [3, 1]
    assert h.mass.tolist() == approx([0.3, 0.1])
    assert h.density.tolist() == approx([0.6, 0.2])
    assert h.std_error[0] == approx(math.sqrt(0.3 * 0.7 / 10) / 0.5)


def test_zscores_zero_se():
    z = zscores(np.array([1.0, 2.0, 0.0]), np.array([1.0, 1.0, 0.5]), np.array([0.0, 0.0, 0.25]))
    assert z.tolist() == [0.0, math.inf, -2.0]
