import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pytest import approx

from conebm.densities import (
    boundary_asymptotic_constants,
    conditioned_exit_functional_within,
    conditioned_functional_tail,
    exit_density_f1,
    exit_density_f2,
    exit_density_mass,
    exit_density_ratio,
    exit_time_density,
    exit_time_tail,
    exit_time_tail_envelope,
    free_gaussian,
    green_asymptotic,
    green_function,
    green_ratio,
    kernel_via_convolution,
    survival_asymptotic_literal,
    survival_probability,
    tail_split,
    transition_kernel,
)
from conebm.errors import DomainError
from conebm.geometry import ModelParams, ParabolaPoint, drift_direction, saddle_point
from conebm.harmonics import conditioned_exit_functional, h_edge, persistence_probability, unconditioned_exit_probabilities
from conebm.validate import chapman_kolmogorov_rhs

P_STAR = ModelParams(0.5, 2.0, 1.0)
SECOND = ModelParams(0.25, 3.0, 1.0)
THIRD = ModelParams(0.75, 1.5, 0.5)


@st.composite
def model_params(draw):
    g = draw(st.floats(min_value=0.15, max_value=0.85))
    t0 = draw(st.floats(min_value=0.8, max_value=4.0))
    y0 = draw(st.floats(min_value=0.1, max_value=0.9)) * t0
    return ModelParams(g, t0, y0)


def test_exit_density_domain():
    with pytest.raises(DomainError):
        exit_density_f1(P_STAR, 1.0)
    with pytest.raises(DomainError):
        exit_density_f2(P_STAR, 2.0)
    assert exit_density_f1(P_STAR, 2.0 + 1e-4) == approx(0.0, abs=1e-300)
    assert exit_time_density(P_STAR, 1e-4) == approx(0.0, abs=1e-300)


def test_f1_reference_value():
    # frozen from the series; the Y(T1) histogram check in the acceptance suite backs it
    assert exit_density_f1(P_STAR, 3.0) == approx(0.128554479462, rel=1e-10)


@pytest.mark.parametrize("params", [P_STAR, SECOND, THIRD])
def test_exit_density_masses(params):
    e1, e2, pinf = unconditioned_exit_probabilities(params)
    assert exit_density_mass(params, 1) == approx(e1, abs=1e-6)
    assert exit_density_mass(params, 2) == approx(e2, abs=1e-6)


def test_exit_density_masses_reference():
    assert exit_density_mass(P_STAR, 1) == approx(0.349688, abs=1e-5)
    assert exit_density_mass(P_STAR, 2) == approx(0.349688, abs=1e-5)


@given(st.floats(min_value=2.01, max_value=40.0))
def test_symmetric_point_densities_coincide(s):
    assert exit_density_f2(P_STAR, s) == approx(exit_density_f1(P_STAR, s), rel=1e-13)


@given(model_params(), st.floats(min_value=1e-3, max_value=50.0))
def test_densities_nonnegative(p, u):
    assert exit_density_f1(p, p.t0 + u) >= -1e-12
    assert exit_density_f2(p, p.t0 + u) >= -1e-12
    assert exit_time_density(p, u) == approx(exit_density_f1(p, p.t0 + u) + exit_density_f2(p, p.t0 + u))


@given(model_params())
def test_mirror_exchanges_densities(p):
    m = p.mirrored()
    s = p.t0 + 0.7
    assert exit_density_f1(m, s) == approx(exit_density_f2(p, s), rel=1e-12)


def test_survival_limits():
    assert survival_probability(P_STAR, 0.0) == approx(1.0, abs=1e-8)
    assert survival_probability(P_STAR, 200.0) == approx(persistence_probability(P_STAR), abs=1e-12)
    s = [survival_probability(P_STAR, t) for t in (0.25, 1.0, 4.0, 16.0)]
    assert s == approx([0.94607717, 0.63977499, 0.37348188, s[3]], abs=1e-7)
    assert all(a > b for a, b in zip(s, s[1:]))
    with pytest.raises(DomainError):
        exit_time_tail(P_STAR, -1.0)


def test_printed_survival_correction_tracks_density():
    # the printed large-time correction matches f_T(t), not the tail P(t < T < inf)
    t = 30.0
    lit = survival_asymptotic_literal(P_STAR, t)
    assert exit_time_density(P_STAR, t) / lit == approx(1.0, abs=0.1)
    assert exit_time_tail(P_STAR, t) / lit > 5.0


def test_tail_envelope_ratio_tends_to_one():
    ratios = [exit_time_tail(P_STAR, t) / exit_time_tail_envelope(P_STAR, t) for t in (10.0, 30.0, 60.0)]
    assert all(r > 1.0 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] == approx(1.0, abs=0.1)


def test_tail_split_rule():
    assert tail_split(P_STAR) == 80.0
    assert tail_split(ModelParams(0.1, 1.0, 0.5)) == approx(2000.0)


@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_kernel_mass_is_survival(t):
    from conebm.numerics import integrate

    mass, _ = integrate(lambda y: transition_kernel(P_STAR, t, y), 0.0, P_STAR.t0 + t)
    assert mass == approx(survival_probability(P_STAR, t), abs=1e-6)


def test_kernel_boundary_values():
    for t in (0.1, 1.0, 5.0):
        assert transition_kernel(P_STAR, t, 0.0) == 0.0
        assert transition_kernel(P_STAR, t, P_STAR.t0 + t) == approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        transition_kernel(P_STAR, 1.0, 3.5)
    with pytest.raises(DomainError):
        transition_kernel(P_STAR, 0.0, 1.0)


@given(model_params(), st.floats(min_value=0.05, max_value=6.0), st.floats(min_value=0.01, max_value=0.99))
def test_kernel_nonnegative(p, t, frac):
    assert transition_kernel(p, t, frac * (p.t0 + t)) >= -1e-12


@given(model_params(), st.floats(min_value=0.05, max_value=6.0), st.floats(min_value=0.01, max_value=0.99))
def test_kernel_reflection_symmetry(p, t, frac):
    y = frac * (p.t0 + t)
    m = p.mirrored()
    assert transition_kernel(m, t, p.t0 + t - y) == approx(transition_kernel(p, t, y), rel=1e-10, abs=1e-13)


def test_kernel_small_time_is_gaussian():
    for t in (1e-2, 1e-3):
        y = P_STAR.y0 + 0.3 * math.sqrt(t)
        ratio = transition_kernel(P_STAR, t, y) / free_gaussian(t, y - P_STAR.y0, P_STAR.gamma)
        assert ratio == approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t,y", [(1.0, 1.3), (0.5, 0.4), (2.0, 3.1)])
def test_kernel_matches_convolution_form(t, y):
    assert kernel_via_convolution(P_STAR, t, y) == approx(transition_kernel(P_STAR, t, y), abs=1e-6)


def test_kernel_convolution_reference():
    assert transition_kernel(P_STAR, 1.0, 1.3) == approx(0.348954607239020, rel=1e-10)


@pytest.mark.parametrize("params", [P_STAR, THIRD])
def test_chapman_kolmogorov(params):
    for y in (0.4, 1.5, 2.2):
        lhs = transition_kernel(params, 1.0, y)
        assert chapman_kolmogorov_rhs(params, 0.5, 0.5, y) == approx(lhs, abs=1e-6)


def test_green_definition_and_axes():
    x, y = 1.7, 1.3
    assert green_function(P_STAR, (x, y)) == transition_kernel(P_STAR, 1.0, y)
    assert green_function(P_STAR, (3.0, 0.0)) == 0.0
    assert green_function(P_STAR, (0.0, 3.0)) == approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        green_function(P_STAR, (0.5, 0.5))
    with pytest.raises(DomainError):
        green_asymptotic(P_STAR, (0.0, 3.0))


def test_green_log_form_agrees():
    z = (2.5, 1.5)
    assert math.exp(green_function(P_STAR, z, log=True)) == approx(green_function(P_STAR, z), rel=1e-13)
    # far out the plain value underflows but the log stays finite
    a = math.pi / 8
    far = (30000.0 * math.cos(a), 30000.0 * math.sin(a))
    assert green_function(P_STAR, far) == 0.0
    assert math.isfinite(green_function(P_STAR, far, log=True))


@pytest.mark.parametrize("alpha", ["drift", math.pi / 3, math.pi / 6])
def test_green_ratio_converges_at_first_order(alpha):
    a = drift_direction(0.5) if alpha == "drift" else alpha
    errs = [abs(green_ratio(P_STAR, (r * math.cos(a), r * math.sin(a))) - 1.0) for r in (60.0, 120.0, 240.0, 960.0)]
    assert errs[0] / errs[1] == approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == approx(2.0, rel=0.1)
    assert errs[3] < 0.005


@pytest.mark.parametrize("edge", [1, 2])
def test_boundary_density_ratio_converges(edge):
    errs = [abs(exit_density_ratio(P_STAR, edge, s) - 1.0) for s in (80.0, 160.0, 320.0)]
    assert errs[0] / errs[1] == approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == approx(2.0, rel=0.1)


def test_boundary_constants():
    h0, hpi2 = boundary_asymptotic_constants(P_STAR)
    assert h0 == approx(0.47222189869, rel=1e-10)
    assert hpi2 == h0
    big = ModelParams(0.5, 40.0, 20.0)
    sp = saddle_point(0.0, 0.5)
    h0, _ = boundary_asymptotic_constants(big)
    assert h0 / (20.0 * math.exp(20.0 * (sp.p + sp.q))) == approx(1.0, abs=1e-3)
    assert h_edge((0.0, 2.0), "alpha0", 0.5).value == 0.0


def test_conditioned_functional_within_horizon():
    pt = saddle_point(math.pi / 8, 0.5)
    full = conditioned_exit_functional(P_STAR, pt)
    tail = conditioned_functional_tail(P_STAR, pt, 40.0)
    assert 0.0 < tail < 0.01
    assert conditioned_exit_functional_within(P_STAR, pt, 40.0) == approx(full - tail)
    # at the origin the tail is the exit-time tail
    assert conditioned_functional_tail(P_STAR, ParabolaPoint(0.0, 0.0), 40.0) == approx(
        exit_time_tail(P_STAR, 40.0), rel=1e-6)


def test_exit_time_density_integrates_to_exit_probability():
    from conebm.numerics import integrate

    v, _ = integrate(lambda t: exit_time_density(P_STAR, t), 0.0, math.inf, split=20.0)
    assert v == approx(0.699374, abs=1e-5)
    assert v == approx(1.0 - persistence_probability(P_STAR), abs=1e-6)


def test_series_vs_grid_nonnegative_everywhere():
    ts = np.linspace(0.05, 8.0, 30)
    for t in ts:
        ys = np.linspace(0.0, P_STAR.t0 + t, 40)
        assert min(transition_kernel(P_STAR, float(t), float(y)) for y in ys) >= -1e-12
