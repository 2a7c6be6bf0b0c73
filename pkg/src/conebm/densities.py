"""Exit densities, exit-time law, killed transition kernel and their asymptotics.

All image-type series are evaluated term by term in log space.  Functions
taking ``log=True`` return the natural logarithm of the (positive) quantity,
which stays finite far beyond the point where the value itself underflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc

from .errors import DomainError
from .geometry import HALF_PI, ModelParams, ParabolaPoint, saddle_point
from .harmonics import conditioned_exit_functional, h_edge, h_interior, persistence_probability
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_SERIES,
    QuadControl,
    SeriesControl,
    SeriesResult,
    SignedLogTerm,
    integrate,
    signed_term,
    sum_bilateral,
)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

#: values of the kernel this far below zero are rounding noise
KERNEL_CLAMP = 1e-12


@dataclass(frozen=True)
class ConePoint:
    """A point ``(t', y)`` of the cone in absolute time."""

    t_abs: float
    y: float

    @property
    def interior(self) -> bool:
        return 0.0 < self.y < self.t_abs


def _to_value(res: SeriesResult, log_prefactor: float, log: bool) -> float:
    if log:
        if res.sign <= 0:
            return -math.inf
        return log_prefactor + res.log_abs
    if res.sign == 0:
        return 0.0
    return res.sign * math.exp(log_prefactor + res.log_abs)


# -- exit densities -------------------------------------------------------------

def _exit_density(u: float, drift_out: float, t0: float, h0: float, ctrl: SeriesControl, log: bool) -> float:
    # density of the exit point at distance u = y - t0 past the apex, for an
    # edge whose outward drift is drift_out and start height h0 above the other edge
    def term(n: int) -> SignedLogTerm:
        b = (2 * n + 1) * t0 - h0
        if b == 0.0:
            return SignedLogTerm(-math.inf, 0)
        return signed_term(
            math.log(abs(b)) - 0.5 * b * b / u + (2 * n + 1) * h0 - 2.0 * n * (n + 1) * t0, b
        )

    res = sum_bilateral(term, ctrl)
    g = 1.0 - drift_out
    log_pref = (
        -t0 * drift_out - h0 * g - LOG_SQRT_2PI - 0.5 * drift_out * drift_out * u - 1.5 * math.log(u)
    )
    if not log and res.value < 0.0:
        return 0.0
    return _to_value(res, log_pref, log)


def exit_density_f1(params: ModelParams, y: float, ctrl: SeriesControl = DEFAULT_SERIES, *, log: bool = False) -> float:
    """Density of the exit height on the moving edge (``y = t'``), supported on ``y > t0``."""
    if not y > params.t0:
        raise DomainError(f"f1 is supported on y > t0 = {params.t0!r}, got y={y!r}")
    return _exit_density(y - params.t0, 1.0 - params.gamma, params.t0, params.y0, ctrl, log)


def exit_density_f2(params: ModelParams, x: float, ctrl: SeriesControl = DEFAULT_SERIES, *, log: bool = False) -> float:
    """Density of the exit abscissa on the fixed edge (``y = 0``), supported on ``x > t0``."""
    if not x > params.t0:
        raise DomainError(f"f2 is supported on x > t0 = {params.t0!r}, got x={x!r}")
    return _exit_density(x - params.t0, params.gamma, params.t0, params.x0, ctrl, log)


def exit_time_density(params: ModelParams, t: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Density of the first exit time ``T``."""
    if not t > 0.0:
        raise DomainError(f"exit-time density needs t > 0, got t={t!r}")
    s = params.t0 + t
    return exit_density_f1(params, s, ctrl) + exit_density_f2(params, s, ctrl)


def tail_split(params: ModelParams) -> float:
    """Time after which semi-infinite exit-time integrals switch to their tail piece."""
    g = params.gamma
    return max(10.0, 20.0 / min(g * g, (1.0 - g) ** 2))


def _incomplete_envelope(start: float, c: float) -> float:
    # int_start^inf y^(-3/2) exp(-c y) dy
    return 2.0 * math.exp(-c * start) / math.sqrt(start) - 2.0 * math.sqrt(math.pi * c) * erfc(
        math.sqrt(c * start)
    )


def exit_time_tail_envelope(params: ModelParams, t: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Large-time approximation of ``P(t < T < inf)`` from the boundary-density asymptotics."""
    h0, hpi2 = boundary_asymptotic_constants(params, ctrl)
    s = params.t0 + t
    g = params.gamma
    return (
        h0 * _incomplete_envelope(s, 0.5 * g * g)
        + hpi2 * _incomplete_envelope(s, 0.5 * (1.0 - g) ** 2)
    ) / math.sqrt(2.0 * math.pi)


def _edge_mass_integral(params: ModelParams, density, ctrl: SeriesControl, qctrl: QuadControl) -> float:
    t0 = params.t0
    val, _ = integrate(lambda s: density(params, s, ctrl), t0, math.inf, qctrl, split=t0 + tail_split(params))
    return val


def exit_density_mass(params: ModelParams, edge: int, ctrl: SeriesControl = DEFAULT_SERIES,
                      qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """``int f_edge`` over its support, by quadrature."""
    density = {1: exit_density_f1, 2: exit_density_f2}[edge]
    return _edge_mass_integral(params, density, ctrl, qctrl)


def exit_time_tail(params: ModelParams, t: float, ctrl: SeriesControl = DEFAULT_SERIES,
                   qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """``P(t < T < inf) = int_t^inf f_T``."""
    if t < 0.0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    split = max(t, tail_split(params))
    f = lambda s: exit_time_density(params, s, ctrl) if s > 0.0 else 0.0  # noqa: E731
    val, _ = integrate(f, t, math.inf, qctrl, split=split,
                       envelope=lambda c: exit_time_tail_envelope(params, c, ctrl))
    return max(val, 0.0)


def survival_probability(params: ModelParams, t: float, ctrl: SeriesControl = DEFAULT_SERIES,
                         qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """``P(T > t) = P(T = inf) + int_t^inf f_T``."""
    p_inf = persistence_probability(params, ctrl)
    return min(max(p_inf + exit_time_tail(params, t, ctrl, qctrl), p_inf), 1.0)


def survival_asymptotic_literal(params: ModelParams, t: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """The large-time correction term to ``P(T > t)`` in its printed form.

    Numerically this expression tracks the exit-time *density* ``f_T(t)``;
    the tail it is meant to describe is larger by roughly
    ``2 / gamma^2`` (resp. ``2 / (1 - gamma)^2``) per edge.
    """
    h0, hpi2 = boundary_asymptotic_constants(params, ctrl)
    g, s = params.gamma, params.t0 + t
    return (h0 * math.exp(-0.5 * g * g * s) + hpi2 * math.exp(-0.5 * (1.0 - g) ** 2 * s)) / (
        math.sqrt(2.0 * math.pi) * t ** 1.5
    )


# -- transition kernel and Green's function -------------------------------------

def _kernel_log(params: ModelParams, t: float, y: float, ctrl: SeriesControl) -> SeriesResult:
    g, t0, y0 = params.gamma, params.t0, params.y0
    common = g * y - 0.5 * g * g * t - g * y0

    # each image pair shares exp(-(y - a)^2 / 2t) and differs by a factor
    # exp(-2 a y / t); at y = 0 the bracket is exactly zero
    def term(n: int) -> SignedLogTerm:
        a = 2.0 * n * t0 + y0
        c = -2.0 * a * y / t
        if c == 0.0:
            return SignedLogTerm(-math.inf, 0)
        # log |1 - exp(c)| without overflow when c is large
        if c < 0.0:
            log_bracket, sign = math.log(-math.expm1(c)), 1
        else:
            log_bracket, sign = c + math.log(-math.expm1(-c)), -1
        d = y - a
        return SignedLogTerm(common - 2.0 * n * n * t0 - 2.0 * n * y0 - 0.5 * d * d / t + log_bracket, sign)

    return sum_bilateral(term, ctrl)


def transition_kernel(params: ModelParams, t: float, y: float, ctrl: SeriesControl = DEFAULT_SERIES,
                      *, log: bool = False) -> float:
    """Sub-probability density of ``Y(t)`` on ``{T > t}`` (method-of-images series)."""
    if not t > 0.0:
        raise DomainError(f"transition kernel needs t > 0, got t={t!r}")
    top = params.t0 + t
    if not 0.0 <= y <= top:
        raise DomainError(f"transition kernel needs 0 <= y <= t0 + t = {top!r}, got y={y!r}")
    res = _kernel_log(params, t, y, ctrl)
    log_pref = -0.5 * math.log(2.0 * math.pi * t)
    if log:
        return _to_value(res, log_pref, True)
    v = _to_value(res, log_pref, False)
    if v < 0.0:
        if v >= -KERNEL_CLAMP:
            return 0.0
        return v
    return v


def free_gaussian(t: float, dy: float, gamma: float) -> float:
    """Density of ``W(t) + gamma t`` at ``dy``."""
    d = dy - gamma * t
    return math.exp(-0.5 * d * d / t) / math.sqrt(2.0 * math.pi * t)


def kernel_via_convolution(params: ModelParams, t: float, y: float, ctrl: SeriesControl = DEFAULT_SERIES,
                           qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """Free density minus the mass re-emitted from each edge, by direct quadrature.

    ``p(t, y) = p_free(y - y0) - int_0^t p_free(t-u; y) f2(t0+u) du
    - int_0^t p_free(t-v; y - t0 - v) f1(t0+v) dv``.
    """
    g, t0 = params.gamma, params.t0

    def i2(u: float) -> float:
        if not 0.0 < u < t:
            return 0.0
        return free_gaussian(t - u, y, g) * exit_density_f2(params, t0 + u, ctrl)

    def i1(v: float) -> float:
        if not 0.0 < v < t:
            return 0.0
        return free_gaussian(t - v, y - t0 - v, g) * exit_density_f1(params, t0 + v, ctrl)

    I2, _ = integrate(i2, 0.0, t, qctrl)
    I1, _ = integrate(i1, 0.0, t, qctrl)
    return free_gaussian(t, y - params.y0, g) - I1 - I2


def green_function(params: ModelParams, z, ctrl: SeriesControl = DEFAULT_SERIES, *, log: bool = False) -> float:
    """Green's function of the quadrant process at ``z = (x, y)``.

    The quadrant process at time ``t`` sits on the line ``x + y = t0 + t``, so
    this is the kernel at ``t = x + y - t0``.
    """
    x, y = float(z[0]), float(z[1])
    if not (x >= 0.0 and y >= 0.0):
        raise DomainError(f"green_function needs z in the closed quadrant, got ({x!r}, {y!r})")
    t = x + y - params.t0
    if not t > 0.0:
        raise DomainError(f"green_function needs x + y > t0 = {params.t0!r}, got x + y = {x + y!r}")
    return transition_kernel(params, t, y, ctrl, log=log)


def green_asymptotic(params: ModelParams, z, ctrl: SeriesControl = DEFAULT_SERIES, *, log: bool = False) -> float:
    """Leading-order Green's function along the direction of ``z``.

    ``h_alpha(z0) exp(-z . (p(alpha), q(alpha))) / sqrt(2 pi |z| (cos a + sin a))``.
    """
    x, y = float(z[0]), float(z[1])
    if not (x > 0.0 and y > 0.0):
        raise DomainError(f"green_asymptotic needs z strictly inside the quadrant, got ({x!r}, {y!r})")
    alpha = math.atan2(y, x)
    sp = saddle_point(alpha, params.gamma)
    h = h_interior(params.z0, sp, params.gamma, ctrl).value
    r = math.hypot(x, y)
    logv = (
        math.log(h)
        - 0.5 * math.log(r)
        - (x * sp.p + y * sp.q)
        - 0.5 * math.log(2.0 * math.pi * (math.cos(alpha) + math.sin(alpha)))
    )
    return logv if log else math.exp(logv)


def green_ratio(params: ModelParams, z, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """``g(z) / asymptotic(z)`` computed as a difference of logarithms."""
    return math.exp(green_function(params, z, ctrl, log=True) - green_asymptotic(params, z, ctrl, log=True))


def boundary_asymptotic_constants(params: ModelParams, ctrl: SeriesControl = DEFAULT_SERIES) -> tuple[float, float]:
    """``(h^0(z0), h^{pi/2}(z0))``, the constants of the exit-density tails."""
    return (
        h_edge(params.z0, "alpha0", params.gamma, ctrl).value,
        h_edge(params.z0, "alphaPi2", params.gamma, ctrl).value,
    )


def exit_density_asymptotic(params: ModelParams, edge: int, s: float, ctrl: SeriesControl = DEFAULT_SERIES,
                            *, log: bool = False) -> float:
    """Tail form ``h s^(-3/2) exp(-c s) / sqrt(2 pi)`` of ``f1`` (edge 1) or ``f2`` (edge 2)."""
    g = params.gamma
    if edge == 1:
        h = h_edge(params.z0, "alphaPi2", g, ctrl).value
        c = saddle_point(HALF_PI, g).q
    elif edge == 2:
        h = h_edge(params.z0, "alpha0", g, ctrl).value
        c = saddle_point(0.0, g).p
    else:
        raise ValueError(f"edge must be 1 or 2, got {edge!r}")
    logv = math.log(h) - 1.5 * math.log(s) - c * s - LOG_SQRT_2PI
    return logv if log else math.exp(logv)


def exit_density_ratio(params: ModelParams, edge: int, s: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    f = exit_density_f1 if edge == 1 else exit_density_f2
    return math.exp(f(params, s, ctrl, log=True) - exit_density_asymptotic(params, edge, s, ctrl, log=True))


# -- conditioned functionals ----------------------------------------------------

def conditioned_functional_tail(params: ModelParams, point: ParabolaPoint, horizon: float,
                                ctrl: SeriesControl = DEFAULT_SERIES, qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """``E[exp(p X_T + q Y_T); horizon < T < inf]`` by quadrature of the exit densities.

    On edge 1 the exit point is ``(0, s)`` and on edge 2 it is ``(s, 0)`` with
    ``s = t0 + T``.
    """
    start = params.t0 + horizon
    p, q = point.p, point.q
    # combine in log space: far out the density underflows while exp(p s) overflows
    f = lambda s: (math.exp(exit_density_f1(params, s, ctrl, log=True) + q * s)  # noqa: E731
                   + math.exp(exit_density_f2(params, s, ctrl, log=True) + p * s))
    val, _ = integrate(f, start, math.inf, qctrl, split=start + tail_split(params))
    return val


def conditioned_exit_functional_within(params: ModelParams, point: ParabolaPoint, horizon: float,
                                       ctrl: SeriesControl = DEFAULT_SERIES,
                                       qctrl: QuadControl = DEFAULT_QUAD) -> float:
    """Series value of ``E[exp(p X_T + q Y_T); T <= horizon]``."""
    return conditioned_exit_functional(params, point, ctrl) - conditioned_functional_tail(
        params, point, horizon, ctrl, qctrl
    )
