"""Compensation series: harmonic functions, persistence and edge-exit probabilities.

Every harmonic function here is an alternating sum of exponentials
``exp(x p_n + y q_n)`` over a compensation sequence on the kernel parabola.
Consecutive terms cancel pairwise on one of the two axes, which is what makes
the sums vanish on the boundary of the quadrant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConsistencyError, DomainError
from .geometry import (
    HALF_PI,
    ModelParams,
    ParabolaPoint,
    _check_gamma,
    branch_P,
    check_alpha,
    comp_point,
    require_on_parabola,
    saddle_point,
)
from .numerics import (
    DEFAULT_SERIES,
    ZERO_TERM,
    SeriesControl,
    SeriesResult,
    SignedLogTerm,
    log_two_sinh_exp,
    signed_term,
    sum_bilateral,
)

#: agreement required between the three persistence evaluations
PERSISTENCE_AGREEMENT = 1e-12


@dataclass(frozen=True)
class HarmonicValue:
    value: float
    terms_used: int
    truncation_bound: float


def _check_quadrant(z0) -> tuple[float, float]:
    x, y = float(z0[0]), float(z0[1])
    if not (x >= 0.0 and y >= 0.0):
        raise DomainError(f"point must lie in the closed quadrant, got ({x!r}, {y!r})")
    return x, y


def _clamp(res: SeriesResult, ctrl: SeriesControl) -> float:
    v = res.value
    if v < 0.0:
        if v >= -max(ctrl.abs_tol, res.bound):
            return 0.0
        raise ConsistencyError(f"harmonic series is negative ({v!r})")
    return v


def alternating_series(
    z0, origin: ParabolaPoint, gamma: float, ctrl: SeriesControl = DEFAULT_SERIES,
    *, indices: str = "all",
) -> SeriesResult:
    """``sum (-1)^n exp(x p_n + y q_n)`` restricted to ``indices``.

    ``indices`` is ``"all"`` (n in Z), ``"neg"`` (n <= -1, with sign
    ``(-1)^(n+1)``) or ``"pos"`` (n >= 1, same sign convention).  The two
    one-sided sums are the unnormalised edge-exit series.
    """
    x, y = z0
    flip = 1 if indices == "all" else -1

    def term(n: int) -> SignedLogTerm:
        if (indices == "neg" and n >= 0) or (indices == "pos" and n <= 0):
            return ZERO_TERM
        pt = comp_point(origin, gamma, n)
        sign = (1 if n % 2 == 0 else -1) * flip
        return SignedLogTerm(x * pt.p + y * pt.q, sign)

    return sum_bilateral(term, ctrl)


def h_interior(
    z0, origin: ParabolaPoint, gamma: float, ctrl: SeriesControl = DEFAULT_SERIES
) -> HarmonicValue:
    """Harmonic function built from the compensation sequence started at ``origin``.

    Term decay slows down towards the corner of the quadrant; within roughly
    ``1e-3`` of it the default ``max_terms`` may be exhausted.
    """
    _check_gamma(gamma)
    x, y = _check_quadrant(z0)
    require_on_parabola(origin, gamma)
    if x == 0.0 and y == 0.0:
        # every term has modulus one at the corner; use the boundary value
        return HarmonicValue(0.0, 0, 0.0)
    res = alternating_series((x, y), origin, gamma, ctrl)
    return HarmonicValue(_clamp(res, ctrl), res.terms_used, res.bound)


def _edge_alpha0_series(x: float, y: float, gamma: float, ctrl: SeriesControl) -> SeriesResult:
    origin = saddle_point(0.0, gamma)

    def term(n: int) -> SignedLogTerm:
        pt = comp_point(origin, gamma, 2 * n)
        coeff = -2.0 * n * x + (1.0 - 2.0 * n) * y
        if coeff == 0.0:
            return ZERO_TERM
        return signed_term(x * pt.p + y * pt.q + math.log(abs(coeff)), coeff)

    return sum_bilateral(term, ctrl)


def h_edge(z0, which: str, gamma: float, ctrl: SeriesControl = DEFAULT_SERIES) -> HarmonicValue:
    """Harmonic functions attached to the two endpoints of the saddle arc.

    ``which="alpha0"`` uses linear prefactors ``-2n x + (1 - 2n) y`` on the
    even points started at the ``alpha = 0`` saddle point.  ``"alphaPi2"`` is
    its image under ``(x, y, gamma) -> (y, x, 1 - gamma)``.
    """
    _check_gamma(gamma)
    x, y = _check_quadrant(z0)
    if which == "alpha0":
        res = _edge_alpha0_series(x, y, gamma, ctrl)
    elif which == "alphaPi2":
        res = _edge_alpha0_series(y, x, 1.0 - gamma, ctrl)
    else:
        raise ValueError(f"which must be 'alpha0' or 'alphaPi2', got {which!r}")
    return HarmonicValue(_clamp(res, ctrl), res.terms_used, res.bound)


def h_alpha(z0, alpha: float, gamma: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """The minimal harmonic function of direction ``alpha`` over the closed arc."""
    alpha = check_alpha(alpha)
    if alpha == 0.0:
        return h_edge(z0, "alpha0", gamma, ctrl).value
    if alpha == HALF_PI:
        return h_edge(z0, "alphaPi2", gamma, ctrl).value
    return h_interior(z0, saddle_point(alpha, gamma), gamma, ctrl).value


# -- persistence --------------------------------------------------------------

def persistence_sinh_forms(params: ModelParams, ctrl: SeriesControl = DEFAULT_SERIES) -> tuple[float, float]:
    """The two paired-sinh rewritings of the persistence series."""
    g, t0, y0 = params.gamma, params.t0, params.y0

    def first(n: int) -> SignedLogTerm:
        return log_two_sinh_exp((2 * n + g) * y0, -2.0 * n * (n + g) * t0 - g * y0)

    def second(n: int) -> SignedLogTerm:
        return log_two_sinh_exp(g * (y0 + 2 * n * t0), -2.0 * (n * y0 + n * n * t0) - g * y0)

    return sum_bilateral(first, ctrl).value, sum_bilateral(second, ctrl).value


def persistence_probability(params: ModelParams, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Probability that the process never leaves the cone.

    Evaluated as the alternating series at the origin of the parabola and
    cross-checked against both sinh-paired forms.
    """
    main = h_interior(params.z0, ParabolaPoint(0.0, 0.0), params.gamma, ctrl).value
    s1, s2 = persistence_sinh_forms(params, ctrl)
    spread = max(main, s1, s2) - min(main, s1, s2)
    if spread > PERSISTENCE_AGREEMENT:
        raise ConsistencyError(
            f"persistence forms disagree: {main!r}, {s1!r}, {s2!r} (spread {spread:.3e})"
        )
    return min(max(main, 0.0), 1.0)


# -- edge exits -----------------------------------------------------------------

def edge_series(
    params: ModelParams, origin: ParabolaPoint, edge: int, ctrl: SeriesControl = DEFAULT_SERIES
) -> SeriesResult:
    """Unnormalised exit series: ``L1(q0)`` for edge 1, ``L2(p0)`` for edge 2."""
    if edge == 1:
        return alternating_series(params.z0, origin, params.gamma, ctrl, indices="neg")
    if edge == 2:
        return alternating_series(params.z0, origin, params.gamma, ctrl, indices="pos")
    raise ValueError(f"edge must be 1 or 2, got {edge!r}")


def exit_prob_edge(
    params: ModelParams, alpha: float, edge: int, ctrl: SeriesControl = DEFAULT_SERIES
) -> float:
    """Probability of leaving through ``edge`` for the process conditioned on ``alpha``.

    Edge 1 is the moving edge ``y = t'``, edge 2 the fixed edge ``y = 0``.
    """
    alpha = check_alpha(alpha)
    return _normalised_exit(params, saddle_point(alpha, params.gamma), edge, ctrl)


def _normalised_exit(params: ModelParams, origin: ParabolaPoint, edge: int, ctrl: SeriesControl) -> float:
    res = edge_series(params, origin, edge, ctrl)
    x0, y0 = params.z0
    if res.sign == 0:
        return 0.0
    prob = res.sign * math.exp(res.log_abs - (x0 * origin.p + y0 * origin.q))
    return min(max(prob, 0.0), 1.0)


def remark_edge_sinh_literal(params: ModelParams, edge: int, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Paired-sinh expressions for the unconditioned edge-exit probabilities, as printed.

    These do not agree with :func:`exit_prob_edge` (their exponents differ from
    the ones obtained by pairing the alternating series); they are kept only
    so the discrepancy can be reported.
    """
    g, t0, x0, y0 = params.gamma, params.t0, params.x0, params.y0

    def one_sided(f):
        return lambda n: f(n) if n >= 0 else ZERO_TERM

    if edge == 2:
        f = one_sided(lambda n: log_two_sinh_exp(
            (2 * n + 1 + g) * x0, -(2 * n + 2) * (n + g) * t0 - (g + 1.0) * x0))
    elif edge == 1:
        f = one_sided(lambda n: log_two_sinh_exp(
            (2 * n + 2 - g) * y0, -(2 * n + 2) * (n + 1 - g) * t0 - (2.0 - g) * y0))
    else:
        raise ValueError(f"edge must be 1 or 2, got {edge!r}")
    return sum_bilateral(f, ctrl).value


def boundary_laplace_L1(params: ModelParams, q: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Laplace transform ``E[exp(q Y_T1); T1 < T2]`` continued to ``q < (1-gamma)^2/2``."""
    g = params.gamma
    q_plus = 0.5 * (1.0 - g) ** 2
    if not q < q_plus:
        raise DomainError(f"boundary_laplace_L1 needs q < (1-gamma)^2/2 = {q_plus!r}, got {q!r}")
    origin = ParabolaPoint(branch_P(q, g, "+"), q)
    return edge_series(params, origin, 1, ctrl).value


def conditioned_exit_functional(
    params: ModelParams, point: ParabolaPoint, ctrl: SeriesControl = DEFAULT_SERIES
) -> float:
    """``E[exp(p X_T + q Y_T); T < inf]`` for ``point = (p, q)`` on the closed arc."""
    require_on_parabola(point, params.gamma)
    x0, y0 = params.z0
    h = h_interior(params.z0, point, params.gamma, ctrl).value
    return math.exp(x0 * point.p + y0 * point.q) - h


def unconditioned_exit_probabilities(params: ModelParams, ctrl: SeriesControl = DEFAULT_SERIES) -> tuple[float, float, float]:
    """``(P(T1 < T2), P(T2 < T1), P(T = inf))`` for the unconditioned process."""
    # the drift direction's saddle point is exactly the origin
    origin = ParabolaPoint(0.0, 0.0)
    return (
        _normalised_exit(params, origin, 1, ctrl),
        _normalised_exit(params, origin, 2, ctrl),
        persistence_probability(params, ctrl),
    )
