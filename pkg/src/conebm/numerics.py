"""Numerical substrate: signed log-space series, quadrature, finite differences.

Series over ``n in Z`` are represented term by term as ``(log|a_n|, sign a_n)``
so that sums whose terms underflow in double precision can still be formed
and compared in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as _scipy_integrate

from .errors import ConvergenceError, QuadratureError

NEG_INF = -math.inf


class SignedLogTerm(NamedTuple):
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int

    @classmethod
    def from_value(cls, value: float) -> "SignedLogTerm":
        if value == 0.0:
            return ZERO_TERM
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)


ZERO_TERM = SignedLogTerm(NEG_INF, 0)


def signed_term(log_magnitude: float, sign: float) -> SignedLogTerm:
    """Build a term, normalising exact zeros to sign 0."""
    if sign == 0 or log_magnitude == NEG_INF:
        return ZERO_TERM
    return SignedLogTerm(log_magnitude, 1 if sign > 0 else -1)


def log_two_sinh_exp(a: float, b: float) -> SignedLogTerm:
    """``2 sinh(a) exp(b)`` in signed log form, accurate for small ``|a|``."""
    if a == 0.0:
        return ZERO_TERM
    s = 1 if a > 0 else -1
    aa = abs(a)
    return SignedLogTerm(aa + b + math.log(-math.expm1(-2.0 * aa)), s)


def signed_log_add(x: SignedLogTerm, y: SignedLogTerm) -> SignedLogTerm:
    """Sum of two signed log terms; exact cancellation gives sign 0."""
    if x.sign == 0:
        return y
    if y.sign == 0:
        return x
    if x.log_magnitude < y.log_magnitude:
        x, y = y, x
    d = y.log_magnitude - x.log_magnitude
    if x.sign == y.sign:
        return SignedLogTerm(x.log_magnitude + math.log1p(math.exp(d)), x.sign)
    if d == 0.0:
        return ZERO_TERM
    return SignedLogTerm(x.log_magnitude + math.log(-math.expm1(d)), x.sign)


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for bilateral series.

    A side of the sum stops at the first term that is below ``abs_tol``, below
    ``rel_tol`` times the largest term seen, and no larger than its
    predecessor.  ``max_terms`` is counted per side.
    """

    abs_tol: float = 1e-14
    max_terms: int = 200
    rel_tol: float = 1e-17

    def __post_init__(self) -> None:
        if not self.abs_tol > 0.0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 4:
            raise ValueError("max_terms must be at least 4")


DEFAULT_SERIES = SeriesControl()


@dataclass(frozen=True)
class SeriesResult:
    value: float
    log_abs: float
    sign: int
    terms_used: int
    bound: float

    @property
    def log_term(self) -> SignedLogTerm:
        return signed_term(self.log_abs, self.sign)


def sum_bilateral(
    term: Callable[[int], SignedLogTerm], ctrl: SeriesControl = DEFAULT_SERIES
) -> SeriesResult:
    """Sum ``term(n)`` over ``n in Z``, walking outward from ``n = 0``.

    The order of evaluation is fixed (0, 1, -1, 2, -2, ...) and the final
    accumulation uses ``math.fsum`` on terms scaled by the largest magnitude,
    so symmetric inputs give bit-identical results.  The returned ``bound`` is
    the sum of the magnitudes of the two first omitted terms.
    """
    log_tol = math.log(ctrl.abs_tol)
    log_rel = math.log(ctrl.rel_tol)
    t0 = term(0)
    terms = [t0]
    log_max = t0.log_magnitude
    prev = {1: t0.log_magnitude, -1: t0.log_magnitude}
    frontier = {1: 1, -1: -1}
    omitted = {}
    while len(omitted) < 2:
        for side in (1, -1):
            if side in omitted:
                continue
            n = frontier[side]
            if abs(n) > ctrl.max_terms:
                raise ConvergenceError(
                    f"series did not converge within {ctrl.max_terms} terms per side"
                )
            t = term(n)
            lm = t.log_magnitude
            if t.sign == 0 or (lm < log_tol and lm < log_max + log_rel and lm <= prev[side]):
                omitted[side] = lm
                continue
            terms.append(t)
            if lm > log_max:
                log_max = lm
            prev[side] = lm
            frontier[side] = n + side
    bound = math.exp(omitted[1]) + math.exp(omitted[-1])
    if log_max == NEG_INF:
        return SeriesResult(0.0, NEG_INF, 0, len(terms), bound)
    scaled = math.fsum(t.sign * math.exp(t.log_magnitude - log_max) for t in terms if t.sign)
    if scaled == 0.0:
        return SeriesResult(0.0, NEG_INF, 0, len(terms), bound)
    log_abs = log_max + math.log(abs(scaled))
    sign = 1 if scaled > 0 else -1
    return SeriesResult(sign * math.exp(log_abs), log_abs, sign, len(terms), bound)


@dataclass(frozen=True)
class QuadControl:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


DEFAULT_QUAD = QuadControl()


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    qctrl: QuadControl = DEFAULT_QUAD,
    *,
    split: float | None = None,
    envelope: Callable[[float], float] | None = None,
    points: tuple[float, ...] = (),
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``; ``b`` may be ``inf``.

    Semi-infinite integrals are split at ``split`` (default ``a + 10``).  When
    ``envelope`` is given it must return an estimate of ``int_c^inf |f|``; the
    computed tail is rejected if it exceeds twice that estimate.
    """
    if not b > a:
        if b == a:
            return 0.0, 0.0
        raise ValueError("integrate requires b >= a")

    def _quad(lo: float, hi: float, pts=None) -> tuple[float, float]:
        kw = {}
        if pts:
            kw["points"] = pts
        val, err, info = _scipy_integrate.quad(
            f,
            lo,
            hi,
            epsabs=qctrl.abs_tol,
            epsrel=qctrl.rel_tol,
            limit=qctrl.max_subdivisions,
            full_output=1,
            **kw,
        )[:3]
        if not math.isfinite(val):
            raise QuadratureError(f"non-finite integral on [{lo}, {hi}]")
        if err > max(qctrl.abs_tol, qctrl.rel_tol * abs(val)) * 10.0:
            raise QuadratureError(
                f"quadrature on [{lo}, {hi}] did not meet tolerance (error estimate {err:.3e})"
            )
        return val, err

    if math.isinf(b):
        c = a + 10.0 if split is None else max(split, a)
        head, head_err = _quad(a, c, [p for p in points if a < p < c] or None) if c > a else (0.0, 0.0)
        tail, tail_err = _quad(c, math.inf)
        if envelope is not None:
            bound = envelope(c)
            if abs(tail) > 2.0 * bound + qctrl.abs_tol:
                raise QuadratureError(
                    f"tail beyond {c} is {tail:.3e}, above its envelope {bound:.3e}"
                )
        return head + tail, head_err + tail_err
    pts = [p for p in points if a < p < b] or None
    return _quad(a, b, pts)


@dataclass(frozen=True)
class FdStencil:
    step: float
    order: int = 2

    def __post_init__(self) -> None:
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if self.order != 2:
            raise ValueError("only second-order stencils are supported")


def apply_generator(
    h: Callable[[float, float], float],
    z: tuple[float, float],
    gamma: float,
    stencil: FdStencil,
) -> float:
    """Central-difference value of ``1/2 (d_x - d_y)^2 h + (1-g) d_x h + g d_y h``.

    The second-order part is a second difference along ``(1, -1)`` and the
    drift part a central difference along ``(1 - gamma, gamma)``.
    """
    x, y = z
    s = stencil.step
    h0 = h(x, y)
    diffusion = (h(x + s, y - s) - 2.0 * h0 + h(x - s, y + s)) / (2.0 * s * s)
    mx, my = 1.0 - gamma, gamma
    drift = (h(x + s * mx, y + s * my) - h(x - s * mx, y - s * my)) / (2.0 * s)
    return diffusion + drift


def apply_dual_forward(
    kernel: Callable[[float, float], float],
    t: float,
    y: float,
    gamma: float,
    stencil: FdStencil,
) -> float:
    """Residual ``d_t q - 1/2 d_y^2 q + gamma d_y q`` of a density ``q(t, y)``."""
    s = stencil.step
    q0 = kernel(t, y)
    dt = (kernel(t + s, y) - kernel(t - s, y)) / (2.0 * s)
    qp, qm = kernel(t, y + s), kernel(t, y - s)
    dyy = (qp - 2.0 * q0 + qm) / (s * s)
    dy = (qp - qm) / (2.0 * s)
    return dt - 0.5 * dyy + gamma * dy


@dataclass(frozen=True)
class Histogram:
    """Density histogram with per-bin binomial standard errors."""

    edges: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def density(self) -> np.ndarray:
        return self.mass / self.widths

    @property
    def std_error(self) -> np.ndarray:
        m = self.mass
        return np.sqrt(m * (1.0 - m) / self.total) / self.widths


def histogram(samples: np.ndarray, edges: np.ndarray, total: int) -> Histogram:
    """Histogram of ``samples`` normalised by ``total`` draws (not by ``len(samples)``)."""
    edges = np.asarray(edges, dtype=float)
    counts, _ = np.histogram(np.asarray(samples, dtype=float), bins=edges)
    return Histogram(edges, counts, int(total))


def zscores(observed: np.ndarray, expected: np.ndarray, se: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, (observed - expected) / se, np.where(observed == expected, 0.0, np.inf))
