"""Kernel parabola, its algebraic branches, saddle points and compensation points.

All quantities live in the quadrant picture: the cone process
``(t0 + t, Y(t))`` is mapped to ``Z = (X, Y)`` with ``X = t' - Y``, a degenerate
Brownian motion with drift ``(1 - gamma, gamma)``.  Exponentials ``exp(p x + q y)``
are harmonic for its generator exactly when ``(p, q)`` is on the zero set of
:func:`kernel_K`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

HALF_PI = 0.5 * math.pi

#: relative tolerance used when checking that a point lies on the parabola
ON_PARABOLA_TOL = 1e-12


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")


def check_alpha(alpha: float) -> float:
    """Validate a direction angle in ``[0, pi/2]`` and return it as a float."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= HALF_PI:
        raise DomainError(f"alpha must lie in [0, pi/2], got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class ModelParams:
    """Drift and starting point of the space-time Brownian motion.

    ``t0`` is the starting abscissa and ``y0`` the starting height; the start
    must be strictly inside the cone, ``0 < y0 < t0``.
    """

    gamma: float
    t0: float
    y0: float

    def __post_init__(self) -> None:
        _check_gamma(self.gamma)
        if not (math.isfinite(self.t0) and math.isfinite(self.y0)):
            raise DomainError("t0 and y0 must be finite")
        if not 0.0 < self.y0 < self.t0:
            raise DomainError(
                f"start must satisfy 0 < y0 < t0, got t0={self.t0!r}, y0={self.y0!r}"
            )

    @property
    def x0(self) -> float:
        return self.t0 - self.y0

    @property
    def z0(self) -> tuple[float, float]:
        """Starting point in quadrant coordinates."""
        return (self.t0 - self.y0, self.y0)

    def mirrored(self) -> "ModelParams":
        """Parameters of the process with the two edges exchanged."""
        return ModelParams(1.0 - self.gamma, self.t0, self.t0 - self.y0)


@dataclass(frozen=True)
class ParabolaPoint:
    p: float
    q: float

    def residual(self, gamma: float) -> float:
        return kernel_K(self.p, self.q, gamma)

    def on_parabola(self, gamma: float, tol: float = ON_PARABOLA_TOL) -> bool:
        scale = max(1.0, self.p * self.p, self.q * self.q)
        return abs(self.residual(gamma)) <= tol * scale


def require_on_parabola(point: ParabolaPoint, gamma: float) -> None:
    if not point.on_parabola(gamma):
        raise DomainError(
            f"point ({point.p!r}, {point.q!r}) is not on the kernel parabola "
            f"(K = {point.residual(gamma):.3e})"
        )


def kernel_K(p: float, q: float, gamma: float) -> float:
    """Kernel ``K(p, q) = (p - q)^2 / 2 + (1 - gamma) p + gamma q``."""
    d = p - q
    return 0.5 * d * d + (1.0 - gamma) * p + gamma * q


def _sign_factor(sign: str) -> float:
    if sign == "+":
        return 1.0
    if sign == "-":
        return -1.0
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def branch_P(q: float, gamma: float, sign: str) -> float:
    """Root in ``p`` of ``K(p, q) = 0``; real for ``q <= (1 - gamma)^2 / 2``."""
    _check_gamma(gamma)
    disc = (1.0 - gamma) ** 2 - 2.0 * q
    if disc < 0.0:
        raise DomainError(
            f"branch_P needs q <= (1-gamma)^2/2 = {(1.0 - gamma) ** 2 / 2!r}, got q={q!r}"
        )
    return gamma - 1.0 + q + _sign_factor(sign) * math.sqrt(disc)


def branch_Q(p: float, gamma: float, sign: str) -> float:
    """Root in ``q`` of ``K(p, q) = 0``; real for ``p <= gamma^2 / 2``."""
    _check_gamma(gamma)
    disc = gamma * gamma - 2.0 * p
    if disc < 0.0:
        raise DomainError(
            f"branch_Q needs p <= gamma^2/2 = {gamma * gamma / 2!r}, got p={p!r}"
        )
    return -gamma + p + _sign_factor(sign) * math.sqrt(disc)


def saddle_point(alpha: float, gamma: float) -> ParabolaPoint:
    """Point of the parabola maximising ``p cos(alpha) + q sin(alpha)``.

    The endpoints use the closed-form limits of the general expression.
    """
    _check_gamma(gamma)
    alpha = check_alpha(alpha)
    g2 = 0.5 * gamma * gamma
    if alpha == 0.0:
        return ParabolaPoint(g2, g2 - gamma)
    if alpha == HALF_PI:
        return ParabolaPoint(g2 - 0.5, 0.5 * (1.0 - gamma) ** 2)
    # sin/(sin+cos) and cos/(sin+cos) avoid tan blowing up near pi/2
    s, c = math.sin(alpha), math.cos(alpha)
    a = s / (s + c)
    b = c / (s + c)
    return ParabolaPoint(g2 - 0.5 * a * a, 0.5 * (1.0 - gamma) ** 2 - 0.5 * b * b)


def drift_direction(gamma: float) -> float:
    """Direction whose saddle point is the origin, ``arctan(gamma / (1 - gamma))``."""
    _check_gamma(gamma)
    return math.atan2(gamma, 1.0 - gamma)


def _even_point(p0: float, q0: float, gamma: float, m: int) -> tuple[float, float]:
    two_m = 2.0 * m
    shift = two_m * (p0 - q0)
    return (p0 + shift - two_m * (m + gamma), q0 + shift - two_m * (m + gamma - 1.0))


def comp_point(origin: ParabolaPoint, gamma: float, n: int) -> ParabolaPoint:
    """``n``-th point of the compensation sequence started at ``origin``.

    Even indices use the closed form in ``n``; odd index ``2m+1`` takes its
    ``p`` from point ``2m`` and its ``q`` from point ``2m+2``.
    """
    n = int(n)
    if n % 2 == 0:
        p, q = _even_point(origin.p, origin.q, gamma, n // 2)
        return ParabolaPoint(p, q)
    m = (n - 1) // 2
    p, _ = _even_point(origin.p, origin.q, gamma, m)
    _, q = _even_point(origin.p, origin.q, gamma, m + 1)
    return ParabolaPoint(p, q)


@dataclass(frozen=True)
class CompensationSequence:
    """Doubly infinite sequence of parabola points hopping between the branches."""

    origin: ParabolaPoint
    gamma: float

    def __post_init__(self) -> None:
        _check_gamma(self.gamma)
        require_on_parabola(self.origin, self.gamma)

    def __getitem__(self, n: int) -> ParabolaPoint:
        return comp_point(self.origin, self.gamma, n)

    def exponent(self, n: int, x: float, y: float) -> float:
        pt = self[n]
        return x * pt.p + y * pt.q
