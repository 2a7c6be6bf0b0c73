"""Grid simulation of the drifted Brownian height against the two cone edges.

``Y(t) = y0 + W(t) + gamma t`` is advanced on the ``dt``-grid.  Between grid
points each edge is tested with the exact Brownian-bridge crossing
probability ``exp(-2 d_i d_{i+1} / dt)`` for a linear boundary.

Far from both edges the simulator draws the position ``block`` steps ahead in
one Gaussian draw.  If the bridge crossing probability over the whole block is below
``exp(-BRIDGE_LOG_CUTOFF)`` for both edges the block is accepted as is;
otherwise the intermediate grid values are filled in from the Brownian bridge
and checked step by step.  Either way the grid path has the law of plain
``dt`` stepping.

Random numbers: path ``i`` owns a SplitMix64 stream whose state and increment
are derived from ``(seed, i)`` only, so results do not depend on how paths are
distributed over worker threads.
"""
from __future__ import annotations

import enum
import math
import os
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .geometry import ModelParams, ParabolaPoint, require_on_parabola
from .numerics import Histogram, histogram

if os.environ.get("NUMBA_THREADING_LAYER") is None:
    numba.config.THREADING_LAYER = "omp"

THREADS_ENV = "CONEBM_THREADS"

#: crossing probabilities below exp(-BRIDGE_LOG_CUTOFF) (about 4e-18) count as zero
BRIDGE_LOG_CUTOFF = 40.0

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_G1 = np.uint64(0xFF51AFD7ED558CCD)
_G2 = np.uint64(0xC4CEB9FE1A85EC53)
_ALT = np.uint64(0xAAAAAAAAAAAAAAAA)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi

SURVIVED, EDGE1, EDGE2 = 0, 1, 2


class Outcome(enum.IntEnum):
    SURVIVED = SURVIVED
    EDGE1 = EDGE1
    EDGE2 = EDGE2


class HorizonBiasWarning(UserWarning):
    pass


@numba.njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def _mix_gamma(z):
    z = (z ^ (z >> np.uint64(33))) * _G1
    z = (z ^ (z >> np.uint64(33))) * _G2
    z = (z ^ (z >> np.uint64(33))) | _ONE
    w = z ^ (z >> _ONE)
    n = 0
    while w:
        w &= w - _ONE
        n += 1
    if n < 24:
        z ^= _ALT
    return z


@numba.njit(inline="always")
def _stream(seed, index):
    key = _mix64(seed + _GOLDEN)
    s = _mix64(key ^ index)
    inc = _mix_gamma(s + _GOLDEN)
    return s, inc


@numba.njit(inline="always")
def _uniform(s, inc):
    s = s + inc
    return s, (_mix64(s) >> np.uint64(11)) * _INV53


@numba.njit(inline="always")
def _normal_pair(s, inc):
    s, u1 = _uniform(s, inc)
    s, u2 = _uniform(s, inc)
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    th = _TWO_PI * u2
    return s, r * math.cos(th), r * math.sin(th)


@numba.njit(parallel=True, cache=True)
def _simulate_kernel(first, count, y0, t0, gamma, dt, nsteps, seed, block, snap_steps,
                     outcome, exit_time, snaps, counters):
    nsnap = snap_steps.shape[0]
    sq_dt = math.sqrt(dt)
    for j in numba.prange(count):
        s, inc = _stream(np.uint64(seed), np.uint64(first + j))
        have_spare = False
        spare = 0.0
        y = y0
        k = 0
        si = 0
        res = SURVIVED
        t_exit = np.nan
        n_fine = 0
        while k < nsteps and res == SURVIVED:
            stop = nsteps
            if si < nsnap:
                stop = snap_steps[si]
            m = min(block, stop - k)
            t = k * dt
            target = 0.0
            if m > 1:
                if have_spare:
                    z = spare
                    have_spare = False
                else:
                    s, z, spare = _normal_pair(s, inc)
                    have_spare = True
                big = m * dt
                target = y + gamma * big + math.sqrt(big) * z
                t_end = t + big
                if (target > 0.0 and target < t0 + t_end
                        and 2.0 * y * target > BRIDGE_LOG_CUTOFF * big
                        and 2.0 * (t0 + t - y) * (t0 + t_end - target) > BRIDGE_LOG_CUTOFF * big):
                    y = target
                    k += m
                    if si < nsnap and k == snap_steps[si]:
                        snaps[j, si] = y
                        si += 1
                    continue
            for i in range(m):
                n_fine += 1
                if m > 1 and i == m - 1:
                    yn = target
                else:
                    if have_spare:
                        z = spare
                        have_spare = False
                    else:
                        s, z, spare = _normal_pair(s, inc)
                        have_spare = True
                    if m > 1:
                        rem = (m - i) * dt
                        yn = y + (target - y) * (dt / rem) + math.sqrt(dt * (rem - dt) / rem) * z
                    else:
                        yn = y + gamma * dt + sq_dt * z
                kk = k + i
                tn = (kk + 1) * dt
                if yn <= 0.0:
                    res = EDGE2
                elif yn >= t0 + tn:
                    res = EDGE1
                else:
                    a2 = 2.0 * y * yn / dt
                    a1 = 2.0 * (t0 + kk * dt - y) * (t0 + tn - yn) / dt
                    c1 = False
                    c2 = False
                    if a1 < BRIDGE_LOG_CUTOFF:
                        s, u = _uniform(s, inc)
                        c1 = u < math.exp(-a1)
                    if a2 < BRIDGE_LOG_CUTOFF:
                        s, u = _uniform(s, inc)
                        c2 = u < math.exp(-a2)
                    if c1 and c2:
                        res = EDGE2 if a2 <= a1 else EDGE1
                    elif c2:
                        res = EDGE2
                    elif c1:
                        res = EDGE1
                if res != SURVIVED:
                    t_exit = tn
                    break
                y = yn
            if res == SURVIVED:
                k += m
                if si < nsnap and k == snap_steps[si]:
                    snaps[j, si] = y
                    si += 1
        outcome[j] = res
        exit_time[j] = t_exit
        counters[j] = n_fine


@dataclass(frozen=True)
class McConfig:
    """Simulation controls.

    ``block`` is the number of grid steps drawn at once far from the edges;
    ``block=1`` gives plain step-by-step simulation.
    """

    paths: int
    dt: float = 1e-3
    horizon: float = 40.0
    seed: int = 0
    block: int = 64

    def __post_init__(self) -> None:
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError(f"paths must be a positive integer, got {self.paths!r}")
        if not self.dt > 0.0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.horizon > 0.0 or not math.isfinite(self.horizon):
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed horizon")
        if not 0 <= int(self.seed) < 2 ** 64 or int(self.seed) != self.seed:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.block) != self.block or self.block < 1:
            raise ValueError(f"block must be a positive integer, got {self.block!r}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    def step_of(self, t: float) -> int:
        """Grid index of time ``t``; ``t`` must be a grid time inside the horizon."""
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(1.0, t) or not 0 < k <= self.n_steps:
            raise ValueError(f"time {t!r} is not a grid time in (0, horizon]")
        return k


@dataclass(frozen=True)
class ExitRecord:
    outcome: Outcome
    exit_time: float | None
    exit_height: float | None

    def __post_init__(self) -> None:
        if self.outcome == Outcome.SURVIVED:
            assert self.exit_time is None and self.exit_height is None


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n: int


def mean_estimate(w: np.ndarray, n: int | None = None) -> Estimate:
    """Sample mean with its standard error (``ddof=1`` when more than one sample)."""
    w = np.asarray(w, dtype=float)
    n = w.size if n is None else n
    mean = float(np.sum(w) / n)
    if n < 2:
        return Estimate(mean, 0.0, n)
    # two-pass sum; samples beyond w.size count as zeros
    var = (float(np.sum((w - mean) ** 2)) + (n - w.size) * mean * mean) / (n - 1)
    return Estimate(mean, math.sqrt(var / n), n)


@dataclass(frozen=True)
class SimulationResult:
    params: ModelParams
    config: McConfig
    outcome: np.ndarray
    exit_time: np.ndarray
    snapshot_times: tuple[float, ...] = ()
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    fine_steps: int = 0

    @property
    def paths(self) -> int:
        return self.outcome.shape[0]

    def counts(self) -> dict[Outcome, int]:
        bc = np.bincount(self.outcome, minlength=3)
        return {Outcome(k): int(bc[k]) for k in range(3)}

    def exit_height(self) -> np.ndarray:
        """``Y`` at exit in cone coordinates: ``t0 + T`` on edge 1, ``0`` on edge 2."""
        h = np.full(self.paths, np.nan)
        e1 = self.outcome == EDGE1
        h[e1] = self.params.t0 + self.exit_time[e1]
        h[self.outcome == EDGE2] = 0.0
        return h

    def record(self, i: int) -> ExitRecord:
        o = Outcome(int(self.outcome[i]))
        if o == Outcome.SURVIVED:
            return ExitRecord(o, None, None)
        t = float(self.exit_time[i])
        return ExitRecord(o, t, self.params.t0 + t if o == Outcome.EDGE1 else 0.0)


def configure_threads(threads: int | None = None) -> int:
    """Set the worker count from ``threads`` or ``$CONEBM_THREADS``; returns the count used."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


def horizon_bias_bound(params: ModelParams, cfg: McConfig) -> float:
    """``P(horizon < T < inf)``: mass the simulator wrongly reports as surviving."""
    from .densities import exit_time_tail

    return exit_time_tail(params, cfg.horizon)


def check_config(params: ModelParams, cfg: McConfig) -> None:
    """Warn when the horizon truncation or edge resolution is too coarse for ``cfg``."""
    from .harmonics import persistence_probability

    p = persistence_probability(params)
    se = math.sqrt(p * (1.0 - p) / cfg.paths)
    bias = horizon_bias_bound(params, cfg)
    if bias > 0.1 * se:
        warnings.warn(
            f"horizon {cfg.horizon} leaves P(T > horizon, T < inf) = {bias:.3e}, "
            f"above 0.1 standard error ({0.1 * se:.3e})",
            HorizonBiasWarning,
            stacklevel=3,
        )
    if params.t0 < 10.0 * math.sqrt(cfg.dt):
        warnings.warn(
            f"t0 = {params.t0} is below 10 sqrt(dt); simultaneous crossings of both edges "
            "are no longer negligible",
            HorizonBiasWarning,
            stacklevel=3,
        )


def _run(params: ModelParams, cfg: McConfig, first: int, count: int,
         snapshot_times: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    snap_steps = np.array([cfg.step_of(t) for t in snapshot_times], dtype=np.int64)
    if snap_steps.size and np.any(np.diff(snap_steps) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    outcome = np.zeros(count, dtype=np.int8)
    exit_time = np.full(count, np.nan)
    snaps = np.full((count, snap_steps.size), np.nan)
    counters = np.zeros(count, dtype=np.int64)
    _simulate_kernel(first, count, params.y0, params.t0, params.gamma, cfg.dt, cfg.n_steps,
                     np.uint64(cfg.seed), cfg.block, snap_steps, outcome, exit_time, snaps, counters)
    return outcome, exit_time, snaps, int(counters.sum())


def simulate(params: ModelParams, cfg: McConfig, snapshot_times=(), *, threads: int | None = None,
             check: bool = True) -> SimulationResult:
    """Simulate paths ``0 .. cfg.paths - 1`` and record outcomes and snapshots.

    ``snapshot_times`` are grid times at which ``Y`` is stored for paths that
    are still alive (``NaN`` otherwise).
    """
    if check:
        check_config(params, cfg)
    configure_threads(threads)
    snapshot_times = tuple(float(t) for t in snapshot_times)
    outcome, exit_time, snaps, fine = _run(params, cfg, 0, cfg.paths, snapshot_times)
    return SimulationResult(params, cfg, outcome, exit_time, snapshot_times, snaps, fine)


def simulate_exit(params: ModelParams, cfg: McConfig, path_index: int) -> ExitRecord:
    """Outcome of the single path ``path_index``; identical to its entry in :func:`simulate`."""
    outcome, exit_time, _, _ = _run(params, cfg, int(path_index), 1, ())
    o = Outcome(int(outcome[0]))
    if o == Outcome.SURVIVED:
        return ExitRecord(o, None, None)
    t = float(exit_time[0])
    return ExitRecord(o, t, params.t0 + t if o == Outcome.EDGE1 else 0.0)


# -- estimators -------------------------------------------------------------------

def estimate_exit_probabilities(sim: SimulationResult) -> tuple[Estimate, Estimate, Estimate]:
    """Fractions exiting on edge 1, on edge 2 and surviving to the horizon."""
    n = sim.paths
    c = sim.counts()
    out = []
    for o in (Outcome.EDGE1, Outcome.EDGE2, Outcome.SURVIVED):
        p = c[o] / n
        out.append(Estimate(p, math.sqrt(p * (1.0 - p) / n), n))
    return tuple(out)


def estimate_histograms(sim: SimulationResult, time_edges, height_edges=None,
                        abscissa_edges=None) -> dict[str, Histogram]:
    """Sub-probability histograms of ``T``, ``Y(T1)`` on edge 1 and ``X(T2)`` on edge 2.

    Heights default to ``t0 + time_edges``.  Exit times sit on the right end
    of the grid interval in which the exit was detected.
    """
    time_edges = np.asarray(time_edges, dtype=float)
    t0 = sim.params.t0
    height_edges = t0 + time_edges if height_edges is None else np.asarray(height_edges, dtype=float)
    abscissa_edges = height_edges if abscissa_edges is None else np.asarray(abscissa_edges, dtype=float)
    exited = sim.outcome != SURVIVED
    e1 = sim.outcome == EDGE1
    e2 = sim.outcome == EDGE2
    return {
        "exit_time": histogram(sim.exit_time[exited], time_edges, sim.paths),
        "y_exit_edge1": histogram(t0 + sim.exit_time[e1], height_edges, sim.paths),
        "x_exit_edge2": histogram(t0 + sim.exit_time[e2], abscissa_edges, sim.paths),
    }


def estimate_conditioned_functional(sim: SimulationResult, point: ParabolaPoint) -> Estimate:
    """Mean of ``exp(p X_T + q Y_T)`` on exited paths (zero weight for survivors)."""
    require_on_parabola(point, sim.params.gamma)
    w = np.zeros(sim.paths)
    s = sim.params.t0 + sim.exit_time
    e1 = sim.outcome == EDGE1
    e2 = sim.outcome == EDGE2
    w[e1] = np.exp(point.q * s[e1])
    w[e2] = np.exp(point.p * s[e2])
    return mean_estimate(w)


def estimate_transition_density(sim: SimulationResult, t: float, edges) -> Histogram:
    """Histogram of ``Y(t)`` over paths alive at ``t``, normalised by all paths."""
    try:
        k = [abs(s - t) <= 1e-12 * max(1.0, t) for s in sim.snapshot_times].index(True)
    except ValueError:
        raise ValueError(f"time {t!r} was not recorded; pass it in snapshot_times") from None
    col = sim.snapshots[:, k]
    return histogram(col[~np.isnan(col)], edges, sim.paths)
