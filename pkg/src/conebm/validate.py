"""Self-check suite: identities, mass balances, asymptotics and Monte Carlo agreement.

Checks are grouped by acceptance criterion number.  ``level="fast"`` runs
everything except the simulation; ``level="full"`` adds it.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .densities import (
    exit_density_f1,
    exit_density_mass,
    exit_density_ratio,
    exit_time_density,
    green_ratio,
    survival_probability,
    conditioned_exit_functional_within,
    transition_kernel,
)
from .geometry import HALF_PI, ModelParams, ParabolaPoint, drift_direction, saddle_point
from .harmonics import (
    edge_series,
    h_edge,
    h_interior,
    persistence_probability,
    persistence_sinh_forms,
    remark_edge_sinh_literal,
    unconditioned_exit_probabilities,
)
from .numerics import FdStencil, QuadControl, apply_dual_forward, apply_generator, integrate, zscores

REFERENCE = ModelParams(0.5, 2.0, 1.0)
SECONDARY = (ModelParams(0.25, 3.0, 1.0), ModelParams(0.75, 1.5, 0.5))
PARAMETER_SETS = (REFERENCE,) + SECONDARY

#: the persistence value at the reference set, from the series
REFERENCE_PERSISTENCE = 0.300626
#: the printed sinh form of the edge-exit probability at the reference set
LITERAL_EDGE_VALUE = 0.1286

MC_PATHS = 1_000_000
MC_DT = 1e-3
MC_HORIZON = 40.0
MC_SEED = 7
MC_MIN_HITS = 100
MC_MAX_OUTLIER_FRACTION = 0.01

CRITERIA = {
    1: "partition identity h + L1 + L2 = exp(z0 . point)",
    2: "persistence forms agree",
    3: "probabilities sum to one",
    4: "mass identities",
    5: "harmonicity (finite-difference generator)",
    6: "boundary vanishing",
    7: "Chapman-Kolmogorov",
    8: "asymptotic consistency",
    9: "Monte Carlo cross-validation",
    10: "edge-exit sinh-form discrepancy",
}
FAST_CRITERIA = (1, 2, 3, 4, 5, 6, 7, 8, 10)


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class Report:
    level: str
    checks: list[Check] = field(default_factory=list)
    timings: dict[int, float] = field(default_factory=dict)
    skipped: dict[int, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def criterion_passed(self, k: int) -> bool:
        return all(c.passed for c in self.checks if c.criterion == k)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "passed": self.passed,
            "criteria": {
                str(k): {"description": CRITERIA[k], "passed": self.criterion_passed(k),
                         "seconds": self.timings.get(k)}
                for k in sorted({c.criterion for c in self.checks})
            },
            "skipped": {str(k): v for k, v in self.skipped.items()},
            "checks": [asdict(c) for c in self.checks],
        }


def _le(criterion: int, name: str, measured: float, tol: float, detail: str = "") -> Check:
    return Check(criterion, name, float(measured), float(tol), bool(measured <= tol), detail)


def _tag(p: ModelParams) -> str:
    return f"gamma={p.gamma:g},t0={p.t0:g},y0={p.y0:g}"


# -- criterion 1 ----------------------------------------------------------------

def check_partition(params_sets=PARAMETER_SETS, n_alpha: int = 20) -> list[Check]:
    out = []
    alphas = [(k + 0.5) * HALF_PI / n_alpha for k in range(n_alpha)]
    for p in params_sets:
        worst = 0.0
        for a in alphas:
            pt = saddle_point(a, p.gamma)
            total = math.exp(p.x0 * pt.p + p.y0 * pt.q)
            h = h_interior(p.z0, pt, p.gamma).value
            l1 = edge_series(p, pt, 1).value
            l2 = edge_series(p, pt, 2).value
            worst = max(worst, abs(h + l1 + l2 - total))
        out.append(_le(1, f"partition[{_tag(p)}]", worst, 1e-12, f"max over {n_alpha} directions"))
    return out


# -- criteria 2 and 3 -----------------------------------------------------------

def check_persistence(params_sets=PARAMETER_SETS) -> list[Check]:
    out = []
    for p in params_sets:
        main = h_interior(p.z0, ParabolaPoint(0.0, 0.0), p.gamma).value
        s1, s2 = persistence_sinh_forms(p)
        spread = max(main, s1, s2) - min(main, s1, s2)
        out.append(_le(2, f"persistence_forms[{_tag(p)}]", spread, 1e-12))
    v = persistence_probability(REFERENCE)
    out.append(_le(2, "persistence_reference_value", abs(v - REFERENCE_PERSISTENCE), 1e-6, f"value={v!r}"))
    return out


def check_probability_partition(params_sets=PARAMETER_SETS) -> list[Check]:
    out = []
    for p in params_sets:
        e1, e2, pinf = unconditioned_exit_probabilities(p)
        out.append(_le(3, f"sum_to_one[{_tag(p)}]", abs(e1 + e2 + pinf - 1.0), 1e-10))
    return out


# -- criterion 4 ----------------------------------------------------------------

def check_mass(params: ModelParams = REFERENCE, times=(0.25, 1.0, 4.0)) -> list[Check]:
    e1, e2, pinf = unconditioned_exit_probabilities(params)
    m1 = exit_density_mass(params, 1)
    m2 = exit_density_mass(params, 2)
    out = [
        _le(4, "mass_f1", abs(m1 - e1), 1e-6, f"int f1={m1!r}, series={e1!r}"),
        _le(4, "mass_f2", abs(m2 - e2), 1e-6, f"int f2={m2!r}, series={e2!r}"),
    ]
    ft, _ = integrate(lambda t: exit_time_density(params, t), 0.0, math.inf, split=20.0)
    out.append(_le(4, "mass_fT", abs(ft - (1.0 - pinf)), 1e-6, f"int fT={ft!r}"))
    for t in times:
        top = params.t0 + t
        mass, _ = integrate(lambda y: transition_kernel(params, t, y), 0.0, top)
        surv = survival_probability(params, t)
        out.append(_le(4, f"kernel_mass[t={t:g}]", abs(mass - surv), 1e-6, f"mass={mass!r}, survival={surv!r}"))
    return out


# -- criterion 5 ----------------------------------------------------------------

HARMONIC_DIRECTIONS = (math.pi / 12, math.pi / 6, "drift", math.pi / 3, 5 * math.pi / 12)
FD_STEP = 1e-3


def _fd_order(residual, step: float) -> tuple[float, float]:
    r1 = abs(residual(step))
    r2 = abs(residual(2.0 * step))
    order = math.log2(r2 / r1) if r1 > 0.0 and r2 > 0.0 else math.inf
    return r1, order


def check_harmonicity(params: ModelParams = REFERENCE, z=(1.5, 0.8)) -> list[Check]:
    g = params.gamma
    funcs = {}
    for a in HARMONIC_DIRECTIONS:
        alpha = drift_direction(g) if a == "drift" else a
        pt = saddle_point(alpha, g)
        funcs[f"h_interior[alpha={alpha:.6f}]"] = (lambda pt: lambda x, y: h_interior((x, y), pt, g).value)(pt)
    funcs["h_edge[alpha0]"] = lambda x, y: h_edge((x, y), "alpha0", g).value
    funcs["h_edge[alphaPi2]"] = lambda x, y: h_edge((x, y), "alphaPi2", g).value
    out = []
    for name, h in funcs.items():
        scale = abs(h(*z))
        rel, order = _fd_order(lambda s: apply_generator(h, z, g, FdStencil(s)) / scale, FD_STEP)
        out.append(_le(5, name, rel, 1e-5, f"observed order {order:.2f}"))
        out.append(Check(5, name + ".order", order, 1.9, order >= 1.9))
    t, y = 1.0, 1.3
    q = lambda tt, yy: transition_kernel(params, tt, yy)  # noqa: E731
    scale = q(t, y)
    rel, order = _fd_order(lambda s: apply_dual_forward(q, t, y, g, FdStencil(s)) / scale, FD_STEP)
    out.append(_le(5, "kernel_forward_equation", rel, 1e-5, f"observed order {order:.2f}"))
    out.append(Check(5, "kernel_forward_equation.order", order, 1.9, order >= 1.9))
    return out


# -- criterion 6 ----------------------------------------------------------------

def check_boundary(params: ModelParams = REFERENCE) -> list[Check]:
    g = params.gamma
    pts = [(0.0, s) for s in (0.3, 1.0, 4.0)] + [(s, 0.0) for s in (0.3, 1.0, 4.0)]
    worst = 0.0
    for a in (math.pi / 8, drift_direction(g), 3 * math.pi / 8):
        pt = saddle_point(a, g)
        worst = max(worst, max(abs(h_interior(z, pt, g).value) for z in pts))
    out = [_le(6, "h_interior_on_edges", worst, 1e-12)]
    for which in ("alpha0", "alphaPi2"):
        w = max(abs(h_edge(z, which, g).value) for z in pts)
        out.append(_le(6, f"h_edge[{which}]_on_edges", w, 1e-12))
    k0 = max(abs(transition_kernel(params, t, 0.0)) for t in (0.25, 1.0, 4.0))
    out.append(Check(6, "kernel_at_y0_exact", k0, 0.0, k0 == 0.0))
    ktop = max(abs(transition_kernel(params, t, params.t0 + t)) for t in (0.25, 1.0, 4.0))
    out.append(_le(6, "kernel_at_moving_edge", ktop, 1e-12))
    return out


# -- criterion 7 ----------------------------------------------------------------

def chapman_kolmogorov_rhs(params: ModelParams, s: float, t: float, y: float) -> float:
    """``int p(s, u) p_{(t0+s, u)}(t, y) du`` over the cone section at time ``s``."""
    top = params.t0 + s

    def f(u: float) -> float:
        if not 0.0 < u < top:
            return 0.0
        return transition_kernel(params, s, u) * transition_kernel(ModelParams(params.gamma, top, u), t, y)

    val, _ = integrate(f, 0.0, top, QuadControl(rel_tol=1e-10, abs_tol=1e-13))
    return val


def check_chapman_kolmogorov(params: ModelParams = REFERENCE, s: float = 0.5, t: float = 0.5,
                             heights=(0.5, 1.0, 1.5, 2.0, 2.5)) -> list[Check]:
    out = []
    for y in heights:
        lhs = transition_kernel(params, s + t, y)
        rhs = chapman_kolmogorov_rhs(params, s, t, y)
        out.append(_le(7, f"chapman_kolmogorov[y={y:g}]", abs(lhs - rhs), 1e-6, f"lhs={lhs!r}"))
    return out


# -- criterion 8 ----------------------------------------------------------------

def check_asymptotics(params: ModelParams = REFERENCE) -> list[Check]:
    out = []
    dirs = {"drift": drift_direction(params.gamma), "pi/3": math.pi / 3, "pi/6": math.pi / 6}
    for label, a in dirs.items():
        errs = {}
        for r, tol in ((60.0, 0.05), (120.0, 0.025)):
            z = (r * math.cos(a), r * math.sin(a))
            errs[r] = abs(green_ratio(params, z) - 1.0)
            out.append(_le(8, f"green_ratio[{label},r={r:g}]", errs[r], tol))
        halving = errs[60.0] / errs[120.0]
        # informational: first-order convergence means the error halves with r
        out.append(Check(8, f"green_error_halving[{label}]", halving, 1.8, halving >= 1.8,
                         "error(r=60) / error(r=120)"))
    for edge in (1, 2):
        err = abs(exit_density_ratio(params, edge, 80.0) - 1.0)
        out.append(_le(8, f"boundary_density_ratio[edge{edge},y=80]", err, 0.05))
    return out


# -- criterion 10 ---------------------------------------------------------------

def check_discrepancy(params: ModelParams = REFERENCE, mc=None) -> list[Check]:
    e1, e2, _ = unconditioned_exit_probabilities(params)
    lit1 = remark_edge_sinh_literal(params, 1)
    lit2 = remark_edge_sinh_literal(params, 2)
    detail = (f"printed sinh form gives {lit1:.4f} (edge 1) and {lit2:.4f} (edge 2); "
              f"alternating series gives {e1:.4f} and {e2:.4f}; the series is taken as ground truth")
    out = [
        _le(10, "literal_sinh_form_edge1", abs(lit1 - LITERAL_EDGE_VALUE), 5e-5, detail),
        _le(10, "literal_sinh_form_edge2", abs(lit2 - LITERAL_EDGE_VALUE), 5e-5, detail),
        Check(10, "series_differs_from_literal", abs(e1 - lit1), 0.1, abs(e1 - lit1) > 0.1,
              "documented inconsistency"),
    ]
    if mc is not None:
        est = mc[0]
        z_series = abs(est.value - e1) / est.std_error
        z_lit = abs(est.value - lit1) / est.std_error
        out.append(_le(10, "mc_matches_series", z_series, 3.0, f"MC {est.value:.5f} +- {est.std_error:.5f}"))
        out.append(Check(10, "mc_rejects_literal", z_lit, 3.0, z_lit > 3.0, "z-score against the printed form"))
    return out


# -- criterion 9 ----------------------------------------------------------------

@lru_cache(maxsize=2)
def reference_simulation(paths: int = MC_PATHS, seed: int = MC_SEED):
    """Cached reference run; pass both arguments positionally to share the cache entry."""
    from .montecarlo import McConfig, simulate

    cfg = McConfig(paths=paths, dt=MC_DT, horizon=MC_HORIZON, seed=seed)
    return simulate(REFERENCE, cfg, snapshot_times=(1.0,), check=False)


def _histogram_check(name: str, hist, expected_mass: np.ndarray) -> list[Check]:
    n = hist.total
    obs = hist.mass
    se = np.sqrt(np.maximum(expected_mass * (1.0 - expected_mass), 0.0) / n)
    z = np.abs(zscores(obs, expected_mass, se))
    eligible = hist.counts >= MC_MIN_HITS
    n_el = int(eligible.sum())
    bad = int((z[eligible] > 3.0).sum())
    frac = bad / n_el if n_el else 1.0
    return [Check(9, name, frac, MC_MAX_OUTLIER_FRACTION, n_el > 0 and frac <= MC_MAX_OUTLIER_FRACTION,
                  f"{bad} of {n_el} bins with >= {MC_MIN_HITS} hits outside 3 sigma; max |z| "
                  f"{float(z[eligible].max()) if n_el else float('nan'):.2f}")]


def _zcheck(name: str, est, target: float) -> Check:
    z = abs(est.value - target) / est.std_error if est.std_error > 0 else math.inf
    return Check(9, name, z, 3.0, z <= 3.0, f"MC {est.value:.6f} +- {est.std_error:.6f}, closed form {target:.6f}")


def _bin_integrals(f, edges: np.ndarray, shift: float) -> np.ndarray:
    q = QuadControl(rel_tol=1e-9, abs_tol=1e-14)
    return np.array([integrate(f, a - shift, b - shift, q)[0] for a, b in zip(edges[:-1], edges[1:])])


def check_monte_carlo(params: ModelParams = REFERENCE, paths: int = MC_PATHS, seed: int = MC_SEED):
    """Simulation agreement; returns the checks and the exit-probability estimates."""
    from .montecarlo import (
        estimate_conditioned_functional,
        estimate_exit_probabilities,
        estimate_histograms,
        estimate_transition_density,
    )

    if params != REFERENCE:
        raise ValueError("the Monte Carlo check runs at the reference parameters")
    sim = reference_simulation(paths, seed)
    dt = sim.config.dt
    out = []
    est = estimate_exit_probabilities(sim)
    e1, e2, pinf = unconditioned_exit_probabilities(params)
    out += [_zcheck("exit_prob_edge1", est[0], e1), _zcheck("exit_prob_edge2", est[1], e2),
            _zcheck("persistence", est[2], pinf)]

    # exits are stamped at the right end of their grid step: edges sit half a
    # step off the grid and the matching true-time interval is shifted by dt/2
    t_edges = np.arange(0.0, 10.0 + 1e-9, 0.05) + 0.5 * dt
    hists = estimate_histograms(sim, t_edges)
    exp_t = _bin_integrals(lambda t: exit_time_density(params, t) if t > 0 else 0.0, t_edges, 0.5 * dt)
    out += _histogram_check("exit_time_histogram", hists["exit_time"], exp_t)
    y_edges = params.t0 + t_edges
    exp_y = _bin_integrals(lambda y: exit_density_f1(params, y) if y > params.t0 else 0.0, y_edges, 0.5 * dt)
    out += _histogram_check("y_exit_edge1_histogram", hists["y_exit_edge1"], exp_y)

    k_edges = np.linspace(0.0, params.t0 + 1.0, 61)
    kh = estimate_transition_density(sim, 1.0, k_edges)
    exp_k = _bin_integrals(lambda y: transition_kernel(params, 1.0, y), k_edges, 0.0)
    out += _histogram_check("transition_density_histogram[t=1]", kh, exp_k)
    surv = survival_probability(params, 1.0)
    m = kh.counts.sum() / kh.total
    se = math.sqrt(m * (1.0 - m) / kh.total)
    out.append(Check(9, "transition_density_mass[t=1]", abs(m - surv) / se, 3.0, abs(m - surv) <= 3.0 * se,
                     f"MC {m:.6f}, survival {surv:.6f}"))

    for a in (math.pi / 8, math.pi / 4, 3 * math.pi / 8):
        pt = saddle_point(a, params.gamma)
        target = conditioned_exit_functional_within(params, pt, sim.config.horizon)
        out.append(_zcheck(f"conditioned_functional[alpha={a:.6f}]",
                           estimate_conditioned_functional(sim, pt), target))
    return out, est


def run(level: str = "fast", criteria=None, *, params: ModelParams | None = None,
        mc_paths: int = MC_PATHS, mc_seed: int = MC_SEED) -> Report:
    """Run the selected criteria.

    With ``params`` the parameter-dependent checks use that set alone; the
    simulation and discrepancy checks are tied to the reference set and are
    skipped for any other.
    """
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    wanted = set(criteria) if criteria else set(FAST_CRITERIA if level == "fast" else CRITERIA)
    unknown = wanted - set(CRITERIA)
    if unknown:
        raise ValueError(f"unknown criteria {sorted(unknown)!r}")
    single = REFERENCE if params is None else params
    sets = PARAMETER_SETS if params is None else (params,)
    rep = Report(level)
    simple = {
        1: lambda: check_partition(sets), 2: lambda: check_persistence(sets),
        3: lambda: check_probability_partition(sets), 4: lambda: check_mass(single),
        5: lambda: check_harmonicity(single), 6: lambda: check_boundary(single),
        7: lambda: check_chapman_kolmogorov(single), 8: lambda: check_asymptotics(single),
    }
    mc_est = None
    for k in sorted(wanted):
        if k in (9, 10) and single != REFERENCE:
            rep.skipped[k] = "defined at the reference parameters only"
            continue
        start = time.perf_counter()
        if k in simple:
            rep.checks += simple[k]()
        elif k == 9:
            checks, mc_est = check_monte_carlo(paths=mc_paths, seed=mc_seed)
            rep.checks += checks
        else:
            if level == "full" and mc_est is None:
                from .montecarlo import estimate_exit_probabilities

                mc_est = estimate_exit_probabilities(reference_simulation(mc_paths, mc_seed))
            rep.checks += check_discrepancy(mc=mc_est)
        rep.timings[k] = time.perf_counter() - start
    return rep
