"""Command-line entry point: ``conebm eval | simulate | validate | replay``.

Data goes to stdout (one JSON object per line, or CSV for ranges), diagnostics
to stderr.  Exit codes: 0 success, 1 failed check, 2 usage or domain error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

from . import __version__
from .errors import ConsistencyError, ConvergenceError, DomainError, QuadratureError
from .geometry import HALF_PI, ModelParams, ParabolaPoint, comp_point, drift_direction, kernel_K, saddle_point
from .numerics import DEFAULT_QUAD, DEFAULT_SERIES, QuadControl, SeriesControl

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce an output record."""

    command: str
    argv: list[str]
    params: dict | None
    controls: dict = field(default_factory=dict)
    artifact_version: str = __version__
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["command"], list(d["argv"]), d["params"], dict(d.get("controls", {})),
                   d["artifact_version"], d.get("seed"))


def dumps(obj) -> str:
    # json writes floats with repr, the shortest string that round-trips
    return json.dumps(obj, sort_keys=False, allow_nan=True)


# -- argument helpers ------------------------------------------------------------

def parse_angle(text: str) -> float:
    """A float, ``drift`` (resolved later), or ``pi``, ``pi/k``, ``m*pi/k``."""
    t = text.strip().replace(" ", "")
    if t == "drift":
        return math.nan
    if "pi" in t:
        head, _, den = t.partition("/")
        num = head.replace("*", "").replace("pi", "")
        m = float(num) if num else 1.0
        k = float(den) if den else 1.0
        if m * 2.0 == k:
            return HALF_PI
        return m * math.pi / k
    return float(t)


def parse_values(text: str, kind=float) -> list:
    """``v`` or an inclusive range ``a:b:step``."""
    if ":" not in text:
        return [kind(text)]
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be a:b:step, got {text!r}")
    a, b, step = (float(x) for x in parts)
    if not step > 0.0 or b < a:
        raise UsageError(f"range needs step > 0 and b >= a, got {text!r}")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [kind(a + i * step) for i in range(n)]


# -- eval -------------------------------------------------------------------------

@dataclass(frozen=True)
class Quantity:
    inputs: tuple[str, ...]
    needs_start: bool
    fn: Callable


def _hv(v) -> dict:
    return {"value": v.value, "terms_used": v.terms_used, "bound": v.truncation_bound}


def _q_kernel(g, pr, a, ctrl, qctrl):
    return {"value": kernel_K(a["p"], a["q"], g)}


def _resolve_alpha(alpha: float, g: float) -> float:
    return drift_direction(g) if math.isnan(alpha) else alpha


def _q_saddle(g, pr, a, ctrl, qctrl):
    alpha = _resolve_alpha(a["alpha"], g)
    if alpha == drift_direction(g):
        pt = ParabolaPoint(0.0, 0.0)
    else:
        pt = saddle_point(alpha, g)
    return {"p": pt.p, "q": pt.q}


def _origin(g, a) -> ParabolaPoint:
    alpha = _resolve_alpha(a["alpha"], g)
    return ParabolaPoint(0.0, 0.0) if alpha == drift_direction(g) else saddle_point(alpha, g)


def _q_comp(g, pr, a, ctrl, qctrl):
    pt = comp_point(_origin(g, a), g, int(a["n"]))
    return {"p": pt.p, "q": pt.q}


def _q_harmonic(g, pr, a, ctrl, qctrl):
    from .harmonics import h_edge, h_interior

    alpha = _resolve_alpha(a["alpha"], g)
    z = (a["x"], a["y"])
    if alpha == 0.0:
        return _hv(h_edge(z, "alpha0", g, ctrl))
    if alpha == HALF_PI:
        return _hv(h_edge(z, "alphaPi2", g, ctrl))
    return _hv(h_interior(z, _origin(g, a), g, ctrl))


def _q_persistence(g, pr, a, ctrl, qctrl):
    from .harmonics import persistence_probability

    return {"value": persistence_probability(pr, ctrl)}


def _q_exit_prob(g, pr, a, ctrl, qctrl):
    from .harmonics import _normalised_exit

    return {"value": _normalised_exit(pr, _origin(g, a), int(a["edge"]), ctrl)}


def _q_laplace(g, pr, a, ctrl, qctrl):
    from .harmonics import boundary_laplace_L1

    return {"value": boundary_laplace_L1(pr, a["q"], ctrl)}


def _q_f1(g, pr, a, ctrl, qctrl):
    from .densities import exit_density_f1

    return {"value": exit_density_f1(pr, a["y"], ctrl)}


def _q_f2(g, pr, a, ctrl, qctrl):
    from .densities import exit_density_f2

    return {"value": exit_density_f2(pr, a["x"], ctrl)}


def _q_ft(g, pr, a, ctrl, qctrl):
    from .densities import exit_time_density

    if not a["t"] > 0.0:
        raise DomainError(f"ft needs t > 0, got t={a['t']!r}")
    return {"value": exit_time_density(pr, a["t"], ctrl)}


def _q_survival(g, pr, a, ctrl, qctrl):
    from .densities import survival_probability

    return {"value": survival_probability(pr, a["t"], ctrl, qctrl)}


def _q_tk(g, pr, a, ctrl, qctrl):
    from .densities import transition_kernel

    return {"value": transition_kernel(pr, a["t"], a["y"], ctrl)}


def _q_green(g, pr, a, ctrl, qctrl):
    from .densities import green_function

    return {"value": green_function(pr, (a["x"], a["y"]), ctrl)}


def _q_green_asym(g, pr, a, ctrl, qctrl):
    from .densities import green_asymptotic, green_function

    z = (a["x"], a["y"])
    log_a = green_asymptotic(pr, z, ctrl, log=True)
    out = {"value": math.exp(log_a), "log_value": log_a}
    if z[0] + z[1] > pr.t0:
        out["ratio"] = math.exp(green_function(pr, z, ctrl, log=True) - log_a)
    return out


def _q_boundary(g, pr, a, ctrl, qctrl):
    from .densities import boundary_asymptotic_constants

    h0, hpi2 = boundary_asymptotic_constants(pr, ctrl)
    return {"h0": h0, "hpi2": hpi2}


QUANTITIES: dict[str, Quantity] = {
    "kernel": Quantity(("p", "q"), False, _q_kernel),
    "saddle": Quantity(("alpha",), False, _q_saddle),
    "comp-seq": Quantity(("alpha", "n"), False, _q_comp),
    "harmonic": Quantity(("alpha", "x", "y"), False, _q_harmonic),
    "persistence": Quantity((), True, _q_persistence),
    "exit-prob": Quantity(("alpha", "edge"), True, _q_exit_prob),
    "laplace-l1": Quantity(("q",), True, _q_laplace),
    "f1": Quantity(("y",), True, _q_f1),
    "f2": Quantity(("x",), True, _q_f2),
    "ft": Quantity(("t",), True, _q_ft),
    "survival": Quantity(("t",), True, _q_survival),
    "transition-kernel": Quantity(("t", "y"), True, _q_tk),
    "green": Quantity(("x", "y"), True, _q_green),
    "green-asymptotic": Quantity(("x", "y"), True, _q_green_asym),
    "boundary-constants": Quantity((), True, _q_boundary),
}

_INPUT_KIND = {"n": int, "edge": int}
_INPUT_DEFAULT = {"alpha": "drift", "edge": "1"}


def _series_control(ns) -> SeriesControl:
    return SeriesControl(abs_tol=ns.abs_tol, max_terms=ns.max_terms, rel_tol=ns.rel_tol)


def _quad_control(ns) -> QuadControl:
    return QuadControl(rel_tol=ns.quad_rel_tol, abs_tol=ns.quad_abs_tol, max_subdivisions=ns.quad_limit)


def _params(ns, required: bool) -> ModelParams | None:
    if ns.t0 is None and ns.y0 is None and not required:
        return None
    if ns.t0 is None or ns.y0 is None:
        raise UsageError("--t0 and --y0 are required for this quantity")
    return ModelParams(ns.gamma, ns.t0, ns.y0)


def _check_gamma_only(g: float) -> None:
    if not 0.0 < g < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {g!r}")


def cmd_eval(ns, argv: list[str], out) -> int:
    qty = QUANTITIES[ns.quantity]
    _check_gamma_only(ns.gamma)
    params = _params(ns, qty.needs_start)
    ctrl, qctrl = _series_control(ns), _quad_control(ns)
    raw = {}
    for name in qty.inputs:
        text = getattr(ns, name.replace("-", "_"))
        if text is None:
            text = _INPUT_DEFAULT.get(name)
        if text is None:
            raise UsageError(f"--{name} is required for {ns.quantity}")
        kind = _INPUT_KIND.get(name, float)
        if name == "alpha":
            if ":" in text:
                raw[name] = parse_values(text)
            else:
                raw[name] = [parse_angle(text)]
        else:
            raw[name] = parse_values(text, kind)
    ranged = [k for k, v in raw.items() if len(v) > 1 or ":" in str(getattr(ns, k, "") or "")]
    if len(ranged) > 1:
        raise UsageError("at most one input may be a range")
    controls = {"series": asdict(ctrl)}
    if ns.quantity in ("survival",):
        controls["quad"] = asdict(qctrl)
    manifest = RunManifest("eval", argv, asdict(params) if params else {"gamma": ns.gamma}, controls)
    point = {k: v[0] for k, v in raw.items()}
    if not ranged:
        res = qty.fn(ns.gamma, params, point, ctrl, qctrl)
        inputs = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in point.items()}
        if "alpha" in inputs and inputs["alpha"] is None:
            inputs["alpha"] = drift_direction(ns.gamma)
        rec = {"quantity": ns.quantity, "inputs": inputs}
        rec.update(res)
        rec["manifest"] = manifest.to_dict()
        out.write(dumps(rec) + "\n")
        return EXIT_OK
    var = ranged[0]
    rows = []
    for v in raw[var]:
        point[var] = v
        res = qty.fn(ns.gamma, params, point, ctrl, qctrl)
        rows.append((v, res))
    cols = list(rows[0][1].keys())
    write_csv(out, [var] + cols, [[v] + [r[c] for c in cols] for v, r in rows], manifest)
    return EXIT_OK


def write_csv(out, header: list[str], rows, manifest: RunManifest) -> None:
    """CSV with the manifest as a leading ``#`` comment line."""
    out.write("# manifest=" + dumps(manifest.to_dict()) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


# -- simulate ---------------------------------------------------------------------

def cmd_simulate(ns, argv: list[str], out) -> int:
    import numpy as np

    from .harmonics import unconditioned_exit_probabilities
    from .montecarlo import (
        McConfig,
        check_config,
        estimate_exit_probabilities,
        estimate_histograms,
        estimate_transition_density,
        horizon_bias_bound,
        simulate,
    )

    params = ModelParams(ns.gamma, ns.t0, ns.y0)
    try:
        cfg = McConfig(paths=ns.paths, dt=ns.dt, horizon=ns.horizon, seed=ns.seed, block=ns.block)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if ns.bin_width < 10.0 * cfg.dt - 1e-15:
        raise UsageError(f"--bin-width must be at least 10 dt = {10 * cfg.dt!r}")
    kernel_times = tuple(ns.kernel_t or ())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        check_config(params, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sim = simulate(params, cfg, snapshot_times=kernel_times, threads=ns.threads, check=False)
    manifest = RunManifest("simulate", argv, asdict(params), {"mc": asdict(cfg)}, seed=cfg.seed)
    names = ("edge1", "edge2", "survived")
    est = estimate_exit_probabilities(sim)
    closed = unconditioned_exit_probabilities(params)
    rec = {
        "command": "simulate",
        "estimates": {k: asdict(e) for k, e in zip(names, est)},
        "counts": {k: sim.counts()[o] for k, o in zip(names, (1, 2, 0))},
        "closed_form": dict(zip(names, closed)),
        "horizon_bias_bound": horizon_bias_bound(params, cfg),
        "warnings": [str(w.message) for w in caught],
        "manifest": manifest.to_dict(),
    }
    if ns.hist_dir:
        os.makedirs(ns.hist_dir, exist_ok=True)
        t_max = min(ns.t_max, cfg.horizon)
        edges = np.arange(0.0, t_max + 1e-12, ns.bin_width) + 0.5 * cfg.dt
        files = {}
        for name, h in estimate_histograms(sim, edges).items():
            files[name] = _write_hist(ns.hist_dir, name, h, manifest)
        for t in kernel_times:
            k_edges = np.linspace(0.0, params.t0 + t, ns.kernel_bins + 1)
            h = estimate_transition_density(sim, t, k_edges)
            files[f"transition_density_t{t:g}"] = _write_hist(ns.hist_dir, f"transition_density_t{t:g}", h, manifest)
        rec["histograms"] = files
    out.write(dumps(rec) + "\n")
    return EXIT_OK


def _write_hist(directory: str, name: str, h, manifest: RunManifest) -> str:
    path = os.path.join(directory, f"{name}.csv")
    rows = zip(h.edges[:-1].tolist(), h.edges[1:].tolist(), h.density.tolist(), h.std_error.tolist())
    with open(path, "w", newline="") as fh:
        write_csv(fh, ["bin_left", "bin_right", "density", "std_error"], rows, manifest)
    return path


# -- validate ---------------------------------------------------------------------

def cmd_validate(ns, argv: list[str], out) -> int:
    from . import validate

    params = None
    if ns.gamma is not None or ns.t0 is not None or ns.y0 is not None:
        d = validate.REFERENCE
        params = ModelParams(ns.gamma if ns.gamma is not None else d.gamma,
                             ns.t0 if ns.t0 is not None else d.t0,
                             ns.y0 if ns.y0 is not None else d.y0)
    rep = validate.run(ns.level, params=params, mc_paths=ns.mc_paths, mc_seed=ns.seed)
    for c in rep.checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"[{mark}] {c.criterion:>2} {c.name}: {c.measured:.6g} (tolerance {c.tolerance:g})"
              + (f"  {c.detail}" if c.detail else ""), file=sys.stderr)
    for k, why in rep.skipped.items():
        print(f"[SKIP] {k:>2} {validate.CRITERIA[k]}: {why}", file=sys.stderr)
    print(f"{'all checks passed' if rep.passed else 'some checks FAILED'}", file=sys.stderr)
    d = rep.to_dict()
    d["manifest"] = RunManifest("validate", argv, asdict(params or validate.REFERENCE), {},
                                seed=ns.seed if ns.level == "full" else None).to_dict()
    out.write(dumps(d) + "\n")
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def cmd_replay(ns, argv: list[str], out) -> int:
    with open(ns.record) as fh:
        first = fh.readline()
    if first.startswith("# manifest="):
        m = json.loads(first[len("# manifest="):])
    else:
        m = json.loads(first)["manifest"]
    man = RunManifest.from_dict(m)
    if man.artifact_version != __version__:
        print(f"warning: record was written by version {man.artifact_version}, running {__version__}",
              file=sys.stderr)
    return main(man.argv, out=out)


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conebm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="evaluate a closed-form quantity")
    ev.add_argument("quantity", choices=sorted(QUANTITIES))
    ev.add_argument("--gamma", type=float, required=True)
    ev.add_argument("--t0", type=float)
    ev.add_argument("--y0", type=float)
    for name in ("alpha", "p", "q", "x", "y", "t", "n", "edge"):
        ev.add_argument(f"--{name}", help="value or range a:b:step")
    ev.add_argument("--abs-tol", type=float, default=DEFAULT_SERIES.abs_tol)
    ev.add_argument("--rel-tol", type=float, default=DEFAULT_SERIES.rel_tol)
    ev.add_argument("--max-terms", type=int, default=DEFAULT_SERIES.max_terms)
    ev.add_argument("--quad-rel-tol", type=float, default=DEFAULT_QUAD.rel_tol)
    ev.add_argument("--quad-abs-tol", type=float, default=DEFAULT_QUAD.abs_tol)
    ev.add_argument("--quad-limit", type=int, default=DEFAULT_QUAD.max_subdivisions)

    si = sub.add_parser("simulate", help="Monte Carlo simulation of exits")
    si.add_argument("--gamma", type=float, required=True)
    si.add_argument("--t0", type=float, required=True)
    si.add_argument("--y0", type=float, required=True)
    si.add_argument("--paths", type=int, required=True)
    si.add_argument("--dt", type=float, default=1e-3)
    si.add_argument("--horizon", type=float, default=40.0)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--block", type=int, default=64, help="grid steps drawn at once far from the edges")
    si.add_argument("--threads", type=int, default=None, help="worker threads (default $CONEBM_THREADS)")
    si.add_argument("--hist-dir", help="directory for CSV histograms")
    si.add_argument("--bin-width", type=float, default=0.05)
    si.add_argument("--t-max", type=float, default=10.0)
    si.add_argument("--kernel-t", type=float, action="append", help="also histogram Y(t) at this time")
    si.add_argument("--kernel-bins", type=int, default=60)

    va = sub.add_parser("validate", help="run the self-check suite")
    va.add_argument("--level", choices=("fast", "full"), default="fast")
    va.add_argument("--gamma", type=float)
    va.add_argument("--t0", type=float)
    va.add_argument("--y0", type=float)
    va.add_argument("--mc-paths", type=int, default=1_000_000)
    va.add_argument("--seed", type=int, default=7)

    rp = sub.add_parser("replay", help="re-run the command recorded in an output file")
    rp.add_argument("record")
    return ap


COMMANDS = {"eval": cmd_eval, "simulate": cmd_simulate, "validate": cmd_validate, "replay": cmd_replay}


def main(argv: list[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if out is None else out
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return COMMANDS[ns.command](ns, argv, out)
    except (DomainError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, QuadratureError, ConsistencyError) as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
