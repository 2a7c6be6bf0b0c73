"""Compare Monte Carlo estimates of the exit probabilities with the series values."""
import argparse

from conebm.harmonics import unconditioned_exit_probabilities
from conebm.geometry import ModelParams
from conebm.montecarlo import McConfig, estimate_exit_probabilities, simulate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--t0", type=float, default=2.0)
    ap.add_argument("--y0", type=float, default=1.0)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--horizon", type=float, default=40.0)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    p = ModelParams(args.gamma, args.t0, args.y0)

    sim = simulate(p, McConfig(args.paths, args.dt, args.horizon, args.seed))
    exact = unconditioned_exit_probabilities(p)
    print("outcome,estimate,std_error,series,z")
    for name, est, ref in zip(("edge1", "edge2", "survived"), estimate_exit_probabilities(sim), exact):
        print(f"{name},{est.value:.6f},{est.std_error:.2e},{ref:.6f},{(est.value - ref) / est.std_error:+.2f}")


if __name__ == "__main__":
    main()
