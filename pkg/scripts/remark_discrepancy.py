"""Show two published closed forms that disagree with the series they summarise.

The hyperbolic-sine edge-exit forms give about 0.1286 where the series gives
0.3497.  The printed large-time survival correction matches the exit-time
density rather than the tail probability.
"""
import argparse

from conebm.densities import exit_time_density, exit_time_tail, survival_asymptotic_literal
from conebm.geometry import ModelParams
from conebm.harmonics import remark_edge_sinh_literal, unconditioned_exit_probabilities


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--t0", type=float, default=2.0)
    ap.add_argument("--y0", type=float, default=1.0)
    ap.add_argument("--times", type=float, nargs="+", default=[10.0, 30.0, 60.0])
    args = ap.parse_args()
    p = ModelParams(args.gamma, args.t0, args.y0)

    e1, e2, _ = unconditioned_exit_probabilities(p)
    for edge, ref in ((1, e1), (2, e2)):
        print(f"edge {edge}: sinh form {remark_edge_sinh_literal(p, edge):.6f}, series {ref:.6f}")
    print("t,f_T/printed,tail/printed")
    for t in args.times:
        lit = survival_asymptotic_literal(p, t)
        print(f"{t:g},{exit_time_density(p, t) / lit:.4f},{exit_time_tail(p, t) / lit:.4f}")


if __name__ == "__main__":
    main()
