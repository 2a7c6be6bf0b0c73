"""Print exact/asymptotic ratios for the Green function and the boundary densities.

The ratios approach one at first order, so the error roughly halves each time
the radius doubles.
"""
import argparse
import math

from conebm.densities import exit_density_ratio, green_ratio
from conebm.geometry import ModelParams, drift_direction


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--t0", type=float, default=2.0)
    ap.add_argument("--y0", type=float, default=1.0)
    ap.add_argument("--radii", type=float, nargs="+", default=[60.0, 120.0, 240.0, 480.0, 960.0])
    args = ap.parse_args()
    p = ModelParams(args.gamma, args.t0, args.y0)

    alphas = {"drift": drift_direction(p.gamma), "pi/6": math.pi / 6, "pi/3": math.pi / 3}
    print("direction,r,green_ratio,error")
    for name, a in alphas.items():
        for r in args.radii:
            g = green_ratio(p, (r * math.cos(a), r * math.sin(a)))
            print(f"{name},{r:g},{g:.6f},{g - 1.0:+.3e}")
    print("edge,s,density_ratio,error")
    for edge in (1, 2):
        for r in args.radii:
            s = r + p.t0
            d = exit_density_ratio(p, edge, s)
            print(f"{edge},{s:g},{d:.6f},{d - 1.0:+.3e}")


if __name__ == "__main__":
    main()
