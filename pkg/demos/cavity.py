"""Lid-driven cavity against the classic centreline profiles.

The cavity is marched to a steady state, first on a coarse grid and then
on the target grid (a continuation ladder).  The reported deviation is the
largest gap between the computed centreline velocities and the reference
stations.

    python demos/cavity.py                     # Re 100 at 64^2, a couple of minutes
    python demos/cavity.py --re 1000 --res 256 --ladder 64,128
"""
import argparse

from pfmsim import bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--re", type=float, default=100.0)
    ap.add_argument("--res", type=int, default=64)
    ap.add_argument("--ladder", default="")
    ap.add_argument("--t-max", type=float, default=30.0)
    args = ap.parse_args()

    ladder = tuple(int(x) for x in args.ladder.split(",") if x)
    r = bench.run_cavity(args.re, args.res, ladder, t_max=args.t_max, t_coarse=40.0, log=print)
    print(f"Re {args.re:g} at {args.res}^2: max deviation {r.deviation:.4f} "
          f"(t={r.t:.1f}, steady={r.steady})")


if __name__ == "__main__":
    main()
