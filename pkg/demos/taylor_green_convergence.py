"""Taylor-Green vortex: how fast does the error shrink with the grid?

The 2D Taylor-Green vortex has a closed-form solution, so each run can be
compared to the truth.  Doubling the resolution should cut the error by
roughly 2^p; the fitted p is printed under the table.

    python demos/taylor_green_convergence.py              # quick, 32/64/128 to t=1
    python demos/taylor_green_convergence.py --full       # 32/64/128 to t=5
"""
import argparse

from pfmsim import bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nu", type=float, default=0.0)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    res, t_end = ((32, 64, 128), 5.0) if args.full else ((32, 64, 128), 1.0)
    rc = bench.RunConfig("taylor_green_2d", res, nu=args.nu, t_end=t_end, cfl=1.0 if args.nu == 0 else 0.5)
    print(f"Taylor-Green, nu={args.nu:g}, t_end={t_end:g}")
    table = bench.run_convergence(rc, log=print)
    print(table)


if __name__ == "__main__":
    main()
