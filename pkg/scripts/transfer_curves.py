"""Print the message transfer function f_w(x) at several temperatures as CSV.

    python3 scripts/transfer_curves.py --weight 1.5 > curves.csv
"""
import argparse
import sys

import numpy as np

from querytrain.qtnn import transfer


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--weight", type=float, default=1.5)
    p.add_argument("--temperatures", type=float, nargs="+", default=[0.0, 0.25, 0.5, 1.0, 2.0])
    p.add_argument("--lo", type=float, default=-6.0)
    p.add_argument("--hi", type=float, default=6.0)
    p.add_argument("--points", type=int, default=121)
    args = p.parse_args()

    x = np.linspace(args.lo, args.hi, args.points)
    cols = np.column_stack([x] + [transfer(x, args.weight, t) for t in args.temperatures])
    header = "x," + ",".join(f"T={t:g}" for t in args.temperatures)
    np.savetxt(sys.stdout, cols, delimiter=",", header=header, comments="", fmt="%.6f")


if __name__ == "__main__":
    main()
