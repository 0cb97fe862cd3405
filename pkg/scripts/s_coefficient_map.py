#!/usr/bin/env python3
"""Map the strict-string-stability coefficient S over a 2-D parameter slice.

Writes a CSV grid of S(a, T) (or any other parameter pair) at a fixed
equilibrium speed, with the remaining parameters held at the population
means. Negative S marks strictly string-unstable vehicles.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from stringstab import ParamDistribution, linearize, string_stability_coefficient


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", default="a", choices=["a", "b", "T", "s0"])
    ap.add_argument("--y", default="T", choices=["a", "b", "T", "s0"])
    ap.add_argument("--x-range", type=float, nargs=2, default=[0.3, 3.0])
    ap.add_argument("--y-range", type=float, nargs=2, default=[0.3, 3.0])
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--v-eq", type=float, default=16.5)
    ap.add_argument("--out", type=Path, default=Path("s_map.csv"))
    args = ap.parse_args()

    base = ParamDistribution.ngsim_defaults().mean_params
    xs = np.linspace(*args.x_range, args.steps)
    ys = np.linspace(*args.y_range, args.steps)
    unstable = 0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([args.x, args.y, "S"])
        for x in xs:
            for y in ys:
                p = base.with_values(**{args.x: float(x), args.y: float(y)})
                s = string_stability_coefficient(linearize(p, args.v_eq))
                unstable += s < 0
                w.writerow([x, y, s])
    total = args.steps**2
    print(f"{args.out}: {total} points, {unstable} strictly unstable "
          f"({100 * unstable / total:.1f}%)")


if __name__ == "__main__":
    main()
