"""Resonant single-mode check: final P_X against sin^2(G sqrt(pi n)) for n1 = 1..400."""
import argparse
import math

import numpy as np

from superjc import io, scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    base, ax, ay = scenarios.preset("rabi_check")
    grid = scenarios.run_sweep(base, ax, ay)
    n = np.asarray(ax.values)
    exact = np.sin(base.g1 * np.sqrt(math.pi * n)) ** 2
    err = np.abs(grid.p_x[0] - exact)
    print(f"max |P_X - sin^2(G sqrt(pi n))| = {err.max():.2e} (n = {n[err.argmax()]})")
    print(f"P_X range [{grid.p_x.min():.4f}, {grid.p_x.max():.4f}], "
          f"max |dn1 + P_X| = {np.abs(grid.delta_n1 + grid.p_x).max():.1e}")
    if args.out:
        io.write_grid(grid, args.out, {"preset": "rabi_check"})


if __name__ == "__main__":
    main()
