"""Red-and-blue (delta1 = -delta2 = 6) map over (sqrt n1, sqrt n2) plus the arrow runs."""
import argparse
import math

import numpy as np

from superjc import io, scenarios
from superjc.dynamics import evolve_converged
from superjc.hilbert import Fock
from superjc.scenarios import SweepAxis, zoom_maximum

ARROWS = ((16.00, 61.25), (29.21, 89.84))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--step", type=float, default=5.0, help="grid step in sqrt(n)")
    ap.add_argument("--half-width", type=int, default=8)
    ap.add_argument("-j", "--workers", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    base, _, _ = scenarios.preset("dichromatic_fig2")
    base = base.replace(half_width=args.half_width)
    n = tuple(int(round(s * s)) for s in np.arange(0.0, 100.0 + 1e-9, args.step))
    ax, ay = SweepAxis("n1_init", n), SweepAxis("n2_init", n)
    grid = scenarios.run_sweep(base, ax, ay, workers=args.workers)
    if args.out:
        io.write_grid(grid, args.out, {"preset": "dichromatic_fig2", "step_sqrt_n": args.step})
    print(f"diagonal n1 = n2: max P_X = {np.diag(grid.p_x).max():.3e}")
    _, fine = zoom_maximum(base, ax, ay, rounds=2, workers=args.workers)
    print(f"grid maximum P_X = {fine.p_x:.4f} at sqrt n = "
          f"({math.sqrt(fine.x):.2f}, {math.sqrt(fine.y):.2f})")
    for s1, s2 in ARROWS:
        cfg = base.replace(field1_init=Fock(round(s1 * s1)), field2_init=Fock(round(s2 * s2)))
        traj, audit = evolve_converged(cfg)
        print(f"arrow ({s1}, {s2}): P_X = {traj.p_x[-1]:.4f}, dn1 = {traj.delta_n1[-1]:+.4f}, "
              f"dn2 = {traj.delta_n2[-1]:+.4f}, audit {'pass' if audit.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
