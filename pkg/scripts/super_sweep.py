"""Two-color SUPER maps over (delta2, n2) at fixed large n1, with resonance zoom.

    python scripts/super_sweep.py --preset super_fig1a --out fig1a.csv
    python scripts/super_sweep.py --preset super_fig1b --dx 5 --dy 4 --zoom 5
"""
import argparse
import math
import time

from superjc import io, scenarios
from superjc.scenarios import SweepAxis, locate_maxima, refine_axis, zoom_maximum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="super_fig1a", choices=["super_fig1a", "super_fig1b"])
    ap.add_argument("--dx", type=int, default=5, help="keep every dx-th detuning")
    ap.add_argument("--dy", type=int, default=8, help="keep every dy-th sqrt(n2) row")
    ap.add_argument("--half-width", type=int, default=8)
    ap.add_argument("--zoom", type=int, default=3, help="refine this many top maxima")
    ap.add_argument("--threshold", type=float, default=0.9)
    ap.add_argument("-j", "--workers", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    base, ax, ay = scenarios.preset(args.preset)
    base = base.replace(half_width=args.half_width)
    ax, ay = ax.subsample(args.dx), ay.subsample(args.dy)
    t0 = time.perf_counter()
    grid = scenarios.run_sweep(base, ax, ay, workers=args.workers)
    print(f"{grid.p_x.size} cells in {time.perf_counter() - t0:.1f} s, "
          f"{int((~grid.audit_pass).sum())} failed the audit")
    if args.out:
        io.write_grid(grid, args.out, {"preset": args.preset, "half_width": args.half_width})

    print(f"{'delta2':>9} {'sqrt n2':>8} {'P_X':>8} {'dn1':>8} {'dn2':>8}")
    for m in locate_maxima(grid, args.threshold)[:args.zoom]:
        step_x = abs(ax.values[1] - ax.values[0])
        sx = refine_axis(ax, m.x, step_x, step_x / 4)
        sy = refine_axis(ay, m.y, float(args.dy), args.dy / 4)
        fine, best = zoom_maximum(base, sx, sy, rounds=1, workers=args.workers)
        i = (best.iy, best.ix)
        print(f"{best.x:9.3f} {math.sqrt(best.y):8.2f} {best.p_x:8.4f} "
              f"{fine.delta_n1[i]:+8.3f} {fine.delta_n2[i]:+8.3f}")


if __name__ == "__main__":
    main()
