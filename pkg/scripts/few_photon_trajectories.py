"""Time series for the few-photon and coherent-state presets, one CSV each."""
import argparse
from pathlib import Path

from superjc import io, scenarios
from superjc.dynamics import convergence_audit, evolve
from superjc.scenarios import count_local_maxima, fock_counterpart

RUNS = ("vacuum_fig3c", "vacuum_fig3d", "entangled_fig3g", "reverse_fig3h",
        "coherent_fig4a", "coherent_fig4d")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="trajectories")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(name, scenarios.preset(name)) for name in RUNS]
    jobs += [(f"{name}_fock", fock_counterpart(scenarios.preset(name)))
             for name in ("coherent_fig4a", "coherent_fig4d")]
    for name, cfg in jobs:
        traj = evolve(cfg)
        audit = convergence_audit(traj)
        io.write_trajectory(traj, out / f"{name}.csv", [name, audit.summary()])
        print(f"{name:22s} P_X={traj.p_x[-1]:.4f} dn1={traj.delta_n1[-1]:+.4f} "
              f"dn2={traj.delta_n2[-1]:+.4f} maxima={count_local_maxima(traj.p_x)} "
              f"{'pass' if audit.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
