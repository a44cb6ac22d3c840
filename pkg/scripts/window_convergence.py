"""How many Fock states per mode the G=1 coherent and Fock runs need to pass the audit."""
import argparse

from superjc import scenarios
from superjc.dynamics import convergence_audit, evolve
from superjc.hilbert import TruncationWindow


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[11, 21, 31, 41, 51, 61, 71, 81, 91])
    args = ap.parse_args()
    coh = scenarios.preset("coherent_fig4a")
    fock = scenarios.fock_counterpart(coh)
    n1, n2 = scenarios.FIG4A_FOCK
    print(f"{'M':>4} {'Fock':>26} {'coherent':>26}")
    for m in args.sizes:
        h = (m - 1) // 2
        w1 = TruncationWindow(max(0, n1 - h), max(0, n1 - h) + m - 1)
        w2 = TruncationWindow(max(0, n2 - h), max(0, n2 - h) + m - 1)
        row = []
        for cfg in (fock.replace(window1=w1, window2=w2),
                    coh.replace(window1=w1, window2=w2, coherent_eps=0.9)):
            a = convergence_audit(evolve(cfg))
            row.append(f"{'pass' if a.passed else 'fail'} ({a.report.max_boundary_occupancy:.1e})")
        print(f"{m:4d} {row[0]:>26} {row[1]:>26}")


if __name__ == "__main__":
    main()
