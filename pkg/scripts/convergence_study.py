"""Grid refinement study on the default scenario.

Prints, for N = 200, 400, 800, the residuals of the discrete energy identities
and the observed orders between successive grids.

    python3 scripts/convergence_study.py [N0 [levels]]
"""
import math
import sys

from porothermo.measures import (conservation_drift, dissipation_residual, energy_balance_check, flux_path_residual,
                                 surface_measures)
from porothermo.simulator import run


def residuals(N: int) -> dict[str, float]:
    tr = run({"grid": {"N": N}})
    ms = surface_measures(tr)
    balance = max(energy_balance_check(tr, s, ms, tr.output_indices()).ball_max for s in ms.sigma)
    worst, qmax = flux_path_residual(tr, every=10)
    return {
        "dissipation": dissipation_residual(tr, range(1, tr.n_steps)).max,
        "drift": conservation_drift(tr)[0],
        "weighted balance": balance,
        "flux paths / max|q|": worst / qmax,
    }


def main(n0: int = 200, levels: int = 3) -> None:
    grids = [n0 * 2**k for k in range(levels)]
    table = {N: residuals(N) for N in grids}
    keys = list(table[grids[0]])
    print(f"{'N':>6} " + " ".join(f"{k:>22}" for k in keys))
    for i, N in enumerate(grids):
        cells = []
        for k in keys:
            cell = f"{table[N][k]:.3e}"
            if i:
                prev = table[grids[i - 1]][k]
                cell += f" (p={math.log2(prev / table[N][k]):.2f})" if table[N][k] > 0 else ""
            cells.append(f"{cell:>22}")
        print(f"{N:>6} " + " ".join(cells))


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
