"""Energy drift of the implicit midpoint integrator against the step size.

The midpoint rule is symplectic, so the drift should stay bounded and scale
like dt^2.

    python3 scripts/hamiltonian_drift.py --T 10
"""

import argparse

import numpy as np

from simplex_ot.dynamics import hamiltonian_flow
from simplex_ot.functionals import entropy
from simplex_ot.graph import random_density, triangle_graph


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=1010)
    args = ap.parse_args()
    g = triangle_graph()
    rng = np.random.default_rng(args.seed)
    rho0 = random_density(rng, 3, 5.0)
    phi0 = 0.1 * rng.normal(size=3)
    prev = None
    for dt in (1e-1, 5e-2, 1e-2, 5e-3, 1e-3):
        for method in ("midpoint", "rk45"):
            tr = hamiltonian_flow(g, rho0, phi0, entropy(), T=args.T, dt=dt, method=method)
            drift = np.abs(tr.H - tr.H[0]).max() / abs(tr.H[0])
            note = ""
            if method == "midpoint":
                if prev is not None:
                    note = f"  order {np.log(prev[1] / drift) / np.log(prev[0] / dt):.2f}"
                prev = (dt, drift)
            print(f"dt={dt:<6g} {method:>8}: relative H drift {drift:.3e}{note}")


if __name__ == "__main__":
    main()
