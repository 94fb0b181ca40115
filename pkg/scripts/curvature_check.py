"""Compare the closed-form curvature with a chart oracle and with the m/n expression.

The m/n expression (symmetric connection m and antisymmetric n) is evaluated
literally; its disagreement with the oracle motivates the closed form used by
``simplex_ot.geometry.curvature``.

    python3 scripts/curvature_check.py --trials 50 --seed 0
"""

import argparse

import numpy as np

from simplex_ot.geometry import connection, curvature
from simplex_ot.graph import random_connected_graph, random_density, random_tangent, triangle_graph
from simplex_ot.laplacian import WeightedLaplacian, laplacian_matrix
from simplex_ot.oracles import curvature_oracle


def curvature_mn(g, rho, s1, s2, s3, s4):
    L = WeightedLaplacian(g, rho)
    P = L.pinv()
    m = lambda a, b: connection(g, rho, a, b, L)  # noqa: E731
    n = lambda a, b: laplacian_matrix(g, a) @ P @ b - laplacian_matrix(g, b) @ P @ a  # noqa: E731
    q = lambda a, M, b: float(a @ P @ M @ P @ b)  # noqa: E731
    Lm = lambda a, b: laplacian_matrix(g, m(a, b))  # noqa: E731
    first = 0.5 * (q(s2, Lm(s1, s3), s4) + q(s1, Lm(s2, s4), s3) - q(s2, Lm(s1, s4), s3) - q(s1, Lm(s2, s3), s4))
    second = 0.25 * (2 * n(s1, s2) @ P @ n(s3, s4) + n(s1, s3) @ P @ n(s2, s4) - n(s2, s3) @ P @ n(s1, s4))
    return first + second


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--h", type=float, default=1e-5)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    rows = []
    for k in range(args.trials):
        g = triangle_graph() if k % 2 == 0 else random_connected_graph(rng, int(rng.integers(3, 6)))
        rho = random_density(rng, g.n)
        s = [random_tangent(rng, g.n) for _ in range(4)]
        ref = curvature_oracle(g, rho, *s, h=args.h)
        rows.append((g.n, abs(curvature(g, rho, *s) - ref) / abs(ref), abs(curvature_mn(g, rho, *s) - ref) / abs(ref)))
    rows = np.array(rows)
    print(f"{'n':>3} {'closed form rel err':>20} {'m/n form rel err':>18}")
    for n in np.unique(rows[:, 0]):
        sel = rows[rows[:, 0] == n]
        print(f"{int(n):>3} {sel[:, 1].max():>20.3e} {sel[:, 2].max():>18.3e}")
    print(f"worst closed form {rows[:, 1].max():.3e}, median m/n form {np.median(rows[:, 2]):.3e}")


if __name__ == "__main__":
    main()
