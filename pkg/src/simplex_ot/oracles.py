"""Independent reference computations used by the tests and ``verify``.

Nothing here reuses the closed-form connection or curvature: everything is
derived from the metric alone by finite differences in the chart
``x = (rho_1, ..., rho_{n-1})``, ``rho_n = 1 - sum(x)``.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .laplacian import WeightedLaplacian

H_CHART = 1e-5


def chart_injection(n: int) -> np.ndarray:
    """``J`` mapping chart tangent vectors to ambient zero-sum vectors."""
    return np.vstack([np.eye(n - 1), -np.ones((1, n - 1))])


def to_chart(sigma) -> np.ndarray:
    return np.asarray(sigma, dtype=float)[:-1]


def _rho(x) -> np.ndarray:
    return np.append(x, 1.0 - np.sum(x))


def chart_metric(g: Graph, x) -> np.ndarray:
    """``G(x) = J^T L(rho(x))^+ J``."""
    J = chart_injection(g.n)
    return J.T @ WeightedLaplacian(g, _rho(x)).pinv() @ J


def chart_christoffel(g: Graph, x, h: float = H_CHART) -> np.ndarray:
    """``Gamma[a, b, c] = 1/2 G^{ad}(d_b G_dc + d_c G_db - d_d G_bc)`` by central differences."""
    d = g.n - 1
    x = np.asarray(x, dtype=float)
    dG = np.empty((d, d, d))  # dG[b] = d_b G
    for b in range(d):
        e = np.zeros(d)
        e[b] = h
        dG[b] = (chart_metric(g, x + e) - chart_metric(g, x - e)) / (2 * h)
    Ginv = np.linalg.inv(chart_metric(g, x))
    T = np.einsum("bdc->dbc", dG) + np.einsum("cdb->dbc", dG) - dG
    return 0.5 * np.einsum("ad,dbc->abc", Ginv, T)


def chart_riemann(g: Graph, x, h: float = H_CHART) -> np.ndarray:
    """Lowered ``R[f, b, c, d] = g(R(e_c, e_d) e_b, e_f)`` from FD of :func:`chart_christoffel`."""
    d = g.n - 1
    x = np.asarray(x, dtype=float)
    dGam = np.empty((d, d, d, d))  # dGam[c] = d_c Gamma
    for c in range(d):
        e = np.zeros(d)
        e[c] = h
        dGam[c] = (chart_christoffel(g, x + e, h) - chart_christoffel(g, x - e, h)) / (2 * h)
    Gm = chart_christoffel(g, x, h)
    R = (
        np.einsum("cadb->abcd", dGam)
        - np.einsum("dacb->abcd", dGam)
        + np.einsum("ace,edb->abcd", Gm, Gm)
        - np.einsum("ade,ecb->abcd", Gm, Gm)
    )
    return np.einsum("fa,abcd->fbcd", chart_metric(g, x), R)


def curvature_oracle(g: Graph, rho, s1, s2, s3, s4, h: float = H_CHART) -> float:
    """``g_W(R(s1, s2) s3, s4)`` from the chart Riemann tensor."""
    Rl = chart_riemann(g, to_chart(rho), h)
    c1, c2, c3, c4 = (to_chart(s) for s in (s1, s2, s3, s4))
    return float(np.einsum("fbcd,b,c,d,f->", Rl, c3, c1, c2, c4))


def connection_oracle(g: Graph, rho, s1, s2, h: float = H_CHART) -> np.ndarray:
    """``nabla_{s1} s2`` for constant fields, from the metric via Koszul in the chart."""
    Gam = chart_christoffel(g, to_chart(rho), h)
    c = np.einsum("abc,b,c->a", Gam, to_chart(s1), to_chart(s2))
    return chart_injection(g.n) @ c


def koszul_oracle(g: Graph, rho, s1, s2, s3, h: float = 1e-6) -> float:
    """``g(nabla_{s1} s2, s3)`` for constant fields: ``1/2 (X g(Y,Z) + Y g(X,Z) - Z g(X,Y))``."""

    def dmetric(direction, a, b):
        P = lambda r: WeightedLaplacian(g, r).pinv()  # noqa: E731
        rho_ = np.asarray(rho, dtype=float)
        return (a @ P(rho_ + h * direction) @ b - a @ P(rho_ - h * direction) @ b) / (2 * h)

    s1, s2, s3 = (np.asarray(s, dtype=float) for s in (s1, s2, s3))
    return 0.5 * (dmetric(s1, s2, s3) + dmetric(s2, s1, s3) - dmetric(s3, s1, s2))


def central_difference(f, x, direction, h: float):
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    return (np.asarray(f(x + h * d)) - np.asarray(f(x - h * d))) / (2 * h)


def second_difference(f, x, direction, h: float):
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    return (np.asarray(f(x + h * d)) - 2 * np.asarray(f(x)) + np.asarray(f(x - h * d))) / h**2


def log_pi_gradient_fd(g: Graph, rho, h: float = 1e-5) -> np.ndarray:
    """Coordinate-wise central differences of ``log Pi`` (leaves the simplex; ``L`` is defined on the orthant)."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty(g.n)
    for k in range(g.n):
        e = np.zeros(g.n)
        e[k] = h
        out[k] = (WeightedLaplacian(g, rho + e).log_pi() - WeightedLaplacian(g, rho - e).log_pi()) / (2 * h)
    return out
