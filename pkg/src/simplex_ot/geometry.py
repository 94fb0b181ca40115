"""Connection-level geometry of (P+(G), g_W).

Tangent vectors are handled in ambient vertex coordinates.  Curvature uses
the convention ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``
and ``curvature(...) = g_W(R(s1, s2) s3, s4)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .calculus import circ
from .errors import BoundaryExitError, ConvergenceError
from .graph import EPS_INTERIOR, Graph, check_interior
from .laplacian import WeightedLaplacian, laplacian_apply, logdet_gradient
from .metric import SimplexPath

RTOL = 1e-8
ATOL = 1e-9


def _lap(g: Graph, rho, L=None) -> WeightedLaplacian:
    if L is not None:
        return L
    rho = np.asarray(rho, dtype=float)
    check_interior(rho)
    return WeightedLaplacian(g, rho)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SIMPLEX_OT_THREADS", "1")))
    except ValueError:
        return 1


def wasserstein_gradient(g: Graph, rho, F, L=None) -> np.ndarray:
    """``grad_W F = L(rho) d_rho F``."""
    L = _lap(g, rho, L)
    return L.matrix @ F.gradient(L.a)


def _conn_from_potentials(g, rho, s1, s2, p1, p2):
    D = g.incidence
    c = circ(g, D @ p1, D @ p2)
    return -0.5 * (laplacian_apply(g, s1, p2) + laplacian_apply(g, s2, p1)) + 0.5 * laplacian_apply(g, rho, c)


def connection(g: Graph, rho, s1, s2, L=None) -> np.ndarray:
    """Levi-Civita connection ``nabla_{s1} s2`` for constant ambient fields.

    ``-1/2 [L(s1) L^+ s2 + L(s2) L^+ s1] + 1/2 L(rho)(grad L^+ s1 o grad L^+ s2)``
    """
    L = _lap(g, rho, L)
    p1, p2 = L.pinv_apply(s1), L.pinv_apply(s2)
    return _conn_from_potentials(g, L.a, np.asarray(s1, float), np.asarray(s2, float), p1, p2)


def _row_diff_moments(g: Graph, P: np.ndarray) -> np.ndarray:
    """``M_v = sum_{u in N(v)} w_vu (P_v - P_u)(P_v - P_u)^T`` for every vertex."""
    diff = P[g.heads] - P[g.tails]
    outer = g.weights[:, None, None] * diff[:, :, None] * diff[:, None, :]
    M = np.zeros((g.n, g.n, g.n))
    np.add.at(M, g.heads, outer)
    np.add.at(M, g.tails, outer)
    return M


def _christoffel_slice(g: Graph, rho, P, M, k: int) -> np.ndarray:
    n = g.n
    out = np.zeros((n, n))
    W = g.weight_matrix
    for kp in g.adjacency[k]:
        w = W[k, kp]
        theta = 0.5 * (rho[k] + rho[kp])
        a = P[kp] - P[k]
        e = np.zeros(n)
        e[k] += 1.0
        e[kp] += 1.0
        out += w * (np.outer(a, e) + np.outer(e, a) + theta * (M[k] - M[kp]))
    out *= 0.25
    return 0.5 * (out + out.T)


def christoffel(g: Graph, rho, k: int, L=None) -> np.ndarray:
    """Slice ``Gamma^k_ij`` with ``(nabla_{s1} s2)_k = s1^T Gamma^k s2`` on tangent pairs.

    ``1/4 sum_{k' in N(k)} w_kk' [ (P_k'i - P_ki)(d_jk + d_jk') + (i<->j)
    + theta_kk' (sum_{k'' in N(k)} w_kk'' dP_i dP_j - sum_{k''' in N(k')} w_k'k''' dP_i dP_j) ]``
    with ``P = L(rho)^+`` and ``dP`` the row differences across each edge.
    """
    L = _lap(g, rho, L)
    if not 0 <= k < g.n:
        raise IndexError(f"vertex {k} out of range")
    P = L.pinv()
    return _christoffel_slice(g, L.a, P, _row_diff_moments(g, P), k)


def christoffel_all(g: Graph, rho, L=None, threads: int | None = None) -> np.ndarray:
    """All slices stacked as ``(n, n, n)`` with index order ``[k, i, j]``."""
    L = _lap(g, rho, L)
    P = L.pinv()
    M = _row_diff_moments(g, P)
    threads = threads or _threads()
    job = lambda k: _christoffel_slice(g, L.a, P, M, k)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            slices = list(ex.map(job, range(g.n)))
    else:
        slices = [job(k) for k in range(g.n)]
    return np.stack(slices)


# -- ODEs along curves ---------------------------------------------------------


def _interior_event(n, eps):
    def ev(t, y):
        return np.min(y[:n]) - eps

    ev.terminal = True
    ev.direction = -1
    return ev


def _solve(fun, t_span, y0, t_eval, events=None, rtol=RTOL, atol=ATOL):
    sol = solve_ivp(fun, t_span, y0, method="RK45", t_eval=t_eval, rtol=rtol, atol=atol, events=events)
    if sol.status == 1:
        te = float(sol.t_events[0][0])
        raise BoundaryExitError(f"curve left the interior at t = {te:.6g}", te)
    if sol.status != 0:
        raise ConvergenceError(f"integration failed: {sol.message}")
    return sol


def _curve_of(path: SimplexPath):
    if path.velocity is not None:
        sp = CubicHermiteSpline(path.t, path.rho, path.velocity, axis=0)
        return sp, sp.derivative()
    sp = CubicSpline(path.t, path.rho, axis=0)
    return sp, sp.derivative()


def geodesic_ivp(g: Graph, rho0, sigma0, T: float = 1.0, K: int = 100, *, rtol=RTOL, atol=ATOL,
                 eps=EPS_INTERIOR) -> SimplexPath:
    """Solve ``rho'' = L(rho') L^+ rho' - 1/2 L(rho)(grad L^+ rho' o grad L^+ rho')``."""
    n = g.n
    rho0 = np.asarray(rho0, dtype=float)
    check_interior(rho0, eps)
    sigma0 = np.asarray(sigma0, dtype=float)

    def f(t, y):
        rho, v = y[:n], y[n:]
        return np.concatenate([v, -connection(g, rho, v, v, WeightedLaplacian(g, rho))])

    t = np.linspace(0.0, T, K + 1)
    sol = _solve(f, (0.0, T), np.concatenate([rho0, sigma0]), t, _interior_event(n, eps), rtol, atol)
    return SimplexPath(sol.t, sol.y[:n].T, sol.y[n:].T)


def parallel_transport(g: Graph, path: SimplexPath, sigma0, curve=None, *, rtol=RTOL, atol=ATOL) -> np.ndarray:
    """Transport ``sigma0`` along ``path``; returns one tangent vector per grid time.

    Solves ``sigma' = -nabla_{rho'} sigma`` in ambient components.  The curve
    between grid points is the cubic Hermite interpolant of the path (or a
    user supplied ``curve(t) -> (rho, rho')``).
    """
    for r in path.rho:
        check_interior(r)
    if curve is None:
        pos, vel = _curve_of(path)
        curve = lambda t: (pos(t), vel(t))  # noqa: E731

    def f(t, s):
        rho, v = curve(t)
        return -connection(g, rho, v, s, WeightedLaplacian(g, rho))

    sol = _solve(f, (path.t[0], path.t[-1]), np.asarray(sigma0, float), path.t, rtol=rtol, atol=atol)
    return sol.y.T


def jacobi_propagate(g: Graph, geodesic: SimplexPath, h0, *, method: str = "rk45",
                     rtol=RTOL, atol=ATOL) -> np.ndarray:
    """Propagate ``h' = L(h) L(rho)^+ rho'`` from ``h(0) = h0`` along a geodesic.

    The ODE is linear, so the fundamental matrix is integrated once and applied
    to ``h0``; outputs are exactly linear in ``h0``.  ``method="midpoint"``
    uses the implicit-midpoint recursion on the path grid, which is the
    discretization under which :func:`metric.second_variation` vanishes to
    rounding.
    """
    n = g.n
    D, A = g.incidence, g.averaging
    h0 = np.asarray(h0, dtype=float)
    for r in geodesic.rho:
        check_interior(r)
    if method == "midpoint":
        t = geodesic.t
        Y = np.empty((len(t), n, n))
        Y[0] = np.eye(n)
        eye = np.eye(n)
        for k in range(len(t) - 1):
            dt = t[k + 1] - t[k]
            m = 0.5 * (geodesic.rho[k] + geodesic.rho[k + 1])
            phi = WeightedLaplacian(g, m).pinv_apply((geodesic.rho[k + 1] - geodesic.rho[k]) / dt)
            Mk = D.T @ ((D @ phi)[:, None] * A)
            Y[k + 1] = np.linalg.solve(eye - 0.5 * dt * Mk, (eye + 0.5 * dt * Mk) @ Y[k])
        return Y @ h0
    if method != "rk45":
        raise ValueError(f"unknown method {method!r}")
    pos, vel = _curve_of(geodesic)

    def f(t, y):
        rho = pos(t)
        phi = WeightedLaplacian(g, rho).pinv_apply(vel(t))
        Mt = D.T @ ((D @ phi)[:, None] * A)
        return (Mt @ y.reshape(n, n)).ravel()

    sol = _solve(f, (geodesic.t[0], geodesic.t[-1]), np.eye(n).ravel(), geodesic.t, rtol=rtol, atol=atol)
    Y = sol.y.T.reshape(-1, n, n)
    return Y @ h0


# -- curvature -----------------------------------------------------------------


def curvature(g: Graph, rho, s1, s2, s3, s4, L=None) -> float:
    """``g_W(R(s1, s2) s3, s4)`` in closed form.

    With ``Phi_a = L^+ s_a``, ``T(a, b; c) = Phi_a^T L(s_c) Phi_b`` and the
    Koszul form ``K(b, c, d) = g(nabla_{s_b} s_c, s_d)``
    ``= 1/2 [T(b,c;d) - T(d,c;b) - T(d,b;c)]``,
    ``R = d_1 K(2,3,4) - d_2 K(1,3,4) - m(2,3)^T L^+ m(1,4) + m(1,3)^T L^+ m(2,4)``
    where ``m = connection`` and ``d_x T(a,b;c) = -S(x,a;c,b) - S(c,a;x,b)``,
    ``S(x,a;c,b) = Phi_a^T L(s_x) L^+ L(s_c) Phi_b``.
    """
    L = _lap(g, rho, L)
    s = {i: np.asarray(v, dtype=float) for i, v in enumerate((s1, s2, s3, s4), start=1)}
    phi = {i: L.pinv_apply(v) for i, v in s.items()}
    # LP[x][b] = L(s_x) Phi_b
    LP = {x: {b: laplacian_apply(g, s[x], phi[b]) for b in s} for x in s}

    def S(x, a, c, b):
        return float(LP[x][a] @ L.pinv_apply(LP[c][b]))

    def dT(x, a, b, c):
        return -S(x, a, c, b) - S(c, a, x, b)

    def dK(x, b, c, d):
        return 0.5 * (dT(x, b, c, d) - dT(x, d, c, b) - dT(x, d, b, c))

    def m(a, b):
        return _conn_from_potentials(g, L.a, s[a], s[b], phi[a], phi[b])

    m23, m14, m13, m24 = m(2, 3), m(1, 4), m(1, 3), m(2, 4)
    return dK(1, 2, 3, 4) - dK(2, 1, 3, 4) - float(m23 @ L.pinv_apply(m14)) + float(m13 @ L.pinv_apply(m24))


# -- second-order operators ------------------------------------------------------


def hessian_w(g: Graph, rho, F, s1, s2, L=None) -> float:
    """``Hess_W F(s1, s2) = s1^T d2F s2 - d_rho F^T nabla_{s1} s2``."""
    L = _lap(g, rho, L)
    return float(np.asarray(s1) @ F.hessian(L.a) @ np.asarray(s2)) - float(F.gradient(L.a) @ connection(g, L.a, s1, s2, L))


def spectral_frame(g: Graph, rho, L=None) -> np.ndarray:
    """g_W-orthonormal tangent frame ``X_i = sqrt(lambda_i) u_i`` (columns)."""
    L = _lap(g, rho, L)
    lam, U = L.spectrum()
    return U[:, 1:] * np.sqrt(lam[1:])


def laplace_beltrami(g: Graph, rho, F, L=None) -> float:
    """``Delta_W F = tr(L(rho) d2F) - 1/2 d_rho F^T L(rho) d_rho log Pi``."""
    L = _lap(g, rho, L)
    dF = F.gradient(L.a)
    return float(np.sum(L.matrix * F.hessian(L.a))) - 0.5 * float(dF @ L.matrix @ logdet_gradient(g, L.a, L))


def coordinate_divergence_fd(G, rho, h: float = 1e-6) -> float:
    """Central-difference divergence of a tangent field in the chart ``(rho_1..rho_{n-1})``.

    Lower precision than an analytic divergence; roughly ``h^2`` truncation
    plus ``eps/h`` rounding.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    total = 0.0
    for a in range(n - 1):
        e = np.zeros(n)
        e[a], e[-1] = h, -h
        total += (G(rho + e)[a] - G(rho - e)[a]) / (2.0 * h)
    return total


def divergence_w(g: Graph, rho, G, div_G=None, L=None, h: float = 1e-6) -> float:
    """``div_W G = nabla_rho . G - 1/2 G^T d_rho log Pi``.

    ``G(rho)`` returns a tangent vector; ``div_G(rho)`` its coordinate
    divergence.  Without ``div_G`` a finite-difference fallback (step ``h``)
    is used.
    """
    L = _lap(g, rho, L)
    Gv = np.asarray(G(L.a), dtype=float)
    cdiv = div_G(L.a) if div_G is not None else coordinate_divergence_fd(G, L.a, h)
    return float(cdiv) - 0.5 * float(Gv @ logdet_gradient(g, L.a, L))


def gradient_field_divergence(g: Graph, F):
    """Analytic coordinate divergence of ``rho -> L(rho) dF(rho)``: ``tr(L d2F)``."""

    def div_G(rho):
        return float(np.sum(WeightedLaplacian(g, rho).matrix * F.hessian(rho)))

    return div_G


__all__ = [
    "wasserstein_gradient", "connection", "christoffel", "christoffel_all", "geodesic_ivp",
    "parallel_transport", "jacobi_propagate", "curvature", "hessian_w", "spectral_frame",
    "laplace_beltrami", "divergence_w", "coordinate_divergence_fd", "gradient_field_divergence",
]
