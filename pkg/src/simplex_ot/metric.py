"""Wasserstein metric tensor, path energy and its variations, and distances.

Tangent vectors are zero-sum vertex vectors ``sigma``; potentials ``Phi`` are
their dual coordinates, ``sigma = L(rho) Phi``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space
from scipy.optimize import minimize

from . import hamiltonian
from .calculus import circ, normalize_potential
from .errors import BoundaryError, BoundaryExitError, ConvergenceError, DensityError
from .graph import EPS_INTERIOR, Graph, check_interior, validate_density
from .laplacian import WeightedLaplacian, laplacian_apply

log = logging.getLogger(__name__)


@dataclass
class SimplexPath:
    """Densities sampled on a time grid; velocities/potentials when known."""

    t: np.ndarray
    rho: np.ndarray
    velocity: np.ndarray | None = None
    potential: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 2 or self.rho.shape[0] != self.t.shape[0]:
            raise ValueError("rho must have shape (len(t), n)")

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1

    @classmethod
    def linear(cls, rho0, rho1, K: int = 100) -> "SimplexPath":
        """Straight segment in the simplex with ``K`` uniform steps on [0, 1]."""
        rho0, rho1 = np.asarray(rho0, float), np.asarray(rho1, float)
        t = np.linspace(0.0, 1.0, K + 1)
        rho = rho0 + t[:, None] * (rho1 - rho0)
        return cls(t, rho, np.broadcast_to(rho1 - rho0, rho.shape).copy())

    def to_csv_rows(self):
        for tk, r in zip(self.t, self.rho):
            yield [tk, *r]


def _lap(g: Graph, rho) -> WeightedLaplacian:
    rho = np.asarray(rho, dtype=float)
    check_interior(rho)
    return WeightedLaplacian(g, rho)


def metric_primal(g: Graph, rho, s1, s2, L: WeightedLaplacian | None = None) -> float:
    """``g_W(s1, s2) = s1^T L(rho)^+ s2``."""
    L = L or _lap(g, rho)
    return float(np.dot(s1, L.pinv_apply(s2)))


def metric_dual(g: Graph, rho, phi1, phi2) -> float:
    """``g_W = phi1^T L(rho) phi2`` for potentials."""
    check_interior(np.asarray(rho, dtype=float))
    return float(np.dot(phi1, laplacian_apply(g, rho, phi2)))


def tangent_of_potential(g: Graph, rho, phi) -> np.ndarray:
    check_interior(np.asarray(rho, dtype=float))
    return laplacian_apply(g, rho, phi)


def potential_of_tangent(g: Graph, rho, sigma, L: WeightedLaplacian | None = None) -> np.ndarray:
    L = L or _lap(g, rho)
    return normalize_potential(L.pinv_apply(sigma))


def embed_metric_apply(g: Graph, mu, a) -> np.ndarray:
    """``(L(mu)^+ + u0 u0^T) a`` on the positive orthant."""
    mu = np.asarray(mu, dtype=float)
    if not np.all(mu > 0):
        raise DensityError("embedding metric needs a strictly positive measure")
    a = np.asarray(a, dtype=float)
    L = WeightedLaplacian(g, mu)
    return L.pinv_apply(a) + a.mean()


# -- path energy and its variations (midpoint rule) --------------------------


def _intervals(path: SimplexPath):
    dt = np.diff(path.t)
    vel = np.diff(path.rho, axis=0) / dt[:, None]
    mid = 0.5 * (path.rho[1:] + path.rho[:-1])
    return dt, vel, mid


def _check_path(path: SimplexPath, eps=EPS_INTERIOR):
    lo = path.rho.min(axis=1)
    bad = np.nonzero(lo < eps)[0]
    if bad.size:
        k = int(bad[0])
        raise BoundaryError(f"path leaves the interior at t = {path.t[k]:.6g}", float(lo[k]), k)


def path_energy(g: Graph, path: SimplexPath) -> float:
    """``E = int 1/2 rho'^T L(rho)^+ rho' dt`` by the midpoint rule."""
    _check_path(path)
    dt, vel, mid = _intervals(path)
    total = 0.0
    for h, v, m in zip(dt, vel, mid):
        total += 0.5 * h * float(v @ WeightedLaplacian(g, m).pinv_apply(v))
    return total


def _variation_terms(g, path, h):
    _check_path(path)
    h = np.asarray(h, dtype=float)
    if h.shape != path.rho.shape:
        raise ValueError("variation field must have the same shape as path.rho")
    dt, vel, mid = _intervals(path)
    hdot = np.diff(h, axis=0) / dt[:, None]
    hmid = 0.5 * (h[1:] + h[:-1])
    for k in range(len(dt)):
        L = WeightedLaplacian(g, mid[k])
        phi = L.pinv_apply(vel[k])
        yield dt[k], L, vel[k], phi, hdot[k], laplacian_apply(g, hmid[k], phi)


def first_variation(g: Graph, path: SimplexPath, h) -> float:
    """``dE(h) = int rho'^T L^+ (h' - 1/2 L(h) L^+ rho') dt``.

    Discretized on the same midpoint rule as :func:`path_energy`, so it is the
    exact derivative of the discrete energy along ``path + eps h``.
    """
    total = 0.0
    for dt, L, v, phi, hd, Lh_phi in _variation_terms(g, path, h):
        total += dt * float(phi @ (hd - 0.5 * Lh_phi))
    return total


def second_variation(g: Graph, path: SimplexPath, h) -> float:
    """``d2E(h) = int r^T L^+ r dt`` with ``r = h' - L(h) L^+ rho'``."""
    total = 0.0
    for dt, L, v, phi, hd, Lh_phi in _variation_terms(g, path, h):
        r = hd - Lh_phi
        total += dt * float(r @ L.pinv_apply(r))
    return total


# -- geodesic boundary value problem ------------------------------------------


@dataclass
class DistanceOptions:
    K: int = 100
    tol: float = 1e-8
    max_newton: int = 50
    max_halvings: int = 40
    rtol: float = 1e-10
    atol: float = 1e-12
    eps_interior: float = EPS_INTERIOR
    fallback: bool = True


@dataclass
class DistanceResult:
    distance: float
    geodesic: SimplexPath
    method: str
    residual: float
    iterations: int
    phi0: np.ndarray | None = field(default=None, repr=False)


def _boundary_event(n, eps):
    def ev(t, y):
        return np.min(y[:n]) - eps

    ev.terminal = True
    ev.direction = -1
    return ev


def shoot(g: Graph, rho0, phi0, T=1.0, t_eval=None, *, rtol=1e-10, atol=1e-12, eps=EPS_INTERIOR, F=None):
    """Integrate the dual Hamiltonian system from ``(rho0, phi0)`` with RK45."""
    n = g.n
    y0 = np.concatenate([rho0, phi0])
    sol = solve_ivp(
        hamiltonian.rhs(g, F), (0.0, T), y0, method="RK45", t_eval=t_eval,
        rtol=rtol, atol=atol, events=_boundary_event(n, eps),
    )
    if sol.status == 1:
        raise BoundaryExitError(f"trajectory left the interior at t = {sol.t_events[0][0]:.6g}", float(sol.t_events[0][0]))
    if sol.status != 0:
        raise ConvergenceError(f"integration failed: {sol.message}")
    return sol


def _shoot_with_sensitivity(g, rho0, phi0, B, opts):
    n = g.n
    m = B.shape[1]
    S0 = np.zeros((2 * n, m))
    S0[n:] = B
    y0 = np.concatenate([rho0, phi0, S0.ravel()])
    sol = solve_ivp(
        hamiltonian.sensitivity_rhs(g, m), (0.0, 1.0), y0, method="RK45",
        rtol=opts.rtol, atol=opts.atol, events=_boundary_event(n, opts.eps_interior),
    )
    if sol.status == 1:
        raise BoundaryExitError("shooting trajectory left the interior", float(sol.t_events[0][0]))
    if sol.status != 0:
        raise ConvergenceError(f"integration failed: {sol.message}")
    y = sol.y[:, -1]
    return y[:n], y[2 * n :].reshape(2 * n, m)[:n]


def _shooting(g, rho0, rho1, opts):
    n = g.n
    B = null_space(np.ones((1, n)))
    mid = 0.5 * (rho0 + rho1)
    phi = normalize_potential(WeightedLaplacian(g, mid).pinv_apply(rho1 - rho0))
    end, S = _shoot_with_sensitivity(g, rho0, phi, B, opts)
    res = end - rho1
    rnorm = np.max(np.abs(res))
    for it in range(1, opts.max_newton + 1):
        if rnorm <= opts.tol:
            return phi, rnorm, it - 1
        c = np.linalg.lstsq(S, -res, rcond=None)[0]
        step = B @ c
        lam = 1.0
        for _ in range(opts.max_halvings):
            try:
                cand = phi + lam * step
                end_c, S_c = _shoot_with_sensitivity(g, rho0, cand, B, opts)
                res_c = end_c - rho1
                r_c = np.max(np.abs(res_c))
                if r_c < rnorm or r_c <= opts.tol:
                    break
            except BoundaryExitError:
                pass
            lam *= 0.5
        else:
            raise ConvergenceError("shooting line search exhausted", float(rnorm))
        phi, res, rnorm, S = cand, res_c, r_c, S_c
    if rnorm <= opts.tol:
        return phi, rnorm, opts.max_newton
    raise ConvergenceError(f"shooting did not converge; residual {rnorm:.3e}", float(rnorm))


def _discrete_energy_grad(g, rho, dt):
    """Discrete energy and its gradient w.r.t. every grid density."""
    vel = np.diff(rho, axis=0) / dt
    mid = 0.5 * (rho[1:] + rho[:-1])
    E = 0.0
    grad = np.zeros_like(rho)
    for k in range(len(vel)):
        L = WeightedLaplacian(g, mid[k])
        phi = L.pinv_apply(vel[k])
        E += 0.5 * dt * float(vel[k] @ phi)
        dphi = g.incidence @ phi
        c = circ(g, dphi, dphi)
        grad[k + 1] += phi - 0.25 * dt * c
        grad[k] += -phi - 0.25 * dt * c
    return E, grad


def _direct_minimization(g, rho0, rho1, opts):
    K = opts.K
    dt = 1.0 / K
    n = g.n
    init = SimplexPath.linear(rho0, rho1, K).rho[1:-1]
    z0 = np.log(init).ravel()

    def unpack(z):
        z = z.reshape(K - 1, n)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        inner = e / e.sum(axis=1, keepdims=True)
        return np.vstack([rho0, inner, rho1]), inner

    def fun(z):
        rho, inner = unpack(z)
        E, G = _discrete_energy_grad(g, rho, dt)
        Gi = G[1:-1]
        # softmax chain rule: J^T G = rho * (G - <rho, G>)
        gz = inner * (Gi - np.sum(inner * Gi, axis=1, keepdims=True))
        return E, gz.ravel()

    out = minimize(fun, z0, jac=True, method="L-BFGS-B", options={"maxiter": 5000, "gtol": 1e-12, "ftol": 1e-15})
    rho, _ = unpack(out.x)
    E, G = _discrete_energy_grad(g, rho, dt)
    t = np.linspace(0.0, 1.0, K + 1)
    vel = np.gradient(rho, t, axis=0)
    gres = float(np.max(np.abs(G[1:-1] - G[1:-1].mean(axis=1, keepdims=True))))
    return float(np.sqrt(2.0 * E)), SimplexPath(t, rho, vel), gres, int(out.nit)


def wasserstein_distance(g: Graph, rho0, rho1, opts: DistanceOptions | None = None) -> DistanceResult:
    """Distance and constant-speed geodesic between two interior densities.

    Single shooting with Newton on ``Phi_0`` over the dual Hamiltonian system;
    if shooting fails and ``opts.fallback`` is set, the discretized action is
    minimized directly.
    """
    opts = opts or DistanceOptions()
    rho0 = validate_density(g, rho0, opts.eps_interior)
    rho1 = validate_density(g, rho1, opts.eps_interior)
    t = np.linspace(0.0, 1.0, opts.K + 1)
    if np.array_equal(rho0, rho1):
        path = SimplexPath(t, np.tile(rho0, (len(t), 1)), np.zeros((len(t), g.n)), np.zeros((len(t), g.n)))
        return DistanceResult(0.0, path, "trivial", 0.0, 0, np.zeros(g.n))
    try:
        phi0, resid, its = _shooting(g, rho0, rho1, opts)
    except (ConvergenceError, BoundaryExitError) as exc:
        if not opts.fallback:
            raise
        log.warning("shooting failed (%s); falling back to direct minimization", exc)
        W, path, gres, its = _direct_minimization(g, rho0, rho1, opts)
        return DistanceResult(W, path, "direct", gres, its)
    sol = shoot(g, rho0, phi0, 1.0, t, rtol=opts.rtol, atol=opts.atol, eps=opts.eps_interior)
    rho = sol.y[: g.n].T
    phi = sol.y[g.n :].T
    vel = np.array([laplacian_apply(g, r, p) for r, p in zip(rho, phi)])
    W = float(np.sqrt(metric_dual(g, rho0, phi0, phi0)))
    return DistanceResult(W, SimplexPath(t, rho, vel, phi), "shooting", float(resid), its, phi0)
