"""Dual (rho, Phi) Hamiltonian system shared by shooting, geodesics and flows.

    rho' =  dH/dPhi = L(rho) Phi
    Phi' = -dH/drho = -1/2 grad(Phi) o grad(Phi) - d_rho F(rho)

with ``H = 1/2 (grad Phi, grad Phi)_rho + F(rho)``.  ``F = None`` means ``F = 0``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError
from .graph import Graph
from .laplacian import edge_weights


def energy(g: Graph, rho, phi, F=None) -> float:
    dphi = g.incidence @ phi
    h = 0.5 * float(np.sum(edge_weights(g, rho) * dphi * dphi))
    if F is not None:
        h += F.value(rho)
    return h


def vector_field(g: Graph, rho, phi, F=None) -> tuple[np.ndarray, np.ndarray]:
    D, A = g.incidence, g.averaging
    dphi = D @ phi
    rho_dot = D.T @ (edge_weights(g, rho) * dphi)
    phi_dot = -0.5 * (A.T @ (dphi * dphi))
    if F is not None:
        phi_dot = phi_dot - F.gradient(rho)
    return rho_dot, phi_dot


def jacobian(g: Graph, rho, phi, F=None) -> np.ndarray:
    """Jacobian of :func:`vector_field` w.r.t. the stacked state ``(rho, Phi)``."""
    n = g.n
    D, A = g.incidence, g.averaging
    dphi = D @ phi
    M = D.T @ (dphi[:, None] * A)
    J = np.empty((2 * n, 2 * n))
    J[:n, :n] = M
    J[:n, n:] = D.T @ (edge_weights(g, rho)[:, None] * D)
    J[n:, n:] = -M.T
    J[n:, :n] = 0.0 if F is None else -F.hessian(rho)
    return J


def rhs(g: Graph, F=None):
    n = g.n

    def f(t, y):
        a, b = vector_field(g, y[:n], y[n:], F)
        return np.concatenate([a, b])

    return f


def sensitivity_rhs(g: Graph, ncols: int):
    """State plus forward sensitivities ``S' = J S`` (``F = 0``), flattened."""
    n = g.n

    def f(t, y):
        rho, phi = y[:n], y[n : 2 * n]
        S = y[2 * n :].reshape(2 * n, ncols)
        a, b = vector_field(g, rho, phi)
        return np.concatenate([a, b, (jacobian(g, rho, phi) @ S).ravel()])

    return f


def implicit_midpoint_step(g: Graph, rho, phi, dt: float, F=None, tol=1e-13, max_iter=50):
    """One implicit-midpoint step solved by Newton's method."""
    n = g.n
    y0 = np.concatenate([rho, phi])
    a, b = vector_field(g, rho, phi, F)
    z = y0 + dt * np.concatenate([a, b])
    eye = np.eye(2 * n)
    for _ in range(max_iter):
        mid = 0.5 * (y0 + z)
        a, b = vector_field(g, mid[:n], mid[n:], F)
        G = z - y0 - dt * np.concatenate([a, b])
        JG = eye - 0.5 * dt * jacobian(g, mid[:n], mid[n:], F)
        delta = np.linalg.solve(JG, G)
        z = z - delta
        if np.max(np.abs(delta)) <= tol * (1.0 + np.max(np.abs(z))):
            return z[:n], z[n:]
    raise ConvergenceError("implicit midpoint Newton iteration did not converge", float(np.max(np.abs(delta))))
