"""Discrete vector calculus on a graph.

Edge fields carry one value per stored edge ``(i, j)``, ``i > j``; node fields
one value per vertex.  Potentials are compared through their mean-zero
representative.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph, check_interior
from .laplacian import WeightedLaplacian, edge_weights


def normalize_potential(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return phi - phi.mean(axis=-1, keepdims=True)


def grad(g: Graph, phi) -> np.ndarray:
    """``(grad phi)_ij = sqrt(w_ij) (phi_i - phi_j)``."""
    phi = np.asarray(phi, dtype=float)
    return g.sqrt_weights * (phi[..., g.heads] - phi[..., g.tails])


def div(g: Graph, m) -> np.ndarray:
    """Graph divergence ``-D^T m``; the negative adjoint of :func:`grad`."""
    return -(np.asarray(m, dtype=float) @ g.incidence)


def flux(g: Graph, rho, v) -> np.ndarray:
    """Probability flux ``m_ij = v_ij (rho_i + rho_j) / 2``."""
    return edge_weights(g, rho) * np.asarray(v, dtype=float)


def inner_rho(g: Graph, rho, v, w) -> float:
    return float(np.sum(edge_weights(g, rho) * np.asarray(v) * np.asarray(w)))


def circ(g: Graph, v, w) -> np.ndarray:
    """Nodewise half-sum of incident edge products, ``(v o w)_i = 1/2 sum_j v_ij w_ij``."""
    return (np.asarray(v, dtype=float) * np.asarray(w, dtype=float)) @ g.averaging


def hodge_decompose(g: Graph, rho, v, L: WeightedLaplacian | None = None):
    """Split ``v = grad(phi) + psi`` with ``div(rho psi) = 0``.

    Returns the mean-zero potential ``phi`` and the divergence-free part ``psi``.
    """
    v = np.asarray(v, dtype=float)
    rho = np.asarray(rho, dtype=float)
    check_interior(rho)
    if L is None:
        L = WeightedLaplacian(g, rho)
    phi = L.pinv_apply(-div(g, flux(g, rho, v)))
    phi = normalize_potential(phi)
    psi = v - grad(g, phi)
    return phi, psi
