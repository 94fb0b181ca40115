"""Linear weighted Laplacian ``L(a) = D^T diag(theta(a)) D`` and its spectral data."""

from __future__ import annotations

import threading

import numpy as np

from .errors import SpectralError
from .graph import Graph

KERNEL_RTOL = 1e-12


def edge_weights(g: Graph, a) -> np.ndarray:
    """``theta_ij = (a_i + a_j) / 2`` in stored edge order."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a[..., g.heads] + a[..., g.tails])


def laplacian_matrix(g: Graph, a) -> np.ndarray:
    """Dense ``L(a)``.  Linear in ``a``; ``a`` may be any vertex vector."""
    theta = edge_weights(g, a)
    D = g.incidence
    return D.T @ (theta[:, None] * D)


def laplacian_apply(g: Graph, a, x) -> np.ndarray:
    """``L(a) x`` without forming the matrix."""
    D = g.incidence
    return D.T @ (edge_weights(g, a) * (D @ x))


class WeightedLaplacian:
    """``L(a)`` with a lazily computed, thread-safe spectral cache.

    Spectral methods require ``a`` to be strictly positive (an interior density
    or a positive measure); otherwise the kernel need not be one-dimensional
    and :class:`SpectralError` is raised.
    """

    def __init__(self, g: Graph, a):
        self.graph = g
        self.a = np.array(a, dtype=float)
        self.a.setflags(write=False)
        self.matrix = laplacian_matrix(g, self.a)
        self.matrix.setflags(write=False)
        self._lock = threading.Lock()
        self._spec: tuple[np.ndarray, np.ndarray] | None = None
        self._pinv: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and orthonormal eigenvectors (columns).

        The kernel eigenpair is replaced by ``(0, 1/sqrt(n))`` exactly.
        """
        if self._spec is None:
            with self._lock:
                if self._spec is None:
                    self._spec = _spectrum(self.matrix)
        return self._spec

    def pinv(self) -> np.ndarray:
        if self._pinv is None:
            lam, U = self.spectrum()
            V = U[:, 1:]
            P = (V / lam[1:]) @ V.T
            P = 0.5 * (P + P.T)
            P.setflags(write=False)
            self._pinv = P
        return self._pinv

    def pinv_apply(self, x) -> np.ndarray:
        lam, U = self.spectrum()
        V = U[:, 1:]
        return V @ ((V.T @ np.asarray(x, dtype=float)) / lam[1:])

    def sqrt_apply(self, x) -> np.ndarray:
        lam, U = self.spectrum()
        V = U[:, 1:]
        return V @ (np.sqrt(lam[1:]) * (V.T @ np.asarray(x, dtype=float)))

    def sqrt_matrix(self) -> np.ndarray:
        lam, U = self.spectrum()
        V = U[:, 1:]
        return (V * np.sqrt(lam[1:])) @ V.T

    def log_pi(self) -> float:
        """``log Pi = sum_{i>=1} log lambda_i``."""
        lam, _ = self.spectrum()
        return float(np.sum(np.log(lam[1:])))

    def volume_density(self) -> float:
        """Riemannian volume density ``Pi^{-1/2}`` relative to Euclidean volume."""
        return float(np.exp(-0.5 * self.log_pi()))


def _spectrum(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = L.shape[0]
    lam, U = np.linalg.eigh(L)
    lam_max = lam[-1]
    small = np.abs(lam) <= KERNEL_RTOL * lam_max
    if lam_max <= 0 or small.sum() != 1 or not small[0]:
        raise SpectralError(
            f"expected exactly one kernel eigenvalue, found {int(small.sum())} "
            f"(lambda_0={lam[0]:.3e}, lambda_1={lam[1]:.3e}, lambda_max={lam_max:.3e}); "
            "graph disconnected or density on the boundary"
        )
    u0 = np.full(n, 1.0 / np.sqrt(n))
    V = U[:, 1:]
    V = V - np.outer(u0, u0 @ V)
    U = np.column_stack([u0, V])
    lam = lam.copy()
    lam[0] = 0.0
    lam.setflags(write=False)
    U.setflags(write=False)
    return lam, U


def build_laplacian(g: Graph, a) -> WeightedLaplacian:
    return WeightedLaplacian(g, a)


def spectrum(L: WeightedLaplacian) -> tuple[np.ndarray, np.ndarray]:
    return L.spectrum()


def pinv_apply(L: WeightedLaplacian, x) -> np.ndarray:
    return L.pinv_apply(x)


def sqrt_apply(L: WeightedLaplacian, x) -> np.ndarray:
    return L.sqrt_apply(x)


def volume_density(L: WeightedLaplacian) -> float:
    return L.volume_density()


def log_pi(g: Graph, rho) -> float:
    return WeightedLaplacian(g, rho).log_pi()


def logdet_gradient(g: Graph, rho, L: WeightedLaplacian | None = None) -> np.ndarray:
    """``d_rho log Pi``; component ``k`` is ``tr(L(rho)^+ L(e_k))``.

    Since ``L`` is linear, ``tr(L^+ L(e_k)) = sum_e A_ek (D L^+ D^T)_ee``, i.e. the
    edge-averaged effective resistances.
    """
    if L is None:
        L = WeightedLaplacian(g, rho)
    P = L.pinv()
    i, j = g.heads, g.tails
    resist = g.weights * (P[i, i] + P[j, j] - 2.0 * P[i, j])
    return g.averaging.T @ resist


# -- batched kernels (leading axis indexes independent densities) -------------


def batched_laplacian(g: Graph, rhos: np.ndarray) -> np.ndarray:
    theta = edge_weights(g, rhos)
    D = g.incidence
    return np.einsum("ei,ke,ej->kij", D, theta, D, optimize=True)


def batched_spd_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse of a stack of small SPD matrices by vectorized Gauss-Jordan.

    ``np.linalg.inv`` dispatches one LAPACK call per matrix, which dominates
    for 10^5 tiny systems.  Here the stack index is moved last so every
    elimination step is a contiguous array op over the whole stack.  No
    pivoting: only valid for SPD input.
    """
    k, n, _ = M.shape
    aug = np.zeros((n, 2 * n, k))
    aug[:, :n] = np.moveaxis(M, 0, -1)
    for i in range(n):
        aug[i, n + i] = 1.0
    for c in range(n):
        aug[c] /= aug[c, c]
        for r in range(n):
            if r != c:
                aug[r] -= aug[r, c] * aug[c]
    return np.ascontiguousarray(np.moveaxis(aug[:, n:], -1, 0))


def batched_pinv(g: Graph, rhos: np.ndarray, Ls: np.ndarray | None = None) -> np.ndarray:
    """``L(rho)^+`` for a stack of interior densities via ``(L + J/n)^{-1} - J/n``."""
    if Ls is None:
        Ls = batched_laplacian(g, rhos)
    J = np.full((g.n, g.n), 1.0 / g.n)
    return batched_spd_inverse(Ls + J) - J


def batched_logdet_gradient(g: Graph, P: np.ndarray) -> np.ndarray:
    i, j = g.heads, g.tails
    resist = g.weights * (P[:, i, i] + P[:, j, j] - 2.0 * P[:, i, j])
    return resist @ g.averaging


def batched_logdet_gradient_of(g: Graph, rhos: np.ndarray) -> np.ndarray:
    """``d_rho log Pi`` for a stack ``(k, n)`` of densities, stack index kept last.

    Same computation as :func:`batched_pinv` + :func:`batched_logdet_gradient`
    but without materializing ``(k, n, n)`` intermediates.
    """
    n = g.n
    theta = edge_weights(g, rhos).T * g.weights[:, None]  # (E, k)
    k = rhos.shape[0]
    aug = np.zeros((n, 2 * n, k))
    aug[:, :n] = 1.0 / n
    for e, (i, j) in enumerate(g.edges):
        aug[i, i] += theta[e]
        aug[j, j] += theta[e]
        aug[i, j] -= theta[e]
        aug[j, i] -= theta[e]
    for i in range(n):
        aug[i, n + i] = 1.0
    for c in range(n):
        aug[c] /= aug[c, c]
        for r in range(n):
            if r != c:
                aug[r] -= aug[r, c] * aug[c]
    P = aug[:, n:]  # J/n cancels in the resistance differences
    out = np.zeros((k, n))
    for e, (i, j) in enumerate(g.edges):
        r = g.weights[e] * (P[i, i] + P[j, j] - 2.0 * P[i, j])
        out[:, i] += 0.5 * r
        out[:, j] += 0.5 * r
    return out
