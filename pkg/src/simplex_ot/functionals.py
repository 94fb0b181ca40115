"""Differentiable functionals on the simplex with exact first and second differentials."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import BoundaryError
from .graph import Graph
from .laplacian import WeightedLaplacian, log_pi, logdet_gradient

FD_STEP_GRAD = 1e-6
FD_STEP_HESS = 1e-6
GRAD_RTOL = 1e-5
HESS_RTOL = 1e-4


@dataclass(frozen=True)
class Functional:
    """``F(rho)`` with callbacks for the value, ``d_rho F`` and ``d2_rho F``.

    The differentials are ambient: they are partial derivatives in all ``n``
    vertex coordinates, so e.g. entropy's gradient keeps the ``+1`` term.
    Anything that consumes them projects through ``L(rho)``, which kills
    constants.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __call__(self, rho) -> float:
        return float(self.value(np.asarray(rho, dtype=float)))

    def __add__(self, other: "Functional") -> "Functional":
        if not isinstance(other, Functional):
            return NotImplemented
        return Functional(
            lambda r: self.value(r) + other.value(r),
            lambda r: self.gradient(r) + other.gradient(r),
            lambda r: self.hessian(r) + other.hessian(r),
            f"({self.name} + {other.name})",
        )

    def __mul__(self, c: float) -> "Functional":
        c = float(c)
        return Functional(
            lambda r: c * self.value(r),
            lambda r: c * self.gradient(r),
            lambda r: c * self.hessian(r),
            f"{c!r}*{self.name}",
        )

    __rmul__ = __mul__


def zero(n: int) -> Functional:
    return Functional(lambda r: 0.0, lambda r: np.zeros(np.shape(r)), lambda r: np.zeros((n, n)), "zero")


def linear_potential(V) -> Functional:
    V = np.array(V, dtype=float)
    V.setflags(write=False)
    n = V.size
    return Functional(
        lambda r: float(V @ r), lambda r: np.broadcast_to(V, np.shape(r)).copy(), lambda r: np.zeros((n, n)), "linear"
    )


def _positive(r):
    r = np.asarray(r, dtype=float)
    if not r.min() > 0:
        k = int(np.argmin(r))
        raise BoundaryError("entropy evaluated outside the open orthant", float(r[k]), k)
    return r


def entropy() -> Functional:
    """``sum rho log rho``; gradient ``log rho + 1``, Hessian ``diag(1/rho)``."""
    return Functional(
        lambda r: float(np.sum(_positive(r) * np.log(r))),
        lambda r: np.log(_positive(r)) + 1.0,
        lambda r: np.diag(1.0 / _positive(r)),
        "entropy",
    )


def relative_entropy(V, beta: float) -> Functional:
    """Free energy ``sum rho V + beta sum rho log rho``; minimizer ``softmax(-V/beta)``."""
    V = np.array(V, dtype=float)
    V.setflags(write=False)
    b = float(beta)
    return Functional(
        lambda r: float(V @ r + b * np.sum(_positive(r) * np.log(r))),
        lambda r: V + b * (np.log(_positive(r)) + 1.0),
        lambda r: np.diag(b / _positive(r)),
        f"relative(beta={b!r})",
    )


def quadratic(W) -> Functional:
    """``1/2 rho^T W rho`` for symmetric ``W``."""
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("quadratic functional needs a square matrix")
    if not np.allclose(W, W.T, rtol=0, atol=1e-12 * max(1.0, np.abs(W).max())):
        raise ValueError("quadratic functional needs a symmetric matrix")
    W = 0.5 * (W + W.T)
    W.setflags(write=False)
    return Functional(lambda r: 0.5 * float(r @ W @ r), lambda r: np.asarray(r) @ W, lambda r: W.copy(), "quadratic")


def log_pi_functional(g: Graph) -> Functional:
    """``log Pi(rho)`` with gradient ``tr(L^+ L(e_k))`` and Hessian ``-A^T (R o R) A``.

    ``R = D L^+ D^T`` and ``o`` is the entrywise product; this follows from
    ``d(L^+) = -L^+ L(dr) L^+`` and the linearity of ``L``.
    """

    def hess(r):
        P = WeightedLaplacian(g, r).pinv()
        R = g.incidence @ P @ g.incidence.T
        return -(g.averaging.T @ (R * R) @ g.averaging)

    return Functional(lambda r: log_pi(g, r), lambda r: logdet_gradient(g, r), hess, "logPi")


def gibbs_minimizer(V, beta: float) -> np.ndarray:
    z = -np.asarray(V, dtype=float) / beta
    z = np.exp(z - z.max())
    return z / z.sum()


# -- finite-difference self checks ---------------------------------------------


@dataclass
class FDReport:
    grad_error: float
    hess_error: float
    symmetry_error: float

    @property
    def ok(self) -> bool:
        return self.grad_error <= GRAD_RTOL and self.hess_error <= HESS_RTOL and self.symmetry_error <= 1e-12


def _rel(a, b):
    scale = max(np.max(np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b)) / scale)


def check_functional(F: Functional, rho, h_grad: float = FD_STEP_GRAD, h_hess: float = FD_STEP_HESS) -> FDReport:
    """Compare the differentials against central differences at ``rho``.

    Errors are relative to ``max(|exact|, 1)``.  Steps are taken along the
    coordinate axes, so ``rho`` must have room ``h`` to every face.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    fd_g = np.empty(n)
    fd_H = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h_grad
        fd_g[k] = (F.value(rho + e) - F.value(rho - e)) / (2 * h_grad)
        e[k] = h_hess
        fd_H[:, k] = (F.gradient(rho + e) - F.gradient(rho - e)) / (2 * h_hess)
    H = np.asarray(F.hessian(rho))
    return FDReport(_rel(np.asarray(F.gradient(rho)), fd_g), _rel(H, fd_H), float(np.max(np.abs(H - H.T))))


def custom(value, gradient, hessian, rng=None, n: int | None = None, samples: int = 5, name="custom") -> Functional:
    """Register a user functional; its differentials are FD-checked once here.

    ``n`` (the dimension) is required for the check; pass ``n=None`` to skip it.
    """
    F = Functional(value, gradient, hessian, name)
    if n is not None:
        rng = rng or np.random.default_rng(0)
        for _ in range(samples):
            rho = rng.dirichlet(np.full(n, 3.0))
            rho = 0.9 * rho + 0.1 / n
            rep = check_functional(F, rho)
            if not rep.ok:
                raise ValueError(f"functional {name!r} failed its finite-difference check: {rep}")
    return F


# -- CLI spec strings ------------------------------------------------------------


def _load_array(path: str, base: Path | None) -> np.ndarray:
    p = Path(path)
    if base is not None and not p.is_absolute():
        p = base / p
    return np.asarray(json.loads(p.read_text()), dtype=float)


def parse_functional(spec: str, n: int, base: Path | None = None) -> Functional:
    """``linear:V.json | entropy | relative:V.json,beta | quadratic:W.json | zero``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "zero":
        return zero(n)
    if kind == "entropy":
        return entropy()
    if kind == "linear":
        V = _load_array(arg, base)
    elif kind == "relative":
        path, _, beta = arg.rpartition(",")
        if not path:
            raise ValueError("relative functional needs 'relative:V.json,beta'")
        V = _load_array(path, base)
        _check_len(V, n, spec)
        return relative_entropy(V, float(beta))
    elif kind == "quadratic":
        W = _load_array(arg, base)
        if W.shape != (n, n):
            raise ValueError(f"{spec}: matrix must be {n}x{n}")
        return quadratic(W)
    else:
        raise ValueError(f"unknown functional {spec!r}")
    _check_len(V, n, spec)
    return linear_potential(V)


def _check_len(V, n, spec):
    if V.shape != (n,):
        raise ValueError(f"{spec}: potential must have length {n}")
