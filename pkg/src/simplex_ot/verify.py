"""Randomized property suite shared by the ``verify`` subcommand and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import calculus, geometry, metric, oracles
from .functionals import check_functional, entropy, linear_potential, log_pi_functional, quadratic
from .graph import Graph, random_connected_graph, random_density, random_tangent
from .laplacian import KERNEL_RTOL, WeightedLaplacian, logdet_gradient


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    trials: int

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<34s} worst={self.worst:.3e}  tol={self.tol:.1e}  trials={self.trials}"


@dataclass
class SuiteReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [
            {"name": c.name, "worst": c.worst, "tol": c.tol, "trials": c.trials, "passed": c.passed} for c in self.checks
        ]}


def _rel(a, b, floor: float = 1e-300) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.max(np.abs(a)), floor))


def _conn_scale(g, rho, s1, s2) -> float:
    # size of the individual terms; guards flat cases where the result cancels to zero
    P = WeightedLaplacian(g, rho).pinv()
    return float(np.max(np.abs(P)) * np.max(np.abs(s1)) * np.max(np.abs(s2)) * np.max(g.weights))


# each check: (rng, g, rho) -> error


def check_spectrum(rng, g, rho):
    L = WeightedLaplacian(g, rho)
    lam, U = L.spectrum()
    raw, vecs = np.linalg.eigh(L.matrix)
    small = int(np.sum(np.abs(raw) <= KERNEL_RTOL * raw[-1]))
    align = 1.0 - abs(vecs[:, 0] @ U[:, 0])
    return max(abs(small - 1), align, float(lam[1] <= 0))


def check_pinv(rng, g, rho):
    L = WeightedLaplacian(g, rho)
    x = rng.normal(size=g.n)
    Lx = L.matrix @ x
    e1 = _rel(L.matrix @ L.pinv_apply(Lx), Lx)
    Px = L.pinv_apply(x)
    e2 = _rel(L.pinv_apply(L.matrix @ Px), Px)
    return max(e1, e2)


def check_hodge(rng, g, rho):
    v = rng.normal(size=g.num_edges)
    phi, psi = calculus.hodge_decompose(g, rho, v)
    s = np.max(np.abs(v))
    recon = np.max(np.abs(calculus.grad(g, phi) + psi - v)) / s
    divfree = np.max(np.abs(calculus.div(g, calculus.flux(g, rho, psi)))) / s
    gp = calculus.grad(g, phi)
    pyth = abs(calculus.inner_rho(g, rho, v, v) - calculus.inner_rho(g, rho, gp, gp) - calculus.inner_rho(g, rho, psi, psi)) / s**2
    return max(recon, divfree, pyth)


def check_primal_dual(rng, g, rho):
    phi = rng.normal(size=g.n)
    sig = metric.tangent_of_potential(g, rho, phi)
    a = metric.metric_primal(g, rho, sig, sig)
    b = metric.metric_dual(g, rho, phi, phi)
    return abs(a - b) / max(abs(b), 1e-300)


def check_adjoint(rng, g, rho):
    phi = rng.normal(size=g.n)
    m = rng.normal(size=g.num_edges)
    a = phi @ (-calculus.div(g, m))
    b = calculus.grad(g, phi) @ m
    return abs(a - b) / max(1.0, abs(b))


def check_christoffel(rng, g, rho):
    s1, s2 = random_tangent(rng, g.n), random_tangent(rng, g.n)
    G = geometry.christoffel_all(g, rho)
    c = geometry.connection(g, rho, s1, s2)
    return _rel(np.einsum("kij,i,j->k", G, s1, s2), c, _conn_scale(g, rho, s1, s2))


def check_connection_oracle(rng, g, rho):
    s1, s2 = random_tangent(rng, g.n), random_tangent(rng, g.n)
    return _rel(geometry.connection(g, rho, s1, s2), oracles.connection_oracle(g, rho, s1, s2),
                _conn_scale(g, rho, s1, s2))


def check_curvature_symmetries(rng, g, rho):
    s = [random_tangent(rng, g.n) for _ in range(4)]
    L = WeightedLaplacian(g, rho)
    R = lambda a, b, c, d: geometry.curvature(g, rho, a, b, c, d, L)  # noqa: E731
    r = R(*s)
    vals = [
        r + R(s[1], s[0], s[2], s[3]),
        r + R(s[0], s[1], s[3], s[2]),
        r - R(s[2], s[3], s[0], s[1]),
        r + R(s[1], s[2], s[0], s[3]) + R(s[2], s[0], s[1], s[3]),
    ]
    scale = max(abs(r), np.max([abs(R(s[1], s[2], s[0], s[3])), abs(R(s[2], s[0], s[1], s[3]))]), 1e-12)
    return float(np.max(np.abs(vals)) / scale)


def check_logdet(rng, g, rho):
    return _rel(logdet_gradient(g, rho), oracles.log_pi_gradient_fd(g, rho))


def check_laplace_beltrami(rng, g, rho):
    X = geometry.spectral_frame(g, rho)
    W = rng.normal(size=(g.n, g.n))
    errs = []
    for F in (entropy(), linear_potential(rng.normal(size=g.n)), quadratic(W + W.T)):
        lb = geometry.laplace_beltrami(g, rho, F)
        s = sum(geometry.hessian_w(g, rho, F, x, x) for x in X.T)
        errs.append(abs(lb - s) / max(1.0, abs(lb)))
    return max(errs)


def check_functionals(rng, g, rho):
    W = rng.normal(size=(g.n, g.n))
    worst = 0.0
    for F in (entropy(), linear_potential(rng.normal(size=g.n)), quadratic(W + W.T), log_pi_functional(g)):
        rep = check_functional(F, rho)
        worst = max(worst, rep.grad_error / 1e-5, rep.hess_error / 1e-4)
    return worst


CHECKS: list[tuple[str, Callable, float, int]] = [
    # name, function, tolerance, max n (0 = any)
    ("spectrum: single kernel, u0 aligned", check_spectrum, 1e-8, 0),
    ("pinv: L L+ L = L, L+ L L+ = L+", check_pinv, 1e-10, 0),
    ("hodge: recon/div-free/pythagoras", check_hodge, 1e-10, 0),
    ("metric: primal = dual", check_primal_dual, 1e-10, 0),
    ("calculus: grad/div adjoint", check_adjoint, 1e-12, 0),
    ("christoffel contraction", check_christoffel, 1e-8, 0),
    ("connection vs chart Koszul", check_connection_oracle, 1e-5, 5),
    ("curvature symmetries + Bianchi", check_curvature_symmetries, 1e-8, 0),
    ("logdet gradient vs FD", check_logdet, 1e-6, 0),
    ("laplace-beltrami = sum Hess", check_laplace_beltrami, 1e-8, 0),
    ("functionals FD (ratio to tol)", check_functionals, 1.0, 0),
]


def run_suite(graph: Graph | None = None, trials: int = 200, seed: int = 0, n_max: int = 8) -> SuiteReport:
    """Run every check ``trials`` times on ``graph`` (or on fresh random graphs)."""
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    for name, fn, tol, cap in CHECKS:
        worst, done = 0.0, 0
        for _ in range(trials):
            if graph is None:
                hi = n_max if cap == 0 else min(n_max, cap)
                g = random_connected_graph(rng, int(rng.integers(2, hi + 1)))
            else:
                g = graph
                if cap and g.n > cap:
                    break
            rho = random_density(rng, g.n)
            if g.n == 2 and fn is check_curvature_symmetries:
                continue  # curvature vanishes identically
            worst = max(worst, float(fn(rng, g, rho)))
            done += 1
        report.checks.append(CheckResult(name, worst, tol, done))
    return report
