"""Gradient flow, Hamiltonian flow, drift-diffusion sampling and the 1-D Fokker-Planck solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid
from scipy.linalg import solve_banded

from . import hamiltonian
from .errors import BoundaryError, BoundaryExitError, ConvergenceError, SimplexOTError
from .graph import EPS_INTERIOR, Graph, check_interior
from .laplacian import (
    WeightedLaplacian,
    batched_logdet_gradient_of,
    edge_weights,
    laplacian_apply,
    log_pi,
)

log = logging.getLogger(__name__)


class GridError(SimplexOTError):
    """FPE grid is too coarse for the requested time step."""


@dataclass
class Trajectory:
    t: np.ndarray
    rho: np.ndarray
    phi: np.ndarray | None = None
    F: np.ndarray | None = None
    H: np.ndarray | None = None
    speed: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def columns(self) -> tuple[list[str], np.ndarray]:
        """Long table ``t, rho_1..rho_n, [phi_1..phi_n], diagnostics``."""
        n = self.rho.shape[1]
        names = ["t"] + [f"rho_{i + 1}" for i in range(n)]
        cols = [self.t[:, None], self.rho]
        if self.phi is not None:
            names += [f"phi_{i + 1}" for i in range(n)]
            cols.append(self.phi)
        for name in ("F", "H", "speed"):
            v = getattr(self, name)
            if v is not None:
                names.append(name)
                cols.append(np.asarray(v)[:, None])
        return names, np.hstack(cols)


# -- gradient flow ------------------------------------------------------------


def _gf_rhs(g, F, rho, dF=None):
    D = g.incidence
    return (g.averaging @ rho * (D @ (F.gradient(rho) if dF is None else dF))) @ -D


def _rk4(g, F, rho, h, k1):
    Dn, A, grad = -g.incidence, g.averaging, F.gradient
    D = g.incidence
    r = rho + 0.5 * h * k1
    k2 = (A @ r * (D @ grad(r))) @ Dn
    r = rho + 0.5 * h * k2
    k3 = (A @ r * (D @ grad(r))) @ Dn
    r = rho + h * k3
    k4 = (A @ r * (D @ grad(r))) @ Dn
    return rho + (h / 6.0) * (k1 + 2 * (k2 + k3) + k4)


def _semi_implicit(g, F, rho, h, k1=None):
    L = WeightedLaplacian(g, rho).matrix
    M = np.eye(g.n) + h * (L @ F.hessian(rho))
    return rho + np.linalg.solve(M, -h * (L @ F.gradient(rho)))


def gradient_flow(g: Graph, rho0, F, T: float, dt: float, *, semi_implicit: bool = False,
                  max_halvings: int = 30, eps: float = EPS_INTERIOR) -> Trajectory:
    """Integrate ``rho' = -L(rho) d_rho F`` and record on the grid ``k dt``.

    Each nominal step is covered by substeps of RK4 (or linearly implicit
    Euler when ``semi_implicit``).  A substep is rejected and halved when it
    leaves the interior or raises ``F``; growth back to ``dt`` follows
    success.  A substep below ``dt / 2**max_halvings`` that still fails ends
    the run with :class:`BoundaryExitError`.  Equal values up to a few ulps count as non-increase.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rho = np.asarray(rho0, dtype=float).copy()
    check_interior(rho, eps)
    stepper = _semi_implicit if semi_implicit else _rk4
    nsteps = int(round(T / dt))
    t = np.arange(nsteps + 1) * dt
    out = np.empty((nsteps + 1, g.n))
    Fv = np.empty(nsteps + 1)
    speed = np.empty(nsteps + 1)
    out[0], Fv[0] = rho, F.value(rho)
    rejected = 0
    h = dt
    h_min = dt / 2.0**max_halvings
    tol = 4 * np.finfo(float).eps
    f_old = Fv[0]
    dF = F.gradient(rho)
    k1 = _gf_rhs(g, F, rho, dF)
    speed[0] = -float(dF @ k1)
    for k in range(nsteps):
        remaining = dt
        f_ref = f_old
        while remaining > 1e-15 * dt:
            step = min(h, remaining)
            try:
                cand = stepper(g, F, rho, step, k1)
                ok = bool(cand.min() >= eps)
            except BoundaryError:  # an intermediate stage left the orthant
                cand, ok = None, False
            if ok:
                cand = cand - (cand.sum() - 1.0) / g.n
                f_new = F.value(cand)
                ok = f_new <= f_ref + tol * max(1.0, abs(f_ref))
            if not ok and cand is not None and cand.min() >= eps and np.max(np.abs(cand - rho)) <= 16 * np.finfo(float).eps:
                # motion below rounding: F differences are noise, hold the state
                remaining -= step
                continue
            if not ok:
                rejected += 1
                h = step / 2
                if h < h_min:
                    raise BoundaryExitError(f"gradient flow step halving exhausted at t = {t[k] + dt - remaining:.6g}",
                                            float(t[k] + dt - remaining))
                continue
            rho = cand
            f_old = f_new
            remaining -= step
            h = min(dt, 2 * step)
            dF = F.gradient(rho)
            k1 = _gf_rhs(g, F, rho, dF)
        out[k + 1] = rho
        Fv[k + 1] = f_old
        speed[k + 1] = -float(dF @ k1)
    return Trajectory(t, out, F=Fv, speed=speed, info={"rejected_substeps": rejected})


# -- Hamiltonian flow ------------------------------------------------------------


def hamiltonian_flow(g: Graph, rho0, phi0, F, T: float, dt: float, *, method: str = "midpoint",
                     eps: float = EPS_INTERIOR, rtol: float = 1e-10, atol: float = 1e-12) -> Trajectory:
    """Integrate the dual system ``rho' = L(rho) Phi, Phi' = -1/2 grad Phi o grad Phi - dF``.

    ``method="midpoint"`` (default) is implicit midpoint with Newton solves;
    ``method="rk45"`` uses adaptive Runge-Kutta with output on the same grid.
    """
    rho = np.asarray(rho0, dtype=float)
    phi = np.asarray(phi0, dtype=float)
    check_interior(rho, eps)
    n = g.n
    nsteps = int(round(T / dt))
    t = np.arange(nsteps + 1) * dt
    R = np.empty((nsteps + 1, n))
    P = np.empty((nsteps + 1, n))
    if method == "midpoint":
        R[0], P[0] = rho, phi
        for k in range(nsteps):
            rho, phi = hamiltonian.implicit_midpoint_step(g, rho, phi, dt, F)
            if np.min(rho) < eps:
                raise BoundaryExitError(f"Hamiltonian flow left the interior at t = {t[k + 1]:.6g}", float(t[k + 1]))
            R[k + 1], P[k + 1] = rho, phi
    elif method == "rk45":
        def ev(tt, y):
            return np.min(y[:n]) - eps

        ev.terminal, ev.direction = True, -1
        sol = solve_ivp(hamiltonian.rhs(g, F), (0.0, t[-1]), np.concatenate([rho, phi]), method="RK45",
                        t_eval=t, rtol=rtol, atol=atol, events=ev)
        if sol.status == 1:
            te = float(sol.t_events[0][0])
            raise BoundaryExitError(f"Hamiltonian flow left the interior at t = {te:.6g}", te)
        if sol.status != 0:
            raise ConvergenceError(sol.message)
        R, P = sol.y[:n].T, sol.y[n:].T
    else:
        raise ValueError(f"unknown method {method!r}")
    P = P - P.mean(axis=1, keepdims=True)
    H = np.array([hamiltonian.energy(g, r, p, F) for r, p in zip(R, P)])
    speed = np.array([float(p @ laplacian_apply(g, r, p)) for r, p in zip(R, P)])
    Fv = None if F is None else np.array([F.value(r) for r in R])
    return Trajectory(t, R, P, F=Fv, H=H, speed=speed, info={"method": method})


# -- drift-diffusion sampler -----------------------------------------------------

STATUS_OK = 0
STATUS_KILLED = 1


@dataclass
class SDEOptions:
    boundary: str = "reject"  # "reject": hold the state for the step; "halve": halve up to 10x then kill
    max_halvings: int = 10
    noise: str = "edge"  # "edge": D^T (sqrt(theta) * eta); "sqrt": L^{1/2} xi by eigendecomposition
    block_size: int = 1024
    record_every: int | None = None
    eps: float = EPS_INTERIOR


@dataclass
class SampleSet:
    final: np.ndarray
    status: np.ndarray
    rejections: np.ndarray
    kill_time: np.ndarray
    t: np.ndarray
    paths: np.ndarray | None
    seed: int
    dt: float
    options: SDEOptions

    @property
    def alive(self) -> np.ndarray:
        return self.status == STATUS_OK


class _BlockRNG:
    """One generator per block of chains, seeded by ``SeedSequence(seed, spawn_key=(b,))``."""

    def __init__(self, seed: int, chains: int, block: int):
        self.block = block
        self.bounds = [(s, min(s + block, chains)) for s in range(0, chains, block)]
        self.gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
                     for b in range(len(self.bounds))]

    def normal(self, width: int, rows: np.ndarray | None = None) -> np.ndarray:
        """Normals for all chains, or for the sorted subset ``rows``."""
        if rows is None:
            return np.concatenate([gen.standard_normal((hi - lo, width)) for gen, (lo, hi) in zip(self.gens, self.bounds)])
        out = np.empty((rows.size, width))
        blk = rows // self.block
        for b in np.unique(blk):
            sel = blk == b
            out[sel] = self.gens[b].standard_normal((int(sel.sum()), width))
        return out


def _rowmin(a: np.ndarray) -> np.ndarray:
    # column-wise reduction beats axis=1 for the short rows used here
    out = a[:, 0].copy()
    for j in range(1, a.shape[1]):
        np.minimum(out, a[:, j], out=out)
    return out


def _sde_drift(g, F, beta, rho):
    u = F.gradient(rho)
    if beta > 0:
        u = u + 0.5 * beta * batched_logdet_gradient_of(g, rho)
    flux = edge_weights(g, rho) * (u @ g.incidence.T)
    return -(flux @ g.incidence)


def _sde_noise(g, rho, xi, mode):
    if mode == "edge":
        return (np.sqrt(edge_weights(g, rho)) * xi) @ g.incidence
    if mode == "sqrt":
        from .laplacian import batched_laplacian

        lam, U = np.linalg.eigh(batched_laplacian(g, rho))
        lam = np.clip(lam, 0.0, None)
        lam[:, 0] = 0.0
        return np.einsum("kij,kj->ki", U * np.sqrt(lam)[:, None, :], np.einsum("kji,kj->ki", U, xi))
    raise ValueError(f"unknown noise mode {mode!r}")


def sde_sample(g: Graph, rho0, F, beta: float, T: float, dt: float, seed: int, chains: int,
               opts: SDEOptions | None = None) -> SampleSet:
    """Euler-Maruyama for ``d rho = -L(rho)(dF + beta/2 d log Pi) dt + sqrt(2 beta) L(rho)^{1/2} dB``.

    ``rho0`` is one density (broadcast to all chains) or an array
    ``(chains, n)``.  Outputs depend only on ``(seed, chains, dt, opts)``.
    """
    opts = opts or SDEOptions()
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = g.n
    rho = np.array(np.broadcast_to(np.asarray(rho0, dtype=float), (chains, n)))
    if chains:
        check_interior(rho.min(axis=0), opts.eps)
    width = n if opts.noise == "sqrt" else g.num_edges
    rng = _BlockRNG(seed, chains, opts.block_size)
    nsteps = int(round(T / dt))
    scale = np.sqrt(2.0 * beta)
    status = np.zeros(chains, dtype=np.int8)
    rejections = np.zeros(chains, dtype=np.int64)
    kill_time = np.full(chains, np.nan)
    rec = opts.record_every
    snaps_t, snaps = [0.0], [rho.copy()] if rec else None
    for k in range(nsteps):
        xi = rng.normal(width)
        prop = rho + dt * _sde_drift(g, F, beta, rho) + scale * np.sqrt(dt) * _sde_noise(g, rho, xi, opts.noise)
        alive = status == STATUS_OK
        bad = (_rowmin(prop) < opts.eps) & alive
        rho = np.where((alive & ~bad)[:, None], prop, rho)
        if bad.any():
            idx = np.nonzero(bad)[0]
            rejections[idx] += 1
            if opts.boundary == "halve":
                _halve_and_retry(g, F, beta, dt, scale, rho, idx, rng, width, opts, status, kill_time, (k + 1) * dt)
            elif opts.boundary != "reject":
                raise ValueError(f"unknown boundary policy {opts.boundary!r}")
        if rec and (k + 1) % rec == 0:
            snaps_t.append((k + 1) * dt)
            snaps.append(rho.copy())
    drift = np.abs(rho.sum(axis=1) - 1.0).max() if chains else 0.0
    if drift > 1e-9:
        log.warning("sampler mass drift %.3e", drift)
    rho -= (rho.sum(axis=1, keepdims=True) - 1.0) / n
    paths = np.stack(snaps) if rec else None
    return SampleSet(rho, status, rejections, kill_time, np.asarray(snaps_t) if rec else np.array([0.0, nsteps * dt]),
                     paths, seed, dt, opts)


def _halve_and_retry(g, F, beta, dt, scale, rho, idx, rng, width, opts, status, kill_time, t_end):
    """Cover the step ``dt`` with halved substeps for the chains in ``idx``; kill on exhaustion."""
    rem = np.full(idx.size, dt)
    h = np.full(idx.size, dt / 2)
    depth = np.ones(idx.size, dtype=int)
    act = np.ones(idx.size, dtype=bool)
    while act.any():
        sub = np.nonzero(act)[0]
        rows = idx[sub]
        hh = np.minimum(h[sub], rem[sub])
        xi = rng.normal(width, rows)
        r = rho[rows]
        prop = r + hh[:, None] * _sde_drift(g, F, beta, r) + (scale * np.sqrt(hh))[:, None] * _sde_noise(g, r, xi, opts.noise)
        ok = _rowmin(prop) >= opts.eps
        rho[rows[ok]] = prop[ok]
        rem[sub[ok]] -= hh[ok]
        fail = sub[~ok]
        h[fail] /= 2
        depth[fail] += 1
        dead = fail[depth[fail] > opts.max_halvings]
        status[idx[dead]] = STATUS_KILLED
        kill_time[idx[dead]] = t_end - rem[dead]
        act = (rem > 1e-15 * dt) & (status[idx] == STATUS_OK)


# -- Gibbs measure and the 1-D Fokker-Planck equation ----------------------------


def _two_point(g: Graph):
    if g.n != 2:
        raise ValueError("one-dimensional routines require a 2-vertex graph")


def _chart_factor(g: Graph, x) -> np.ndarray:
    """``d vol_W / d rho_1`` on the 2-vertex simplex."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    s = np.array([1.0, -1.0])
    for i, xi in enumerate(x):
        L = WeightedLaplacian(g, [xi, 1.0 - xi])
        out[i] = np.sqrt(float(s @ L.pinv_apply(s)))
    return out


def gibbs_density(g: Graph, F, beta: float, rho) -> float:
    """Unnormalized ``exp(-F(rho)/beta)``, a density with respect to ``dvol_W``."""
    rho = np.asarray(rho, dtype=float)
    check_interior(rho)
    return float(np.exp(-F.value(rho) / beta))


def _gibbs_log_lebesgue(g, F, beta, x):
    """Log of the Gibbs law as a density in ``rho_1`` (up to a constant)."""
    vals = np.array([-F.value(np.array([xi, 1.0 - xi])) / beta for xi in x])
    return vals + np.log(_chart_factor(g, x))


def gibbs_normalize_1d(g: Graph, F, beta: float, grid=2001, eps: float = EPS_INTERIOR):
    """Gibbs law on the 2-vertex simplex, as a density in ``rho_1`` on ``[eps, 1 - eps]``.

    ``grid`` is a point count or an increasing array of ``rho_1`` values.
    Returns ``(x, q, K)`` with ``trapezoid(q, x) = 1`` and ``K`` the
    normalizer of ``exp(-F/beta)`` against ``dvol_W``.
    """
    _two_point(g)
    x = np.linspace(eps, 1.0 - eps, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    lw = _gibbs_log_lebesgue(g, F, beta, x)
    shift = lw.max()
    w = np.exp(lw - shift)
    Z = trapezoid(w, x)
    return x, w / Z, float(Z * np.exp(shift))


def gibbs_bin_masses(g: Graph, F, beta: float, edges, refine: int = 40) -> np.ndarray:
    """Probability of each ``rho_1`` bin under the Gibbs law (trapezoid on a refined grid)."""
    edges = np.asarray(edges, dtype=float)
    x = np.unique(np.concatenate([np.linspace(a, b, refine + 1) for a, b in zip(edges[:-1], edges[1:])]))
    x = np.clip(x, EPS_INTERIOR, 1 - EPS_INTERIOR)
    lw = _gibbs_log_lebesgue(g, F, beta, x)
    cdf = cumulative_trapezoid(np.exp(lw - lw.max()), x, initial=0.0)
    cdf /= cdf[-1]
    return np.diff(np.interp(edges, x, cdf))


@dataclass
class FPESolution:
    t: np.ndarray
    edges: np.ndarray
    centers: np.ndarray
    density: np.ndarray  # (len(t), cells), density in rho_1
    mass: np.ndarray  # integral of the density at each output time

    def cell_masses(self, k: int = -1) -> np.ndarray:
        return self.density[k] * np.diff(self.edges)

    def bin_masses(self, bin_edges, k: int = -1) -> np.ndarray:
        cdf = np.concatenate([[0.0], np.cumsum(self.cell_masses(k))])
        return np.diff(np.interp(bin_edges, self.edges, cdf))


def point_mass_1d(edges, x0: float) -> np.ndarray:
    """Cell masses of a unit point mass at ``x0`` split linearly between the two nearest centers."""
    edges = np.asarray(edges, dtype=float)
    c = 0.5 * (edges[1:] + edges[:-1])
    m = np.zeros(c.size)
    j = int(np.clip(np.searchsorted(c, x0) - 1, 0, c.size - 2))
    w = np.clip((x0 - c[j]) / (c[j + 1] - c[j]), 0.0, 1.0)
    m[j], m[j + 1] = 1.0 - w, w
    return m


def fpe_solve_1d(g: Graph, F, beta: float, T: float, cells: int = 500, dt: float = 1e-3,
                 initial=None, t_out=None, cfl_max: float = 1e4) -> FPESolution:
    """Finite-volume Fokker-Planck solver on the 2-vertex simplex ``rho = (x, 1 - x)``.

    The flux ``-a beta e^{-U} d/dx(f e^{U})`` (``U`` the Gibbs potential in
    ``x``, ``a = L_11`` the mobility) is discretized with harmonic averages of
    ``a e^{-U}`` at faces, zero flux at the ends, and implicit Euler in
    time.  The discrete Gibbs state is then exactly stationary and total mass
    is conserved to rounding.

    ``initial`` gives cell masses (defaults to the Gibbs state); ``t_out``
    the output times (defaults to ``[0, T]``).  Raises :class:`GridError`
    when ``a beta dt / dx^2`` exceeds ``cfl_max``.
    """
    _two_point(g)
    edges = np.linspace(0.0, 1.0, cells + 1)
    dx = np.diff(edges)
    c = 0.5 * (edges[1:] + edges[:-1])
    if cells < 10:
        raise GridError("need at least 10 cells")
    mob = np.array([WeightedLaplacian(g, [xi, 1 - xi]).matrix[0, 0] for xi in c])
    # g.n == 2 so the Pi factor is constant, but keep it for clarity
    U = np.array([F.value(np.array([xi, 1 - xi])) / beta + 0.5 * log_pi(g, [xi, 1 - xi]) for xi in c])
    U -= U.min()
    wgt = mob * np.exp(-U)
    courant = beta * mob.max() * dt / dx.min() ** 2
    if courant > cfl_max:
        raise GridError(f"a*beta*dt/dx^2 = {courant:.3g} exceeds {cfl_max:.3g}; refine dt or coarsen the grid")
    face = 2.0 * wgt[1:] * wgt[:-1] / (wgt[1:] + wgt[:-1])
    gibbs = np.exp(-U)
    # flux J_{i+1/2} = -beta * face * (f_{i+1}/gibbs_{i+1} - f_i/gibbs_i) / h_face
    hf = c[1:] - c[:-1]
    kap = beta * face / hf
    # df_i/dt = -(J_{i+1/2} - J_{i-1/2}) / dx_i as a tridiagonal operator A
    lower = kap / gibbs[:-1] / dx[1:]  # A[i+1, i]
    upper = kap / gibbs[1:] / dx[:-1]  # A[i, i+1]
    diag = np.zeros(cells)
    diag[:-1] -= kap / gibbs[:-1] / dx[:-1]
    diag[1:] -= kap / gibbs[1:] / dx[1:]
    ab = np.zeros((3, cells))
    ab[0, 1:] = -dt * upper
    ab[1] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower
    if initial is None:
        f = gibbs / np.sum(gibbs * dx)
    else:
        m = np.asarray(initial, dtype=float)
        f = m / dx / np.sum(m)
    t_out = np.array([0.0, T]) if t_out is None else np.asarray(t_out, dtype=float)
    steps = np.round(t_out / dt).astype(int)
    out = np.empty((len(t_out), cells))
    k = 0
    for j, s in enumerate(steps):
        while k < s:
            f = solve_banded((1, 1), ab, f)
            k += 1
        out[j] = f
    mass = out @ dx
    return FPESolution(steps * dt, edges, c, out, mass)


# -- histogram helpers ------------------------------------------------------------


def histogram_masses(x, edges) -> np.ndarray:
    counts, _ = np.histogram(np.asarray(x), bins=edges)
    return counts / max(1, counts.sum())


def tv_distance(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def l1_distance(p, q) -> float:
    return float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
