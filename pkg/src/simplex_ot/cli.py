"""Command-line entry point: ``simplex-ot <subcommand> ...``.

Every run writes ``manifest.json`` to ``--out`` recording the graph hash, all
parameters, the seed, the tool version, and sha256 hashes of each output
file.  Exit codes: 0 success, 1 computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, geometry, metric, verify
from .errors import SimplexOTError
from .functionals import parse_functional
from .graph import Graph, load_graph, validate_density
from .laplacian import WeightedLaplacian, logdet_gradient

log = logging.getLogger("simplex_ot")


class UsageError(Exception):
    pass


# -- I/O helpers -----------------------------------------------------------------


def _read_json_arg(spec: str):
    """Inline JSON (``[...]``) or a path to a JSON file."""
    s = spec.strip()
    if s.startswith("[") or s.startswith("{"):
        return json.loads(s)
    p = Path(spec)
    if not p.is_file():
        raise UsageError(f"no such file: {spec}")
    return json.loads(p.read_text(encoding="utf-8"))


def _vector(spec: str, n: int, what: str) -> np.ndarray:
    try:
        v = np.asarray(_read_json_arg(spec), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"{what}: cannot parse {spec!r} ({exc})") from None
    if v.shape != (n,):
        raise UsageError(f"{what}: expected {n} numbers, got shape {v.shape}")
    return v


def _density(g: Graph, spec: str | None, eps: float, what: str) -> np.ndarray:
    if spec is None:
        return np.full(g.n, 1.0 / g.n)
    return validate_density(g, _vector(spec, g.n, what), eps)


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=1) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.graph: Graph | None = None
        self.result: dict = {}

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def manifest(self, status: str, error: str | None = None) -> dict:
        params = {k: v for k, v in vars(self.args).items() if k not in ("func", "out")}
        m = {
            "tool": "simplex_ot",
            "version": __version__,
            "subcommand": self.args.command,
            "argv": self.argv,
            "graph_hash": self.graph.content_hash() if self.graph is not None else None,
            "params": params,
            "seed": getattr(self.args, "seed", None),
            "status": status,
            "outputs": {name: _sha256(self.out / name) for name in self.outputs if (self.out / name).exists()},
        }
        if error:
            m["error"] = error
        return m


# -- subcommands -------------------------------------------------------------------


def _load(run: Run) -> Graph:
    if run.args.graph is None:
        raise UsageError("--graph is required")
    if not str(run.args.graph).lstrip().startswith("{") and not Path(run.args.graph).is_file():
        raise UsageError(f"no such file: {run.args.graph}")
    run.graph = load_graph(run.args.graph)
    return run.graph


def cmd_spectrum(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    L = WeightedLaplacian(g, rho)
    lam, U = L.spectrum()
    res = {
        "rho": rho,
        "eigenvalues": lam,
        "eigenvectors": U.T,  # row i is the eigenvector for eigenvalues[i]
        "log_pi": L.log_pi(),
        "volume_density": L.volume_density(),
        "logdet_gradient": logdet_gradient(g, rho, L),
        "laplacian": L.matrix,
        "pinv": L.pinv(),
    }
    _write_json(run.path("spectrum.json"), res)
    print(" ".join(_fmt(x) for x in lam))


def cmd_metric(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    a = run.args
    res = {"rho": rho}
    if a.sigma1 is not None:
        s1 = _vector(a.sigma1, g.n, "--sigma1")
        s2 = _vector(a.sigma2 or a.sigma1, g.n, "--sigma2")
        res["g_primal"] = metric.metric_primal(g, rho, s1, s2)
        value = res["g_primal"]
    if a.phi1 is not None:
        p1 = _vector(a.phi1, g.n, "--phi1")
        p2 = _vector(a.phi2 or a.phi1, g.n, "--phi2")
        res["g_dual"] = metric.metric_dual(g, rho, p1, p2)
        value = res["g_dual"]
    if a.sigma1 is None and a.phi1 is None:
        raise UsageError("metric needs --sigma1 [--sigma2] or --phi1 [--phi2]")
    res["metric_matrix_primal"] = WeightedLaplacian(g, rho).pinv()
    _write_json(run.path("metric.json"), res)
    print(_fmt(value))


def _distance(run: Run):
    g = _load(run)
    a = run.args
    r0 = _density(g, a.rho0, a.eps, "--rho0")
    r1 = _density(g, a.rho1, a.eps, "--rho1")
    return g, metric.wasserstein_distance(g, r0, r1, metric.DistanceOptions(K=a.K, eps_interior=a.eps, fallback=not a.no_fallback))


def _path_rows(path: metric.SimplexPath):
    n = path.rho.shape[1]
    header = ["t"] + [f"rho_{i + 1}" for i in range(n)]
    cols = [path.t[:, None], path.rho]
    if path.velocity is not None:
        header += [f"v_{i + 1}" for i in range(n)]
        cols.append(path.velocity)
    if path.potential is not None:
        header += [f"phi_{i + 1}" for i in range(n)]
        cols.append(path.potential)
    return header, np.hstack(cols)


def cmd_distance(run: Run):
    g, res = _distance(run)
    header, rows = _path_rows(res.geodesic)
    _write_csv(run.path("geodesic.csv"), header[: 1 + g.n], rows[:, : 1 + g.n])
    _write_json(run.path("distance.json"), {"W": res.distance, "method": res.method, "residual": res.residual,
                                            "iterations": res.iterations})
    print(_fmt(res.distance))


def cmd_geodesic(run: Run):
    g, res = _distance(run)
    header, rows = _path_rows(res.geodesic)
    _write_csv(run.path("geodesic.csv"), header, rows)
    speed = [metric.metric_primal(g, r, v, v) for r, v in zip(res.geodesic.rho, res.geodesic.velocity)]
    _write_json(run.path("geodesic.json"), {"W": res.distance, "method": res.method, "residual": res.residual,
                                            "energy": metric.path_energy(g, res.geodesic),
                                            "speed_min": min(speed), "speed_max": max(speed)})
    print(_fmt(res.distance))


def cmd_geodesic_ivp(run: Run):
    g = _load(run)
    a = run.args
    r0 = _density(g, a.rho0, a.eps, "--rho0")
    s0 = _vector(a.sigma0, g.n, "--sigma0")
    p = geometry.geodesic_ivp(g, r0, s0, a.T, a.K, eps=a.eps)
    header, rows = _path_rows(p)
    _write_csv(run.path("geodesic_ivp.csv"), header, rows)
    _write_json(run.path("geodesic_ivp.json"), {"t": p.t, "rho": p.rho, "velocity": p.velocity,
                                                "columns": "rho[k][i]: density at t[k], vertex i+1"})
    print(" ".join(_fmt(x) for x in p.rho[-1]))


def cmd_christoffel(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    if run.args.k is not None:
        k = run.args.k - 1
        if not 0 <= k < g.n:
            raise UsageError(f"--k must be in 1..{g.n}")
        G = geometry.christoffel(g, rho, k)[None]
        ks = [run.args.k]
    else:
        G = geometry.christoffel_all(g, rho)
        ks = list(range(1, g.n + 1))
    _write_json(run.path("christoffel.json"), {"rho": rho, "vertices": ks,
                                               "index_order": "gamma[s][i][j] = Gamma^{vertices[s]}_{i+1, j+1}",
                                               "gamma": G})
    print(f"wrote {len(ks)} slice(s) of size {g.n}x{g.n}")


def cmd_curvature(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    L = WeightedLaplacian(g, rho)
    if run.args.sigmas:
        s = [_vector(x, g.n, "--sigmas") for x in run.args.sigmas]
        val = geometry.curvature(g, rho, *s, L=L)
        _write_json(run.path("curvature.json"), {"rho": rho, "sigmas": s, "R": val,
                                                 "convention": "g_W(R(s1,s2)s3, s4)"})
        print(_fmt(val))
        return
    X = geometry.spectral_frame(g, rho, L).T
    d = len(X)
    R = np.zeros((d, d, d, d))
    for i in range(d):
        for j in range(i + 1, d):
            for k in range(d):
                for m in range(d):
                    R[i, j, k, m] = geometry.curvature(g, rho, X[i], X[j], X[k], X[m], L=L)
                    R[j, i, k, m] = -R[i, j, k, m]
    _write_json(run.path("curvature.json"), {"rho": rho, "frame": X, "R": R,
                                             "convention": "R[a][b][c][d] = g_W(R(X_a,X_b)X_c, X_d), X = spectral frame rows"})
    print(f"frame curvature tensor of size {d}^4")


def _functional(run: Run, g: Graph):
    base = Path.cwd()
    try:
        return parse_functional(run.args.functional, g.n, base)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None


def cmd_hessian(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    F = _functional(run, g)
    L = WeightedLaplacian(g, rho)
    res = {"rho": rho, "functional": run.args.functional}
    if run.args.sigma1 is not None:
        s1 = _vector(run.args.sigma1, g.n, "--sigma1")
        s2 = _vector(run.args.sigma2 or run.args.sigma1, g.n, "--sigma2")
        res["value"] = geometry.hessian_w(g, rho, F, s1, s2, L)
    X = geometry.spectral_frame(g, rho, L).T
    res["frame"] = X
    res["frame_matrix"] = np.array([[geometry.hessian_w(g, rho, F, a, b, L) for b in X] for a in X])
    _write_json(run.path("hessian.json"), res)
    print(_fmt(res.get("value", np.trace(res["frame_matrix"]))))


def cmd_laplace_beltrami(run: Run):
    g = _load(run)
    rho = _density(g, run.args.rho, run.args.eps, "--rho")
    F = _functional(run, g)
    val = geometry.laplace_beltrami(g, rho, F)
    _write_json(run.path("laplace_beltrami.json"), {"rho": rho, "functional": run.args.functional, "value": val})
    print(_fmt(val))


def cmd_flow(run: Run):
    g = _load(run)
    a = run.args
    r0 = _density(g, a.rho0, a.eps, "--rho0")
    F = _functional(run, g)
    tr = dynamics.gradient_flow(g, r0, F, a.T, a.dt, semi_implicit=a.semi_implicit, eps=a.eps)
    names, table = tr.columns()
    _write_csv(run.path("flow.csv"), names, table[:: a.every])
    print(" ".join(_fmt(x) for x in tr.rho[-1]))


def cmd_hamiltonian(run: Run):
    g = _load(run)
    a = run.args
    r0 = _density(g, a.rho0, a.eps, "--rho0")
    p0 = _vector(a.phi0, g.n, "--phi0")
    F = _functional(run, g) if a.functional else None
    tr = dynamics.hamiltonian_flow(g, r0, p0, F, a.T, a.dt, method=a.method, eps=a.eps)
    names, table = tr.columns()
    _write_csv(run.path("hamiltonian.csv"), names, table[:: a.every])
    drift = float(np.max(np.abs(tr.H - tr.H[0])) / max(abs(tr.H[0]), 1e-300))
    _write_json(run.path("hamiltonian.json"), {"H0": tr.H[0], "relative_drift": drift})
    print(_fmt(drift))


def cmd_sde(run: Run):
    g = _load(run)
    a = run.args
    r0 = _density(g, a.rho0, a.eps, "--rho0")
    F = _functional(run, g)
    opts = dynamics.SDEOptions(boundary=a.boundary, noise=a.noise, record_every=a.record_every, eps=a.eps)
    S = dynamics.sde_sample(g, r0, F, a.beta, a.T, a.dt, a.seed, a.chains, opts)
    n = g.n
    header = ["chain", "t"] + [f"rho_{i + 1}" for i in range(n)] + ["status"]
    if S.paths is not None:
        def rows():
            for k, t in enumerate(S.t):
                for c in range(a.chains):
                    yield [c, t, *S.paths[k, c], int(S.status[c])]
    else:
        T_end = S.t[-1]

        def rows():
            for c in range(a.chains):
                yield [c, T_end, *S.final[c], int(S.status[c])]
    _write_csv(run.path("samples.csv"), header, rows())
    summary = {"chains": a.chains, "killed": int(np.sum(~S.alive)), "rejections": int(S.rejections.sum()),
               "mean": S.final[S.alive].mean(axis=0) if S.alive.any() else None}
    if n == 2:
        edges = np.linspace(0.0, 1.0, a.bins + 1)
        p = dynamics.gibbs_bin_masses(g, F, a.beta, edges)
        h = dynamics.histogram_masses(S.final[S.alive, 0], edges)
        summary["tv_vs_gibbs"] = dynamics.tv_distance(h, p)
    _write_json(run.path("sde_summary.json"), summary)
    print(json.dumps(_jsonable({k: summary[k] for k in summary if k != "mean"})))


def cmd_fpe1d(run: Run):
    g = _load(run)
    a = run.args
    F = _functional(run, g)
    edges = np.linspace(0.0, 1.0, a.cells + 1)
    init = dynamics.point_mass_1d(edges, a.x0) if a.x0 is not None else None
    times = np.asarray(a.times if a.times else [0.0, a.T], dtype=float)
    sol = dynamics.fpe_solve_1d(g, F, a.beta, a.T, a.cells, a.dt, initial=init, t_out=times)

    def rows():
        for k, t in enumerate(sol.t):
            for x, f in zip(sol.centers, sol.density[k]):
                yield [t, x, f]

    _write_csv(run.path("fpe1d.csv"), ["t", "rho_1", "density"], rows())
    x, q, K = dynamics.gibbs_normalize_1d(g, F, a.beta)
    bins = np.linspace(0.0, 1.0, a.bins + 1)
    l1 = dynamics.l1_distance(sol.bin_masses(bins), dynamics.gibbs_bin_masses(g, F, a.beta, bins))
    _write_json(run.path("fpe1d.json"), {"mass": sol.mass, "K": K, "l1_final_vs_gibbs": l1})
    print(_fmt(l1))


def cmd_verify(run: Run):
    g = _load(run) if run.args.graph else None
    rep = verify.run_suite(g, trials=run.args.trials, seed=run.args.seed)
    _write_json(run.path("verify.json"), rep.to_dict())
    print("\n".join(rep.lines()))
    if not rep.ok:
        raise _VerifyFailed()


class _VerifyFailed(Exception):
    pass


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simplex-ot", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, helptext, graph_required=True):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--graph", required=graph_required, help="graph JSON file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--eps", type=float, default=1e-10, help="interior threshold")
        sp.set_defaults(func=func)
        return sp

    sp = add("spectrum", cmd_spectrum, "eigenpairs, pseudo-inverse and volume quantities")
    sp.add_argument("--rho", help="density (file or inline JSON); default uniform")

    sp = add("metric", cmd_metric, "metric value in primal or dual coordinates")
    sp.add_argument("--rho")
    for f in ("--sigma1", "--sigma2", "--phi1", "--phi2"):
        sp.add_argument(f)

    for name, func in (("distance", cmd_distance), ("geodesic", cmd_geodesic)):
        sp = add(name, func, "Wasserstein distance and geodesic between two densities")
        sp.add_argument("--rho0", required=True)
        sp.add_argument("--rho1", required=True)
        sp.add_argument("--K", type=int, default=100, help="time steps on [0, 1]")
        sp.add_argument("--no-fallback", action="store_true", help="fail instead of direct minimization")

    sp = add("geodesic-ivp", cmd_geodesic_ivp, "geodesic from a density and initial velocity")
    sp.add_argument("--rho0", required=True)
    sp.add_argument("--sigma0", required=True)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--K", type=int, default=100)

    sp = add("christoffel", cmd_christoffel, "Christoffel slices")
    sp.add_argument("--rho")
    sp.add_argument("--k", type=int, help="vertex (1-based); default all")

    sp = add("curvature", cmd_curvature, "curvature tensor value or frame tensor")
    sp.add_argument("--rho")
    sp.add_argument("--sigmas", nargs=4, metavar="SIGMA")

    sp = add("hessian", cmd_hessian, "Wasserstein Hessian of a functional")
    sp.add_argument("--rho")
    sp.add_argument("--functional", required=True)
    sp.add_argument("--sigma1")
    sp.add_argument("--sigma2")

    sp = add("laplace-beltrami", cmd_laplace_beltrami, "Laplace-Beltrami operator applied to a functional")
    sp.add_argument("--rho")
    sp.add_argument("--functional", required=True)

    sp = add("flow", cmd_flow, "Wasserstein gradient flow")
    sp.add_argument("--rho0")
    sp.add_argument("--functional", required=True)
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--dt", type=float, default=1e-2)
    sp.add_argument("--semi-implicit", action="store_true")
    sp.add_argument("--every", type=int, default=1, help="write every k-th row")

    sp = add("hamiltonian", cmd_hamiltonian, "Hamiltonian flow in (rho, Phi)")
    sp.add_argument("--rho0")
    sp.add_argument("--phi0", required=True)
    sp.add_argument("--functional", help="potential energy; default zero")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--method", choices=("midpoint", "rk45"), default="midpoint")
    sp.add_argument("--every", type=int, default=1)

    sp = add("sde", cmd_sde, "Euler-Maruyama chains of the drift-diffusion process")
    sp.add_argument("--rho0")
    sp.add_argument("--functional", required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--dt", type=float, default=1e-2)
    sp.add_argument("--chains", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--boundary", choices=("reject", "halve"), default="reject")
    sp.add_argument("--noise", choices=("edge", "sqrt"), default="edge")
    sp.add_argument("--record-every", type=int, help="snapshot every k steps")
    sp.add_argument("--bins", type=int, default=50)

    sp = add("fpe1d", cmd_fpe1d, "finite-volume Fokker-Planck solver on a 2-vertex graph")
    sp.add_argument("--functional", required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--cells", type=int, default=500)
    sp.add_argument("--x0", type=float, help="start from a point mass at rho_1 = x0 (default: Gibbs state)")
    sp.add_argument("--times", type=float, nargs="*")
    sp.add_argument("--bins", type=int, default=50)

    sp = add("verify", cmd_verify, "randomized property suite", graph_required=False)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    run = Run(args, argv)
    code, err = 0, None
    try:
        args.func(run)
    except UsageError as exc:
        code, err = 2, f"usage: {exc}"
    except _VerifyFailed:
        code, err = 1, "verify: property suite failed"
    except (SimplexOTError, ValueError, np.linalg.LinAlgError) as exc:
        code, err = 1, f"{type(exc).__name__}: {exc}"
    if err:
        print(err, file=sys.stderr)
    _write_json(run.out / "manifest.json", run.manifest("ok" if code == 0 else "error", err))
    return code


def rerun_manifest(manifest_path, out_dir) -> tuple[int, dict, dict]:
    """Re-execute a manifest into ``out_dir``; returns ``(code, old_hashes, new_hashes)``."""
    m = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    argv = list(m["argv"])
    if "--out" in argv:
        argv[argv.index("--out") + 1] = str(out_dir)
    else:
        argv += ["--out", str(out_dir)]
    code = main(argv)
    new = json.loads((Path(out_dir) / "manifest.json").read_text(encoding="utf-8"))
    return code, m["outputs"], new["outputs"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
