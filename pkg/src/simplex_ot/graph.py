"""Weighted undirected graphs, ingestion, and interior densities.

Edges are stored once each with the orientation ``i > j`` (0-based).  Every
edge-indexed array in the package follows the stored edge order, with the
value on the reverse orientation implied by skew-symmetry.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    BoundaryError,
    DensityError,
    DisconnectedGraphError,
    DuplicateEdgeError,
    GraphParseError,
    NonPositiveWeightError,
    SelfLoopError,
)

EPS_INTERIOR = 1e-10
SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected weighted graph on vertices ``0..n-1``.

    Use :func:`graph_from_edges` or :func:`load_graph` rather than the raw
    constructor; they canonicalize orientation and validate.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: np.ndarray = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def heads(self) -> np.ndarray:
        """Larger endpoint ``i`` of each oriented edge ``(i, j)``."""
        return _readonly(np.array([e[0] for e in self.edges], dtype=np.intp))

    @cached_property
    def tails(self) -> np.ndarray:
        return _readonly(np.array([e[1] for e in self.edges], dtype=np.intp))

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return _readonly(np.sqrt(self.weights))

    @cached_property
    def incidence(self) -> np.ndarray:
        """Discrete gradient matrix ``D`` (``|E| x n``)."""
        D = np.zeros((self.num_edges, self.n))
        rows = np.arange(self.num_edges)
        D[rows, self.heads] = self.sqrt_weights
        D[rows, self.tails] = -self.sqrt_weights
        return _readonly(D)

    @cached_property
    def averaging(self) -> np.ndarray:
        """Matrix ``A`` with ``(A a)_e = (a_i + a_j) / 2``; also ``v o w = A^T (v * w)``."""
        A = np.zeros((self.num_edges, self.n))
        rows = np.arange(self.num_edges)
        A[rows, self.heads] = 0.5
        A[rows, self.tails] = 0.5
        return _readonly(A)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        W[self.heads, self.tails] = self.weights
        W[self.tails, self.heads] = self.weights
        return _readonly(W)

    def classical_laplacian(self) -> np.ndarray:
        """Combinatorial weighted Laplacian ``diag(W 1) - W`` built from adjacency."""
        W = self.weight_matrix
        return np.diag(W.sum(axis=1)) - W

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i + 1, j + 1, float(w)] for (i, j), w in zip(self.edges, self.weights)],
        }

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON serialization."""
        return hashlib.sha256(dumps_graph(self).encode("utf-8")).hexdigest()


def graph_from_edges(n: int, edges, *, one_based: bool = False) -> Graph:
    """Build a validated :class:`Graph` from ``(i, j, w)`` triples.

    Orientation is canonicalized to ``i > j``; edge order is preserved.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise GraphParseError(f"n must be an integer >= 2, got {n!r}", "n")
    off = 1 if one_based else 0
    canon: list[tuple[int, int]] = []
    weights: list[float] = []
    seen: dict[tuple[int, int], int] = {}
    for k, item in enumerate(edges):
        loc = f"edges[{k}]"
        try:
            i_raw, j_raw, w = item
        except (TypeError, ValueError):
            raise GraphParseError("edge must be a triple [i, j, w]", loc) from None
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (i_raw, j_raw)):
            raise GraphParseError("vertex indices must be integers", loc)
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise GraphParseError("weight must be a number", loc)
        i, j = i_raw - off, j_raw - off
        if not (0 <= i < n and 0 <= j < n):
            lo, hi = (1, n) if one_based else (0, n - 1)
            raise GraphParseError(f"vertex index out of range [{lo}, {hi}]", loc)
        if i == j:
            raise SelfLoopError(f"self-loop on vertex {i_raw}", loc)
        w = float(w)
        if not math.isfinite(w) or w <= 0.0:
            raise NonPositiveWeightError(f"edge weight must be positive and finite, got {w!r}", loc)
        key = (max(i, j), min(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate of edges[{seen[key]}]", loc)
        seen[key] = k
        canon.append(key)
        weights.append(w)

    _check_connected(n, canon)
    return Graph(n=n, edges=tuple(canon), weights=_readonly(np.array(weights, dtype=float)))


def _check_connected(n: int, edges: list[tuple[int, int]]) -> None:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for u in nbrs[v]:
            if not seen[u]:
                seen[u] = True
                queue.append(u)
    missing = [v + 1 for v in range(n) if not seen[v]]
    if missing:
        raise DisconnectedGraphError(
            f"graph is disconnected; vertices {missing} unreachable from vertex 1",
            f"vertex {missing[0]}",
        )


def loads_graph(text: str) -> Graph:
    """Parse a graph document ``{"n": int, "edges": [[i, j, w], ...]}`` (1-based)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    if not isinstance(doc, dict):
        raise GraphParseError("document must be a JSON object", "$")
    for key in ("n", "edges"):
        if key not in doc:
            raise GraphParseError(f"missing key {key!r}", "$")
    if not isinstance(doc["edges"], list):
        raise GraphParseError("edges must be a list", "edges")
    return graph_from_edges(doc["n"], doc["edges"], one_based=True)


def load_graph(source) -> Graph:
    """Load a graph from a path, an open file, or a JSON string."""
    if hasattr(source, "read"):
        return loads_graph(source.read())
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        return loads_graph(Path(source).read_text(encoding="utf-8"))
    return loads_graph(source)


def dumps_graph(g: Graph) -> str:
    # repr(float) is the shortest round-trip form, so weights survive bit-exactly
    return json.dumps(g.to_dict(), separators=(",", ":"))


def incidence(g: Graph) -> np.ndarray:
    return g.incidence


def validate_density(g: Graph, rho, eps_interior: float = EPS_INTERIOR) -> np.ndarray:
    """Check that ``rho`` is an interior point of the simplex and renormalize it.

    Returns a fresh array whose entries sum to one.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (g.n,):
        raise DensityError(f"density must have length {g.n}, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise DensityError("density has non-finite entries")
    total = rho.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise DensityError(f"density must sum to 1 (within {SUM_TOL:g}), got {total!r}")
    k = int(np.argmin(rho))
    if rho[k] < eps_interior:
        raise BoundaryError(
            f"density is not interior: rho[{k + 1}] = {float(rho[k])!r} < {eps_interior:g}",
            min_value=float(rho[k]),
            index=k,
        )
    out = rho / total
    # fold the rounding residual into the largest entry so the float sum is exactly 1
    j = int(np.argmax(out))
    for _ in range(3):
        resid = 1.0 - out.sum()
        if resid == 0.0:
            break
        out[j] += resid
    return out


def check_interior(rho: np.ndarray, eps_interior: float = EPS_INTERIOR) -> None:
    """Cheap interior guard for internal use (no sum check)."""
    k = int(np.argmin(rho))
    if not rho[k] >= eps_interior:
        raise BoundaryError(
            f"density is not interior: rho[{k + 1}] = {float(rho[k])!r}", min_value=float(rho[k]), index=k
        )


def load_density(g: Graph, source, eps_interior: float = EPS_INTERIOR) -> np.ndarray:
    """Read a JSON array of ``n`` doubles and validate it as a density."""
    text = Path(source).read_text(encoding="utf-8") if not str(source).lstrip().startswith("[") else source
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DensityError(f"invalid density JSON: {exc.msg}") from None
    if not isinstance(values, list):
        raise DensityError("density document must be a JSON array")
    return validate_density(g, values, eps_interior)


# -- small graph factories used by tests, scripts and the verify suite --------


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return graph_from_edges(n, [(i + 1, i, weight) for i in range(n - 1)])


def two_point_graph(weight: float = 2.0) -> Graph:
    return graph_from_edges(2, [(1, 0, weight)])


def triangle_graph(weights=(1.0, 1.0, 1.0)) -> Graph:
    w1, w2, w3 = weights
    return graph_from_edges(3, [(1, 0, w1), (2, 1, w2), (2, 0, w3)])


def random_connected_graph(
    rng: np.random.Generator,
    n: int,
    extra_edge_prob: float = 0.4,
    weight_range: tuple[float, float] = (0.5, 2.0),
) -> Graph:
    """Random spanning tree plus independent extra edges, uniform weights."""
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        pairs.add((max(a, b), min(a, b)))
    for i in range(n):
        for j in range(i):
            if (i, j) not in pairs and rng.random() < extra_edge_prob:
                pairs.add((i, j))
    pairs = sorted(pairs)
    w = rng.uniform(*weight_range, size=len(pairs))
    return graph_from_edges(n, [(i, j, float(x)) for (i, j), x in zip(pairs, w)])


def random_density(rng: np.random.Generator, n: int, concentration: float = 2.0) -> np.ndarray:
    rho = rng.dirichlet(np.full(n, concentration))
    rho = np.maximum(rho, 1e-3)
    return rho / rho.sum()


def random_tangent(rng: np.random.Generator, n: int) -> np.ndarray:
    s = rng.standard_normal(n)
    return s - s.mean()
