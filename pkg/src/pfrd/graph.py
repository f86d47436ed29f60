"""Weighted graphs and the objective/gradient evaluations used by every dynamic.

Two payoff structures are supported:

* :class:`SparseGraph` -- a symmetric nonnegative matrix ``W`` with zero
  diagonal, stored in compressed row form.  ``f(x) = x^T W x``.
* :class:`Hypergraph` -- a uniform hypergraph of order ``d`` with positive
  edge weights.  ``f(x) = d! * sum_e w_e prod_{i in e} x_i``.

Both expose ``objective_and_gradient(x)`` returning ``(f, g)`` where ``g`` is
the partial derivative of ``f`` divided by the polynomial degree ``d``
(``g = W x`` for graphs).  With that scaling ``x . g == f`` for every ``x``.
The projections downstream are invariant to positive rescaling, so the
dropped constant never changes an iterate.
"""

from __future__ import annotations

import io
import math
import re
from pathlib import Path
from typing import Iterable, Protocol, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist


class GraphFormatError(ValueError):
    """Malformed edge-list or point-cloud input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GradientField(Protocol):
    """Anything the replicator iteration can evolve against."""

    n: int

    def objective_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def restrict(self, vertices: np.ndarray) -> "GradientField": ...


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SparseGraph:
    """Immutable undirected weighted graph in CSR form.

    Row ``i`` of ``(indptr, indices, weights)`` holds the neighbours of vertex
    ``i`` sorted by index.  Every edge is stored twice (once per endpoint).
    Use :meth:`from_edges` to build one; the constructor trusts its input.
    """

    __slots__ = ("n", "indptr", "indices", "weights", "total_weight", "_matrix")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray):
        self.n = int(n)
        self.indptr = _readonly(np.asarray(indptr, dtype=np.int64))
        self.indices = _readonly(np.asarray(indices, dtype=np.int64))
        self.weights = _readonly(np.asarray(weights, dtype=np.float64))
        self.total_weight = float(self.weights.sum()) / 2.0
        self._matrix = sp.csr_matrix(
            (self.weights, self.indices, self.indptr), shape=(self.n, self.n)
        )

    @classmethod
    def from_edges(cls, n: int, u, v, w=None) -> "SparseGraph":
        """Build from unordered edge endpoints.

        Raises ``ValueError`` on self-loops, duplicate edges (in either
        orientation), negative weights, or out-of-range vertex ids.
        """
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        if u.shape != v.shape:
            raise ValueError("edge endpoint arrays differ in length")
        w = np.ones(u.size) if w is None else np.asarray(w, dtype=np.float64).ravel()
        if w.shape != u.shape:
            raise ValueError("weight array length differs from edge count")
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        if u.size:
            if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n:
                raise ValueError(f"vertex id out of range for n={n}")
            if np.any(u == v):
                i = int(np.flatnonzero(u == v)[0])
                raise ValueError(f"self-loop at vertex {int(u[i])}")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("edge weights must be finite and nonnegative")
            lo, hi = np.minimum(u, v), np.maximum(u, v)
            key = lo * n + hi
            order = np.argsort(key, kind="stable")
            dup = np.flatnonzero(np.diff(key[order]) == 0)
            if dup.size:
                k = key[order[dup[0]]]
                raise ValueError(f"duplicate edge ({int(k // n)}, {int(k % n)})")
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        vals = np.concatenate([w, w])
        m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        m.sort_indices()
        return cls(n, m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, matrix) -> "SparseGraph":
        """Build from a dense symmetric matrix; zero entries are not edges."""
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(a, a.T, rtol=0, atol=0):
            raise ValueError("matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("diagonal must be zero")
        u, v = np.nonzero(np.triu(a, 1))
        return cls.from_edges(a.shape[0], u, v, a[u, v])

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def is_unweighted(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour ids (ascending) and matching weights of vertex ``i``."""
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.weights[s:e]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each unordered edge once, as ``(u, v, w)`` arrays with ``u < v``."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = rows < self.indices
        return rows[keep], self.indices[keep], self.weights[keep]

    def to_scipy(self) -> sp.csr_matrix:
        return self._matrix.copy()

    def to_dense(self) -> np.ndarray:
        return self._matrix.toarray()

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self._matrix @ x

    def objective_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        g = self._matrix @ x
        return float(x @ g), g

    def restrict(self, vertices) -> "SparseGraph":
        """Induced subgraph on ``vertices``, relabelled ``0..len-1`` in the given order."""
        idx = np.asarray(vertices, dtype=np.int64)
        sub = self._matrix[idx][:, idx].tocsr()
        sub.sort_indices()
        return SparseGraph(idx.size, sub.indptr, sub.indices, sub.data)

    def __repr__(self) -> str:
        return f"SparseGraph(n={self.n}, edges={self.num_edges}, total_weight={self.total_weight:g})"


class Hypergraph:
    """Uniform hypergraph of order ``d`` with positive hyperedge weights."""

    __slots__ = ("n", "order", "edges", "weights", "_factor")

    def __init__(self, n: int, edges, weights=None):
        e = np.asarray(edges, dtype=np.int64)
        if e.ndim != 2:
            raise ValueError("edges must be a 2-D array of vertex tuples")
        if e.shape[1] < 2:
            raise ValueError("hyperedge order must be at least 2")
        w = np.ones(e.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (e.shape[0],):
            raise ValueError("one weight per hyperedge required")
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError(f"vertex id out of range for n={n}")
            srt = np.sort(e, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise ValueError("hyperedge with repeated vertex")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("hyperedge weights must be positive")
        self.n = int(n)
        self.order = int(e.shape[1])
        self.edges = _readonly(e)
        self.weights = _readonly(w)
        # (d-1)!: the gradient scale that makes x . g == f
        self._factor = float(math.factorial(self.order - 1))

    @classmethod
    def from_graph(cls, g: SparseGraph) -> "Hypergraph":
        u, v, w = g.edges()
        return cls(g.n, np.column_stack([u, v]), w)

    def objective_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        xe = x[self.edges]
        d = self.order
        grad = np.zeros(self.n)
        for p in range(d):
            others = np.prod(np.delete(xe, p, axis=1), axis=1)
            grad += np.bincount(self.edges[:, p], weights=self.weights * others, minlength=self.n)
        grad *= self._factor
        f = d * self._factor * float(self.weights @ np.prod(xe, axis=1))
        return f, grad

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.objective_and_gradient(x)[1]

    def restrict(self, vertices) -> "Hypergraph":
        idx = np.asarray(vertices, dtype=np.int64)
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[idx] = np.arange(idx.size)
        mapped = relabel[self.edges]
        keep = np.all(mapped >= 0, axis=1)
        return Hypergraph(idx.size, mapped[keep].reshape(-1, self.order), self.weights[keep])

    def __repr__(self) -> str:
        return f"Hypergraph(n={self.n}, order={self.order}, edges={len(self.weights)})"


def _check_state(n: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    if np.any(x < 0):
        raise ValueError("state vector has negative entries")
    return x


def evaluate_quadratic(g: SparseGraph, x) -> tuple[float, np.ndarray]:
    """``f = x^T W x`` and ``grad = W x`` (the true gradient halved).

    >>> k3 = SparseGraph.from_edges(3, [0, 0, 1], [1, 2, 2])
    >>> f, grad = evaluate_quadratic(k3, np.full(3, 1 / 3))
    >>> round(f, 12), np.round(grad, 12).tolist()
    (0.666666666667, [0.666666666667, 0.666666666667, 0.666666666667])
    """
    return g.objective_and_gradient(_check_state(g.n, x))


def evaluate_poly(h: Hypergraph, x) -> tuple[float, np.ndarray]:
    """Multilinear objective of a hypergraph and its gradient divided by the order."""
    return h.objective_and_gradient(_check_state(h.n, x))


def subgraph_weight(g: SparseGraph, vertices: Iterable[int]) -> float:
    """Total weight of edges with both endpoints in ``vertices`` (each edge once)."""
    idx = np.unique(np.asarray(list(vertices), dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= g.n):
        raise IndexError(f"vertex id out of range for n={g.n}")
    mask = np.zeros(g.n, dtype=np.float64)
    mask[idx] = 1.0
    return float(mask @ (g._matrix @ mask)) / 2.0


_N_DIRECTIVE = re.compile(r"#\s*n\s*=\s*(\d+)")


def load_edge_list(source: TextIO | str, n: int | None = None) -> SparseGraph:
    """Parse ``u v [w]`` lines (0-based ids, ``#`` comments) into a graph.

    ``source`` is a text stream or a string holding the file contents.  The
    vertex count is ``max id + 1`` unless ``n`` is given or the file carries a
    ``# n=<count>`` comment, which keeps trailing isolated vertices.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    us, vs, ws = [], [], []
    declared: int | None = None
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _N_DIRECTIVE.fullmatch(line)
            if m and declared is None:
                declared = int(m.group(1))
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"expected 'u v [w]', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"vertex ids must be integers: {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError("vertex ids must be nonnegative", lineno)
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"weight is not a number: {parts[2]!r}", lineno) from None
            if not math.isfinite(w):
                raise GraphFormatError("weight must be finite", lineno)
            if w < 0:
                raise GraphFormatError(f"negative weight {w}", lineno)
            if w == 0:
                raise GraphFormatError("weight must be positive", lineno)
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        us.append(u)
        vs.append(v)
        ws.append(w)
    top = max(max(us, default=-1), max(vs, default=-1)) + 1
    if n is None:
        n = top if declared is None else declared
    if n < top:
        raise GraphFormatError(f"vertex id {top - 1} exceeds declared n={n}")
    return SparseGraph.from_edges(n, us, vs, ws)


def read_edge_list(path: str | Path, n: int | None = None) -> SparseGraph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh, n)


def write_edge_list(g: SparseGraph, out: TextIO, header: str | None = None) -> None:
    if header:
        for line in header.splitlines():
            out.write(f"# {line}\n")
    out.write(f"# n={g.n}\n")
    u, v, w = g.edges()
    unweighted = g.is_unweighted
    for a, b, c in zip(u.tolist(), v.tolist(), w.tolist()):
        out.write(f"{a} {b}\n" if unweighted else f"{a} {b} {c!r}\n")


def load_points_csv(source: TextIO | str) -> np.ndarray:
    """One point per line, comma-separated reals; ``#`` lines ignored."""
    if isinstance(source, str):
        source = io.StringIO(source)
    rows: list[list[float]] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = [float(t) for t in line.split(",")]
        except ValueError:
            raise GraphFormatError(f"non-numeric field in {line!r}", lineno) from None
        if rows and len(row) != len(rows[0]):
            raise GraphFormatError(
                f"dimension mismatch: expected {len(rows[0])} fields, got {len(row)}", lineno
            )
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), -1)


def read_points_csv(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return load_points_csv(fh)


def write_points_csv(points: np.ndarray, out: TextIO, header: str | None = None) -> None:
    if header:
        for line in header.splitlines():
            out.write(f"# {line}\n")
    for p in np.asarray(points, dtype=np.float64):
        out.write(",".join(repr(float(c)) for c in p) + "\n")


def build_kernel_graph(points, bandwidth: float, truncation: float | None = None) -> SparseGraph:
    """Gaussian-kernel affinity graph, ``w_ij = exp(-|p_i - p_j|^2 / h^2)``.

    With ``truncation`` set, pairs whose weight falls below it are dropped,
    found with a radius query instead of all-pairs distances.
    """
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError:
        raise ValueError("points must all have the same dimension") from None
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points must all have the same dimension")
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    h2 = float(bandwidth) ** 2
    if truncation is None or truncation <= 0:
        d2 = pdist(pts, "sqeuclidean")
        u, v = np.triu_indices(n, 1)
        w = np.exp(-d2 / h2)
        keep = w > 0
        return SparseGraph.from_edges(n, u[keep], v[keep], w[keep])
    if truncation > 1:
        return SparseGraph.from_edges(n, [], [], [])
    radius = math.sqrt(-h2 * math.log(truncation))
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return SparseGraph.from_edges(n, [], [], [])
    diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
    w = np.exp(-np.einsum("ij,ij->i", diff, diff) / h2)
    keep = w >= truncation
    return SparseGraph.from_edges(n, pairs[keep, 0], pairs[keep, 1], w[keep])
