"""Graph analyses built on the path-following dynamic.

Cluster extraction by thresholding, maximum clique via the Motzkin-Straus
correspondence, densest-k-subgraph candidates (one or many ``k`` from a
single run), density-region shrink sequences on point clouds, and exact
brute-force references for small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph, build_kernel_graph, subgraph_weight
from .replicator import (
    IterationConfig,
    PathSchedule,
    SolutionPath,
    StateVector,
    run_pfrd,
)


_DEFAULT_SLACK = 1e-9


class EmptyClusterError(ValueError):
    """No component exceeds the membership threshold."""


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    epsilon: float
    delta1: float

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        return v in set(self.members)


@dataclass(frozen=True)
class CliqueResult:
    """Outcome of a clique search.

    ``objective`` is ``x^T W x`` at the uniform vector on ``members`` (equal
    to ``1 - 1/|members|`` exactly when they form a clique);
    ``state_objective`` is the objective at the converged state itself.
    """

    cluster: Cluster
    is_clique: bool
    objective: float
    state_objective: float
    converged: bool

    @property
    def members(self) -> tuple[int, ...]:
        return self.cluster.members


@dataclass(frozen=True)
class DksResult:
    k: int
    members: tuple[int, ...]
    weight: float
    converged: bool = True


def extract_cluster(state: StateVector, delta1: float | None = None) -> Cluster:
    """Members are the components strictly above ``delta1``.

    The default is ``1/n`` shaved by a relative ``1e-9`` so that a state
    spread uniformly over every vertex keeps all of them.
    """
    x = np.asarray(state.x)
    if delta1 is None:
        delta1 = (1.0 - _DEFAULT_SLACK) / x.size
    if delta1 < 0:
        raise ValueError("delta1 must be nonnegative")
    members = np.flatnonzero(x > delta1)
    if members.size == 0:
        raise EmptyClusterError(f"no component exceeds delta1={delta1!r}")
    return Cluster(tuple(int(i) for i in members), float(state.epsilon), float(delta1))


def cluster_path(path: SolutionPath, delta1: float | None = None) -> list[Cluster]:
    return [extract_cluster(e.state, delta1) for e in path]


def is_clique(g: SparseGraph, vertices) -> bool:
    vs = np.unique(np.asarray(list(vertices), dtype=np.int64))
    m = vs.size
    return g.restrict(vs).num_edges == m * (m - 1) // 2


def find_clique_pfrd(
    g: SparseGraph,
    schedule: PathSchedule,
    cfg: IterationConfig = IterationConfig(),
    delta1: float | None = None,
) -> CliqueResult:
    """Run the path to ``eps = 1`` and read a clique off the final state.

    A non-clique extraction is reported through ``is_clique`` rather than
    repaired.
    """
    if not g.is_unweighted:
        raise ValueError("clique search expects an unweighted graph")
    if schedule.samples[-1] != 1.0:
        raise ValueError("clique search needs a schedule ending at epsilon = 1")
    final = run_pfrd(g, schedule, cfg).final
    cluster = extract_cluster(final.state, delta1)
    m = len(cluster)
    indicator = np.zeros(g.n)
    indicator[list(cluster.members)] = 1.0 / m
    objective = float(indicator @ g.gradient(indicator))
    clique = is_clique(g, cluster.members)
    return CliqueResult(cluster, clique, objective, final.f_value, final.converged)


def _top_k(x: np.ndarray, k: int) -> tuple[int, ...]:
    # largest first, ties by ascending index
    order = np.lexsort((np.arange(x.size), -x))
    return tuple(sorted(int(i) for i in order[:k]))


def dks_grid(n: int, k_min: int) -> list[int]:
    """Support sizes visited on the way down to ``k_min``.

    Every size from ``n`` down for ``n <= 100``; otherwise about 100 evenly
    spaced sizes.  Per-``k`` and multi-``k`` runs share this grid so that
    their prefixes coincide.
    """
    step = max(1, math.ceil(n / 100))
    return [j for j in range(n, k_min, -step)]


def _dks_schedule(n: int, ks) -> PathSchedule:
    ks = sorted(set(ks), reverse=True)
    sizes = sorted(set(dks_grid(n, ks[-1])) | set(ks), reverse=True)
    return PathSchedule(tuple(1.0 / j for j in sizes))


def densest_k_path(
    g: SparseGraph, ks, cfg: IterationConfig = IterationConfig()
) -> list[DksResult]:
    """Candidates for several ``k`` from one evolution; results follow ``ks`` order.

    The path runs on the non-isolated vertices; a ``k`` larger than their
    count takes all of them plus the lowest-numbered isolated ones.
    """
    ks = [int(k) for k in ks]
    if not ks:
        raise ValueError("no k values given")
    if len(set(ks)) != len(ks):
        raise ValueError("duplicate k values")
    for k in ks:
        if not 1 <= k <= g.n:
            raise ValueError(f"k={k} outside [1, {g.n}]")
    # isolated vertices add no weight and would make small caps infeasible,
    # so the path runs on the rest and they only pad oversized requests
    active = np.flatnonzero(g.degrees() > 0)
    isolated = np.flatnonzero(g.degrees() == 0)
    by_k = {}
    for k in ks:
        if k > active.size:
            members = tuple(sorted(active.tolist() + isolated[: k - active.size].tolist()))
            by_k[k] = DksResult(k, members, subgraph_weight(g, members), True)
    path_ks = [k for k in ks if k not in by_k]
    if path_ks:
        sub = g.restrict(active)
        for entry in run_pfrd(sub, _dks_schedule(sub.n, path_ks), cfg):
            k = int(round(1.0 / entry.epsilon))
            if k in path_ks:
                members = tuple(sorted(int(active[i]) for i in _top_k(entry.x, k)))
                by_k[k] = DksResult(k, members, subgraph_weight(g, members), entry.converged)
    return [by_k[k] for k in ks]


def densest_k_subgraph(g: SparseGraph, k: int, cfg: IterationConfig = IterationConfig()) -> DksResult:
    """The ``k`` largest components after following the path down to ``eps = 1/k``."""
    return densest_k_path(g, [k], cfg)[0]


def density_shrink(
    points,
    bandwidth: float,
    schedule: PathSchedule,
    cfg: IterationConfig = IterationConfig(),
    delta1: float | None = None,
    truncation: float | None = None,
) -> list[Cluster]:
    """High-density regions of a point cloud, one cluster per schedule entry."""
    g = build_kernel_graph(points, bandwidth, truncation)
    return cluster_path(run_pfrd(g, schedule, cfg), delta1)


def nesting_violations(clusters: list[Cluster]) -> int:
    """Members of a later (larger-eps) cluster missing from the one before it."""
    bad = 0
    for prev, cur in zip(clusters, clusters[1:]):
        bad += len(set(cur.members) - set(prev.members))
    return bad


def oracle_max_clique(g: SparseGraph) -> tuple[int, ...]:
    """Exact maximum clique by branch and bound over bitsets (small graphs).

    Among cliques of maximum size the lexicographically first one found is
    returned.
    """
    n = g.n
    if n == 0:
        return ()
    nbr = [0] * n
    for v in range(n):
        for u in g.neighbors(v)[0].tolist():
            nbr[v] |= 1 << u
    best: list[int] = [0]
    best_size = [1]

    def expand(clique: int, size: int, cand: int) -> None:
        if cand == 0:
            if size > best_size[0]:
                best_size[0] = size
                best[0] = clique
            return
        while cand:
            if size + bin(cand).count("1") <= best_size[0]:
                return
            v = (cand & -cand).bit_length() - 1
            cand &= ~(1 << v)
            expand(clique | (1 << v), size + 1, cand & nbr[v])

    expand(0, 0, (1 << n) - 1)
    if best[0] == 0:
        return (0,)
    return tuple(i for i in range(n) if best[0] >> i & 1)


def oracle_densest_k(g: SparseGraph, k: int, chunk: int = 200_000) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over all ``k``-subsets; ``C(n, k)`` must not exceed 1e6."""
    n = g.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if math.comb(n, k) > 1_000_000:
        raise ValueError(f"C({n}, {k}) subsets is too many to enumerate")
    a = g.to_dense()
    pairs = list(itertools.combinations(range(k), 2))
    best_w, best_set = -1.0, None
    combos = itertools.combinations(range(n), k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64).reshape(-1, k)
        if block.shape[0] == 0:
            break
        w = np.zeros(block.shape[0])
        for i, j in pairs:
            w += a[block[:, i], block[:, j]]
        top = int(np.argmax(w))
        if w[top] > best_w:
            best_w, best_set = float(w[top]), tuple(int(v) for v in block[top])
    return best_set, best_w


def enumerate_kkt_points(g: SparseGraph, epsilon: float, tol: float = 1e-9) -> list[np.ndarray]:
    """All isolated KKT points of ``max x^T W x`` over the capped simplex.

    Every split of the vertices into capped / interior / zero classes is
    tried; the interior values and the multiplier solve a linear system and
    the candidate is kept when it satisfies every sign condition.  Splits
    whose system is singular (continua of critical points) are skipped.
    Exponential in ``n``; intended for ``n <= 10``.
    """
    n = g.n
    if n > 10:
        raise ValueError("KKT enumeration is limited to 10 vertices")
    w = g.to_dense()
    found: list[np.ndarray] = []
    for labels in itertools.product((0, 1, 2), repeat=n):
        lab = np.array(labels)
        capped = np.flatnonzero(lab == 2)
        interior = np.flatnonzero(lab == 1)
        rest = 1.0 - capped.size * epsilon
        if rest < -tol or (interior.size == 0 and abs(rest) > tol):
            continue
        if interior.size == 0 and capped.size == 0:
            continue
        x = np.zeros(n)
        x[capped] = epsilon
        if interior.size:
            m = interior.size
            sys_a = np.zeros((m + 1, m + 1))
            sys_a[:m, :m] = w[np.ix_(interior, interior)]
            sys_a[:m, m] = -1.0
            sys_a[m, :m] = 1.0
            rhs = np.empty(m + 1)
            rhs[:m] = -w[np.ix_(interior, capped)].sum(axis=1) * epsilon
            rhs[m] = rest
            try:
                sol = np.linalg.solve(sys_a, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.linalg.cond(sys_a) > 1e10:
                continue
            x[interior] = sol[:m]
            if np.any(x[interior] <= tol) or np.any(x[interior] >= epsilon - tol):
                continue
        grad = w @ x
        if interior.size:
            lam = float(grad[interior].mean())
        else:
            lam = float(grad[capped].min())
        scale = max(abs(lam), 1.0)
        if np.any(grad[capped] < lam - tol * scale):
            continue
        if np.any(grad[lab == 0] > lam + tol * scale):
            continue
        if any(np.abs(x - y).max() < 1e-9 for y in found):
            continue
        found.append(x)
    return found
