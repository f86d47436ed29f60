"""Multi-line fitting on top of the solution path.

Random two-point line hypotheses vote on which points agree with them; the
Jaccard overlap of those votes defines a graph whose dense parts are the
lines.  Walking the cluster sequence backward peels the lines off one by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment

from .applications import Cluster, cluster_path
from .graph import SparseGraph
from .replicator import IterationConfig, PathSchedule, SolutionPath, run_pfrd


class NoLineError(ValueError):
    """Every point coincides, so no line can be drawn."""


def _canonical(a: float, b: float, c: float) -> np.ndarray:
    norm = math.hypot(a, b)
    a, b, c = a / norm, b / norm, c / norm
    if a < 0 or (a == 0 and b < 0):
        a, b, c = -a, -b, -c
    return np.array([a, b, c])


def line_deviation(line, points) -> np.ndarray:
    """Orthogonal distances ``|a x + b y + c|`` for a unit-normal line."""
    pts = np.asarray(points, dtype=float)
    return np.abs(pts @ np.asarray(line[:2]) + line[2])


@dataclass(frozen=True)
class Hypothesis:
    a: float
    b: float
    c: float
    consensus: tuple[int, ...]

    @property
    def line(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


@dataclass(frozen=True)
class StructureModel:
    a: float
    b: float
    c: float
    inliers: tuple[int, ...]
    mean_deviation: float

    @property
    def line(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def deviation(self, points) -> np.ndarray:
        return line_deviation(self.line, points)

    def record(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "inlier_count": len(self.inliers),
            "inliers": sorted(int(i) for i in self.inliers),
            "mean_deviation": self.mean_deviation,
        }


@dataclass(frozen=True)
class FitConfig:
    delta4: float = 0.03
    epsilon_m: float = 1 / 50
    hypotheses: int = 1000
    consensus_threshold: float | None = None
    seed: int = 0
    schedule_step: int = 10
    delta1: float | None = None
    # rounds of refitting on the current inliers; 0 fits the candidate set once
    refine: int = 5

    def __post_init__(self):
        if self.delta4 <= 0 or not 0 < self.epsilon_m <= 1:
            raise ValueError("delta4 and epsilon_m must be positive (epsilon_m <= 1)")
        if self.hypotheses < 1:
            raise ValueError("need at least one hypothesis")
        if self.consensus_threshold is not None and self.consensus_threshold <= 0:
            raise ValueError("consensus threshold must be positive")
        if self.schedule_step < 1:
            raise ValueError("schedule step must be positive")

    @property
    def threshold(self) -> float:
        return self.delta4 if self.consensus_threshold is None else self.consensus_threshold

    @property
    def min_inliers(self) -> int:
        return math.ceil(1 / self.epsilon_m - 1e-9)


def _line_through(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    dx, dy = q - p
    return _canonical(dy, -dx, dx * p[1] - dy * p[0])


def sample_hypotheses(points, m: int, threshold: float, seed: int) -> list[Hypothesis]:
    """``m`` lines through random point pairs; stream ``i`` is seeded by ``(seed, i)``."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if m < 1:
        raise ValueError("need at least one hypothesis")
    if np.all(pts == pts[0]):
        raise NoLineError("all points are identical")
    out = []
    for idx in range(m):
        rng = np.random.default_rng([seed, idx])
        while True:
            i, j = rng.choice(n, size=2, replace=False)
            if np.any(pts[i] != pts[j]):
                break
        line = _line_through(pts[i], pts[j])
        members = np.flatnonzero(line_deviation(line, pts) < threshold)
        out.append(Hypothesis(*line.tolist(), tuple(int(v) for v in members)))
    return out


def preference_matrix(n: int, hypotheses: Sequence[Hypothesis]) -> sparse.csr_matrix:
    """Boolean points x hypotheses incidence matrix."""
    rows = np.concatenate([np.asarray(h.consensus, dtype=np.int64) for h in hypotheses])
    cols = np.repeat(np.arange(len(hypotheses)), [len(h.consensus) for h in hypotheses])
    data = np.ones(rows.size)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, len(hypotheses)))


def build_consensus_graph(points, hypotheses: Sequence[Hypothesis]) -> SparseGraph:
    """Jaccard similarity of the points' preference sets as edge weight."""
    if not hypotheses:
        raise ValueError("no hypotheses")
    n = np.asarray(points).shape[0]
    pref = preference_matrix(n, hypotheses)
    inter = sparse.triu(pref @ pref.T, k=1).tocoo()
    sizes = np.asarray(pref.sum(axis=1)).ravel()
    union = sizes[inter.row] + sizes[inter.col] - inter.data
    keep = inter.data > 0
    w = inter.data[keep] / np.maximum(1.0, union[keep])
    return SparseGraph.from_edges(n, inter.row[keep], inter.col[keep], w)


def fit_line_tls(points) -> np.ndarray:
    """Total least squares line ``(a, b, c)`` with unit normal."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("need at least two points to fit a line")
    centre = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centre, full_matrices=False)
    a, b = vt[-1]
    return _canonical(a, b, -(a * centre[0] + b * centre[1]))


def _trimmed_line(pts: np.ndarray, h: int, rounds: int = 50) -> np.ndarray:
    # concentration steps: refit on the h closest points until the set is stable
    line = fit_line_tls(pts)
    if h >= pts.shape[0]:
        return line
    keep = None
    for _ in range(rounds):
        nxt = np.sort(np.argsort(line_deviation(line, pts), kind="stable")[:h])
        if keep is not None and np.array_equal(nxt, keep):
            break
        keep = nxt
        line = fit_line_tls(pts[keep])
    return line


def _model(pts: np.ndarray, fit_idx: np.ndarray, delta4: float, refine: int = 0,
           trim: int | None = None) -> StructureModel:
    line = fit_line_tls(pts[fit_idx]) if trim is None else _trimmed_line(pts[fit_idx], trim)
    dev = line_deviation(line, pts[fit_idx])
    inl = fit_idx[dev < delta4]
    for _ in range(refine):
        if inl.size < 2:
            break
        line = fit_line_tls(pts[inl])
        dev = line_deviation(line, pts[fit_idx])
        nxt = fit_idx[dev < delta4]
        if np.array_equal(nxt, inl):
            break
        inl = nxt
    mean_dev = float(dev[dev < delta4].mean()) if inl.size else float("nan")
    return StructureModel(*line.tolist(), tuple(int(v) for v in inl), mean_dev)


def fit_structures(points, clusters: Sequence, cfg: FitConfig) -> list[StructureModel]:
    """Backward sweep over clusters ordered by increasing ``eps``.

    The last cluster seeds the first line.  Each earlier cluster contributes
    the points not yet explained; those close to a known line are absorbed,
    and a large enough remainder is fitted as a candidate line that is kept
    only if it has more than ``ceil(1/epsilon_m)`` inliers.  A rejected
    candidate ends the sweep.  Since an accepted line needs that many inliers,
    each fit is first concentrated on the closest ``ceil(1/epsilon_m) + 1``
    points so that a few stray points cannot drag it away.
    """
    if not clusters:
        raise ValueError("empty cluster sequence")
    pts = np.asarray(points, dtype=float)
    sets = [np.asarray(sorted(c.members if isinstance(c, Cluster) else c), dtype=np.int64) for c in clusters]
    k_min = cfg.min_inliers
    first = _model(pts, sets[-1], cfg.delta4, cfg.refine, k_min + 1)
    found = [first]
    explained = np.zeros(pts.shape[0], dtype=bool)
    explained[sets[-1]] = True
    for members in reversed(sets[:-1]):
        fresh = members[~explained[members]]
        if fresh.size == 0:
            continue
        dev = np.min([s.deviation(pts[fresh]) for s in found], axis=0)
        near = dev < cfg.delta4
        explained[fresh[near]] = True
        fresh = fresh[~near]
        if fresh.size >= 2 * k_min:
            cand = _model(pts, fresh, cfg.delta4, cfg.refine, k_min + 1)
            if len(cand.inliers) > k_min:
                found.append(cand)
                explained[list(cand.inliers)] = True
            else:
                break
    return found


@dataclass
class FitResult:
    structures: list[StructureModel]
    clusters: list[Cluster]
    schedule: PathSchedule
    graph: SparseGraph = field(repr=False)
    path: SolutionPath | None = field(default=None, repr=False)


def fit_schedule(n_active: int, cfg: FitConfig) -> PathSchedule:
    """``1/k`` for ``k`` on multiples of the step, starting at ``n_active``.

    ``n_active`` counts points sharing at least one hypothesis with another
    point; isolated points cannot carry mass, so larger ``k`` is infeasible.
    """
    step, k_min = cfg.schedule_step, cfg.min_inliers
    if n_active < k_min:
        raise ValueError(f"only {n_active} connected points, fewer than ceil(1/epsilon_m)={k_min}")
    ks = [n_active] + list(range((n_active - 1) // step * step, k_min, -step))
    if ks[-1] != k_min:
        ks.append(k_min)
    return PathSchedule(tuple(1.0 / k for k in ks))


def fit_lines(points, cfg: FitConfig = FitConfig(), it: IterationConfig = IterationConfig()) -> FitResult:
    """Hypotheses, consensus graph, solution path, then the backward sweep."""
    pts = np.asarray(points, dtype=float)
    hyps = sample_hypotheses(pts, cfg.hypotheses, cfg.threshold, cfg.seed)
    g = build_consensus_graph(pts, hyps)
    schedule = fit_schedule(int(np.count_nonzero(g.degrees() > 0)), cfg)
    path = run_pfrd(g, schedule, it)
    clusters = cluster_path(path, cfg.delta1)
    return FitResult(fit_structures(pts, clusters, cfg), clusters, schedule, g, path)


def ground_truth_inliers(points, true_lines, sigma: float) -> np.ndarray:
    """Index of the nearest true line for points within ``sigma`` of one, else -1."""
    pts = np.asarray(points, dtype=float)
    dev = np.stack([line_deviation(l, pts) for l in np.asarray(true_lines)], axis=1)
    owner = np.argmin(dev, axis=1)
    owner[dev.min(axis=1) >= sigma] = -1
    return owner


def precision(members, points, true_lines, sigma: float) -> float:
    """Share of ``members`` lying within ``sigma`` of some true line."""
    members = np.asarray(list(members), dtype=np.int64)
    if members.size == 0:
        return float("nan")
    gt = ground_truth_inliers(points, true_lines, sigma) >= 0
    return float(gt[members].mean())


@dataclass(frozen=True)
class FittingError:
    """``value`` is None when nothing was fitted."""

    value: float | None
    matches: tuple[tuple[int, int], ...]
    n_structures: int
    n_true: int
    mode: str

    @property
    def count_matches(self) -> bool:
        return self.n_structures == self.n_true

    @property
    def failed(self) -> bool:
        return self.value is None


def fitting_error(
    structures: Sequence[StructureModel], true_lines, points, sigma: float, mode: str = "points"
) -> FittingError:
    """Mean distance of ground-truth inliers to the fitted line matched to their true line.

    Ground-truth inliers are points within ``sigma`` of a true line.  True
    and fitted lines are paired by a minimum-cost assignment on mean
    deviation.  ``mode="points"`` measures the observed points themselves;
    ``mode="projected"`` first drops each inlier onto its true line, so the
    result isolates the error of the fitted line from the noise floor.
    """
    if mode not in ("points", "projected"):
        raise ValueError(f"unknown mode {mode!r}")
    true_lines = np.asarray(true_lines, dtype=float).reshape(-1, 3)
    if not structures:
        return FittingError(None, (), 0, true_lines.shape[0], mode)
    pts = np.asarray(points, dtype=float)
    owner = ground_truth_inliers(pts, true_lines, sigma)
    groups = []
    for j, line in enumerate(true_lines):
        p = pts[owner == j]
        if mode == "projected":
            p = p - np.outer(line_deviation(line, p) * np.sign(p @ line[:2] + line[2]), line[:2])
        groups.append(p)
    cost = np.array([[s.deviation(g).mean() if len(g) else np.inf for s in structures] for g in groups])
    finite = np.where(np.isfinite(cost), cost, 1e12)
    rows, cols = linear_sum_assignment(finite)
    dists = np.concatenate([structures[c].deviation(groups[r]) for r, c in zip(rows, cols)])
    value = float(dists.mean()) if dists.size else None
    return FittingError(
        value,
        tuple((int(r), int(c)) for r, c in zip(rows, cols)),
        len(structures),
        true_lines.shape[0],
        mode,
    )
