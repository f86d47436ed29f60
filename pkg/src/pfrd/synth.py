"""Synthetic benchmark data.

* planted-clique graphs whose noise part follows a chosen degree family,
* Gaussian blobs plus uniform background outliers,
* noisy points on a few random lines plus uniform outliers.

Every generator is a pure function of its arguments and seed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import SparseGraph

DISTRIBUTIONS = ("uniform", "binomial", "geometric", "power-law")

STD_M1, STD_M2 = 100, 900
STD_ALPHA, STD_BETA = 0.11, 0.005


@dataclass(frozen=True)
class PlantedCliqueSpec:
    m1: int
    m2: int
    alpha: float
    beta: float
    distribution: str = "uniform"
    seed: int = 0
    power_exponent: float = 2.5
    geometric_ratio: float = 0.97
    # uniform degrees span mean * (1 -/+ uniform_spread)
    uniform_spread: float = 1.0
    retries: int = 5

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 0:
            raise ValueError("need m1 >= 1 and m2 >= 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown degree distribution {self.distribution!r}")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")

    @property
    def noise_edges(self) -> int:
        return int(round(self.alpha * self.m2 * (self.m2 - 1) / 2))

    @property
    def cross_edges(self) -> int:
        return int(round(self.beta * self.m1 * self.m2))

    def metadata(self) -> dict:
        meta = dataclasses.asdict(self)
        meta.update(
            n=self.m1 + self.m2,
            clique_edges=self.m1 * (self.m1 - 1) // 2,
            noise_edges=self.noise_edges,
            cross_edges=self.cross_edges,
        )
        return meta


def balanced_alpha(m1: int, m2: int, beta: float) -> float:
    """Noise density giving clique and noise vertices the same mean degree.

    Clique vertices have ``m1 - 1 + beta*m2`` neighbours on average and noise
    vertices ``alpha*(m2 - 1) + beta*m1``; at ``m1=100, m2=900, beta=0.005``
    this gives ``alpha = 0.1146``.
    """
    return (m1 - 1 + beta * (m2 - m1)) / (m2 - 1)


def scaled_planted_spec(
    m1: int, m2: int, distribution: str, seed: int, beta: float = STD_BETA
) -> PlantedCliqueSpec:
    alpha = min(1.0, balanced_alpha(m1, m2, beta))
    return PlantedCliqueSpec(m1, m2, alpha, beta, distribution, seed)


def standard_planted_spec(distribution: str, seed: int) -> PlantedCliqueSpec:
    return PlantedCliqueSpec(STD_M1, STD_M2, STD_ALPHA, STD_BETA, distribution, seed)


def _raw_degrees(spec: PlantedCliqueSpec, mean: float, rng: np.random.Generator) -> np.ndarray:
    m = spec.m2
    if spec.distribution == "uniform":
        lo = max(1.0, mean * (1 - spec.uniform_spread))
        hi = mean * (1 + spec.uniform_spread)
        return rng.uniform(lo, hi, m)
    if spec.distribution == "binomial":
        p = min(1.0, mean / max(m - 1, 1))
        return rng.binomial(max(m - 1, 0), p, m).astype(float)
    if spec.distribution == "geometric":
        return rng.geometric(1 - spec.geometric_ratio, m).astype(float)
    # continuous power law with x_min = 1: P(d) ~ d^-exponent
    return rng.pareto(spec.power_exponent - 1, m) + 1.0


def _fit_degrees(raw: np.ndarray, total: int, cap: int) -> np.ndarray:
    """Rescale to the target sum, clamp into ``[1, cap]``, round keeping the sum.

    The floor of one keeps every noise vertex attached, so the path can
    start from the uniform vector at ``eps = 1/n``.
    """
    d = raw * (total / raw.sum())
    floor = 1.0 if total >= raw.size else 0.0
    for _ in range(100):
        over, under = d > cap, d < floor
        if not (over.any() or under.any()):
            break
        d[over] = cap
        d[under] = floor
        free = ~over & ~under & (d < cap) & (d > floor)
        deficit = total - d.sum()
        if not free.any() or d[free].sum() <= 0:
            break
        d[free] *= 1 + deficit / d[free].sum()
    base = np.maximum(np.floor(d), floor).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        frac_order = np.argsort(-(d - base), kind="stable")
        room = frac_order[base[frac_order] < cap]
        base[room[:short]] += 1
    elif short < 0:
        order = np.argsort(-base, kind="stable")
        base[order[: -short]] -= 1
    return base


def _realize(degrees: np.ndarray, n_edges: int, rng: np.random.Generator) -> np.ndarray | None:
    """Place exactly ``n_edges`` simple edges, endpoints drawn by residual degree."""
    m = degrees.size
    residual = degrees.astype(float)
    seen: set[int] = set()
    edges: list[tuple[int, int]] = []
    stalls = 0
    smooth = 0.0
    while len(edges) < n_edges:
        weight = np.clip(residual, 0, None) + smooth
        if weight.sum() <= 0:
            smooth = 1.0
            continue
        p = weight / weight.sum()
        need = n_edges - len(edges)
        batch = max(2 * need, 256)
        us = rng.choice(m, size=batch, p=p)
        vs = rng.choice(m, size=batch, p=p)
        accepted = 0
        for u, v in zip(us.tolist(), vs.tolist()):
            if u == v:
                continue
            if smooth == 0.0 and (residual[u] <= 0 or residual[v] <= 0):
                continue
            a, b = (u, v) if u < v else (v, u)
            key = a * m + b
            if key in seen:
                continue
            seen.add(key)
            edges.append((a, b))
            residual[u] -= 1
            residual[v] -= 1
            accepted += 1
            if len(edges) == n_edges:
                break
        if accepted == 0:
            stalls += 1
            # residual mass sits on vertices that are already adjacent
            smooth = max(smooth, 1.0) * (2.0 if smooth else 1.0)
            if stalls > 50:
                return None
        else:
            stalls = 0
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def gen_noise_graph(spec: PlantedCliqueSpec, rng: np.random.Generator) -> np.ndarray:
    m, e = spec.m2, spec.noise_edges
    if e > m * (m - 1) // 2:
        raise ValueError("noise graph cannot hold the requested edge count")
    if e == 0:
        return np.zeros((0, 2), dtype=np.int64)
    mean = 2 * e / m
    for _ in range(spec.retries):
        degrees = _fit_degrees(_raw_degrees(spec, mean, rng), 2 * e, m - 1)
        edges = _realize(degrees, e, rng)
        if edges is not None:
            return edges
    raise RuntimeError(f"could not realize a {spec.distribution} degree sequence")


def gen_planted_clique(spec: PlantedCliqueSpec) -> tuple[SparseGraph, tuple[int, ...]]:
    """Clique on ``0..m1-1``, noise graph on the rest, random cross edges.

    Returns the graph and the planted vertex set.
    """
    rng = np.random.default_rng(spec.seed)
    m1, m2 = spec.m1, spec.m2
    iu, ju = np.triu_indices(m1, 1)
    noise = gen_noise_graph(spec, rng) + m1
    n_cross = spec.cross_edges
    if n_cross > m1 * m2:
        raise ValueError("too many cross edges requested")
    picks = rng.choice(m1 * m2, size=n_cross, replace=False) if n_cross else np.zeros(0, np.int64)
    cu, cv = picks // max(m2, 1), m1 + picks % max(m2, 1)
    u = np.concatenate([iu, noise[:, 0], cu])
    v = np.concatenate([ju, noise[:, 1], cv])
    return SparseGraph.from_edges(m1 + m2, u, v), tuple(range(m1))


def degree_bias_graph() -> tuple[SparseGraph, tuple[int, ...], tuple[int, ...]]:
    """15-vertex graph where degree bias misleads the plain dynamic.

    Vertices ``a..o`` are ``0..14``.  ``{a,b,c,d}`` is the maximum clique;
    ``{e,f,g}`` is a triangle whose members ``f`` and ``g`` each carry four
    pendant leaves, and ``d`` links the two groups.  Returns the graph, the
    4-clique and the triangle.
    """
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6), (3, 4)]
    edges += [(5, i) for i in range(7, 11)] + [(6, i) for i in range(11, 15)]
    u, v = zip(*edges)
    return SparseGraph.from_edges(15, u, v), (0, 1, 2, 3), (4, 5, 6)


@dataclass(frozen=True)
class GaussianCluster:
    count: int
    mean: Sequence[float]
    cov: Sequence[Sequence[float]]


@dataclass(frozen=True)
class OutlierBox:
    count: int
    low: Sequence[float]
    high: Sequence[float]


def gen_gaussian_clusters(
    clusters: Sequence[GaussianCluster], outliers: OutlierBox | None, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Labelled point cloud; label ``j + 1`` for cluster ``j`` and ``0`` for outliers."""
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for j, c in enumerate(clusters):
        mean = np.asarray(c.mean, dtype=float)
        cov = np.asarray(c.cov, dtype=float)
        if cov.shape != (mean.size, mean.size) or not np.allclose(cov, cov.T):
            raise ValueError(f"cluster {j}: covariance must be a symmetric {mean.size}x{mean.size} matrix")
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-12 * max(1.0, abs(vals).max()):
            raise ValueError(f"cluster {j}: covariance is not positive semidefinite")
        root = vecs * np.sqrt(np.clip(vals, 0, None))
        pts.append(mean + rng.standard_normal((c.count, mean.size)) @ root.T)
        labels.append(np.full(c.count, j + 1))
    if outliers is not None and outliers.count:
        lo = np.asarray(outliers.low, dtype=float)
        hi = np.asarray(outliers.high, dtype=float)
        pts.append(rng.uniform(lo, hi, (outliers.count, lo.size)))
        labels.append(np.zeros(outliers.count, dtype=int))
    if not pts:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    return np.vstack(pts), np.concatenate(labels).astype(int)


# Three blobs of decreasing density inside a 20 x 20 box; 90 points on the
# tightest one.
BLOBS_CLUSTERS = (
    GaussianCluster(90, (10.0, 5.0), ((0.09, 0.0), (0.0, 0.09))),
    GaussianCluster(60, (15.0, 14.0), ((0.25, 0.0), (0.0, 0.25))),
    GaussianCluster(30, (5.0, 14.0), ((0.49, 0.0), (0.0, 0.49))),
)
BLOBS_OUTLIERS = OutlierBox(180, (0.0, 0.0), (20.0, 20.0))
BLOBS_BANDWIDTH = 0.5
BLOBS_SCHEDULE = (1 / 300, 1 / 240, 1 / 200, 1 / 160, 1 / 120, 1 / 80, 1.0)


def gen_blob_cloud(seed: int) -> tuple[np.ndarray, np.ndarray]:
    return gen_gaussian_clusters(BLOBS_CLUSTERS, BLOBS_OUTLIERS, seed)


def _random_line(rng: np.random.Generator, half: float) -> np.ndarray:
    theta = rng.uniform(0, math.pi)
    a, b = math.cos(theta), math.sin(theta)
    c = rng.uniform(-half / 2, half / 2)
    return np.array([a, b, c])


def _segment(line: np.ndarray, half: float) -> tuple[np.ndarray, np.ndarray, float, float]:
    a, b, c = line
    foot = -c * np.array([a, b])
    d = np.array([-b, a])
    lo, hi = -np.inf, np.inf
    for k in range(2):
        if abs(d[k]) < 1e-12:
            continue
        t1 = (-half - foot[k]) / d[k]
        t2 = (half - foot[k]) / d[k]
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    return foot, d, lo, hi


def gen_lines(
    n_inliers: int,
    n_outliers: int,
    sigma: float,
    seed: int,
    n_lines: int = 3,
    half_width: float = 1.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points on ``n_lines`` random lines inside ``[-w, w]^2`` plus uniform outliers.

    Each line ``a x + b y + c = 0`` has a unit normal; ``n_inliers`` points are
    spread uniformly along its in-box segment and perturbed by isotropic
    Gaussian noise of scale ``sigma`` (points pushed outside the box are
    redrawn).  Returns ``(points, lines, labels)`` with label ``j + 1`` for
    line ``j`` and ``0`` for outliers.
    """
    rng = np.random.default_rng(seed)
    lines = np.array([_random_line(rng, half_width) for _ in range(n_lines)]).reshape(-1, 3)
    pts, labels = [], []
    for j, line in enumerate(lines):
        foot, d, lo, hi = _segment(line, half_width)
        got = np.zeros((0, 2))
        while got.shape[0] < n_inliers:
            k = n_inliers - got.shape[0]
            t = rng.uniform(lo, hi, k)
            p = foot + t[:, None] * d + sigma * rng.standard_normal((k, 2))
            inside = np.all(np.abs(p) <= half_width, axis=1)
            got = np.vstack([got, p[inside]])
        pts.append(got)
        labels.append(np.full(n_inliers, j + 1))
    pts.append(rng.uniform(-half_width, half_width, (n_outliers, 2)))
    labels.append(np.zeros(n_outliers, dtype=int))
    return np.vstack(pts), lines, np.concatenate(labels).astype(int)
