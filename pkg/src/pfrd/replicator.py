"""Replicator iterations on the capped simplex and the path-following driver.

One step maps ``x`` to ``project_truncated(x * g(x), eps)``.  Holding ``eps``
fixed and iterating to a fixed point solves the capped problem locally;
sweeping ``eps`` upward through a :class:`PathSchedule` and warm-starting
each stage from the previous one traces the solution path.  With the single
schedule entry ``eps = 1`` this is the classical discrete replicator dynamic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Iterator, Sequence

import numpy as np

from .graph import GradientField
from .projection import CappedSimplexSpec, DegenerateProjectionError, _truncated

log = logging.getLogger(__name__)

_EPS_TOL = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Point of the capped simplex together with its cap."""

    x: np.ndarray
    epsilon: float

    @classmethod
    def uniform(cls, n: int, epsilon: float = 1.0) -> "StateVector":
        return cls(np.full(n, 1.0 / n), epsilon)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x > 0)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.x))

    def validate(self, tol: float = 1e-9) -> None:
        x = self.x
        if abs(x.sum() - 1.0) > tol or np.any(x < 0) or np.any(x > self.epsilon):
            raise ValueError(f"state is not in the capped simplex for epsilon={self.epsilon!r}")


@dataclass(frozen=True)
class PathSchedule:
    """Strictly increasing caps ``eps_1 < ... < eps_m`` in ``(0, 1]``."""

    samples: tuple[float, ...]

    def __post_init__(self):
        s = tuple(float(v) for v in self.samples)
        object.__setattr__(self, "samples", s)
        if not s:
            raise ValueError("schedule is empty")
        for i, v in enumerate(s):
            if not (0 < v <= 1):
                raise ValueError(f"schedule entry {i} ({v!r}) is outside (0, 1]")
            if i and v <= s[i - 1]:
                raise ValueError(f"schedule entry {i} ({v!r}) does not increase")

    def check_feasible(self, n: int) -> None:
        if self.samples[0] * n < 1 - _EPS_TOL:
            raise ValueError(
                f"first schedule entry {self.samples[0]!r} is below 1/n for n={n}"
            )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True)
class IterationConfig:
    delta2: float = 1e-4
    delta3: float = 1e-12
    prune: bool = False
    max_iters: int = 10000

    def __post_init__(self):
        if not (0 < self.delta3 < self.delta2):
            raise ValueError("need 0 < delta3 < delta2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class PathEntry:
    epsilon: float
    x: np.ndarray
    f_value: float
    iterations: int
    converged: bool

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.x))

    @property
    def state(self) -> StateVector:
        return StateVector(self.x, self.epsilon)


@dataclass(frozen=True)
class SolutionPath:
    entries: tuple[PathEntry, ...] = dc_field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[PathEntry]:
        return iter(self.entries)

    def __getitem__(self, i: int) -> PathEntry:
        return self.entries[i]

    @property
    def final(self) -> PathEntry:
        return self.entries[-1]


@dataclass(frozen=True)
class KktReport:
    """First-order diagnostics of ``(x, g(x))`` on the capped simplex.

    ``lam`` is the mean gradient over interior components, or the smallest
    capped gradient when there are none.  Statistics over an empty class
    are ``None``.
    """

    lam: float
    interior_deviation: float | None
    cap_slack: float | None
    zero_excess: float | None
    n_interior: int
    n_capped: int
    n_zero: int

    def fixed_point_conditions_hold(self, rel_tol: float) -> bool:
        """Interior gradients equal and capped gradients no smaller, within ``rel_tol * lam``."""
        tol = rel_tol * abs(self.lam)
        if self.interior_deviation is not None and self.interior_deviation > tol:
            return False
        if self.cap_slack is not None and self.cap_slack < -tol:
            return False
        return True

    def is_kkt(self, rel_tol: float) -> bool:
        tol = rel_tol * abs(self.lam)
        return self.fixed_point_conditions_hold(rel_tol) and (
            self.zero_excess is None or self.zero_excess <= tol
        )


def _check_field_state(field: GradientField, x: np.ndarray, eps: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (field.n,):
        raise ValueError(f"state has shape {x.shape}, field has {field.n} vertices")
    CappedSimplexSpec(field.n, eps)
    StateVector(x, eps).validate()
    return x


def _p_eps(field: GradientField, x: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    f, g = field.objective_and_gradient(x)
    return _truncated(x * g, eps), f


def step(field: GradientField, state: StateVector) -> StateVector:
    """Apply the projected multiplicative update once."""
    x = _check_field_state(field, state.x, state.epsilon)
    nxt, _ = _p_eps(field, x, state.epsilon)
    return StateVector(nxt, state.epsilon)


class _Workspace:
    """Current iterate, possibly restricted to a shrinking active vertex set.

    Zero components never revive, so once pruning has removed enough
    vertices the field is replaced by its restriction to the support.
    """

    def __init__(self, field: GradientField, x: np.ndarray):
        self.full_n = field.n
        self.field = field
        self.index: np.ndarray | None = None
        self.x = x

    def maybe_shrink(self) -> None:
        nz = np.flatnonzero(self.x)
        if nz.size * 2 > self.x.size or nz.size == 0:
            return
        self.field = self.field.restrict(nz)
        self.index = nz if self.index is None else self.index[nz]
        self.x = self.x[nz]

    def full(self) -> np.ndarray:
        if self.index is None:
            return self.x.copy()
        out = np.zeros(self.full_n)
        out[self.index] = self.x
        return out


def _evolve(ws: _Workspace, eps: float, cfg: IterationConfig, trace: list | None) -> tuple[int, bool]:
    x = ws.x
    for it in range(1, cfg.max_iters + 1):
        nxt, f = _p_eps(ws.field, x, eps)
        if trace is not None:
            trace.append(f)
        if cfg.prune:
            small = (nxt > 0) & (nxt < cfg.delta3)
            if small.any():
                nxt[small] = 0.0
                nxt = _truncated(nxt, eps)
        change = float(np.abs(nxt - x).sum())
        x = nxt
        ws.x = x
        if cfg.prune:
            ws.maybe_shrink()
            x = ws.x
        if change < cfg.delta2:
            if trace is not None:
                trace.append(float(x @ ws.field.gradient(x)))
            return it, True
    if trace is not None:
        trace.append(float(x @ ws.field.gradient(x)))
    return cfg.max_iters, False


def evolve_fixed_epsilon(
    field: GradientField,
    init: StateVector,
    cfg: IterationConfig = IterationConfig(),
    trace: list | None = None,
) -> tuple[StateVector, int, bool]:
    """Iterate at a fixed cap until the l1 change drops below ``delta2``.

    Returns the final state, the number of steps taken and whether the
    threshold was met within ``max_iters``.  If ``trace`` is a list, the
    objective of every visited iterate is appended to it.
    """
    x = _check_field_state(field, init.x, init.epsilon).copy()
    ws = _Workspace(field, x)
    iters, ok = _evolve(ws, init.epsilon, cfg, trace)
    return StateVector(ws.full(), init.epsilon), iters, ok


def iter_pfrd(
    field: GradientField,
    schedule: PathSchedule,
    cfg: IterationConfig = IterationConfig(),
    traces: list | None = None,
) -> Iterator[PathEntry]:
    """Yield one converged entry per schedule value, as soon as it is ready.

    If ``traces`` is a list, one list of per-iteration objective values is
    appended to it for every stage.
    """
    n = field.n
    schedule.check_feasible(n)
    ws = _Workspace(field, np.full(n, 1.0 / n))
    for eps in schedule:
        if np.any(ws.x > eps * (1 + _EPS_TOL)):
            # caps only loosen along the schedule, so this is unreachable
            raise RuntimeError(f"warm start violates the cap at epsilon={eps!r}")
        trace = [] if traces is not None else None
        iters, ok = _evolve(ws, eps, cfg, trace)
        if traces is not None:
            traces.append(trace)
        if not ok:
            log.warning("no convergence at epsilon=%g after %d iterations", eps, iters)
        x = ws.full()
        f = float(x @ field.gradient(x))
        yield PathEntry(eps, x, f, iters, ok)


def run_pfrd(
    field: GradientField,
    schedule: PathSchedule,
    cfg: IterationConfig = IterationConfig(),
    traces: list | None = None,
) -> SolutionPath:
    """Follow the solution path from the uniform vector through ``schedule``."""
    return SolutionPath(tuple(iter_pfrd(field, schedule, cfg, traces)))


def run_drd(
    field: GradientField, cfg: IterationConfig = IterationConfig(), trace: list | None = None
) -> tuple[StateVector, int, bool]:
    """Discrete replicator dynamic from the uniform vector (schedule ``{1}``)."""
    traces = [] if trace is not None else None
    entry = run_pfrd(field, PathSchedule((1.0,)), cfg, traces).final
    if trace is not None:
        trace.extend(traces[0])
    return entry.state, entry.iterations, entry.converged


def verify_fixed_point(field: GradientField, x, epsilon: float, tol: float = 1e-8) -> bool:
    """True iff one update moves ``x`` by at most ``tol`` in l1.

    False when the update itself is undefined (``x * g`` has fewer than
    ``ceil(1/epsilon)`` positive entries, e.g. a capped isolated vertex).
    """
    x = _check_field_state(field, x, epsilon)
    try:
        nxt, _ = _p_eps(field, x, epsilon)
    except DegenerateProjectionError:
        return False
    return bool(np.abs(nxt - x).sum() <= tol)


def kkt_report(
    field: GradientField, x, epsilon: float, zero_tol: float = 0.0, cap_tol: float = 1e-12
) -> KktReport:
    """Split indices into zero / interior / capped classes and measure ``g``.

    Components ``<= zero_tol`` count as zero and components within relative
    ``cap_tol`` of ``epsilon`` count as capped.
    """
    x = _check_field_state(field, x, epsilon)
    g = field.gradient(x)
    zero = x <= zero_tol
    capped = ~zero & (x >= epsilon * (1 - cap_tol))
    interior = ~zero & ~capped
    if interior.any():
        lam = float(g[interior].mean())
    elif capped.any():
        lam = float(g[capped].min())
    else:
        lam = 0.0
    return KktReport(
        lam=lam,
        interior_deviation=float(np.abs(g[interior] - lam).max()) if interior.any() else None,
        cap_slack=float((g[capped] - lam).min()) if capped.any() else None,
        zero_excess=float((g[zero] - lam).max()) if zero.any() else None,
        n_interior=int(interior.sum()),
        n_capped=int(capped.sum()),
        n_zero=int(zero.sum()),
    )


def reciprocal_schedule(
    k_start: int, k_end: int, step: int = 1, append_one: bool = False
) -> PathSchedule:
    """Caps ``1/k`` for ``k = k_start, k_start - step, ...`` down to ``k_end``.

    ``k_end`` is always included even when ``step`` does not divide the
    range.  ``reciprocal_schedule(990, 10, 10, append_one=True)`` gives the
    100-entry sweep ``1/990, 1/980, ..., 1/10, 1``.
    """
    if step < 1:
        raise ValueError("step must be a positive integer")
    if k_end < 1 or k_start < k_end:
        raise ValueError(f"need k_start >= k_end >= 1, got {k_start}, {k_end}")
    ks = list(range(k_start, k_end - 1, -step))
    if ks[-1] != k_end:
        ks.append(k_end)
    values = [1.0 / k for k in ks]
    if append_one and values[-1] < 1.0:
        values.append(1.0)
    return PathSchedule(tuple(values))


def make_schedule(kind: str, **params) -> PathSchedule:
    """Build a schedule: ``reciprocal`` (k_start, k_end, step, append_one),
    ``explicit`` (values) or ``target`` (k, a single cap ``1/k``)."""
    if kind == "reciprocal":
        return reciprocal_schedule(
            int(params["k_start"]),
            int(params["k_end"]),
            int(params.get("step", 1)),
            bool(params.get("append_one", False)),
        )
    if kind == "explicit":
        return PathSchedule(tuple(params["values"]))
    if kind == "target":
        k = int(params["k"])
        if k < 1:
            raise ValueError("target size must be positive")
        return PathSchedule((1.0 / k,))
    raise ValueError(f"unknown schedule kind {kind!r}")


def min_support(epsilon: float) -> int:
    """Smallest support any point of the capped simplex can have."""
    return int(math.ceil(1.0 / epsilon - 1e-9))


def merge_schedules(*schedules: Sequence[float]) -> PathSchedule:
    values = sorted({float(v) for s in schedules for v in s})
    return PathSchedule(tuple(values))
