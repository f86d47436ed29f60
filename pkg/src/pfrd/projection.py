"""Truncated simplex projection onto the capped simplex.

The capped simplex ``{x : sum(x) = 1, 0 <= x_i <= eps}`` is nonempty for
``1/n <= eps <= 1``.  The map implemented here is *not* the Euclidean
projection: the largest components are pinned to ``eps`` and the remainder
is rescaled multiplicatively, so zero entries stay zero and the relative
sizes of the uncapped entries are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# slack for comparing eps against 1/n and for the oracle's boundary tests
_FEAS_TOL = 1e-12


class DegenerateProjectionError(ValueError):
    """The input has too little positive mass to be projected.

    Raised for an all-zero input, or when fewer than ``ceil(1/eps)``
    components are positive so no point of the capped simplex has the
    same support.
    """


@dataclass(frozen=True)
class CappedSimplexSpec:
    n: int
    epsilon: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if not (self.epsilon <= 1.0 and self.n * self.epsilon >= 1.0 - _FEAS_TOL):
            raise ValueError(
                f"epsilon={self.epsilon!r} outside [1/n, 1] for n={self.n}; capped simplex is empty"
            )


def _as_input(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("input must be a vector")
    if n is not None and y.size != n:
        raise ValueError(f"expected length {n}, got {y.size}")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("input must be finite and nonnegative")
    if not np.any(y > 0):
        raise DegenerateProjectionError("all-zero input has no projection")
    return y


def _truncated(y: np.ndarray, eps: float) -> np.ndarray:
    # descending sort, ties by ascending index (stable sort on -y)
    order = np.argsort(-y, kind="stable")
    ys = y[order]
    n = ys.size
    # tail[i] = sum of ys[i:], the running z after i components went to U
    tail = np.cumsum(ys[::-1])[::-1]
    if eps >= 1.0:
        n_cap = 0
    else:
        i = np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            chi = (1.0 - i * eps) * ys / tail
        # the scan stops at the first component that fits under the cap
        fails = np.flatnonzero(~(chi >= eps))
        n_cap = int(fails[0]) if fails.size else n
    out = np.empty(n)
    out[:n_cap] = eps
    if n_cap < n:
        z = tail[n_cap]
        rest = 1.0 - n_cap * eps
        if z <= 0.0:
            if rest > _FEAS_TOL:
                raise DegenerateProjectionError(
                    f"only {np.count_nonzero(ys)} positive components; "
                    f"epsilon={eps!r} needs at least {int(np.ceil(1 / eps - 1e-9))}"
                )
            out[n_cap:] = 0.0
        else:
            # ratio first: z may be tiny enough for rest / z to overflow
            out[n_cap:] = (ys[n_cap:] / z) * rest
            # a rescaled entry can land one ulp above the cap
            np.minimum(out[n_cap:], eps, out=out[n_cap:])
    x = np.empty(n)
    x[order] = out
    return x


def project_truncated(y, spec: CappedSimplexSpec | float) -> np.ndarray:
    """Project a nonnegative vector onto the capped simplex.

    ``spec`` may be a :class:`CappedSimplexSpec` or a bare cap ``epsilon``.

    >>> project_truncated([0.5, 0.3, 0.2], 0.4).round(12).tolist()
    [0.4, 0.36, 0.24]
    """
    eps = spec.epsilon if isinstance(spec, CappedSimplexSpec) else float(spec)
    y = _as_input(y)
    CappedSimplexSpec(y.size, eps)
    return _truncated(y, eps)


def project_simplex(y) -> np.ndarray:
    """l1 normalisation; the ``epsilon = 1`` case of :func:`project_truncated`."""
    y = _as_input(y)
    return y / y.sum()


@lru_cache(maxsize=32)
def _subset_masks(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # laid out (n, 2**n) so reductions run along the long axis
    codes = np.arange(1 << n, dtype=np.int64)
    masks = ((codes[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
    outside = (~masks).astype(np.float64)
    masks.setflags(write=False)
    outside.setflags(write=False)
    return masks, outside, masks.sum(axis=0)


def oracle_project_truncated(y, spec: CappedSimplexSpec | float) -> np.ndarray:
    """Reference projection by exhaustive search over cap sets.

    Every subset ``U`` of indices is tested against the two defining
    conditions: entries of ``y`` in ``U`` are no smaller than entries outside
    it, no entry outside ``U`` exceeds the cap after rescaling, and no entry
    of ``U`` would drop below the cap if it were moved back among the rescaled
    entries.  Comparisons carry a ``1e-12`` relative slack so that boundary
    cases accepted by either rounding are both admitted; the smallest
    admissible ``U`` is returned.  Limited to ``n <= 16``.
    """
    eps = spec.epsilon if isinstance(spec, CappedSimplexSpec) else float(spec)
    y = _as_input(y)
    n = y.size
    if n > 16:
        raise ValueError("oracle is limited to 16 dimensions")
    CappedSimplexSpec(n, eps)
    tol = _FEAS_TOL
    masks, outside, size = _subset_masks(n)
    z_v = y @ outside
    rest = 1.0 - size * eps
    col = y[:, None]
    min_u = np.where(masks, col, np.inf).min(axis=0)
    max_v = np.where(masks, -np.inf, col).max(axis=0)

    ok = rest >= -tol
    ok &= min_u >= max_v
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(z_v > 0, rest / z_v, np.inf)
        # largest rescaled outside entry must sit under the cap
        v_ok = np.where(z_v > 0, scale * max_v <= eps * (1 + tol), np.abs(rest) <= tol)
        # each u, if rescaled together with V, would still reach the cap;
        # c*y/(z+y) grows with y, so the smallest member of U is the binding one
        moved = (rest + eps) * min_u / (z_v + min_u)
        u_ok = (size == 0) | (moved >= eps * (1 - tol))
    ok &= v_ok & u_ok
    candidates = np.flatnonzero(ok)
    if candidates.size == 0:
        raise DegenerateProjectionError("no admissible cap set")
    best = candidates[np.argmin(size[candidates])]
    m = masks[:, best]
    x = np.zeros(n)
    x[m] = eps
    if z_v[best] > 0:
        x[~m] = (y[~m] / z_v[best]) * rest[best]
    return x


def in_capped_simplex(x, eps: float, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=np.float64)
    return bool(abs(x.sum() - 1.0) <= tol and np.all(x >= 0) and np.all(x <= eps))
