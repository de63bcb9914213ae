"""Sparsity-indexed regularization path sketches by bisection.

:func:`bbm` is plain bisection on a sign change. :func:`gbm` runs a FIFO queue
of penalty intervals and keeps, for every support size k it meets, the first
penalty value whose fit has exactly k nonzeros. :func:`grid_path` is the
geometric-grid baseline used to compare at equal solver budget.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from sparsecc.model import Dataset, GroundTruth, ModelFit
from sparsecc.solver import SolverConfig, fit_l1_logistic, lambda_max


class BracketInvalid(ValueError):
    """``h(z0) * h(z1) > 0``: no sign change to bisect on."""


def bbm(h: Callable[[float], float], z0: float, z1: float, alpha: float) -> float:
    """Bisection for a root of ``h`` between ``z0`` and ``z1``.

    Returns a point where ``h`` is exactly zero, or the midpoint of the last
    bracket once the bracket is narrower than ``alpha``. ``h`` may be a step
    function; only the signs of its values are used.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    h0 = h(z0)
    if h0 == 0:
        return z0
    h1 = h(z1)
    if h1 == 0:
        return z1
    if h0 * h1 > 0:
        raise BracketInvalid(f"h({z0})={h0} and h({z1})={h1} have the same sign")
    while True:
        z = 0.5 * (z0 + z1)
        if abs(z1 - z0) < alpha:
            return z
        hz = h(z)
        if hz == 0:
            return z
        if hz * h0 < 0:
            z1, h1 = z, hz
        else:
            z0, h0 = z, hz


class CountingFitter:
    """Wraps :func:`fit_l1_logistic` with a call counter and warm starts."""

    def __init__(self, data: Dataset, config: Optional[SolverConfig] = None):
        self.data = data
        self.config = config or SolverConfig()
        self.calls = 0

    def __call__(self, lam: float, warm: Optional[ModelFit] = None) -> ModelFit:
        self.calls += 1
        return fit_l1_logistic(self.data, lam, self.config.with_warm_start(warm))


@dataclass
class PathSketch:
    entries: Dict[int, Tuple[float, ModelFit]]
    k_max: int
    alpha: float
    solver_calls: int
    lambda_max: float
    lambda_floor: float
    # (lambda, k) for every solver call, in call order
    evaluations: List[Tuple[float, int]] = field(default_factory=list)

    @property
    def missing(self) -> List[int]:
        return [k for k in range(self.k_max + 1) if k not in self.entries]

    def fits(self):
        return [self.entries[k][1] for k in sorted(self.entries)]

    def r(self, k: int) -> float:
        """Penalty for support size k, or -1 when none was found."""
        return self.entries[k][0] if k in self.entries else -1.0


@dataclass
class GridPath:
    grid: np.ndarray
    fits: List[ModelFit]
    solver_calls: int


def default_k_max(data: Dataset, cap: Optional[int] = None) -> int:
    k = min(data.M, data.n_rows - 1)
    if cap is not None:
        k = min(k, int(cap))
    return k


def gbm(data: Dataset, alpha: Optional[float] = None, config: Optional[SolverConfig] = None,
        k_max: Optional[int] = None) -> PathSketch:
    """Generalized bisection over penalty values for all support sizes 0..k_max.

    The left end is ``lambda_max`` (fitted, giving k = 0) and the right end is
    ``config.lambda_floor``, which is assigned M nonzeros without a fit. Each
    popped pair ``(a, b)`` is fitted at its midpoint ``r``; ``(a, r)`` and
    ``(r, b)`` are re-queued when their counts differ by more than one, they
    are wider than ``alpha``, and a size <= k_max can still lie between them.

    ``alpha`` defaults to ``1e-4 * lambda_max``.
    """
    config = config or SolverConfig()
    k_max = default_k_max(data) if k_max is None else min(int(k_max), data.M)
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    fitter = CountingFitter(data, config)
    lmax = lambda_max(data)
    if alpha is None:
        alpha = 1e-4 * lmax
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    floor = config.lambda_floor

    entries: Dict[int, Tuple[float, ModelFit]] = {}
    counts: Dict[float, int] = {}
    fits: Dict[float, ModelFit] = {}
    evaluations = []

    fit0 = fitter(lmax)
    counts[lmax] = fit0.active_count
    fits[lmax] = fit0
    evaluations.append((lmax, fit0.active_count))
    if fit0.converged and fit0.active_count <= k_max:
        entries[fit0.active_count] = (lmax, fit0)
    counts[floor] = data.M

    def wanted(k1, k2):
        return abs(k1 - k2) > 1 and min(k1, k2) + 1 <= k_max

    queue = deque()
    if k_max > 0 and lmax > floor:
        queue.append((lmax, floor))
    while queue:
        a, b = queue.popleft()
        r = 0.5 * (a + b)
        # warm start from the larger-penalty end, which always has a fit
        fit = fitter(r, fits.get(a))
        k = fit.active_count
        counts[r] = k
        fits[r] = fit
        evaluations.append((r, k))
        if fit.converged and k <= k_max and k not in entries:
            entries[k] = (r, fit)
        if wanted(counts[a], k) and abs(a - r) > alpha:
            queue.append((a, r))
        if wanted(counts[b], k) and abs(b - r) > alpha:
            queue.append((r, b))
        # endpoints still referenced by queued pairs
        live = {x for pair in queue for x in pair}
        for key in [x for x in fits if x not in live]:
            del fits[key]

    return PathSketch(entries, k_max, float(alpha), fitter.calls, lmax, floor, evaluations)


def grid_path(data: Dataset, budget: int, config: Optional[SolverConfig] = None) -> GridPath:
    """Fits at ``budget`` penalties geometrically spaced from lambda_max down to the floor.

    Fits are warm-started along the decreasing grid.
    """
    if budget < 2:
        raise ValueError("budget must be >= 2")
    config = config or SolverConfig()
    lmax = lambda_max(data)
    floor = config.lambda_floor
    if not floor > 0:
        raise ValueError("grid needs a positive lambda_floor")
    grid = np.geomspace(lmax, floor, int(budget))
    fitter = CountingFitter(data, config)
    fits = []
    prev = None
    for lam in grid:
        prev = fitter(float(lam), prev)
        fits.append(prev)
    return GridPath(grid, fits, fitter.calls)


def support_in_path(path, truth: GroundTruth) -> bool:
    """True when some fit in the path has exactly the true support."""
    target = tuple(truth.support)
    fits = path.fits() if isinstance(path, PathSketch) else path.fits
    return any(tuple(f.active_set) == target for f in fits)


def write_sketch_csv(path, sketch: PathSketch):
    """One row per k in 0..k_max; missing sizes carry ``r_k = -1``."""
    cum = {}
    for i, (lam, k) in enumerate(sketch.evaluations, start=1):
        cum.setdefault(lam, i)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "r_k", "objective", "solver_calls_cum", "active_set", "missing"])
        for k in range(sketch.k_max + 1):
            if k in sketch.entries:
                r, fit = sketch.entries[k]
                w.writerow([k, repr(r), repr(fit.objective_value), cum.get(r, ""),
                            ";".join(str(j) for j in fit.active_set), 0])
            else:
                w.writerow([k, "-1", "", "", "", 1])
