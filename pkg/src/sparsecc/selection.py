"""Dimension-stabilized cross-validation with a BIC-type penalty.

For each fold, a path sketch on the training part gives one support per size
k; the unpenalized refit on that support is scored on the held-out part. The
fold-averaged losses plus ``0.5 * k * log(2n) / (2n)`` pick the model size,
and bisection on the full data finds a penalty with exactly that many
nonzeros.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sparsecc.model import Dataset, ModelFit, expit, log1pexp
from sparsecc.path import BracketInvalid, CountingFitter, PathSketch, bbm, gbm
from sparsecc.solver import SEPARATION_ETA, SolverConfig, solve


class AllDimensionsSkipped(RuntimeError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    p: int
    assignments: np.ndarray

    def holdout_rows(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)

    def train_rows(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != j)


def stratified_folds(data: Dataset, p: int = 10, seed=0) -> FoldPlan:
    """Shuffle each class, then deal its rows round-robin into ``p`` folds.

    Both classes are dealt starting from fold 0, so every fold (and every
    training complement) holds equally many cases and controls.
    """
    n = data.n
    if p < 2 or p > n:
        raise ValueError(f"need 2 <= p <= n, got p={p}, n={n}")
    rng = np.random.default_rng(seed)
    assign = np.empty(data.n_rows, dtype=int)
    for cls in (0, 1):
        rows = np.flatnonzero(data.labels == cls)
        rows = rows[rng.permutation(rows.size)]
        assign[rows] = np.arange(rows.size) % p
    assign.setflags(write=False)
    return FoldPlan(p, assign)


def _newton(Zs, y, tol=1e-12, max_iter=100):
    """Damped Newton for the unpenalized logistic loss with an intercept column."""
    N = y.size
    A = np.column_stack([np.ones(N), Zs])
    theta = np.zeros(A.shape[1])
    ybar = float(y.mean())
    theta[0] = math.log(ybar / (1 - ybar))

    def loss(th):
        eta = A @ th
        return float(np.mean(log1pexp(eta) - y * eta)), eta

    F, eta = loss(theta)
    for it in range(1, max_iter + 1):
        p = expit(eta)
        g = A.T @ (p - y) / N
        if np.max(np.abs(g)) <= tol:
            return theta, True, False, it - 1, float(np.max(np.abs(g)))
        if np.max(np.abs(eta)) > SEPARATION_ETA:
            return theta, False, True, it, float(np.max(np.abs(g)))
        H = (A * (p * (1 - p))[:, None]).T @ A / N
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return theta, False, True, it, float(np.max(np.abs(g)))
        t = 1.0
        while t > 1e-12:
            F_t, eta_t = loss(theta - t * step)
            if F_t <= F - 1e-4 * t * float(g @ step):
                break
            t *= 0.5
        else:
            # no representable decrease left
            return theta, bool(np.max(np.abs(g)) <= 1e-8), False, it, float(np.max(np.abs(g)))
        theta = theta - t * step
        F, eta = F_t, eta_t
    p = expit(eta)
    g = A.T @ (p - y) / N
    return theta, bool(np.max(np.abs(g)) <= tol), False, max_iter, float(np.max(np.abs(g)))


def refit_mle(data: Dataset, support: Sequence[int], config: Optional[SolverConfig] = None) -> ModelFit:
    """Unpenalized logistic fit using only the ``support`` columns.

    Under separation, falls back to the L1 fit at ``config.lambda_floor`` on the
    same columns and flags the result.
    """
    config = config or SolverConfig()
    support = sorted(int(j) for j in support)
    if len(support) + 1 >= data.n_rows:
        raise ValueError("support too large for the available rows")
    Zs = np.asfortranarray(data.features[:, support])
    y = data.y
    theta, ok, separated, iters, gmax = _newton(Zs, y)
    flags = []
    lam = 0.0
    if separated:
        out = solve(Zs, y, config.lambda_floor, tolerance=config.tolerance,
                    max_iterations=config.max_iterations, max_sweeps=config.max_sweeps)
        theta = np.r_[out["delta"], out["beta"]]
        ok, iters, gmax = out["converged"], out["iterations"], out["kkt"]
        lam = config.lambda_floor
        flags += ["separation", "lambda_floor"]
    if not ok:
        flags.append("nonconvergence")
    beta = np.zeros(data.M)
    beta[support] = theta[1:]
    return ModelFit.build(data, theta[0], beta, lam, converged=ok, iterations=iters,
                          kkt_violation=gmax, flags=flags)


def cv_log_loss(fit: ModelFit, holdout) -> float:
    """Mean negative prospective log-likelihood of ``fit`` on held-out rows.

    ``holdout`` needs ``raw`` features and ``labels``; the fit is applied on
    the raw scale, so it may come from a differently standardized dataset.
    """
    raw = np.asarray(holdout.raw, dtype=float)
    y = np.asarray(holdout.labels, dtype=float)
    eta = fit.intercept_raw + raw @ np.asarray(fit.coefficients_raw)
    return float(np.mean(log1pexp(eta) - y * eta))


@dataclass(frozen=True)
class Holdout:
    raw: np.ndarray
    labels: np.ndarray


def bic_penalty(k: int, n_rows: int) -> float:
    return 0.5 * k * math.log(n_rows) / n_rows


@dataclass
class SelectionResult:
    k_hat: int
    criterion: Dict[int, float]
    cv_loss: Dict[int, float]
    cv_trace: List[dict]
    final_r: Optional[float]
    final_fit: ModelFit
    skipped_k: List[int]
    degraded: bool = False
    flags: Tuple[str, ...] = ()
    solver_calls: int = 0

    @property
    def support(self) -> tuple:
        return self.final_fit.active_set

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "support": list(self.support),
            "criterion": {str(k): v for k, v in sorted(self.criterion.items())},
            "cv_loss": {str(k): v for k, v in sorted(self.cv_loss.items())},
            "cv_trace": self.cv_trace,
            "final_r": self.final_r,
            "final_fit": self.final_fit.to_dict(),
            "skipped_k": self.skipped_k,
            "degraded": self.degraded,
            "flags": list(self.flags),
            "solver_calls": self.solver_calls,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _locate(data: Dataset, sketch: PathSketch, k: int, alpha: float, config: SolverConfig):
    """Penalty with exactly ``k`` nonzeros on ``data`` by bisection between sketch neighbours."""
    if k in sketch.entries:
        r, fit = sketch.entries[k]
        return r, fit, 0
    fitter = CountingFitter(data, config)
    known = sorted(sketch.entries.items())
    lo = [(kk, rf) for kk, rf in known if kk < k]
    hi = [(kk, rf) for kk, rf in known if kk > k]
    z0, warm = lo[-1][1] if lo else (sketch.lambda_max, None)
    z1 = hi[0][1][0] if hi else sketch.lambda_floor
    cache: Dict[float, ModelFit] = {z0: warm} if warm is not None else {}
    if hi:
        cache[z1] = hi[0][1][1]

    def h(lam):
        if lam not in cache:
            near = max((x for x in cache if x > lam), default=None)
            cache[lam] = fitter(lam, cache.get(near))
        return cache[lam].active_count - k

    try:
        r = bbm(h, z0, z1, alpha)
    except BracketInvalid:
        return None, None, fitter.calls
    h(r)
    return r, cache[r], fitter.calls


def _lower_edge(data: Dataset, sketch: PathSketch, k: int, r: float, fit: ModelFit,
                alpha: float, config: SolverConfig):
    """Smallest penalty (to within ``alpha``) below ``r`` that still keeps ``k`` nonzeros.

    Every penalty in the size-k interval is a valid answer to step 4; the
    lower end carries the least shrinkage.
    """
    fitter = CountingFitter(data, config)
    bigger = [rf[0] for kk, rf in sketch.entries.items() if kk > k and rf[0] < r]
    lo = max(bigger, default=sketch.lambda_floor)
    hi = r
    while hi - lo > alpha:
        mid = 0.5 * (hi + lo)
        trial = fitter(mid, fit)
        if trial.active_count == k and trial.converged:
            hi, fit = mid, trial
        else:
            lo = mid
    return hi, fit, fitter.calls


def select(data: Dataset, p: int = 10, alpha: Optional[float] = None, seed=0,
           config: Optional[SolverConfig] = None, k_max: Optional[int] = None,
           lower_edge: bool = True) -> SelectionResult:
    """Choose a model size by fold-averaged held-out loss plus a BIC-type term.

    ``alpha`` is the bisection accuracy; by default ``1e-4 * lambda_max`` of
    each dataset the sketch is built on. ``k_max`` caps the sizes explored.
    With ``lower_edge`` the final penalty is pushed down to the smallest value
    that still gives ``k_hat`` nonzeros (within ``alpha``), which removes most
    of the shrinkage bias without changing the support size.
    """
    config = config or SolverConfig()
    plan = stratified_folds(data, p, seed)
    trace = []
    per_k: Dict[int, Dict[int, float]] = {}
    calls = 0
    cap = None
    for j in range(p):
        train = data.subset(plan.train_rows(j))
        rows = plan.holdout_rows(j)
        hold = Holdout(data.raw[rows], data.labels[rows])
        sketch = gbm(train, alpha, config, k_max)
        calls += sketch.solver_calls
        cap = sketch.k_max if cap is None else min(cap, sketch.k_max)
        for k in sorted(sketch.entries):
            r, fit = sketch.entries[k]
            refit = refit_mle(train, fit.active_set, config)
            loss = cv_log_loss(refit, hold)
            per_k.setdefault(k, {})[j] = loss
            trace.append({"k": k, "fold": j, "r": r, "support": list(fit.active_set),
                          "loss": loss})

    found = sorted(k for k, d in per_k.items() if len(d) == p)
    skipped = sorted(k for k in range(cap + 1) if k not in found)
    cv_loss = {k: float(np.mean([per_k[k][j] for j in range(p)])) for k in found}
    criterion = {k: cv_loss[k] + bic_penalty(k, data.n_rows) for k in found}

    full = gbm(data, alpha, config, k_max)
    calls += full.solver_calls
    flags = []
    if not criterion:
        flags.append("all_dimensions_skipped")
        r, fit = full.entries.get(0, (None, None))
        if fit is None:
            raise AllDimensionsSkipped("no model size was found in every fold")
        return SelectionResult(0, {}, {}, trace, r, fit, skipped, True, tuple(flags), calls)

    k_hat = min(criterion, key=lambda k: (criterion[k], k))
    fine = (alpha if alpha is not None else 1e-4 * full.lambda_max) * 1e-3
    r, fit, extra = _locate(data, full, k_hat, fine, config)
    calls += extra
    degraded = False
    if fit is None or fit.active_count != k_hat or not fit.converged:
        degraded = True
        flags.append("final_size_not_reached")
        if fit is None:
            r, fit = full.entries[0]
    elif lower_edge:
        step = alpha if alpha is not None else 1e-4 * full.lambda_max
        r, fit, extra = _lower_edge(data, full, k_hat, r, fit, step, config)
        calls += extra
    return SelectionResult(k_hat, criterion, cv_loss, trace, r, fit, skipped, degraded,
                           tuple(flags), calls)
