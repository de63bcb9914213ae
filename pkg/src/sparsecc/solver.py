"""L1-penalized logistic regression for a single penalty value.

Each outer iteration forms the quadratic (Newton) model of the logistic loss at
the current point, minimizes model + L1 penalty by cyclic coordinate descent
with soft-thresholding (:func:`sparsecc.kernels.cd_solve`), and backtracks
along the resulting direction until the true objective decreases. Optimality
is certified by the KKT residual, not by parameter change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from sparsecc import kernels
from sparsecc.model import PROB_CLIP, Dataset, ModelFit, expit, log1pexp

# |eta| beyond this during an unpenalized fit means fitted probabilities within
# ~1e-11 of 0/1: treated as (quasi-)separation.
SEPARATION_ETA = 25.0


class NonConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 10_000
    lambda_floor: float = 1e-10
    warm_start: Optional[ModelFit] = None
    max_sweeps: int = 100_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.lambda_floor < 0:
            raise ValueError("lambda_floor must be nonnegative")

    def with_warm_start(self, fit: Optional[ModelFit]) -> "SolverConfig":
        return replace(self, warm_start=fit)


def _kkt(g0, g, beta, lam):
    res = np.where(beta != 0.0, np.abs(g + lam * np.sign(beta)), np.maximum(0.0, np.abs(g) - lam))
    return abs(g0), res


def _grad(Z, y, eta):
    p = np.clip(expit(eta), PROB_CLIP, 1.0 - PROB_CLIP)
    r = p - y
    N = y.size
    return p, float(r.sum()) / N, Z.T @ r / N


def _objective(eta, y, beta, lam):
    return float(np.mean(log1pexp(eta) - y * eta)) + lam * float(np.abs(beta).sum())


FIRST_CHUNK = 5
MAX_CHUNK = 200


def _subproblem(Z, w, g, g0, beta, coef, lam, max_sweeps, tol):
    """Minimize the penalized quadratic model; ``coef`` is updated in place.

    Coordinate descent runs in growing chunks of sweeps. Between chunks, the model is
    solved exactly on the current active set and signs; that solution is kept
    only if it satisfies the model's optimality conditions, which rescues the
    badly conditioned cases (near-separated data) where coordinate descent
    crawls.
    """
    N = Z.shape[0]
    u = np.zeros(N)
    dd = 0.0
    done = 0
    chunk = FIRST_CHUNK
    while done < max_sweeps:
        chunk = min(chunk, max_sweeps - done)
        step, sweeps = kernels.cd_solve(Z, w, g, g0, coef, u, lam, chunk, tol)
        dd += step
        done += sweeps
        if sweeps < chunk:
            break
        exact = _active_set_solve(Z, w, g, g0, beta, coef, lam, tol)
        if exact is not None:
            dd, coef[:], u = exact
            break
        chunk = min(2 * chunk, MAX_CHUNK)
    return dd


def _active_set_solve(Z, w, g, g0, beta, coef, lam, tol, rounds=10):
    """Exact model minimizer by a few primal active-set corrections, or None."""
    N, M = Z.shape
    signs = np.sign(coef)
    for _ in range(rounds):
        active = np.flatnonzero(signs)
        inactive = np.flatnonzero(signs == 0.0)
        fixed = inactive[beta[inactive] != 0.0]
        offset = -(Z[:, fixed] @ beta[fixed]) if fixed.size else np.zeros(N)
        A = np.column_stack([np.ones(N), Z[:, active]])
        WA = A * w[:, None]
        H = WA.T @ A / N
        rhs = -(np.r_[g0, g[active]] + lam * np.r_[0.0, signs[active]]) - WA.T @ offset / N
        try:
            x = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(x)):
            return None
        new_active = beta[active] + x[1:]
        flipped = np.sign(new_active) != signs[active]
        if np.any(flipped):
            signs[active[flipped]] = 0.0
            continue
        u = x[0] + Z[:, active] @ x[1:] + offset
        part = g[inactive] + Z[:, inactive].T @ (w * u) / N
        excess = np.abs(part) - lam
        if np.any(excess > tol):
            worst = np.argmax(excess)
            signs[inactive[worst]] = -np.sign(part[worst])
            continue
        out = np.zeros(M)
        out[active] = new_active
        return float(x[0]), out, u
    return None


def solve(Z, y, lam, *, tolerance=1e-8, max_iterations=10_000, max_sweeps=100_000,
          delta0=None, beta0=None, stop_on_separation=False):
    """Minimize the penalized objective on a raw design array.

    Returns a dict with keys ``delta, beta, converged, iterations, kkt, trace``
    and ``separated`` (only meaningful with ``stop_on_separation``).
    """
    N, M = Z.shape
    if beta0 is None:
        beta = np.zeros(M)
    else:
        beta = np.array(beta0, dtype=float)
    if delta0 is None:
        ybar = float(y.mean())
        delta = math.log(ybar / (1.0 - ybar))
    else:
        delta = float(delta0)

    eta = delta + Z @ beta
    F = _objective(eta, y, beta, lam)
    trace = [F]
    converged = False
    separated = False
    kkt = math.inf
    it = 0
    while True:
        p, g0, g = _grad(Z, y, eta)
        r0, rj = _kkt(g0, g, beta, lam)
        kkt = max(r0, float(rj.max(initial=0.0)))
        # checked first: on separable data the gradient can vanish numerically
        # while the iterates are still running off to infinity
        if stop_on_separation and float(np.max(np.abs(eta))) > SEPARATION_ETA:
            separated = True
            break
        if kkt <= tolerance:
            converged = True
            break
        if it >= max_iterations:
            break
        it += 1

        w = np.maximum(p * (1.0 - p), PROB_CLIP)
        coef = beta.copy()
        inner_tol = max(min(0.1 * kkt, kkt**1.5), 0.01 * tolerance)
        dd = _subproblem(Z, w, g, g0, beta, coef, lam, max_sweeps, inner_tol)
        d = coef - beta
        l1 = float(np.abs(beta).sum())
        descent = g0 * dd + float(g @ d) + lam * (float(np.abs(coef).sum()) - l1)

        t = 1.0
        accepted = False
        while t > 1e-10:
            if t == 1.0:
                beta_t = coef
            else:
                beta_t = beta + t * d
            delta_t = delta + t * dd
            eta_t = delta_t + Z @ beta_t
            F_t = _objective(eta_t, y, beta_t, lam)
            if F_t <= F + 1e-4 * t * min(descent, 0.0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # numerical floor: no decrease representable along the direction
            break
        beta = np.array(beta_t)
        delta, eta, F = delta_t, eta_t, F_t
        trace.append(F)

    return {
        "delta": delta,
        "beta": beta,
        "converged": converged,
        "iterations": it,
        "kkt": kkt,
        "trace": tuple(trace),
        "separated": separated,
    }


def lambda_max(data: Dataset) -> float:
    """Smallest penalty at which the all-zero coefficient vector is optimal."""
    y = data.y
    ybar = float(y.mean())
    p = np.full(y.size, ybar)
    return float(np.max(np.abs(data.features.T @ (p - y)))) / y.size


def fit_l1_logistic(data: Dataset, lam: float, config: Optional[SolverConfig] = None) -> ModelFit:
    """Global minimizer of the L1-penalized prospective objective at ``lam``.

    ``lam = 0`` is replaced by ``config.lambda_floor`` (flagged) when M >= 2n or
    when the unpenalized iterates show separation. A fit that exhausts
    ``max_iterations`` is returned with ``converged = False``.
    """
    config = config or SolverConfig()
    if not (np.isfinite(lam) and lam >= 0):
        raise ValueError("lambda must be finite and nonnegative")
    flags = []
    warm = config.warm_start
    delta0 = beta0 = None
    if warm is not None:
        if warm.coefficients.shape != (data.M,):
            raise ValueError("warm start has wrong dimension")
        delta0, beta0 = warm.intercept, warm.coefficients

    Z, y = data.features, data.y
    kw = dict(tolerance=config.tolerance, max_iterations=config.max_iterations,
              max_sweeps=config.max_sweeps)
    if lam == 0.0:
        if data.M >= data.n_rows:
            lam = config.lambda_floor
            flags.append("lambda_floor")
        else:
            out = solve(Z, y, 0.0, delta0=delta0, beta0=beta0, stop_on_separation=True, **kw)
            if out["separated"]:
                lam = config.lambda_floor
                flags += ["separation", "lambda_floor"]
            else:
                return _to_fit(data, out, 0.0, flags)
    out = solve(Z, y, lam, delta0=delta0, beta0=beta0, **kw)
    return _to_fit(data, out, lam, flags)


def _to_fit(data, out, lam, flags):
    if not out["converged"]:
        flags = [*flags, "nonconvergence"]
    return ModelFit.build(
        data, out["delta"], out["beta"], lam,
        converged=out["converged"], iterations=out["iterations"],
        kkt_violation=out["kkt"], flags=flags, objective_trace=out["trace"],
    )


def kkt_residual(fit: ModelFit, data: Dataset, per_coordinate=False):
    """Max violation of the subgradient optimality conditions.

    Coordinate j contributes ``|g_j + lam*sign(b_j)|`` when ``b_j != 0`` and
    ``max(0, |g_j| - lam)`` otherwise; the intercept contributes ``|g_0|``.
    With ``per_coordinate=True`` also returns ``(intercept_residual, residuals)``.
    """
    eta = fit.intercept + data.features @ fit.coefficients
    _, g0, g = _grad(data.features, data.y, eta)
    r0, rj = _kkt(g0, g, np.asarray(fit.coefficients), fit.lam)
    value = max(r0, float(rj.max(initial=0.0)))
    if per_coordinate:
        return value, (r0, rj)
    return value


def active_count(fit: ModelFit) -> int:
    return int(np.count_nonzero(fit.coefficients))
