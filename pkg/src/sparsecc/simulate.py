"""Simulated case-control data.

Features come from one of three marginals (SNP-like three-point, iid normal,
AR(1)-correlated normal). Disease status follows a logistic model whose
intercept is calibrated numerically to a target prevalence; cases and controls
are collected by routing population draws until each pool holds n rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from sparsecc.model import Dataset, GroundTruth, expit
from sparsecc.path import bbm

KINDS = ("snp", "nor_iid", "nor_corr")
SQRT2 = math.sqrt(2.0)


class DrawBudgetExceeded(RuntimeError):
    pass


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class MarginalSpec:
    kind: str
    M: int
    sigma2: float = 1.0
    rho: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.M < 1:
            raise ValueError("M must be positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")

    def covariance(self, columns: Optional[Sequence[int]] = None) -> np.ndarray:
        idx = np.arange(self.M) if columns is None else np.asarray(columns)
        if self.kind == "nor_corr":
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        var = 1.0 if self.kind == "snp" else self.sigma2
        return var * np.eye(idx.size)


def _draw(spec: MarginalSpec, count: int, rng, columns=None) -> np.ndarray:
    m = spec.M if columns is None else len(columns)
    if spec.kind == "snp":
        # {-sqrt2, 0, sqrt2} with probabilities {1/4, 1/2, 1/4}
        u = rng.integers(0, 4, size=(count, m))
        return np.select([u == 0, u == 3], [-SQRT2, SQRT2], 0.0)
    if spec.kind == "nor_iid":
        return math.sqrt(spec.sigma2) * rng.standard_normal((count, m))
    L = np.linalg.cholesky(spec.covariance(columns))
    return rng.standard_normal((count, m)) @ L.T


def sample_marginal(spec: MarginalSpec, count: int, seed) -> np.ndarray:
    """``count`` iid rows from the marginal feature distribution."""
    return _draw(spec, int(count), _rng(seed))


def _linear_predictor_sample(spec, beta_star, mc, rng, chunk=200_000):
    beta_star = np.asarray(beta_star, dtype=float)
    support = np.flatnonzero(beta_star)
    out = np.zeros(int(mc))
    if support.size == 0:
        return out
    # only the support columns enter the predictor; their joint law is the
    # marginal restricted to those columns
    b = beta_star[support]
    for start in range(0, int(mc), chunk):
        stop = min(int(mc), start + chunk)
        out[start:stop] = _draw(spec, stop - start, rng, support) @ b
    return out


def calibrate_delta0(spec: MarginalSpec, beta_star, pi: float, mc: int = 1_000_000,
                     seed=0, tol: float = 1e-10) -> float:
    """Intercept giving population prevalence ``pi``, by bisection on [-50, 50].

    Solves ``mean(expit(d + beta'X)) = pi`` over one fixed Monte Carlo sample.
    """
    if not 0.0 < pi < 1.0:
        raise ValueError("pi must lie in (0, 1)")
    s = _linear_predictor_sample(spec, beta_star, mc, _rng(seed))
    if not np.any(s):
        return math.log(pi / (1.0 - pi))
    return bbm(lambda d: float(np.mean(expit(d + s))) - pi, -50.0, 50.0, tol)


def prevalence(spec: MarginalSpec, beta_star, delta0: float, mc: int = 1_000_000, seed=1) -> float:
    """Monte Carlo estimate of P(Y = 1) at intercept ``delta0``."""
    s = _linear_predictor_sample(spec, beta_star, mc, _rng(seed))
    return float(np.mean(expit(delta0 + s)))


def make_truth(spec: MarginalSpec, k_star: int, beta_value: float = 1.0, pi: float = 0.01,
               seed=0, mc: int = 1_000_000, support: Optional[Sequence[int]] = None) -> GroundTruth:
    """Ground truth with ``k_star`` coefficients equal to ``beta_value``.

    The support is a seeded uniform draw unless given explicitly.
    """
    rng = _rng(seed)
    if support is None:
        support = np.sort(rng.choice(spec.M, size=int(k_star), replace=False))
    beta = np.zeros(spec.M)
    beta[np.asarray(support, dtype=int)] = beta_value
    delta0 = calibrate_delta0(spec, beta, pi, mc, rng)
    return GroundTruth(beta, pi, delta0, spec.kind, spec.sigma2, spec.rho)


def sample_case_control(spec: MarginalSpec, truth: GroundTruth, n: int, seed,
                        bound: Optional[float] = None) -> Dataset:
    """Balanced case-control sample with ``n`` rows per class.

    Population draws ``x`` get ``y ~ Bernoulli(expit(delta0 + beta*'x))`` and
    join the case or control pool until both hold ``n``.
    """
    rng = _rng(seed)
    n = int(n)
    budget = 1000.0 * n / truth.prevalence
    beta = np.asarray(truth.beta_star, dtype=float)
    cases, controls = [], []
    n_case = n_ctrl = 0
    drawn = 0
    batch = int(min(max(4 * n, 1.5 * n / truth.prevalence), 50_000))
    while n_case < n or n_ctrl < n:
        if drawn > budget:
            raise DrawBudgetExceeded(
                f"{drawn} draws for n={n}; intercept {truth.intercept0} looks miscalibrated"
            )
        X = _draw(spec, batch, rng)
        y = rng.random(batch) < expit(truth.intercept0 + X @ beta)
        drawn += batch
        if n_case < n:
            take = X[y][: n - n_case]
            cases.append(take)
            n_case += take.shape[0]
        if n_ctrl < n:
            take = X[~y][: n - n_ctrl]
            controls.append(take)
            n_ctrl += take.shape[0]
    raw = np.vstack(controls + cases)
    labels = np.r_[np.zeros(n, dtype=int), np.ones(n, dtype=int)]
    return Dataset.from_arrays(raw, labels, bound)


@dataclass(frozen=True)
class TuningInputs:
    n: int
    M: int
    L: float
    delta_n: Optional[float] = None

    def __post_init__(self):
        if self.n < 1 or self.M < 1 or not self.L > 0:
            raise ValueError("n, M and L must be positive")
        if self.delta_n is not None and not 0.0 < self.delta_n < 1.0:
            raise ValueError("delta_n must lie in (0, 1)")

    @property
    def dn(self) -> float:
        return 1.0 / self.n if self.delta_n is None else self.delta_n


def _r(t: TuningInputs, last_log: float) -> float:
    n, L = t.n, t.L
    mn = max(t.M, n)
    return math.log(n) * (
        6 * L * math.sqrt(2 * math.log(2 * mn) / n)
        + 1 / (4 * mn)
        + 4 * L * math.sqrt(2 * last_log / n)
    )


def theoretical_r_estimation(t: TuningInputs) -> float:
    """Tuning level sufficient for odds-ratio consistency."""
    return _r(t, math.log(1 / t.dn))


def theoretical_r_selection(t: TuningInputs) -> float:
    """Tuning level sufficient for support recovery (larger by a sqrt(log M) factor)."""
    return _r(t, math.log(t.M / t.dn))


def beta_min_condition(truth: GroundTruth, t: TuningInputs) -> bool:
    """Whether the smallest true nonzero exceeds four times the selection tuning level."""
    nz = np.abs(np.asarray(truth.beta_star))[list(truth.support)]
    if nz.size == 0:
        return True
    return bool(nz.min() > 4 * theoretical_r_selection(t))
