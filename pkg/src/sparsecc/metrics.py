"""Accuracy of a fit against simulation truth, and replicate summaries."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from sparsecc.model import Dataset, DimensionError, GroundTruth, ModelFit


@dataclass(frozen=True)
class EvalReport:
    mse: float
    l1_error: float
    # |intercept_raw - delta0|; delta0 is the population intercept, not the
    # case-control intercept the fit estimates
    intercept_error_vs_delta0: float
    sup_or_error: float
    exact_recovery: bool
    inclusion: bool
    k_hat: int

    def to_dict(self):
        return asdict(self)


def linear_predictor_mse(fit: ModelFit, truth: GroundTruth, data: Dataset) -> float:
    """Mean over design rows of ``(beta_hat'x - beta*'x)^2`` on the raw scale."""
    diff = np.asarray(fit.coefficients_raw) - np.asarray(truth.beta_star)
    return float(np.mean((data.raw @ diff) ** 2))


def evaluate(fit: ModelFit, truth: GroundTruth, data: Dataset,
             or_points: Optional[np.ndarray] = None) -> EvalReport:
    """Compare ``fit`` to ``truth``.

    The odds-ratio error is ``max |exp(beta_hat'x) - exp(beta*'x)|`` over the
    design rows plus ``or_points`` (baseline x0 = 0).
    """
    beta_hat = np.asarray(fit.coefficients_raw)
    beta_star = np.asarray(truth.beta_star)
    if beta_hat.shape != beta_star.shape or data.M != beta_star.size:
        raise DimensionError("fit, truth and data disagree on M")
    pts = data.raw if or_points is None else np.vstack([data.raw, np.asarray(or_points, float)])
    t_hat = np.clip(pts @ beta_hat, -700, 700)
    t_star = np.clip(pts @ beta_star, -700, 700)
    sup_or = float(np.max(np.abs(np.exp(t_hat) - np.exp(t_star))))
    est = set(fit.active_set)
    true = set(truth.support)
    return EvalReport(
        mse=linear_predictor_mse(fit, truth, data),
        l1_error=float(np.abs(beta_hat - beta_star).sum()),
        intercept_error_vs_delta0=abs(fit.intercept_raw - truth.intercept0),
        sup_or_error=sup_or,
        exact_recovery=est == true,
        inclusion=true <= est,
        k_hat=len(est),
    )


def aggregate(reports: Sequence[EvalReport]) -> dict:
    if not reports:
        raise ValueError("no reports to aggregate")
    return {
        "replicates": len(reports),
        "median_mse": float(np.median([r.mse for r in reports])),
        "median_l1_error": float(np.median([r.l1_error for r in reports])),
        "median_sup_or_error": float(np.median([r.sup_or_error for r in reports])),
        "pct_exact_recovery": 100.0 * float(np.mean([r.exact_recovery for r in reports])),
        "pct_inclusion": 100.0 * float(np.mean([r.inclusion for r in reports])),
        "median_k_hat": float(np.median([r.k_hat for r in reports])),
    }
