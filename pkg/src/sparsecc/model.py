"""Data containers and the penalized prospective logistic objective.

The objective minimized everywhere in this package is::

    F(delta, beta) = 1/(2n) * sum_i [log(1 + exp(eta_i)) - y_i * eta_i] + lam * sum_j |beta_j|

with ``eta_i = delta + beta' x_i`` over the 2n standardized rows, ``y_i = 1`` for
cases and 0 for controls. The intercept is never penalized.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PROB_CLIP = 1e-12
SCALE_TOL = 1e-9


class DimensionError(ValueError):
    """Parameter or point dimensions do not match the dataset."""


class DegenerateDataError(ValueError):
    """A column has zero variance and cannot be standardized."""


class UnbalancedDataError(ValueError):
    """Case and control counts differ."""


def log1pexp(t):
    """Stable ``log(1 + exp(t))``, elementwise."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    big = t > 30.0
    out[big] = t[big] + np.log1p(np.exp(-t[big]))
    out[~big] = np.log1p(np.exp(t[~big]))
    return out


def expit(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Balanced case-control sample, standardized column-wise.

    Rows ``0..n-1`` are controls and ``n..2n-1`` are cases. ``features`` holds
    the standardized design (Fortran order); ``raw`` holds the original values.
    Columns are centered and scaled so that ``mean(x**2) == 1``.
    """

    features: np.ndarray
    labels: np.ndarray
    raw: np.ndarray
    column_center: np.ndarray
    column_scale: np.ndarray
    bound: Optional[float] = None

    @classmethod
    def from_arrays(cls, raw, labels, bound=None):
        raw = np.asarray(raw, dtype=float)
        labels = np.asarray(labels)
        if raw.ndim != 2:
            raise DimensionError("features must be a 2-d array")
        if labels.shape != (raw.shape[0],):
            raise DimensionError("labels must have one entry per row")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError("labels must be 0 (control) or 1 (case)")
        if not np.all(np.isfinite(raw)):
            raise ValueError("features contain non-finite values")
        if bound is not None and np.max(np.abs(raw), initial=0.0) > bound:
            raise ValueError(f"feature magnitude exceeds declared bound {bound}")
        labels = labels.astype(np.int8)
        n_case = int(labels.sum())
        n_ctrl = labels.size - n_case
        if n_case != n_ctrl or n_case == 0:
            raise UnbalancedDataError(
                f"need equal, nonzero case/control counts, got {n_case} cases and {n_ctrl} controls"
            )
        order = np.argsort(labels, kind="stable")
        raw = np.ascontiguousarray(raw[order])
        labels = labels[order]

        center = raw.mean(axis=0)
        centered = raw - center
        scale = np.sqrt(np.mean(centered**2, axis=0))
        bad = np.flatnonzero(scale <= 1e-12 * np.maximum(1.0, np.abs(center)))
        if bad.size:
            raise DegenerateDataError(f"zero-variance columns: {bad.tolist()}")
        features = np.asfortranarray(centered / scale)
        for arr in (features, raw, labels, center, scale):
            arr.setflags(write=False)
        return cls(features, labels, raw, center, scale, bound)

    @property
    def n(self) -> int:
        return self.labels.size // 2

    @property
    def n_rows(self) -> int:
        return self.labels.size

    @property
    def M(self) -> int:
        return self.features.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.labels.astype(float)

    def subset(self, rows) -> "Dataset":
        """A new, independently standardized dataset over ``rows`` only."""
        rows = np.asarray(rows)
        return Dataset.from_arrays(self.raw[rows], self.labels[rows], self.bound)

    def standardize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.column_center) / self.column_scale


@dataclass(frozen=True, eq=False)
class ModelFit:
    intercept: float
    coefficients: np.ndarray
    coefficients_raw: np.ndarray
    intercept_raw: float
    active_set: tuple
    lam: float
    objective_value: float
    converged: bool
    iterations: int
    kkt_violation: float
    flags: tuple = ()
    objective_trace: tuple = field(default=(), repr=False)

    @classmethod
    def build(cls, data: Dataset, intercept, coefficients, lam, *, converged, iterations,
              kkt_violation, flags=(), objective_trace=()):
        coefficients = np.array(coefficients, dtype=float)
        coefficients.setflags(write=False)
        raw = coefficients / data.column_scale
        raw.setflags(write=False)
        intercept = float(intercept)
        intercept_raw = intercept - float(raw @ data.column_center)
        active = tuple(int(j) for j in np.flatnonzero(coefficients != 0.0))
        value = prospective_objective(intercept, coefficients, data, lam)
        return cls(intercept, coefficients, raw, intercept_raw, active, float(lam), value,
                   bool(converged), int(iterations), float(kkt_violation), tuple(flags),
                   tuple(objective_trace))

    @property
    def active_count(self) -> int:
        return len(self.active_set)

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "intercept_raw": self.intercept_raw,
            "coefficients": self.coefficients.tolist(),
            "coefficients_raw": self.coefficients_raw.tolist(),
            "active_set": list(self.active_set),
            "lambda": self.lam,
            "objective_value": self.objective_value,
            "converged": self.converged,
            "iterations": self.iterations,
            "kkt_violation": self.kkt_violation,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class GroundTruth:
    beta_star: np.ndarray
    prevalence: float
    intercept0: float
    marginal: str
    sigma2: float = 1.0
    rho: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.prevalence < 1.0:
            raise ValueError("prevalence must lie in (0, 1)")

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta_star))

    @property
    def support_size(self) -> int:
        return len(self.support)

    def to_dict(self) -> dict:
        return {
            "beta_star": np.asarray(self.beta_star).tolist(),
            "support": list(self.support),
            "support_size": self.support_size,
            "prevalence": self.prevalence,
            "intercept0": self.intercept0,
            "marginal": self.marginal,
            "sigma2": self.sigma2,
            "rho": self.rho,
        }


def _check_params(beta, data: Dataset):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.M,):
        raise DimensionError(f"expected {data.M} coefficients, got shape {beta.shape}")
    return beta


def loss_from_eta(eta, y) -> float:
    """Mean negative prospective log-likelihood for linear predictor ``eta``."""
    return float(np.mean(log1pexp(eta) - y * eta))


def prospective_objective(intercept, beta, data: Dataset, lam: float) -> float:
    beta = _check_params(beta, data)
    if not (np.isfinite(intercept) and np.all(np.isfinite(beta)) and np.isfinite(lam)):
        raise ValueError("non-finite parameters")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    eta = intercept + data.features @ beta
    return loss_from_eta(eta, data.y) + lam * float(np.abs(beta).sum())


def prospective_gradient(intercept, beta, data: Dataset):
    """Gradient of the unpenalized scaled loss; returns ``(d_intercept, d_beta)``."""
    beta = _check_params(beta, data)
    p = np.clip(expit(intercept + data.features @ beta), PROB_CLIP, 1.0 - PROB_CLIP)
    r = p - data.y
    N = data.n_rows
    return float(r.sum() / N), data.features.T @ r / N


def fitted_probabilities(fit: ModelFit, data: Dataset) -> np.ndarray:
    """Case probability ``p1(x)`` for each row under the fitted parameters."""
    _check_params(fit.coefficients, data)
    return expit(fit.intercept + data.features @ fit.coefficients)


def check_retrospective_constraint(fit: ModelFit, data: Dataset) -> float:
    """``|mean_i p1(x_i) - 1/2|``: the empirical normalization residual.

    On balanced data this is driven to zero by the intercept score equation at
    any optimum of the penalized objective.
    """
    return abs(float(np.mean(fitted_probabilities(fit, data))) - 0.5)


class OddsRatioOverflow(UserWarning):
    pass


def odds_ratio(fit: ModelFit, x, x0, return_flag=False):
    """``exp(beta_raw'(x - x0))`` on the original feature scale.

    The exponent is clamped to +-700; pass ``return_flag=True`` to learn whether
    clamping happened.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x.shape != fit.coefficients_raw.shape or x0.shape != x.shape:
        raise DimensionError("points must have one entry per variable")
    t = float(fit.coefficients_raw @ (x - x0))
    clamped = abs(t) > 700.0
    value = math.exp(max(-700.0, min(700.0, t)))
    if return_flag:
        return value, clamped
    return value


def read_csv(path, bound=None) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip() != "label":
            raise ValueError("first column must be 'label'")
        rows = [r for r in reader if r]
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValueError("ragged CSV")
    return Dataset.from_arrays(arr[:, 1:], arr[:, 0].astype(int), bound)


def write_csv(path, raw, labels, names: Optional[Sequence[str]] = None):
    raw = np.asarray(raw, dtype=float)
    if names is None:
        names = [f"x{j + 1}" for j in range(raw.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *names])
        for lab, row in zip(labels, raw):
            w.writerow([int(lab), *(repr(float(v)) for v in row)])


def write_dataset(path, data: Dataset):
    write_csv(path, data.raw, data.labels)
