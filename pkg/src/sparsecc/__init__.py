"""Sparse logistic regression for case-control studies.

L1-penalized prospective likelihood fits, bisection-based regularization path
sketches indexed by support size, cross-validated model-size selection with a
BIC-type penalty, and the simulation harness used to evaluate them.
"""
__version__ = "0.1.0"

from sparsecc.model import (
    Dataset,
    GroundTruth,
    ModelFit,
    check_retrospective_constraint,
    fitted_probabilities,
    odds_ratio,
    prospective_gradient,
    prospective_objective,
    read_csv,
)
from sparsecc.solver import SolverConfig, active_count, fit_l1_logistic, kkt_residual, lambda_max
from sparsecc.path import GridPath, PathSketch, bbm, gbm, grid_path, support_in_path
from sparsecc.selection import SelectionResult, cv_log_loss, refit_mle, select, stratified_folds

__all__ = [
    "Dataset", "GroundTruth", "ModelFit", "SolverConfig", "PathSketch", "GridPath",
    "SelectionResult", "prospective_objective", "prospective_gradient", "fitted_probabilities",
    "check_retrospective_constraint", "odds_ratio", "read_csv", "fit_l1_logistic",
    "kkt_residual", "active_count", "lambda_max", "bbm", "gbm", "grid_path",
    "support_in_path", "stratified_folds", "refit_mle", "cv_log_loss", "select",
]
