"""Linear sum assignment and hard permutation extraction."""
from __future__ import annotations

import numpy as np

from .errors import InfeasibleAssignmentError, ShapeError
from .kernels import lsap

SMOOTHING_EPS = 1e-9


def solve_lsap(cost) -> np.ndarray:
    """Permutation ``sigma`` (row i -> column sigma[i]) minimizing ``sum(cost[i, sigma[i]])``.

    ``+inf`` marks a forbidden cell. Raises ``InfeasibleAssignmentError`` when no
    perfect matching has finite cost.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost matrix must be square, got shape {cost.shape}")
    if np.isnan(cost).any() or np.isneginf(cost).any():
        raise ShapeError("cost matrix entries must be finite or +inf")
    if cost.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    sigma = lsap(cost)
    if sigma is None:
        raise InfeasibleAssignmentError("no assignment with finite total cost")
    return sigma


def assignment_cost(cost, sigma) -> float:
    cost = np.asarray(cost, dtype=np.float64)
    return float(cost[np.arange(len(sigma)), sigma].sum())


def permutation_from_distribution(P_pred, eps: float = SMOOTHING_EPS) -> np.ndarray:
    """Hard permutation matrix closest (in cross-entropy) to a row-stochastic prediction."""
    P_pred = np.asarray(P_pred, dtype=np.float64)
    sigma = solve_lsap(-np.log(P_pred + eps))
    P = np.zeros(P_pred.shape, dtype=np.uint8)
    P[np.arange(len(sigma)), sigma] = 1
    return P
