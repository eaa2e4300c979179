"""Fixed-length state summary fed to the balance network."""

from __future__ import annotations

import numpy as np

from ..domain import DecisionState

FEATURE_NAMES = (
    "period",
    "n_easy",
    "n_advanced",
    "n_regular_available",
    "n_expert_available",
    "depot_dist_easy",
    "depot_dist_advanced",
    "pairwise_dist_easy",
    "pairwise_dist_advanced",
    "nonurgent_easy",
    "nonurgent_advanced",
    "overdue_easy",
    "overdue_advanced",
    "mean_periods_overdue",
)
N_FEATURES = len(FEATURE_NAMES)


def _mean_pairwise(x: np.ndarray, y: np.ndarray) -> float:
    n = x.size
    if n < 2:
        return 0.0
    d = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
    return float(d.sum() / (n * (n - 1)))


def _mean_cross(x1, y1, x2, y2) -> float:
    if x1.size == 0 or x2.size == 0:
        return 0.0
    return float(np.hypot(x1[:, None] - x2[None, :], y1[:, None] - y2[None, :]).mean())


def extract_features(state: DecisionState, pairwise: str = "within") -> np.ndarray:
    """14 features; distance features are 0 for empty groups.

    ``pairwise="cross"`` swaps the two within-group spread features for the
    mean easy-advanced distance and the mean distance over all customers.
    """
    arr = state.arrays
    t = state.period
    adv = arr.advanced
    easy = ~adv
    dist0 = np.hypot(arr.x - state.depot[0], arr.y - state.depot[1])
    overdue = arr.deadline <= t
    n_exp = int(arr.expert.sum())
    f = np.zeros(N_FEATURES)
    f[0] = t
    f[1] = easy.sum()
    f[2] = adv.sum()
    f[3] = arr.expert.size - n_exp
    f[4] = n_exp
    f[5] = dist0[easy].mean() if f[1] else 0.0
    f[6] = dist0[adv].mean() if f[2] else 0.0
    if pairwise == "within":
        f[7] = _mean_pairwise(arr.x[easy], arr.y[easy])
        f[8] = _mean_pairwise(arr.x[adv], arr.y[adv])
    elif pairwise == "cross":
        f[7] = _mean_cross(arr.x[easy], arr.y[easy], arr.x[adv], arr.y[adv])
        f[8] = _mean_pairwise(arr.x, arr.y)
    else:
        raise ValueError(f"unknown pairwise mode {pairwise!r}")
    f[9] = (easy & ~overdue).sum()
    f[10] = (adv & ~overdue).sum()
    f[11] = (easy & overdue).sum()
    f[12] = (adv & overdue).sum()
    f[13] = (t - arr.deadline[overdue]).mean() if overdue.any() else 0.0
    return f
