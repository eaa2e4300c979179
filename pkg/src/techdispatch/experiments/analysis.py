"""How the learned balance parameter reacts to individual state features."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..policies import SampledBalance
from ..rl.features import FEATURE_NAMES
from ..rl.model import PolicyModel, lambda_deterministic
from ..simulation import run_episode
from .metrics import _load_all

log = logging.getLogger(__name__)

MIN_STATES = 100


@dataclass(frozen=True)
class FeatureImpact:
    feature: str
    below_pct: float  # mean alpha of states below the feature mean, relative to overall mean
    above_pct: float
    n_below: int
    n_above: int


def collect_states(model: PolicyModel, instances):
    """Features and deterministic alpha of every state visited by the model's policy."""
    realizations, _ = _load_all(instances)
    feats, alphas = [], []

    def alpha_fn(state):
        a = lambda_deterministic(model, state)
        feats.append(model.features(state))
        alphas.append(a)
        return a

    for r in realizations:
        run_episode(r, SampledBalance(alpha_fn, name="db"))
    return np.asarray(feats).reshape(-1, len(FEATURE_NAMES)), np.asarray(alphas)


def impact_table(features: np.ndarray, alphas: np.ndarray, names=FEATURE_NAMES) -> list[FeatureImpact]:
    if alphas.size == 0:
        raise ConfigurationError("no states to analyse")
    if alphas.size < MIN_STATES:
        log.warning("only %d states; impact estimates will be noisy", alphas.size)
    overall = alphas.mean()
    rows = []
    for k, name in enumerate(names):
        col = features[:, k]
        m = col.mean()
        below, above = col < m, col > m

        def pct(mask):
            if not mask.any() or overall == 0:
                return 0.0
            return float((alphas[mask].mean() - overall) / overall * 100.0)

        rows.append(FeatureImpact(name, pct(below), pct(above), int(below.sum()), int(above.sum())))
    return rows


def with_total_availability(features: np.ndarray):
    """Append regular + expert availability as one extra column."""
    total = features[:, FEATURE_NAMES.index("n_regular_available")] \
        + features[:, FEATURE_NAMES.index("n_expert_available")]
    return np.column_stack([features, total]), FEATURE_NAMES + ("n_available",)


def feature_impact_table(model: PolicyModel, instances) -> list[FeatureImpact]:
    feats, alphas = collect_states(model, instances)
    feats, names = with_total_availability(feats)
    return impact_table(feats, alphas, names)
