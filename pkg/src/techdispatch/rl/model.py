"""Balance-parameter model: feature normalizer, policy and value networks, persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..domain import DecisionState
from ..errors import ModelCorruptionError, ModelShapeError, VersionError
from .features import N_FEATURES, extract_features
from .network import MLP

MODEL_VERSION = 1
CLIP = 5.0
VAR_EPS = 1e-8
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Normalizer:
    """Running mean and variance (parallel Welford merge); output clipped to +-5."""

    def __init__(self, dim: int, enabled: bool = True):
        self.enabled = enabled
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return self.m2 / self.count

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(batch)
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = b_mean - self.mean
        self.mean = self.mean + delta * n / total
        self.m2 = self.m2 + b_m2 + delta**2 * self.count * n / total
        self.count = total

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if not self.enabled:
            return np.asarray(x, dtype=float)
        return np.clip((x - self.mean) / np.sqrt(self.var + VAR_EPS), -CLIP, CLIP)


def squash(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class PolicyModel:
    policy: MLP
    value: MLP
    normalizer: Normalizer
    sigma: float = 0.2
    cost_scale: float = 1.0
    pairwise: str = "within"
    meta: dict = field(default_factory=dict)

    @classmethod
    def create(cls, hidden=(64, 64), rng: np.random.Generator | None = None, **kw) -> "PolicyModel":
        dims = (N_FEATURES, *hidden, 1)
        return cls(MLP(dims, rng), MLP(dims, rng, out_scale=1.0), Normalizer(N_FEATURES), **kw)

    def features(self, state: DecisionState) -> np.ndarray:
        return extract_features(state, self.pairwise)

    def mean_alpha(self, obs: np.ndarray) -> np.ndarray:
        """Policy mean for normalized observations (rows)."""
        return squash(self.policy(obs))


def lambda_deterministic(model: PolicyModel, state: DecisionState) -> float:
    """Evaluation-time balance: the policy mean, no sampling."""
    obs = model.normalizer(model.features(state))
    alpha = float(model.mean_alpha(obs)[0])
    if not math.isfinite(alpha):
        raise ModelCorruptionError("policy network produced a non-finite output")
    return alpha


@dataclass(frozen=True)
class AlphaSample:
    alpha: float  # clamped to [0, 1], used for the decision
    raw: float  # unclamped Gaussian draw
    log_prob: float  # density of ``raw``
    mean: float
    obs: np.ndarray  # normalized network input
    features: np.ndarray  # raw features, for normalizer updates


def gaussian_log_prob(a, mu, sigma):
    return -((a - mu) ** 2) / (2.0 * sigma**2) - np.log(sigma) - LOG_SQRT_2PI


def sample_alpha(model: PolicyModel, state: DecisionState, rng: np.random.Generator,
                 sigma: float | None = None) -> AlphaSample:
    sigma = model.sigma if sigma is None else sigma
    feats = model.features(state)
    obs = model.normalizer(feats)
    mu = float(model.mean_alpha(obs)[0])
    raw = float(rng.normal(mu, sigma))
    return AlphaSample(min(1.0, max(0.0, raw)), raw, float(gaussian_log_prob(raw, mu, sigma)),
                       mu, obs, feats)


# -- persistence -------------------------------------------------------------


def _net_dict(net: MLP) -> dict:
    return {
        "dims": list(net.dims),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from(d: dict, name: str) -> MLP:
    dims = [int(x) for x in d["dims"]]
    if dims[0] != N_FEATURES or dims[-1] != 1:
        raise ModelShapeError(f"{name} network expects {dims[0]} inputs and {dims[-1]} outputs; "
                              f"the feature vector has {N_FEATURES} and the output is scalar")
    net = MLP(dims)
    if len(d["weights"]) != len(dims) - 1 or len(d["biases"]) != len(dims) - 1:
        raise ModelShapeError(f"{name} network: layer count does not match dims {dims}")
    for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        w = np.asarray(d["weights"][k], dtype=float)
        bias = np.asarray(d["biases"][k], dtype=float)
        if w.size != a * b or bias.size != b:
            raise ModelShapeError(f"{name} layer {k}: expected {a}x{b} weights and {b} biases, "
                                  f"got {w.size} and {bias.size} values")
        net.weights[k] = w.reshape(a, b)
        net.biases[k] = bias
    return net


def model_to_dict(model: PolicyModel) -> dict:
    n = model.normalizer
    return {
        "format": "techdispatch-model",
        "version": MODEL_VERSION,
        "n_features": N_FEATURES,
        "pairwise": model.pairwise,
        "sigma": model.sigma,
        "cost_scale": model.cost_scale,
        "normalizer": {"enabled": n.enabled, "count": n.count, "mean": n.mean.tolist(), "m2": n.m2.tolist()},
        "policy": _net_dict(model.policy),
        "value": _net_dict(model.value),
        "meta": model.meta,
    }


def save_model(model: PolicyModel, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n")


def model_from_dict(data: dict, path="<dict>") -> PolicyModel:
    if data.get("version") != MODEL_VERSION:
        raise VersionError(f"{path}: model format version {data.get('version')!r}, "
                           f"expected {MODEL_VERSION}")
    if int(data.get("n_features", -1)) != N_FEATURES:
        raise ModelShapeError(f"{path}: model was trained on {data.get('n_features')} features, "
                              f"this build extracts {N_FEATURES}")
    try:
        nd = data["normalizer"]
        norm = Normalizer(N_FEATURES, enabled=bool(nd.get("enabled", True)))
        norm.count = float(nd["count"])
        norm.mean = np.asarray(nd["mean"], dtype=float)
        norm.m2 = np.asarray(nd["m2"], dtype=float)
        if norm.mean.shape != (N_FEATURES,) or norm.m2.shape != (N_FEATURES,):
            raise ModelShapeError(f"{path}: normalizer statistics must have {N_FEATURES} entries")
        model = PolicyModel(
            policy=_net_from(data["policy"], "policy"),
            value=_net_from(data["value"], "value"),
            normalizer=norm,
            sigma=float(data["sigma"]),
            cost_scale=float(data["cost_scale"]),
            pairwise=data.get("pairwise", "within"),
            meta=data.get("meta", {}),
        )
    except ModelShapeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelCorruptionError(f"{path}: malformed model file ({exc!r})") from None
    arrays = model.policy.params + model.value.params + [norm.mean, norm.m2]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise ModelCorruptionError(f"{path}: model contains non-finite values")
    return model


def load_model(path) -> PolicyModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelCorruptionError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(data, path)
