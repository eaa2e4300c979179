"""Clipped policy-gradient training of the balance network."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..instances import InstanceConfig, generate_instance
from ..policies import SampledBalance, StaticBalance
from ..simulation import run_episode
from .model import PolicyModel, gaussian_log_prob, sample_alpha, save_model
from .network import Adam

log = logging.getLogger(__name__)

STD_EPS = 1e-8


# -- loss pieces ---------------------------------------------------------------


def advantage(v_hat, cost_to_go):
    """Positive when the realized cost undercuts the value estimate."""
    return np.asarray(v_hat) - np.asarray(cost_to_go)


def standardize(adv: np.ndarray) -> np.ndarray:
    adv = np.asarray(adv, dtype=float)
    if adv.size < 2:
        return adv - adv.mean() if adv.size else adv
    return (adv - adv.mean()) / (adv.std() + STD_EPS)


def ppo_objective(ratio, adv, epsilon):
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv)


def value_loss(v_now, v_old, target, epsilon, clipped: bool):
    plain = (np.asarray(v_now) - target) ** 2
    if not clipped:
        return plain
    v_clip = np.clip(v_now, np.asarray(v_old) - epsilon, np.asarray(v_old) + epsilon)
    return np.minimum(plain, (v_clip - target) ** 2)


def scale_cost(raw, cost_scale: float):
    if cost_scale <= 0:
        raise ValueError("cost_scale must be positive")
    return np.minimum(np.asarray(raw, dtype=float) / cost_scale, 1.0)


def cost_to_go(costs) -> np.ndarray:
    """Undiscounted suffix sums: entry t is the cost from period t to the end."""
    return np.cumsum(np.asarray(costs, dtype=float)[::-1])[::-1]


@dataclass
class Batch:
    obs: np.ndarray
    raw_alpha: np.ndarray
    log_prob: np.ndarray
    target: np.ndarray
    v_old: np.ndarray
    adv: np.ndarray

    def take(self, idx) -> "Batch":
        return Batch(*(getattr(self, f.name)[idx] for f in dataclasses.fields(self)))


def policy_loss_grad(model: PolicyModel, batch: Batch, sigma: float, epsilon: float):
    """Negative mean clipped objective and its gradient.

    Returns (loss, grads for ``model.policy.params``, d loss / d log sigma).
    """
    z, acts = model.policy.forward(batch.obs)
    mu = 1.0 / (1.0 + np.exp(-z))
    logp = gaussian_log_prob(batch.raw_alpha, mu, sigma)
    ratio = np.exp(logp - batch.log_prob)
    adv = batch.adv
    obj = ppo_objective(ratio, adv, epsilon)
    n = len(adv)
    # the clipped branch has zero slope once the ratio leaves the trust region in
    # the direction the advantage rewards
    active = ~(((adv > 0) & (ratio > 1.0 + epsilon)) | ((adv < 0) & (ratio < 1.0 - epsilon)))
    dlogp = np.where(active, ratio * adv, 0.0) * (-1.0 / n)
    resid = (batch.raw_alpha - mu) / sigma**2
    dz = dlogp * resid * mu * (1.0 - mu)
    grads = model.policy.backward(acts, dz)
    dlogsig = float(np.sum(dlogp * ((batch.raw_alpha - mu) ** 2 / sigma**2 - 1.0)))
    return -float(obj.mean()), grads, dlogsig


def value_loss_grad(model: PolicyModel, batch: Batch, epsilon: float, clipped: bool):
    v, acts = model.value.forward(batch.obs)
    n = len(v)
    plain = (v - batch.target) ** 2
    dv = 2.0 * (v - batch.target)
    if clipped:
        lo, hi = batch.v_old - epsilon, batch.v_old + epsilon
        v_clip = np.clip(v, lo, hi)
        clip_branch = (v_clip - batch.target) ** 2
        use_clip = clip_branch < plain
        inside = (v > lo) & (v < hi)
        dv = np.where(use_clip, np.where(inside, 2.0 * (v_clip - batch.target), 0.0), dv)
        loss = np.minimum(plain, clip_branch)
    else:
        loss = plain
    return float(loss.mean()), model.value.backward(acts, dv / n)


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 15000
    episodes_per_iteration: int = 10
    epochs: int = 4
    minibatch_size: int = 256
    lr_policy: float = 3e-4
    lr_value: float = 1e-3
    clip_epsilon: float = 0.2
    sigma_init: float = 0.20
    sigma_decay: float = 0.9997
    sigma_min: float = 0.02
    scale_costs: bool = True
    normalize_observations: bool = True
    value_clipping: bool = False
    learn_sigma: bool = False
    standardize_advantages: bool = True
    hidden: tuple[int, ...] = (64, 64)
    pairwise: str = "within"
    warmup_episodes: int = 50
    warmup_alpha: float = 0.33
    cost_quantile: float = 99.0
    seed: int = 0
    train_base_seed: int = 10_000_000
    warmup_base_seed: int = 20_000_000
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0.0 < self.clip_epsilon < 1.0 and not math.isinf(self.clip_epsilon):
            raise ValueError(f"clip epsilon must lie in (0, 1), got {self.clip_epsilon}")
        if min(self.lr_policy, self.lr_value) <= 0:
            raise ValueError("learning rates must be positive")
        if self.sigma_init <= 0 or self.sigma_min <= 0:
            raise ValueError("sigma must stay positive")
        if self.iterations < 0 or self.episodes_per_iteration < 1 or self.epochs < 1:
            raise ValueError("iterations, episodes and epochs must be positive")

    @classmethod
    def variant(cls, row: int, **overrides) -> "TrainConfig":
        """Augmentation presets (1)-(5); (4) is the default configuration."""
        flags = {
            1: dict(scale_costs=True, normalize_observations=True, value_clipping=True, learn_sigma=False),
            2: dict(scale_costs=False, normalize_observations=True, value_clipping=True, learn_sigma=False),
            3: dict(scale_costs=True, normalize_observations=False, value_clipping=True, learn_sigma=False),
            4: dict(scale_costs=True, normalize_observations=True, value_clipping=False, learn_sigma=False),
            5: dict(scale_costs=True, normalize_observations=True, value_clipping=True, learn_sigma=True),
        }
        if row not in flags:
            raise ValueError(f"unknown configuration {row}; choose 1-5")
        return cls(**{**flags[row], **overrides})

    def sigma_at(self, k: int) -> float:
        return max(self.sigma_min, self.sigma_init * self.sigma_decay**k)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        """Build from a config document; ``variant`` selects an augmentation preset."""
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known - {"variant"})
        if unknown:
            log.warning("ignoring unknown training fields: %s", ", ".join(unknown))
        kw = {k: v for k, v in data.items() if k in known}
        if "instance" in kw:
            kw["instance"] = InstanceConfig.from_dict(kw["instance"])
        if "hidden" in kw:
            kw["hidden"] = tuple(kw["hidden"])
        return cls.variant(int(data.get("variant", 4)), **kw)


@dataclass
class TrainResult:
    model: PolicyModel
    curve: list[tuple[int, float, float]]
    aborted_iterations: list[int]
    seconds: float


CURVE_HEADER = ("iteration", "eval_inconvenience", "sigma")


def write_curve(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for it, inc, sig in rows:
            w.writerow([it, repr(float(inc)), repr(float(sig))])


def read_curve(path) -> list[tuple[int, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise ValueError(f"{path}: not a learning-curve file")
    return [(int(a), float(b), float(c)) for a, b, c in rows[1:]]


# -- training ------------------------------------------------------------------


def estimate_cost_scale(config: TrainConfig) -> float:
    """High quantile of per-state cost-to-go under a fixed static balance."""
    values = []
    for e in range(config.warmup_episodes):
        inst = generate_instance(config.instance.replace(seed=config.warmup_base_seed + e))
        res = run_episode(inst, StaticBalance(config.warmup_alpha))
        values.extend(cost_to_go([p.realized_cost for p in res.periods]))
    if not values:
        return 1.0
    scale = float(np.percentile(values, config.cost_quantile))
    return scale if scale > 0 else 1.0


def _rollout(model: PolicyModel, inst, sigma: float, rng):
    records = []

    def alpha_fn(state):
        s = sample_alpha(model, state, rng, sigma)
        records.append(s)
        return s.alpha

    res = run_episode(inst, SampledBalance(alpha_fn, name="training"))
    costs = [p.realized_cost for p in res.periods]
    assert len(costs) == len(records)
    n = len(res.customers)
    return records, costs, (res.total_inconvenience / n if n else 0.0)


def _snapshot(arrays):
    return [a.copy() for a in arrays]


def _restore(arrays, snap):
    for dst, src in zip(arrays, snap):
        dst[...] = src


def _finite(*items) -> bool:
    for it in items:
        if isinstance(it, list):
            if not all(np.all(np.isfinite(g)) for g in it):
                return False
        elif not np.all(np.isfinite(it)):
            return False
    return True


def train(config: TrainConfig, instance_sampler=None, model: PolicyModel | None = None,
          curve_path=None, model_path=None, progress_every: int = 100) -> TrainResult:
    """Run the configured number of iterations.

    ``instance_sampler(k, e)`` returns the realization for episode ``e`` of
    iteration ``k``; by default fresh seeds from ``train_base_seed`` upward.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_rng, sample_rng, shuffle_rng = (np.random.default_rng(s) for s in seeds)
    if instance_sampler is None:
        base, per = config.train_base_seed, config.episodes_per_iteration

        def instance_sampler(k, e):
            return generate_instance(config.instance.replace(seed=base + k * per + e))

    if model is None:
        model = PolicyModel.create(config.hidden, init_rng, sigma=config.sigma_init,
                                   pairwise=config.pairwise)
        model.normalizer.enabled = config.normalize_observations
        model.cost_scale = estimate_cost_scale(config) if config.scale_costs else 1.0
    model.meta = {"train_config": config.to_dict(), "iterations_done": 0}
    log.info("cost scale %.4g", model.cost_scale)

    log_sigma = np.array([math.log(config.sigma_init)])
    pol_params = model.policy.params + ([log_sigma] if config.learn_sigma else [])
    pol_opt = Adam(pol_params, lr=config.lr_policy)
    val_opt = Adam(model.value.params, lr=config.lr_value)
    eps = config.clip_epsilon

    curve = []
    aborted = []
    start = time.time()
    for k in range(config.iterations):
        sigma = float(math.exp(log_sigma[0])) if config.learn_sigma else config.sigma_at(k)
        obs, raw, logp, targets, raw_feats, incs = [], [], [], [], [], []
        for e in range(config.episodes_per_iteration):
            records, costs, inc = _rollout(model, instance_sampler(k, e), sigma, sample_rng)
            ctg = cost_to_go(costs)
            targets.append(scale_cost(ctg, model.cost_scale) if config.scale_costs else ctg)
            obs.extend(r.obs for r in records)
            raw.extend(r.raw for r in records)
            raw_feats.extend(r.features for r in records)
            logp.extend(r.log_prob for r in records)
            incs.append(inc)
        obs = np.asarray(obs)
        v_old = model.value(obs)
        target = np.concatenate(targets)
        adv = advantage(v_old, target)
        if config.standardize_advantages:
            adv = standardize(adv)
        batch = Batch(obs, np.asarray(raw), np.asarray(logp), target, v_old, adv)

        snap = _snapshot(pol_params + model.value.params)
        opt_snap = (pol_opt.state(), val_opt.state())
        ok = True
        n = len(target)
        for _ in range(config.epochs):
            order = shuffle_rng.permutation(n)
            for lo in range(0, n, config.minibatch_size):
                mb = batch.take(order[lo:lo + config.minibatch_size])
                sig = float(math.exp(log_sigma[0])) if config.learn_sigma else sigma
                p_loss, p_grads, dls = policy_loss_grad(model, mb, sig, eps)
                v_loss, v_grads = value_loss_grad(model, mb, eps, config.value_clipping)
                if not _finite(p_loss, v_loss, p_grads, v_grads, dls):
                    ok = False
                    break
                pol_opt.step(p_grads + ([np.array([dls])] if config.learn_sigma else []))
                val_opt.step(v_grads)
            if not ok:
                break
        if ok and not _finite(pol_params, model.value.params):
            ok = False
        if not ok:
            log.warning("iteration %d: non-finite loss or gradient, parameters restored", k)
            _restore(pol_params + model.value.params, snap)
            pol_opt.restore(opt_snap[0])
            val_opt.restore(opt_snap[1])
            aborted.append(k)
        if config.normalize_observations:
            model.normalizer.update(np.asarray(raw_feats))
        model.sigma = float(math.exp(log_sigma[0])) if config.learn_sigma else config.sigma_at(k + 1)
        curve.append((k, float(np.mean(incs)), sigma))
        model.meta["iterations_done"] = k + 1
        if progress_every and (k + 1) % progress_every == 0:
            recent = np.mean([row[1] for row in curve[-progress_every:]])
            log.info("iter %d  inconvenience %.4f  sigma %.4f  %.0fs", k + 1, recent, sigma,
                     time.time() - start)
        if config.checkpoint_every and (k + 1) % config.checkpoint_every == 0:
            if model_path:
                save_model(model, model_path)
            if curve_path:
                write_curve(curve, curve_path)
    if model_path:
        save_model(model, model_path)
    if curve_path:
        write_curve(curve, curve_path)
    return TrainResult(model, curve, aborted, time.time() - start)
