import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from techdispatch.domain import DecisionState
from techdispatch.errors import ModelCorruptionError, ModelShapeError, VersionError
from techdispatch.instances import InstanceConfig
from techdispatch.rl.features import N_FEATURES, extract_features
from techdispatch.rl.model import (
    Normalizer,
    PolicyModel,
    lambda_deterministic,
    load_model,
    model_to_dict,
    sample_alpha,
    save_model,
)
from techdispatch.rl.network import MLP
from techdispatch.rl.ppo import (
    Batch,
    TrainConfig,
    advantage,
    cost_to_go,
    policy_loss_grad,
    ppo_objective,
    read_curve,
    scale_cost,
    standardize,
    train,
    value_loss,
    value_loss_grad,
)

from conftest import cust, random_state, tech


# -- features -----------------------------------------------------------------


def test_features_empty_state():
    s = DecisionState(period=4, available_technicians=(tech(1, True), tech(2, False), tech(3, False)),
                      customers=())
    f = extract_features(s)
    assert f[0] == 4 and f[3] == 2 and f[4] == 1
    assert np.all(f[[1, 2, 5, 6, 7, 8, 9, 10, 11, 12, 13]] == 0)


def test_features_single_easy_at_depot():
    s = DecisionState(period=4, available_technicians=(), customers=(cust(1, 100, 100, deadline=6),))
    f = extract_features(s)
    assert f[1] == 1 and f[5] == 0 and f[9] == 1 and f[11] == 0 and f[12] == 0


def test_features_pairwise_distance():
    s = DecisionState(period=1, available_technicians=(),
                      customers=(cust(1, 0, 50), cust(2, 100, 50)))
    assert extract_features(s)[7] == pytest.approx(100.0)


def test_features_overdue():
    s = DecisionState(period=6, available_technicians=(),
                      customers=(cust(1, 0, 0, "advanced", 1, 3), cust(2, 0, 0, "easy", 1, 6),
                                 cust(3, 0, 0, "easy", 1, 8)))
    f = extract_features(s)
    assert (f[9], f[10], f[11], f[12]) == (1, 0, 1, 1)
    assert f[13] == pytest.approx((3 + 0) / 2)


def test_features_cross_mode():
    s = DecisionState(period=1, available_technicians=(),
                      customers=(cust(1, 0, 0), cust(2, 30, 40, "advanced")))
    f = extract_features(s, "cross")
    assert f[7] == pytest.approx(50.0) and f[8] == pytest.approx(50.0)
    with pytest.raises(ValueError):
        extract_features(s, "diagonal")


# -- network gradients ------------------------------------------------------------


def _fd_check(loss_of_params, params, grads, rng, coords=10, h=1e-5):
    worst = 0.0
    for _ in range(coords):
        k = int(rng.integers(len(params)))
        idx = tuple(int(rng.integers(d)) for d in params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        up = loss_of_params()
        params[k][idx] = old - h
        down = loss_of_params()
        params[k][idx] = old
        fd = (up - down) / (2 * h)
        an = grads[k][idx]
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-7))
    return worst


def test_mlp_backprop_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = MLP((N_FEATURES, 64, 64, 1), rng, out_scale=1.0)
    x = rng.normal(size=(10, N_FEATURES))
    w = rng.normal(size=10)

    def loss():
        return float(np.dot(net(x), w))

    _, acts = net.forward(x)
    grads = net.backward(acts, w)
    assert _fd_check(loss, net.params, grads, rng) <= 1e-4


def _batch(model, rng, n=10, sigma=0.2):
    obs = np.clip(rng.normal(size=(n, N_FEATURES)), -5, 5)
    mu = model.mean_alpha(obs)
    raw = mu + sigma * rng.normal(size=n)
    # old policy slightly different so ratios move away from one
    logp_old = -((raw - (mu + 0.01 * rng.normal(size=n))) ** 2) / (2 * sigma**2) - math.log(sigma) \
        - 0.5 * math.log(2 * math.pi)
    target = rng.uniform(0, 1, n)
    v_old = model.value(obs) + 0.05 * rng.normal(size=n)
    return Batch(obs, raw, logp_old, target, v_old, rng.normal(size=n))


def test_policy_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    model = PolicyModel.create(rng=rng)
    for layer in model.policy.weights:
        layer *= 5  # leave the near-zero initial regime
    batch = _batch(model, rng)
    loss, grads, _ = policy_loss_grad(model, batch, 0.2, 0.2)
    assert _fd_check(lambda: policy_loss_grad(model, batch, 0.2, 0.2)[0],
                     model.policy.params, grads, rng) <= 1e-4


def test_log_sigma_gradient():
    rng = np.random.default_rng(2)
    model = PolicyModel.create(rng=rng)
    batch = _batch(model, rng)
    _, _, d = policy_loss_grad(model, batch, 0.2, float("inf"))
    h = 1e-6
    up = policy_loss_grad(model, batch, math.exp(math.log(0.2) + h), float("inf"))[0]
    down = policy_loss_grad(model, batch, math.exp(math.log(0.2) - h), float("inf"))[0]
    assert d == pytest.approx((up - down) / (2 * h), rel=1e-4)


@pytest.mark.parametrize("clipped", [False, True])
def test_value_loss_gradient_matches_finite_differences(clipped):
    rng = np.random.default_rng(3)
    model = PolicyModel.create(rng=rng)
    batch = _batch(model, rng)
    _, grads = value_loss_grad(model, batch, 0.2, clipped)
    assert _fd_check(lambda: value_loss_grad(model, batch, 0.2, clipped)[0],
                     model.value.params, grads, rng) <= 1e-4


def test_unclipped_update_is_vanilla_policy_gradient():
    rng = np.random.default_rng(4)
    model = PolicyModel.create(rng=rng)
    b = _batch(model, rng)
    mu = model.mean_alpha(b.obs)
    sigma = 0.2
    b = Batch(b.obs, b.raw_alpha, -((b.raw_alpha - mu) ** 2) / (2 * sigma**2) - math.log(sigma)
              - 0.5 * math.log(2 * math.pi), b.target, b.v_old, b.adv)
    _, grads, _ = policy_loss_grad(model, b, sigma, float("inf"))
    # -mean(A * grad log pi), assembled by hand
    z, acts = model.policy.forward(b.obs)
    dz = -(b.adv * (b.raw_alpha - mu) / sigma**2 * mu * (1 - mu)) / len(mu)
    for g, ref in zip(grads, model.policy.backward(acts, dz)):
        assert np.allclose(g, ref, rtol=1e-12, atol=1e-15)


# -- loss pieces ------------------------------------------------------------------


def test_ppo_objective_examples():
    assert ppo_objective(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert ppo_objective(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    assert ppo_objective(1.1, 2.0, 0.2) == pytest.approx(2.2)


@given(st.floats(-100, 100), st.floats(0.01, 0.99))
def test_ratio_one_identity(a, eps):
    assert ppo_objective(1.0, a, eps) == a


def test_value_loss_examples():
    assert value_loss(0.7, 0.1, 0.7, 0.2, False) == 0
    assert value_loss(0.3, 0.3, 0.9, 0.2, True) == pytest.approx(0.36)
    assert value_loss(0.5 + 0.4, 0.5, 0.5, 0.2, True) == pytest.approx(0.04)


def test_advantage_and_scaling():
    assert advantage(2.0, 1.5) == 0.5
    assert advantage(1.0, 1.0) == 0
    a = standardize(np.random.default_rng(0).normal(3, 2, 257))
    assert abs(a.mean()) < 1e-12
    assert scale_cost(0, 5.0) == 0
    assert scale_cost(5.0, 5.0) == 1
    assert scale_cost(10.0, 5.0) == 1
    assert np.allclose(cost_to_go([1, 2, 3]), [6, 5, 3])


# -- normalizer & model ---------------------------------------------------------------


def test_normalizer_streaming_matches_two_pass():
    rng = np.random.default_rng(5)
    data = rng.normal(4, 3, size=(1000, N_FEATURES))
    n = Normalizer(N_FEATURES)
    for chunk in np.array_split(data, 17):
        n.update(chunk)
    assert np.allclose(n.mean, data.mean(axis=0), atol=1e-9)
    assert np.allclose(n.var, data.var(axis=0), atol=1e-9)
    assert np.all(np.abs(n(rng.normal(0, 1000, N_FEATURES))) <= 5)


def test_zero_network_gives_half(rng):
    model = PolicyModel.create(rng=None)
    for _ in range(20):
        s = random_state(rng)
        assert lambda_deterministic(model, s) == 0.5


def test_sampling():
    model = PolicyModel.create(rng=None)
    s = DecisionState(period=1, available_technicians=(), customers=())
    rng = np.random.default_rng(6)
    draws = [sample_alpha(model, s, rng, 0.2) for _ in range(100_000)]
    assert abs(np.mean([d.raw for d in draws]) - 0.5) < 0.01
    assert all(0 <= d.alpha <= 1 for d in draws)
    tiny = sample_alpha(model, s, rng, 1e-12)
    assert tiny.alpha == pytest.approx(0.5)
    model.policy.biases[-1][:] = 10.0  # mean near one
    assert all(sample_alpha(model, s, rng, 0.3).alpha <= 1 for _ in range(1000))


def test_non_finite_output_is_corruption():
    model = PolicyModel.create(rng=None)
    model.policy.biases[-1][:] = np.nan
    with pytest.raises(ModelCorruptionError):
        lambda_deterministic(model, DecisionState(period=1, available_technicians=(), customers=()))


def test_save_load_round_trip(tmp_path, rng):
    model = PolicyModel.create(rng=rng, sigma=0.07, cost_scale=123.4)
    model.normalizer.update(rng.normal(size=(50, N_FEATURES)))
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    for _ in range(100):
        s = random_state(rng)
        assert lambda_deterministic(back, s) == lambda_deterministic(model, s)
    assert back.sigma == 0.07 and back.cost_scale == 123.4


def test_load_errors(tmp_path, rng):
    data = model_to_dict(PolicyModel.create(rng=rng))
    bad = json.loads(json.dumps(data))
    bad["policy"]["weights"][0] = bad["policy"]["weights"][0][:-1]
    p = tmp_path / "a.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(ModelShapeError):
        load_model(p)
    bad = json.loads(json.dumps(data))
    bad["n_features"] = 12
    p.write_text(json.dumps(bad))
    with pytest.raises(ModelShapeError, match="12"):
        load_model(p)
    bad = json.loads(json.dumps(data))
    bad["version"] = 7
    p.write_text(json.dumps(bad))
    with pytest.raises(VersionError):
        load_model(p)
    p.write_text(json.dumps(data)[:100])
    with pytest.raises(ModelCorruptionError):
        load_model(p)


# -- training --------------------------------------------------------------------------


def _tiny_config(**kw):
    base = dict(iterations=3, episodes_per_iteration=2, warmup_episodes=2,
                instance=InstanceConfig(arrival_days=5, weekly_demand_mean=90), hidden=(16, 16))
    base.update(kw)
    return TrainConfig(**base)


def test_training_is_deterministic(tmp_path):
    a = train(_tiny_config(seed=3), curve_path=tmp_path / "a.csv", progress_every=0)
    b = train(_tiny_config(seed=3), curve_path=tmp_path / "b.csv", progress_every=0)
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    assert read_curve(tmp_path / "a.csv") == a.curve
    assert model_to_dict(a.model) == model_to_dict(b.model)


def test_configuration_presets():
    assert TrainConfig() == TrainConfig.variant(4)
    d = TrainConfig()
    assert d.scale_costs and d.normalize_observations and not d.value_clipping and not d.learn_sigma
    assert not TrainConfig.variant(2).scale_costs
    assert not TrainConfig.variant(3).normalize_observations
    assert TrainConfig.variant(5).learn_sigma
    with pytest.raises(ValueError):
        TrainConfig(clip_epsilon=1.5)
    assert TrainConfig().sigma_at(0) == 0.2
    assert TrainConfig().sigma_at(100_000) == 0.02


@pytest.mark.parametrize("row", [1, 2, 3, 5])
def test_other_presets_run(row):
    res = train(TrainConfig.variant(row, **{k: v for k, v in _tiny_config().to_dict().items()
                                            if k in ("iterations", "episodes_per_iteration",
                                                     "warmup_episodes")},
                                    instance=InstanceConfig(arrival_days=5), hidden=(8,)),
                progress_every=0)
    assert len(res.curve) == 3
    assert res.model.sigma > 0


def test_gradient_guard_restores_parameters(monkeypatch):
    import techdispatch.rl.ppo as ppo

    real = ppo.policy_loss_grad

    def broken(model, batch, sigma, eps):
        loss, grads, d = real(model, batch, sigma, eps)
        grads[0] = grads[0] * np.nan
        return loss, grads, d

    monkeypatch.setattr(ppo, "policy_loss_grad", broken)
    cfg = _tiny_config(iterations=2)
    res = ppo.train(cfg, progress_every=0)
    assert res.aborted_iterations == [0, 1]
    assert all(np.all(np.isfinite(p)) for p in res.model.policy.params)
