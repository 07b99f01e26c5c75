import numpy as np
import pytest

from statewise import nets
from statewise.backbone import (
    Hyper,
    cost_critic_target,
    explore_action,
    make_bundle,
    plain_actor_upstream,
    reward_critic_target,
    regress_critic,
    update_actor_and_targets,
    update_critics,
)
from statewise.nets import Mlp
from statewise.replay import Batch


def constant_net(spec, value):
    """Zero weights, final bias = value: the net outputs `value` everywhere."""
    net = Mlp(spec, np.zeros(spec.param_count()))
    params = net.params.copy()
    params[-spec.out_dim :] = value
    net.params = params
    return net


def make_batch(n=4, obs_dim=3, act_dim=1, reward=1.0, cost=0.0, done=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return Batch(
        obs=rng.uniform(-1, 1, (n, obs_dim)),
        action=rng.uniform(-1, 1, (n, act_dim)),
        next_obs=rng.uniform(-1, 1, (n, obs_dim)),
        reward=np.full(n, reward),
        cost=np.full(n, cost),
        done=np.full(n, done),
        prev_cost=np.zeros(n),
        task_action=rng.uniform(-1, 1, (n, act_dim)),
    )


@pytest.fixture
def bundle():
    return make_bundle(obs_dim=3, act_dim=1, seed=0)


def test_hyper_validation():
    with pytest.raises(ValueError):
        Hyper(gamma_r=1.0)
    with pytest.raises(ValueError):
        Hyper(policy_delay=0)


def test_explore_action_zero_sigma_is_actor_output(bundle):
    obs = np.array([0.1, 0.2, 0.3])
    rng = np.random.default_rng(0)
    a = explore_action(bundle.actor, obs, 0.0, rng)
    assert np.array_equal(a, nets.forward(bundle.actor, obs))
    # sigma 0 must not consume rng draws
    assert rng.normal() == np.random.default_rng(0).normal()


def test_explore_action_clamps_to_box(bundle):
    obs = np.array([0.1, 0.2, 0.3])
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = explore_action(bundle.actor, obs, 5.0, rng)
        assert np.all(a >= -1.0) and np.all(a <= 1.0)


def test_explore_action_reproducible(bundle):
    obs = np.zeros(3)
    a = explore_action(bundle.actor, obs, 0.1, np.random.default_rng(9))
    b = explore_action(bundle.actor, obs, 0.1, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_reward_target_terminal_is_reward(bundle):
    batch = make_batch(reward=3.5, done=1.0)
    y = reward_critic_target(batch, bundle, Hyper(), np.random.default_rng(0))
    assert np.all(y == 3.5)


def test_reward_target_twin_minimum(bundle):
    spec = bundle.q1.spec
    bundle.q1_target = constant_net(spec, 2.0)
    bundle.q2_target = constant_net(spec, 3.0)
    batch = make_batch(reward=1.0, done=0.0)
    y = reward_critic_target(batch, bundle, Hyper(), np.random.default_rng(0))
    np.testing.assert_allclose(y, 1.0 + 0.99 * 2.0, rtol=0, atol=1e-15)


def test_reward_target_twin_symmetry(bundle):
    batch = make_batch(done=0.0, seed=3)
    hyper = Hyper()
    y1 = reward_critic_target(batch, bundle, hyper, np.random.default_rng(5))
    bundle.q1_target, bundle.q2_target = bundle.q2_target, bundle.q1_target
    y2 = reward_critic_target(batch, bundle, hyper, np.random.default_rng(5))
    assert np.array_equal(y1, y2)


def test_reward_target_no_smoothing_degenerate(bundle):
    hyper = Hyper(smooth_sigma=0.0)
    batch = make_batch(reward=0.5, done=0.0, seed=2)
    y = reward_critic_target(batch, bundle, hyper, np.random.default_rng(0))
    a_next = nets.forward_batch(bundle.actor_target, batch.next_obs)
    x = np.concatenate([batch.next_obs, a_next], axis=1)
    q = np.minimum(
        nets.forward_batch(bundle.q1_target, x)[:, 0],
        nets.forward_batch(bundle.q2_target, x)[:, 0],
    )
    np.testing.assert_allclose(y, 0.5 + 0.99 * q, rtol=0, atol=1e-15)


def test_cost_target_cases(bundle):
    hyper = Hyper()
    y = cost_critic_target(make_batch(cost=1.0, done=1.0), bundle, hyper)
    assert np.all(y == 1.0)

    bundle.qc_target = constant_net(bundle.qc.spec, 0.5)
    y = cost_critic_target(make_batch(cost=0.0, done=0.0), bundle, hyper)
    np.testing.assert_allclose(y, 0.495, rtol=0, atol=1e-15)

    bundle.qc_target = constant_net(bundle.qc.spec, 0.0)
    y = cost_critic_target(make_batch(cost=0.0, done=0.0), bundle, hyper)
    assert np.all(y == 0.0)


def test_cost_target_bootstrap_clamped(bundle):
    # negative and huge bootstrap values are clamped into [0, 1/(1-gamma_c)]
    hyper = Hyper(gamma_c=0.99)
    cap = 1.0 / (1.0 - 0.99)
    for value, expected in ((-5.0, 0.0), (1e6, cap)):
        bundle.qc_target = constant_net(bundle.qc.spec, value)
        y = cost_critic_target(make_batch(cost=0.0, done=0.0), bundle, hyper)
        np.testing.assert_allclose(y, 0.99 * expected, rtol=1e-12)
        assert np.all(y <= cap)


def test_perfectly_fitted_critic_does_not_move(bundle):
    # zero-parameter critic fits the all-zero target exactly: zero gradient
    spec = bundle.q1.spec
    net = Mlp(spec, np.zeros(spec.param_count()))
    opt = nets.adam_init(net.params.size, 3e-4)
    x = np.random.default_rng(0).uniform(-1, 1, (8, 4))
    loss, _ = regress_critic(net, opt, x, np.zeros(8))
    assert loss == 0.0
    assert np.array_equal(net.params, np.zeros(spec.param_count()))


def test_regression_loss_is_mean_squared_residual(bundle):
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (16, 4))
    y = rng.normal(0, 1, 16)
    pred = nets.forward_batch(bundle.q1, x)[:, 0]
    expected = float(np.mean((pred - y) ** 2))
    loss, _ = regress_critic(bundle.q1, bundle.q1_opt, x, y)
    assert loss == pytest.approx(expected, rel=1e-12)


def test_critic_memorizes_fixed_batch(bundle):
    # terminal transitions make the target constant: loss -> ~0 in 500 steps
    batch = make_batch(n=16, reward=0.3, done=1.0, seed=8)
    hyper = Hyper(smooth_sigma=0.0)
    rng = np.random.default_rng(0)
    for _ in range(500):
        losses = update_critics(bundle, batch, hyper, rng)
    assert losses["q1"] <= 1e-3
    assert losses["q2"] <= 1e-3
    assert losses["qc"] <= 1e-3


def test_policy_delay_counts_actor_updates(bundle):
    hyper = Hyper(policy_delay=2, smooth_sigma=0.0)
    batch = make_batch(n=8)
    rng = np.random.default_rng(0)
    calls = []

    def upstream(b, obs, actions):
        calls.append(1)
        return np.zeros_like(actions), 0.0

    for _ in range(7):
        update_critics(bundle, batch, hyper, rng)
        update_actor_and_targets(bundle, batch, upstream, hyper)
    assert len(calls) == 3  # floor(7 / 2)


def test_two_steps_one_actor_update(bundle):
    hyper = Hyper(policy_delay=2, smooth_sigma=0.0)
    batch = make_batch(n=8)
    rng = np.random.default_rng(0)
    before = bundle.actor.params.copy()
    update_critics(bundle, batch, hyper, rng)
    assert update_actor_and_targets(bundle, batch, plain_actor_upstream, hyper) is None
    assert np.array_equal(bundle.actor.params, before)
    update_critics(bundle, batch, hyper, rng)
    loss = update_actor_and_targets(bundle, batch, plain_actor_upstream, hyper)
    assert loss is not None
    assert not np.array_equal(bundle.actor.params, before)


def test_tau_zero_freezes_targets(bundle):
    hyper = Hyper(policy_delay=1, tau=0.0, smooth_sigma=0.0)
    batch = make_batch(n=8)
    rng = np.random.default_rng(0)
    frozen = bundle.q1_target.params.copy()
    for _ in range(5):
        update_critics(bundle, batch, hyper, rng)
        update_actor_and_targets(bundle, batch, plain_actor_upstream, hyper)
    assert np.array_equal(bundle.q1_target.params, frozen)


def test_plain_actor_gradient_matches_finite_differences(bundle):
    batch = make_batch(n=6, seed=1)
    actions, cache = nets.forward_cache(bundle.actor, batch.obs)
    upstream, _ = plain_actor_upstream(bundle, batch.obs, actions)
    analytic = nets.backward_params(bundle.actor, cache, upstream)

    def loss_at(theta):
        probe = Mlp(bundle.actor.spec, theta)
        a = nets.forward_batch(probe, batch.obs)
        x = np.concatenate([batch.obs, a], axis=1)
        return -float(nets.forward_batch(bundle.q1, x).mean())

    rng = np.random.default_rng(2)
    coords = rng.choice(analytic.size, 60, replace=False)
    base = bundle.actor.params
    h = 1e-6
    for c in coords:
        up, dn = base.copy(), base.copy()
        up[c] += h
        dn[c] -= h
        fd = (loss_at(up) - loss_at(dn)) / (2 * h)
        assert abs(analytic[c] - fd) <= 1e-4 * max(1.0, abs(fd))
