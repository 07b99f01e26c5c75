import numpy as np
import pytest

from statewise import nets
from statewise.backbone import actor_spec, critic_spec
from statewise.nets import Mlp
from statewise.recovery import gate, make_risk_pair, risk_target, update_risk_pair
from statewise.replay import Batch


def constant_critic(obs_dim, act_dim, value):
    spec = critic_spec(obs_dim, act_dim)
    net = Mlp(spec, np.zeros(spec.param_count()))
    params = net.params.copy()
    params[-1] = value
    net.params = params
    return net


def _batch(n=8, obs_dim=3, act_dim=1, cost=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return Batch(
        obs=rng.uniform(-1, 1, (n, obs_dim)),
        action=rng.uniform(-1, 1, (n, act_dim)),
        next_obs=rng.uniform(-1, 1, (n, obs_dim)),
        reward=np.zeros(n),
        cost=np.full(n, cost) if np.isscalar(cost) else np.asarray(cost, float),
        done=np.zeros(n),
        prev_cost=np.zeros(n),
        task_action=rng.uniform(-1, 1, (n, act_dim)),
    )


@pytest.fixture
def pair():
    return make_risk_pair(3, 1, seed=0)


def test_risk_target_cost_dominates(pair):
    batch = _batch(cost=1.0)
    y = risk_target(batch, pair, 0.99, next_actions=batch.task_action)
    assert np.all(y == 1.0)


def test_risk_target_bootstraps_safe_transitions(pair):
    pair.q_risk_target = constant_critic(3, 1, 0.5)
    y = risk_target(_batch(cost=0.0), pair, 0.99, next_actions=np.zeros((8, 1)))
    np.testing.assert_allclose(y, 0.495, atol=1e-15)


def test_risk_target_clamps_bootstrap_into_unit_interval(pair):
    for raw, expected in ((1.0, 0.99), (7.5, 0.99), (-3.0, 0.0)):
        pair.q_risk_target = constant_critic(3, 1, raw)
        y = risk_target(_batch(cost=0.0), pair, 0.99, next_actions=np.zeros((8, 1)))
        np.testing.assert_allclose(y, expected, atol=1e-15)


def test_risk_target_range_invariant(pair):
    rng = np.random.default_rng(5)
    for trial in range(20):
        pair.q_risk_target = nets.init(critic_spec(3, 1), trial)
        pair.q_risk_target.params = pair.q_risk_target.params + rng.normal(0, 2.0, pair.q_risk_target.params.shape)
        cost = rng.integers(0, 2, 8).astype(float)
        y = risk_target(_batch(cost=cost, seed=trial), pair, 0.99, rng.uniform(-1, 1, (8, 1)))
        assert np.all(y >= 0.0) and np.all(y <= 1.0)


def test_gate_inclusive_threshold():
    pair = make_risk_pair(3, 1, seed=1)
    obs = np.zeros(3)
    a_task = np.array([0.5])

    pair.q_risk = constant_critic(3, 1, 0.0)
    action, used = gate(obs, a_task, pair, 0.1)
    assert not used and np.array_equal(action, a_task)

    pair.q_risk = constant_critic(3, 1, 0.1)  # exactly delta: task action stays
    action, used = gate(obs, a_task, pair, 0.1)
    assert not used and np.array_equal(action, a_task)

    pair.q_risk = constant_critic(3, 1, 0.2)
    action, used = gate(obs, a_task, pair, 0.1)
    assert used
    assert np.array_equal(action, nets.forward(pair.pi_risk, obs))


def test_recovery_actor_frozen_when_risk_constant(pair):
    # risk critic with zero action weights: d risk / d action = 0 exactly
    pair.q_risk = constant_critic(3, 1, 0.7)
    before = pair.pi_risk.params.copy()
    update_risk_pair(pair, _batch(), 0.99, actor=nets.init(actor_spec(3, 1), 2),
                     delta=0.1, gate_active=False, update_actor=True)
    assert np.array_equal(pair.pi_risk.params, before)


def test_risk_critic_regresses_to_zero_on_safe_data(pair):
    batch = _batch(cost=0.0, seed=9)
    pair.q_risk_target = constant_critic(3, 1, 0.0)
    actor = nets.init(actor_spec(3, 1), 2)
    loss = None
    for _ in range(400):
        out = update_risk_pair(pair, batch, 0.99, actor, 0.1, gate_active=False,
                               update_actor=False, tau=0.0)
        loss = out["q_risk"]
    assert loss <= 1e-3


def test_recovery_actor_escapes_costly_action_region():
    # transitions with a > 0.5 always costly: pi_risk should steer below
    rng = np.random.default_rng(3)
    pair = make_risk_pair(2, 1, seed=4)
    actor = nets.init(actor_spec(2, 1), 5)
    for _ in range(1200):
        obs = rng.uniform(-1, 1, (64, 2))
        action = rng.uniform(-1, 1, (64, 1))
        cost = (action[:, 0] > 0.5).astype(float)
        batch = Batch(
            obs=obs,
            action=action,
            next_obs=rng.uniform(-1, 1, (64, 2)),
            reward=np.zeros(64),
            cost=cost,
            done=np.ones(64),  # isolate the immediate-cost structure
            prev_cost=np.zeros(64),
            task_action=action,
        )
        update_risk_pair(pair, batch, gamma=0.99, actor=actor, delta=0.1,
                         gate_active=False, update_actor=True)
    obs = rng.uniform(-1, 1, (128, 2))
    proposals = nets.forward_batch(pair.pi_risk, obs)
    x = np.concatenate([obs, proposals], axis=1)
    risk_at_proposal = nets.forward_batch(pair.q_risk, x)[:, 0]
    random_actions = rng.uniform(-1, 1, (128, 1))
    risk_at_random = nets.forward_batch(
        pair.q_risk, np.concatenate([obs, random_actions], axis=1)
    )[:, 0]
    assert np.mean(proposals > 0.5) <= 0.05
    assert risk_at_proposal.mean() < risk_at_random.mean()
