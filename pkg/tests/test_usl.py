import numpy as np
import pytest

from statewise import nets, usl
from statewise.backbone import make_bundle, plain_actor_upstream
from statewise.nets import Mlp
from statewise.replay import Batch
from statewise.usl import UslConfig, UslStats, penalty_actor_upstream, psi, unroll, usl_act


def constant_critic(spec_net, value):
    net = Mlp(spec_net.spec, np.zeros(spec_net.spec.param_count()))
    params = net.params.copy()
    params[-1] = value
    net.params = params
    return net


def quadratic_qc(delta_unused=None):
    """Scalar constraint qc(a) = a^2 with its exact gradient."""

    def fn(_obs, action):
        a = float(action[0])
        return a * a, np.array([2.0 * a])

    return fn


def _batch(n=8, obs_dim=3, act_dim=1, seed=0):
    rng = np.random.default_rng(seed)
    return Batch(
        obs=rng.uniform(-1, 1, (n, obs_dim)),
        action=rng.uniform(-1, 1, (n, act_dim)),
        next_obs=rng.uniform(-1, 1, (n, obs_dim)),
        reward=np.zeros(n),
        cost=np.zeros(n),
        done=np.zeros(n),
        prev_cost=np.zeros(n),
        task_action=rng.uniform(-1, 1, (n, act_dim)),
    )


def test_config_validation():
    with pytest.raises(ValueError):
        UslConfig(kappa=-1.0)
    with pytest.raises(ValueError):
        UslConfig(eta=0.0)
    with pytest.raises(ValueError):
        UslConfig(k_max=-1)
    UslConfig(kappa=0.0, k_max=0)  # both-stages-off ablation is legal


def test_psi_identity_on_feasible_actions():
    cfg = UslConfig()
    a = np.array([0.2])
    out = psi(None, a, quadratic_qc(), cfg)  # 0.04 <= 0.1
    assert np.array_equal(out, a)


def test_psi_quadratic_normalized_step():
    # qc(a) = a^2 at a=1: grad 2, inf-norm 2 -> step exactly eta
    cfg = UslConfig(eta=0.05, delta=0.1)
    out = psi(None, np.array([1.0]), quadratic_qc(), cfg)
    assert out[0] == pytest.approx(0.95, abs=1e-15)


def test_psi_per_coordinate_step_bounded_by_eta():
    rng = np.random.default_rng(0)
    cfg = UslConfig()

    def qc_fn(_obs, action):
        return 5.0, rng.normal(0, 1, action.shape)  # always violated

    for _ in range(100):
        a = rng.uniform(-0.9, 0.9, 3)
        out = psi(None, a, qc_fn, cfg)
        assert np.all(np.abs(out - a) <= cfg.eta + 1e-12)


def test_psi_degenerate_gradient_is_identity_with_diagnostic():
    stats = UslStats()
    cfg = UslConfig()
    out = psi(None, np.array([0.5]), lambda o, a: (9.0, np.zeros(1)), cfg, stats)
    assert np.array_equal(out, [0.5])
    assert stats.degenerate == 1


def test_unroll_feasible_start_returns_immediately():
    a0 = np.array([0.1])
    out, iters = unroll(None, a0, quadratic_qc(), UslConfig())
    assert iters == 0
    assert np.array_equal(out, a0)


def test_unroll_arithmetic_progression():
    # iterates 1.00, 0.95, ...: first a with a^2 <= 0.1 is 0.30 after 14 steps
    out, iters = unroll(None, np.array([1.0]), quadratic_qc(), UslConfig(eta=0.05, delta=0.1))
    assert iters == 14
    assert out[0] == pytest.approx(0.30, abs=1e-9)
    assert out[0] ** 2 <= 0.1


def test_unroll_kmax_zero_is_stage_one_only():
    a0 = np.array([1.0])
    out, iters = unroll(None, a0, quadratic_qc(), UslConfig(k_max=0))
    assert iters == 0
    assert np.array_equal(out, a0)


def test_unroll_total_displacement_bounded():
    cfg = UslConfig(eta=0.05, k_max=20)
    rng = np.random.default_rng(1)

    def qc_fn(_obs, action):
        return 1.0, rng.normal(0, 1, action.shape)  # never feasible

    a0 = np.zeros(2)
    out, iters = unroll(None, a0, qc_fn, cfg)
    assert iters == cfg.k_max
    assert np.all(np.abs(out - a0) <= cfg.eta * cfg.k_max + 1e-12)


def test_unroll_flags_nonconvergence():
    stats = UslStats()
    cfg = UslConfig(k_max=3)

    def qc_fn(_obs, action):
        return 1.0, np.ones(1)

    unroll(None, np.array([0.5]), qc_fn, cfg, stats)
    assert stats.nonconverged == 1


def test_unroll_monotone_violation_decrease_on_convex_constraint():
    # not asserted in general; holds for small steps on a convex bowl
    cfg = UslConfig(eta=0.05, k_max=20, delta=0.1)
    center = np.array([0.1, -0.2])

    def qc_fn(_obs, action):
        d = action - center
        return float(d @ d), 2.0 * d

    a = np.array([0.95, 0.8])
    last = max(0.0, qc_fn(None, a)[0] - cfg.delta)
    for _ in range(cfg.k_max):
        a = psi(None, a, qc_fn, cfg)
        violation = max(0.0, qc_fn(None, a)[0] - cfg.delta)
        assert violation <= last + 1e-12
        last = violation


def test_penalty_loss_inactive_hinge_is_bitwise_plain():
    bundle = make_bundle(3, 1, seed=0)
    bundle.qc = constant_critic(bundle.qc, 0.0)  # always feasible
    batch = _batch()
    actions = nets.forward_batch(bundle.actor, batch.obs)
    up_plain, loss_plain = plain_actor_upstream(bundle, batch.obs, actions)
    up_pen, loss_pen = penalty_actor_upstream(bundle, batch.obs, actions, UslConfig(kappa=5.0))
    assert np.array_equal(up_plain, up_pen)
    assert loss_plain == loss_pen


def test_penalty_loss_kappa_zero_is_bitwise_plain():
    bundle = make_bundle(3, 1, seed=1)
    batch = _batch(seed=2)
    actions = nets.forward_batch(bundle.actor, batch.obs)
    up_plain, loss_plain = plain_actor_upstream(bundle, batch.obs, actions)
    up_pen, loss_pen = penalty_actor_upstream(bundle, batch.obs, actions, UslConfig(kappa=0.0))
    assert np.array_equal(up_plain, up_pen)
    assert loss_plain == loss_pen


def test_penalty_loss_direct_substitution():
    # Q = 2, Qc = 0.6, delta = 0.1, kappa = 5 -> -2 + 5 * 0.5 = 0.5
    bundle = make_bundle(3, 1, seed=0)
    bundle.q1 = constant_critic(bundle.q1, 2.0)
    bundle.qc = constant_critic(bundle.qc, 0.6)
    batch = _batch()
    actions = nets.forward_batch(bundle.actor, batch.obs)
    _, loss = penalty_actor_upstream(bundle, batch.obs, actions, UslConfig(kappa=5.0, delta=0.1))
    assert loss == pytest.approx(0.5, abs=1e-12)


def test_penalty_gradient_matches_finite_differences():
    bundle = make_bundle(3, 1, seed=3)
    cfg = UslConfig(kappa=5.0, delta=0.0)  # delta 0 keeps the hinge active
    batch = _batch(n=6, seed=4)

    def loss_at(theta):
        probe = Mlp(bundle.actor.spec, theta)
        a = nets.forward_batch(probe, batch.obs)
        x = np.concatenate([batch.obs, a], axis=1)
        q = nets.forward_batch(bundle.q1, x)[:, 0]
        qc = nets.forward_batch(bundle.qc, x)[:, 0]
        return float(np.mean(-q + cfg.kappa * np.maximum(0.0, qc - cfg.delta)))

    actions, cache = nets.forward_cache(bundle.actor, batch.obs)
    qc_vals = nets.forward_batch(bundle.qc, np.concatenate([batch.obs, actions], axis=1))[:, 0]
    assert np.all(np.abs(qc_vals - cfg.delta) > 1e-3)  # stay away from the kink
    upstream, _ = penalty_actor_upstream(bundle, batch.obs, actions, cfg)
    analytic = nets.backward_params(bundle.actor, cache, upstream)
    rng = np.random.default_rng(5)
    base = bundle.actor.params
    for c in rng.choice(analytic.size, 40, replace=False):
        up, dn = base.copy(), base.copy()
        up[c] += 1e-6
        dn[c] -= 1e-6
        fd = (loss_at(up) - loss_at(dn)) / 2e-6
        assert abs(analytic[c] - fd) <= 1e-4 * max(1.0, abs(fd))


def test_usl_act_eval_feasible_actor_passthrough():
    bundle = make_bundle(3, 1, seed=0)
    bundle.qc = constant_critic(bundle.qc, 0.0)
    qc_fn = usl.critic_fn(bundle.qc, 3)
    obs = np.array([0.3, -0.1, 0.2])
    action, iters = usl_act(bundle, qc_fn, obs, UslConfig(), mode="eval")
    assert iters == 0
    assert np.array_equal(action, nets.forward(bundle.actor, obs))


def test_usl_act_train_deterministic_under_fixed_rng():
    bundle = make_bundle(3, 1, seed=0)
    qc_fn = usl.critic_fn(bundle.qc, 3)
    obs = np.zeros(3)
    a1, _ = usl_act(bundle, qc_fn, obs, UslConfig(), mode="train", rng=np.random.default_rng(4))
    a2, _ = usl_act(bundle, qc_fn, obs, UslConfig(), mode="train", rng=np.random.default_rng(4))
    assert np.array_equal(a1, a2)
    with pytest.raises(ValueError):
        usl_act(bundle, qc_fn, obs, UslConfig(), mode="rollout")


def test_critic_fn_gradient_matches_mlp_grad():
    bundle = make_bundle(3, 2, seed=6)
    qc_fn = usl.critic_fn(bundle.qc, 3)
    obs = np.array([0.1, 0.5, -0.3])
    action = np.array([0.2, -0.6])
    value, grad = qc_fn(obs, action)
    x = np.concatenate([obs, action])
    # same math as forward + grad_input, up to BLAS summation order
    assert value == pytest.approx(float(nets.forward(bundle.qc, x)[0]), abs=1e-12)
    full = nets.grad_input(bundle.qc, x, np.ones(1))
    np.testing.assert_allclose(grad, full[3:], rtol=0, atol=1e-12)
