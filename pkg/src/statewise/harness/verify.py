"""Oracle verification suites behind the ``verify`` CLI subcommand.

Each suite pits a production component against its independent brute-force
counterpart and reports the worst deviation observed.  These are the same
checks the acceptance tests pin down, packaged for quick command-line runs.
"""

from __future__ import annotations

import numpy as np

from .. import nets, oracle, projection, usl
from ..backbone import actor_spec, critic_spec


def _fd_params_subset(net, x, upstream, coords, h=1e-6):
    """Central differences of upstream . net(x) over selected parameter coords."""
    base = net.params
    out = np.empty(len(coords))
    probe = nets.Mlp(net.spec, base.copy())
    for j, c in enumerate(coords):
        for sign, slot in ((+1.0, 0), (-1.0, 1)):
            p = base.copy()
            p[c] += sign * h
            probe.params = p
            val = float(upstream @ nets.forward(probe, x))
            if slot == 0:
                hi = val
            else:
                lo = val
        out[j] = (hi - lo) / (2.0 * h)
    return out


def verify_gradients(pairs_per_arch: int = 100, coords_per_pair: int = 64, seed: int = 0):
    """grad_params / grad_input vs central finite differences on used shapes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    archs = (
        actor_spec(4, 1),
        critic_spec(4, 1),
        nets.MlpSpec((4, 64, 64, 1), "relu", "softplus"),
        nets.MlpSpec((3, 8, 4, 2), "tanh", "identity"),
    )
    for spec in archs:
        for _ in range(pairs_per_arch):
            net = nets.init(spec, int(rng.integers(2**31)))
            net.params = net.params + rng.normal(0.0, 0.05, net.params.shape)
            x = rng.uniform(-1.0, 1.0, spec.in_dim)
            upstream = rng.normal(0.0, 1.0, spec.out_dim)
            analytic = nets.grad_params(net, x, upstream)
            n_coords = min(coords_per_pair, analytic.size)
            coords = rng.choice(analytic.size, size=n_coords, replace=False)
            fd = _fd_params_subset(net, x, upstream, coords)
            scale = max(1e-6, float(np.max(np.abs(fd))))
            worst = max(worst, float(np.max(np.abs(analytic[coords] - fd))) / scale)

            gi = nets.grad_input(net, x, upstream)
            fd_in = oracle.finite_diff_grad(
                lambda z: float(upstream @ nets.forward(net, z)), x
            )
            scale = max(1e-6, float(np.max(np.abs(fd_in))))
            worst = max(worst, float(np.max(np.abs(gi - fd_in))) / scale)
    return worst <= 1e-4, worst


def verify_projection(n_instances: int = 1000, seed: int = 0):
    """Closed-form halfspace projection vs the iterative QP, max deviation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        dim = int(rng.integers(1, 5))
        mu = rng.uniform(-1.0, 1.0, dim)
        g = rng.normal(0.0, 1.0, dim)
        if float(g @ g) < 1e-6:
            continue
        prev_cost = float(rng.choice([0.0, 1.0]))
        eps = float(rng.uniform(0.05, 0.5))
        closed = projection.halfspace_project(mu, g, prev_cost, eps)
        iterative = oracle.qp_halfspace_project(mu, g, prev_cost, eps)
        worst = max(worst, float(np.max(np.abs(closed - iterative))))
    return worst <= 1e-6, worst


def verify_unroll(seed: int = 0):
    """Identity on feasible actions, step bound, convex reachability, grid gap."""
    rng = np.random.default_rng(seed)
    cfg = usl.UslConfig()
    ok = True
    worst_gap = 0.0

    def quad(center):
        return lambda a: np.sum((a - center) ** 2, axis=-1)

    for _ in range(200):
        center = rng.uniform(-0.3, 0.3, 2)
        qc = quad(center)

        def qc_fn(_s, a, qc=qc):
            d = a - center
            return float(np.sum(d * d)), 2.0 * d

        a = rng.uniform(-1.0, 1.0, 2)
        out = usl.psi(None, a, qc_fn, cfg)
        if qc(a) <= cfg.delta:
            ok = ok and bool(np.array_equal(out, a))
        else:
            ok = ok and bool(np.all(np.abs(out - a) <= cfg.eta + 1e-12))

    for _ in range(100):
        center = rng.uniform(-0.2, 0.2, 2)
        direction = rng.normal(0.0, 1.0, 2)
        direction /= np.linalg.norm(direction)
        d0 = rng.uniform(0.4, 1.0)
        a0 = np.clip(center + d0 * direction, -1.0, 1.0)
        d = a0 - center
        # this descent shrinks ||d||_inf by exactly eta per step (same ray)
        need = (np.linalg.norm(d, np.inf) - np.sqrt(cfg.delta) * np.linalg.norm(d, np.inf) / np.linalg.norm(d)) / cfg.eta
        if need > cfg.k_max:
            continue

        def qc_fn(_s, a, center=center):
            dd = a - center
            return float(np.sum(dd * dd)), 2.0 * dd

        final, _ = usl.unroll(None, a0, qc_fn, cfg)
        ok = ok and float(np.sum((final - center) ** 2)) <= cfg.delta + 1e-9

    grid = oracle.GridSpec(((-1.0, 1.0, 201), (-1.0, 1.0, 201)))
    target = np.array([0.9, 0.2])
    q = lambda a: -np.sum((a - target) ** 2, axis=-1)
    qc = lambda a: np.sum(a * a, axis=-1)
    a_star, _ = oracle.grid_constrained_argmax(q, qc, 0.1, grid)
    penalty = lambda a: q(a) - 5.0 * np.maximum(0.0, qc(a) - 0.1)
    pts = grid.points()
    a0 = pts[int(np.argmax(penalty(pts)))]
    report = oracle.unroll_vs_grid(q, qc, 0.1, usl.UslConfig(eta=0.01), a0, grid)
    spacing = float(grid.spacing().max())
    worst_gap = report.action_gap
    ok = ok and report.feasible and report.action_gap <= 2.0 * spacing
    return ok, worst_gap


def verify_planning_span():
    inp = oracle.PlanningSpanInput(delta=0.1, eps=1.0, gamma=0.99)
    t = oracle.planning_span(inp)
    ok = (
        t == 229
        and oracle.planning_span_holds(inp, 229)
        and not oracle.planning_span_holds(inp, 230)
        and t >= 100
    )
    return ok, float(t)


def run_all() -> int:
    suites = (
        ("gradient-fidelity", verify_gradients),
        ("projection-closed-form", verify_projection),
        ("unroll-mechanics", verify_unroll),
        ("planning-span", verify_planning_span),
    )
    failures = 0
    for name, fn in suites:
        passed, detail = fn()
        status = "PASS" if passed else "FAIL"
        print(f"{status} {name} (max deviation / value: {detail:.3e})")
        failures += not passed
    return failures
