"""Brute-force verifiers, each implemented independently of the code it checks.

Contents: an exhaustive grid solver for the constrained action argmax, central
finite differences, a projected-gradient quadratic program for the halfspace
projection (deliberately iterative, never the closed form), a straight-line
re-implementation of the MLP forward pass, a fixed-step RK4 integrator for
environment dynamics, and the closed-form planning-span bound.

Everything here runs at desk scale only: grids up to two action dimensions,
single transitions, single networks.  These functions validate mechanisms,
not full policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InfeasibleGridError(ValueError):
    """No grid point satisfies the constraint."""


class DegenerateGradientError(ValueError):
    """Constraint gradient too small to define a projection."""


@dataclass(frozen=True)
class GridSpec:
    """Per-dimension (lo, hi, points) axes of an exhaustive search grid."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        total = 1
        for lo, hi, points in self.axes:
            if not lo < hi:
                raise ValueError(f"need lo < hi, got ({lo}, {hi})")
            if points < 2:
                raise ValueError("each axis needs at least 2 points")
            total *= points
        if total > 10_000_000:
            raise ValueError(f"grid too large ({total} points)")

    def points(self) -> np.ndarray:
        """All grid points, shape (N, ndim), in lexicographic order."""
        axes = [np.linspace(lo, hi, n) for lo, hi, n in self.axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in self.axes])


def grid_constrained_argmax(q, qc, delta: float, grid: GridSpec):
    """Exhaustively maximize q over the grid points with qc <= delta.

    q and qc take a (N, ndim) batch of actions and return (N,) values.  Ties
    break to the lexicographically smallest action.  Raises
    InfeasibleGridError when no point is feasible.
    """
    pts = grid.points()
    qc_vals = np.asarray(qc(pts), dtype=np.float64)
    feasible = qc_vals <= delta
    if not feasible.any():
        raise InfeasibleGridError(f"no grid point satisfies qc <= {delta}")
    q_vals = np.asarray(q(pts), dtype=np.float64)
    masked = np.where(feasible, q_vals, -np.inf)
    best = int(np.argmax(masked))  # first maximum = lexicographically smallest
    return pts[best].copy(), float(q_vals[best])


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2.0 * h)
    return grad


def qp_halfspace_project(
    mu: np.ndarray,
    g: np.ndarray,
    c_prev: float,
    eps: float,
    step: float = 0.3,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> np.ndarray:
    """Minimize 0.5*||a - mu||^2 subject to g.a + c_prev <= eps, iteratively.

    Projected gradient descent, run to a fixed point instead of using the
    closed form, so it can independently validate the analytic projection.
    """
    mu = np.asarray(mu, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    gg = float(g @ g)
    if gg < 1e-16:
        raise DegenerateGradientError("constraint gradient is (near-)zero")
    bound = eps - c_prev
    a = mu.copy()
    for _ in range(max_iters):
        candidate = a - step * (a - mu)
        overshoot = float(g @ candidate) - bound
        if overshoot > 0.0:
            candidate = candidate - (overshoot / gg) * g
        if float(np.max(np.abs(candidate - a))) <= tol:
            return candidate
        a = candidate
    return a


def straightline_forward(layer_widths, hidden_activation, output_activation, params, x):
    """Second, independent evaluation of the flat-vector MLP layout.

    Re-derives the weight/bias offsets from the widths and applies the layers
    one by one; shares no code with the nets module.
    """
    a = np.asarray(x, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    widths = list(layer_widths)
    offset = 0
    n_layers = len(widths) - 1
    for i in range(n_layers):
        fan_in, fan_out = widths[i], widths[i + 1]
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        z = a @ w + b
        if i < n_layers - 1:
            if hidden_activation == "relu":
                a = np.where(z > 0.0, z, 0.0)
            else:
                a = np.tanh(z)
        else:
            a = z
    if offset != params.size:
        raise ValueError("params length does not match the widths")
    if output_activation == "tanh":
        a = np.tanh(a)
    elif output_activation == "softplus":
        # log(1 + e^z) via the stable split, written differently on purpose
        a = np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))
    return a


def rk4(derivative, state: np.ndarray, t_total: float, n_steps: int) -> np.ndarray:
    """Classic fixed-step Runge-Kutta 4 integration of ds/dt = derivative(s)."""
    s = np.asarray(state, dtype=np.float64).copy()
    h = t_total / n_steps
    for _ in range(n_steps):
        k1 = derivative(s)
        k2 = derivative(s + 0.5 * h * k1)
        k3 = derivative(s + 0.5 * h * k2)
        k4 = derivative(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return s


@dataclass(frozen=True)
class PlanningSpanInput:
    delta: float
    eps: float
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.delta <= self.eps:
            raise ValueError(f"need 0 < delta <= eps, got {self.delta}, {self.eps}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"need 0 < gamma < 1, got {self.gamma}")


def planning_span_holds(inp: PlanningSpanInput, t: int) -> bool:
    """Predicate: delta <= eps * gamma^t."""
    return inp.delta <= inp.eps * inp.gamma**t


def planning_span(inp: PlanningSpanInput) -> int:
    """Largest integer T with delta <= eps * gamma^T.

    Starts from floor(ln(delta/eps)/ln(gamma)) and nudges by the exact
    predicate, so floating-point edge cases cannot shift the answer.
    """
    t = max(0, math.floor(math.log(inp.delta / inp.eps) / math.log(inp.gamma)))
    while planning_span_holds(inp, t + 1):
        t += 1
    while t > 0 and not planning_span_holds(inp, t):
        t -= 1
    return t


@dataclass
class UnrollReport:
    final_action: np.ndarray
    iterations: int
    feasible: bool
    grid_action: np.ndarray
    grid_value: float
    q_gap: float
    action_gap: float


def unroll_vs_grid(q, qc, delta: float, cfg, a0: np.ndarray, grid: GridSpec) -> UnrollReport:
    """Run the iterative action correction from a0 and score it against the grid.

    q/qc take (N, ndim) batches.  The correction sees qc only as a black box:
    its descent direction comes from finite differences here, independent of
    any network gradient code.
    """
    from . import usl  # local import: oracle must not be required by usl

    def qc_fn(_state, action):
        batch = np.asarray(action, dtype=np.float64)[None, :]
        value = float(np.asarray(qc(batch))[0])
        grad = finite_diff_grad(lambda a: float(np.asarray(qc(a[None, :]))[0]), action)
        return value, grad

    a_star, q_star = grid_constrained_argmax(q, qc, delta, grid)
    final, iters = usl.unroll(None, np.asarray(a0, dtype=np.float64), qc_fn, cfg)
    qc_final = float(np.asarray(qc(final[None, :]))[0])
    q_final = float(np.asarray(q(final[None, :]))[0])
    return UnrollReport(
        final_action=final,
        iterations=iters,
        feasible=qc_final <= delta + 1e-9,
        grid_action=a_star,
        grid_value=q_star,
        q_gap=q_star - q_final,
        action_gap=float(np.max(np.abs(final - a_star))),
    )
