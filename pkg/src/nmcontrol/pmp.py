"""Optimal tracking control via the minimum principle and a forward-backward sweep.

The problem is

    minimize  J[u] = int_0^tf |x - x_target|^2 + theta |u|^2 dt
    subject to dx/dt = A(t; u) x + B(t),  x(0) = x0,

with no terminal cost, so the costate satisfies lambda(tf) = 0. The
control Hamiltonian is strictly convex in ``u`` (Hessian ``2 theta I``),
which makes the stationarity condition a pointwise minimizer.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .bloch import ControlField, TimeGrid, Trajectory, as_vector, integrate, target_trajectory
from .reservoir import CoefficientTrace, Method, ReservoirParams, coefficient_trace

log = logging.getLogger(__name__)


class NonConvergence(RuntimeWarning):
    """Iteration budget exhausted; the partial result is still returned."""


@dataclass(frozen=True)
class CostWeights:
    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be > 0")


@dataclass(frozen=True)
class SweepConfig:
    relaxation: float = 0.3
    max_iters: int = 5000
    tol_cost: float = 1e-10
    tol_control: float = 1e-7
    max_halvings: int = 40

    def __post_init__(self):
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must be in (0, 1]")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.tol_cost > 0 or not self.tol_control > 0:
            raise ValueError("tolerances must be > 0")


@dataclass
class SweepResult:
    control: ControlField
    state: Trajectory
    costate: Trajectory
    cost_history: np.ndarray
    stationarity_residual: float
    converged: bool
    iterations: int = 0
    method: Method | None = None
    notes: list = field(default_factory=list)

    @property
    def cost(self) -> float:
        return float(self.cost_history[-1])


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


def cost(state: Trajectory, control: ControlField, weights: CostWeights,
         target: Trajectory) -> float:
    """Trapezoidal tracking-plus-effort cost on the shared grid."""
    if not (state.grid == control.grid == target.grid):
        raise ValueError("state, control and target must share a grid")
    err = np.sum((state.states - target.states) ** 2, axis=1)
    effort = control.ux ** 2 + control.uy ** 2
    return _trapezoid(err + weights.theta * effort, state.grid.h)


def costate_rhs(t: float, lam, x, target, A) -> np.ndarray:
    """``-2 (x - x_target) - A^T lambda``; `t` is unused (A already holds the control)."""
    return -2.0 * (as_vector(x) - as_vector(target)) - np.asarray(A).T @ np.asarray(lam, float)


def control_update(lam, x, weights: CostWeights):
    """Pointwise minimizer of the control Hamiltonian.

    Accepts single vectors or ``(n, 3)`` arrays and returns ``(ux, uy)``.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(as_vector(x) if np.ndim(x) == 0 or np.shape(x) == (3,) else x, float)
    l1, l2, l3 = np.moveaxis(lam, -1, 0)
    x1, x2, x3 = np.moveaxis(x, -1, 0)
    two_theta = 2.0 * weights.theta
    return (l2 * x3 - l3 * x2) / two_theta, (l3 * x1 - l1 * x3) / two_theta


def hamiltonian(x, u, lam, target, delta: float, gamma: float, weights: CostWeights,
                omega0: float = 1.0) -> float:
    """Control Hamiltonian ``|x - x_target|^2 + theta |u|^2 + lambda . (A x + B)``."""
    from .bloch import drift_matrix

    x = as_vector(x)
    ux, uy = u
    A, B = drift_matrix(ux, uy, delta, gamma, omega0)
    err = x - as_vector(target)
    return float(err @ err + weights.theta * (ux * ux + uy * uy) + np.asarray(lam) @ (A @ x + B))


def hamiltonian_gradient(lam, x, ux, uy, weights: CostWeights):
    """``(dH/dux, dH/duy)`` on arrays of samples."""
    cx, cy = control_update(lam, x, weights)
    two_theta = 2.0 * weights.theta
    return two_theta * (np.asarray(ux) - cx), two_theta * (np.asarray(uy) - cy)


def _target_arrays(x0, grid: TimeGrid, omega0: float):
    return (target_trajectory(grid.times, x0, omega0),
            target_trajectory(grid.midpoints, x0, omega0))


def integrate_costate(state: Trajectory, control: ControlField, coeffs: CoefficientTrace,
                      x0) -> Trajectory:
    """Backward RK4 sweep of the costate equation from ``lambda(tf) = 0``.

    `x0` fixes the target trajectory (free precession of the initial state).
    """
    grid = state.grid
    if control.grid != grid or coeffs.grid != grid:
        raise ValueError("state, control and coefficients must share a grid")
    tgt, tgt_mid = _target_arrays(x0, grid, coeffs.omega0)
    lam = kernels.rk4_costate(state.states, tgt, tgt_mid, control.ux, control.uy,
                              coeffs.delta, coeffs.gamma, grid.h, coeffs.omega0)
    return Trajectory(grid, lam)


def adjoint_gradient(x0, control: ControlField, coeffs: CoefficientTrace,
                     weights: CostWeights):
    """Pointwise cost gradient ``dH/du`` along the trajectory driven by `control`."""
    state = integrate(x0, control, coeffs, control.grid)
    lam = integrate_costate(state, control, coeffs, x0)
    return hamiltonian_gradient(lam.states, state.states, control.ux, control.uy, weights)


def adjoint_directional_derivative(x0, control: ControlField, coeffs: CoefficientTrace,
                                   weights: CostWeights, direction: ControlField) -> float:
    """``int dH/du . du dt``: first-order change of the cost along `direction`."""
    gx, gy = adjoint_gradient(x0, control, coeffs, weights)
    return _trapezoid(gx * direction.ux + gy * direction.uy, control.grid.h)


def evaluate_cost(x0, control: ControlField, coeffs: CoefficientTrace,
                  weights: CostWeights) -> float:
    grid = control.grid
    state = integrate(x0, control, coeffs, grid)
    target = Trajectory(grid, target_trajectory(grid.times, x0, coeffs.omega0))
    return cost(state, control, weights, target)


def solve_fbsm(x0, coeffs: CoefficientTrace, grid: TimeGrid | None = None,
               weights: CostWeights = CostWeights(), config: SweepConfig = SweepConfig(),
               initial_control: ControlField | None = None) -> SweepResult:
    """Forward-backward sweep for the two-point boundary-value problem.

    Each iteration integrates the state forward, the costate backward,
    forms the pointwise optimal control and moves a fraction
    ``relaxation`` towards it. A step that would raise the cost is
    retried with half the fraction. Iteration stops when the accepted
    step changes the cost by less than ``tol_cost`` (relative) and the
    control by less than ``tol_control`` (max norm), or after
    ``max_iters`` iterations. If no step size lowers the cost, the run
    ends and counts as converged only when the unhalved step would move
    the control by less than ``tol_control``. Convergence is judged on
    steps, so check ``stationarity_residual`` for the first-order condition.
    """
    grid = grid or coeffs.grid
    if coeffs.grid != grid:
        raise ValueError("coefficients must be sampled on the solver grid")
    x0 = as_vector(x0)
    w0 = coeffs.omega0
    tgt, tgt_mid = _target_arrays(x0, grid, w0)
    h = grid.h
    theta = weights.theta
    delta, gamma = coeffs.delta, coeffs.gamma

    def forward(ux, uy):
        X = kernels.rk4_state(x0, ux, uy, delta, gamma, h, w0)
        err = np.sum((X - tgt) ** 2, axis=1)
        return X, _trapezoid(err + theta * (ux * ux + uy * uy), h)

    control = initial_control.resample(grid) if initial_control else ControlField.zeros(grid)
    ux, uy = control.ux.copy(), control.uy.copy()
    X, J = forward(ux, uy)
    history = [J]
    converged = False
    notes = []
    it = 0
    for it in range(1, config.max_iters + 1):
        lam = kernels.rk4_costate(X, tgt, tgt_mid, ux, uy, delta, gamma, h, w0)
        cx, cy = control_update(lam, X, weights)
        kappa = config.relaxation
        for _ in range(config.max_halvings + 1):
            nx = ux + kappa * (cx - ux)
            ny = uy + kappa * (cy - uy)
            Xn, Jn = forward(nx, ny)
            if Jn <= J:
                break
            kappa *= 0.5
        else:
            # no descent at any step size: stationary if even the full step is tiny
            gap = max(np.max(np.abs(cx - ux)), np.max(np.abs(cy - uy)))
            converged = config.relaxation * gap < config.tol_control
            notes.append(f"line search stalled at iteration {it}")
            log.debug("sweep stalled at iteration %d (J=%.17g)", it, J)
            break
        rel_change = abs(J - Jn) / max(abs(J), np.finfo(float).tiny)
        du = max(np.max(np.abs(nx - ux)), np.max(np.abs(ny - uy)))
        ux, uy, X, J = nx, ny, Xn, Jn
        history.append(J)
        if rel_change < config.tol_cost and du < config.tol_control:
            converged = True
            break

    lam = kernels.rk4_costate(X, tgt, tgt_mid, ux, uy, delta, gamma, h, w0)
    gx, gy = hamiltonian_gradient(lam, X, ux, uy, weights)
    residual = float(np.max(np.hypot(gx, gy)))
    if not converged:
        warnings.warn(
            f"forward-backward sweep did not converge in {it} iterations "
            f"(stationarity residual {residual:.3g})", NonConvergence, stacklevel=2)
    return SweepResult(
        control=ControlField(grid, ux, uy),
        state=Trajectory(grid, X),
        costate=Trajectory(grid, lam),
        cost_history=np.asarray(history),
        stationarity_residual=residual,
        converged=converged,
        iterations=it,
        method=coeffs.method,
        notes=notes,
    )


def markovian_control(x0, params: ReservoirParams, grid: TimeGrid = TimeGrid(),
                      weights: CostWeights = CostWeights(),
                      config: SweepConfig = SweepConfig()) -> SweepResult:
    """Sweep solution with the coefficients frozen at their stationary values."""
    coeffs = coefficient_trace(grid, params, Method.MARKOVIAN)
    return solve_fbsm(x0, coeffs, grid, weights, config)
