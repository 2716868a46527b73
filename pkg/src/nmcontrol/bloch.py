"""Bloch-vector representation, equations of motion and the fixed-step integrator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class BlochVector:
    x1: float
    x2: float
    x3: float

    @classmethod
    def from_array(cls, values) -> "BlochVector":
        x1, x2, x3 = (float(v) for v in values)
        return cls(x1, x2, x3)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x1 ** 2 + self.x2 ** 2 + self.x3 ** 2)

    @property
    def is_physical(self) -> bool:
        """True when the vector maps to a positive density matrix (norm <= 1)."""
        return self.norm <= 1.0 + 1e-12


#: Initial state used throughout the scenario study.
REFERENCE_INITIAL_STATE = BlochVector(math.sqrt(3.0) / 2.0, -math.sqrt(2.0) / 4.0,
                                      -math.sqrt(2.0) / 4.0)


def as_vector(x) -> np.ndarray:
    if isinstance(x, BlochVector):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DensityMatrix2:
    rho00: float
    rho11: float
    rho01: complex

    @property
    def rho10(self) -> complex:
        return complex(self.rho01).conjugate()

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.rho00, self.rho01], [self.rho10, self.rho11]], dtype=complex)

    def is_valid(self, atol: float = 1e-12) -> bool:
        trace_ok = abs(self.rho00 + self.rho11 - 1.0) <= atol
        positive = (self.rho00 >= -atol and self.rho11 >= -atol
                    and self.rho00 * self.rho11 - abs(self.rho01) ** 2 >= -atol)
        return trace_ok and positive


def bloch_from_density(rho: DensityMatrix2) -> BlochVector:
    """``x1 = rho01 + rho10``, ``x2 = i (rho01 - rho10)``, ``x3 = rho00 - rho11``."""
    c = complex(rho.rho01)
    return BlochVector(2.0 * c.real, -2.0 * c.imag, rho.rho00 - rho.rho11)


def density_from_bloch(x) -> DensityMatrix2:
    x1, x2, x3 = as_vector(x)
    return DensityMatrix2(0.5 * (1.0 + x3), 0.5 * (1.0 - x3), complex(0.5 * x1, -0.5 * x2))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + k h``, ``k = 0 .. n_steps``."""

    t0: float = 0.0
    tf: float = 20.0
    n_steps: int = 4000

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError(f"tf must exceed t0 (got t0={self.t0}, tf={self.tf})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def h(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + self.h * (np.arange(self.n_steps) + 0.5)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.tf, self.n_steps * factor)


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # shape (n_steps + 1, 3)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.grid.n_steps + 1, 3):
            raise ValueError("states must have shape (n_steps + 1, 3)")

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k) -> BlochVector:
        return BlochVector.from_array(self.states[k])

    @property
    def final(self) -> BlochVector:
        return self[-1]


@dataclass
class ControlField:
    """Grid-sampled control amplitudes, linear between samples."""

    grid: TimeGrid
    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        self.ux = np.asarray(self.ux, dtype=float)
        self.uy = np.asarray(self.uy, dtype=float)
        n = self.grid.n_steps + 1
        if self.ux.shape != (n,) or self.uy.shape != (n,):
            raise ValueError(f"control arrays must have length {n}")

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "ControlField":
        n = grid.n_steps + 1
        return cls(grid, np.zeros(n), np.zeros(n))

    def __call__(self, t):
        ts = self.grid.times
        return np.interp(t, ts, self.ux), np.interp(t, ts, self.uy)

    def resample(self, grid: TimeGrid) -> "ControlField":
        if grid == self.grid:
            return self
        ux, uy = self(grid.times)
        return ControlField(grid, ux, uy)

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.ux, self.uy)


def target_trajectory(t, x0, omega0: float = 1.0) -> np.ndarray:
    """Free precession of `x0` about z at `omega0`, measured from t = 0.

    Returns shape ``(3,)`` for scalar `t` and ``(len(t), 3)`` otherwise.
    """
    x1, x2, x3 = as_vector(x0)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(omega0 * t), np.sin(omega0 * t)
    return np.stack([x1 * c - x2 * s, x1 * s + x2 * c, np.full(t.shape, x3)], axis=-1)


def drift_matrix(ux: float, uy: float, delta: float, gamma: float,
                 omega0: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``A`` and ``B`` of ``dx/dt = A x + B`` at one instant."""
    A = np.array([
        [-delta, -omega0, uy],
        [omega0, -delta, -ux],
        [-uy, ux, -2.0 * delta],
    ])
    B = np.array([0.0, 0.0, -2.0 * gamma])
    return A, B


def _on_grid(values, source: TimeGrid, grid: TimeGrid) -> np.ndarray:
    if source == grid:
        return np.asarray(values, dtype=float)
    if source.t0 > grid.t0 or source.tf < grid.tf:
        raise ValueError("input samples do not cover the integration grid")
    return np.interp(grid.times, source.times, values)


def integrate(x0, controls: ControlField, coeffs, grid: TimeGrid | None = None) -> Trajectory:
    """Fixed-step RK4 solution of the driven Bloch equations.

    Controls and coefficients sampled on a different (covering) grid are
    linearly interpolated onto `grid`; half-step values are always the
    linear interpolation between neighbouring samples.
    """
    grid = grid or coeffs.grid
    ux = _on_grid(controls.ux, controls.grid, grid)
    uy = _on_grid(controls.uy, controls.grid, grid)
    delta = _on_grid(coeffs.delta, coeffs.grid, grid)
    gamma = _on_grid(coeffs.gamma, coeffs.grid, grid)
    states = kernels.rk4_state(as_vector(x0), ux, uy, delta, gamma, grid.h, coeffs.omega0)
    return Trajectory(grid, states)


def step_halving_error(x0, controls: ControlField, coeffs, grid: TimeGrid | None = None) -> float:
    """Max deviation between the solution on `grid` and on a grid with half the step."""
    grid = grid or coeffs.grid
    coarse = integrate(x0, controls, coeffs, grid)
    fine = integrate(x0, controls, coeffs, grid.refined(2))
    return float(np.max(np.abs(fine.states[::2] - coarse.states)))
