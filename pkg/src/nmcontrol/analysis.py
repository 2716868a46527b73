"""Coherence traces, decoherence times, control spectra and the controllability table."""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bloch import (REFERENCE_INITIAL_STATE, BlochVector, ControlField, TimeGrid, Trajectory,
                    as_vector, integrate)
from .pmp import CostWeights, NonConvergence, SweepConfig, markovian_control, solve_fbsm
from .reservoir import Method, ReservoirParams, coefficient_trace

#: Temperatures and cutoff ratios of the reference study grid.
TABLE_KBT = (0.3, 3.0, 300.0)
TABLE_R = (0.1, 1.0, 10.0)


def coherence(x) -> float | np.ndarray:
    """``|rho01| = sqrt(x1^2 + x2^2) / 2`` for one vector or an ``(n, 3)`` array."""
    if isinstance(x, BlochVector):
        return 0.5 * math.hypot(x.x1, x.x2)
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.hypot(x[..., 0], x[..., 1])
    return float(out) if out.ndim == 0 else out


def coherence_trace(traj: Trajectory) -> np.ndarray:
    return coherence(traj.states)


def retention(traj: Trajectory) -> float:
    """Final over initial coherence; NaN when the initial state has none."""
    c = coherence_trace(traj)
    return float(c[-1] / c[0]) if c[0] > 0 else math.nan


def decoherence_time(traj: Trajectory, threshold_fraction: float = math.exp(-1.0)):
    """First time coherence falls below `threshold_fraction` of its initial value.

    The crossing is linearly interpolated between grid samples. Returns
    None when the trace never crosses or starts without coherence.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    c = coherence_trace(traj)
    level = threshold_fraction * c[0]
    if level <= 0:
        return None
    below = np.flatnonzero(c < level)
    if below.size == 0:
        return None
    k = below[0]
    t = traj.grid.times
    frac = (c[k - 1] - level) / (c[k - 1] - c[k])
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectrum on angular frequencies ``0 .. pi/h``."""

    freqs: np.ndarray
    power: np.ndarray
    sample_spacing: float
    n_samples: int

    def __post_init__(self):
        if len(self.freqs) != len(self.power):
            raise ValueError("freqs and power must have equal length")

    def __add__(self, other: "Spectrum") -> "Spectrum":
        if (self.n_samples != other.n_samples
                or self.sample_spacing != other.sample_spacing):
            raise ValueError("spectra are on different frequency grids")
        return Spectrum(self.freqs, self.power + other.power, self.sample_spacing,
                        self.n_samples)

    def two_sided_total(self) -> float:
        """Sum of ``|X_k|^2`` over all DFT bins, recovered from the one-sided half."""
        p = self.power
        if self.n_samples % 2 == 0:
            return float(p[0] + p[-1] + 2.0 * p[1:-1].sum())
        return float(p[0] + 2.0 * p[1:].sum())


def power_spectrum(samples, sample_spacing: float) -> Spectrum:
    """``|DFT|^2`` of the mean-removed signal, rectangular window, one-sided."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D signal with at least 2 samples")
    if not sample_spacing > 0:
        raise ValueError("sample_spacing must be > 0")
    X = np.fft.rfft(x - x.mean())
    X[0] = 0.0  # zero by construction; drop the rounding residue
    freqs = 2.0 * np.pi * np.fft.rfftfreq(x.size, sample_spacing)
    return Spectrum(freqs, np.abs(X) ** 2, float(sample_spacing), x.size)


def control_spectrum(control: ControlField) -> Spectrum:
    """Combined spectrum of both control channels (powers add)."""
    h = control.grid.h
    return power_spectrum(control.ux, h) + power_spectrum(control.uy, h)


def bandwidth(spec: Spectrum, energy_fraction: float = 0.9) -> float:
    """Smallest angular frequency whose cumulative power reaches `energy_fraction`."""
    if not 0.0 < energy_fraction < 1.0:
        raise ValueError("energy_fraction must lie in (0, 1)")
    cum = np.cumsum(spec.power)
    total = cum[-1]
    if not total > 0:
        raise ValueError("bandwidth undefined for an all-zero spectrum")
    k = int(np.searchsorted(cum, energy_fraction * total, side="left"))
    return float(spec.freqs[min(k, len(cum) - 1)])


# -- controllability ---------------------------------------------------------------

class Label(str, enum.Enum):
    SLOW_DECAY = "SlowDecay"
    CONTROLLABLE = "Controllable"
    CONTROLLABLE_NON_MARKOVIAN_ONLY = "ControllableNonMarkovianOnly"
    UNCONTROLLABLE = "Uncontrollable"


@dataclass(frozen=True)
class ThresholdRule:
    """Labels a cell from final-over-initial coherence retentions.

    SlowDecay when the uncontrolled retention reaches `slow_decay`.
    Otherwise a controlled run "succeeds" when its retention is at least
    `gain` times the uncontrolled one and at least `floor`.
    """

    slow_decay: float = 0.8
    gain: float = 2.0
    floor: float = 0.5

    def succeeds(self, controlled: float, uncontrolled: float) -> bool:
        return controlled >= self.gain * uncontrolled and controlled >= self.floor

    def classify(self, uncontrolled: float, markovian: float, non_markovian: float) -> Label:
        if uncontrolled >= self.slow_decay:
            return Label.SLOW_DECAY
        mk = self.succeeds(markovian, uncontrolled)
        nm = self.succeeds(non_markovian, uncontrolled)
        if mk:
            return Label.CONTROLLABLE
        if nm:
            return Label.CONTROLLABLE_NON_MARKOVIAN_ONLY
        return Label.UNCONTROLLABLE

    def as_dict(self) -> dict:
        return {"slow_decay": self.slow_decay, "gain": self.gain, "floor": self.floor}


@dataclass
class ControllabilityCell:
    kBT: float
    r: float
    label: Label | None
    uncontrolled: float = math.nan
    markovian: float = math.nan
    non_markovian: float = math.nan
    converged: bool = True
    notes: list = field(default_factory=list)


@dataclass
class CellRuns:
    """Trajectories behind one table cell."""

    params: ReservoirParams
    uncontrolled: Trajectory
    non_markovian: object  # SweepResult
    markovian: object  # SweepResult on the Markovian model
    markovian_on_exact: Trajectory
    notes: list


def run_cell(params: ReservoirParams, grid: TimeGrid = TimeGrid(),
             weights: CostWeights = CostWeights(), config: SweepConfig = SweepConfig(),
             x0=REFERENCE_INITIAL_STATE) -> CellRuns:
    """Uncontrolled, non-Markovian-optimal and Markovian-optimal runs for one reservoir.

    The Markovian-optimal control is designed on the constant-coefficient
    model and then applied to the time-dependent dynamics, so all three
    retentions describe the same physical system.
    """
    x0 = as_vector(x0)
    exact = coefficient_trace(grid, params, Method.EXACT)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergence)
        nm = solve_fbsm(x0, exact, grid, weights, config)
        mk = markovian_control(x0, params, grid, weights, config)
    notes += [str(w.message) for w in caught if issubclass(w.category, NonConvergence)]
    return CellRuns(
        params=params,
        uncontrolled=integrate(x0, ControlField.zeros(grid), exact),
        non_markovian=nm,
        markovian=mk,
        markovian_on_exact=integrate(x0, mk.control, exact),
        notes=notes,
    )


def _table_cell(args) -> ControllabilityCell:
    params, grid, weights, config, rule, x0 = args
    try:
        runs = run_cell(params, grid, weights, config, x0)
    except (ArithmeticError, ValueError) as exc:
        return ControllabilityCell(params.kBT, params.r, None, converged=False,
                                   notes=[f"{type(exc).__name__}: {exc}"])
    unc = retention(runs.uncontrolled)
    mk = retention(runs.markovian_on_exact)
    nm = retention(runs.non_markovian.state)
    return ControllabilityCell(
        kBT=params.kBT, r=params.r, label=rule.classify(unc, mk, nm),
        uncontrolled=unc, markovian=mk, non_markovian=nm,
        converged=runs.non_markovian.converged and runs.markovian.converged,
        notes=runs.notes,
    )


def controllability_table(kBT_values=TABLE_KBT, r_values=TABLE_R,
                          base: ReservoirParams = ReservoirParams(),
                          grid: TimeGrid = TimeGrid(), weights: CostWeights = CostWeights(),
                          config: SweepConfig = SweepConfig(),
                          rule: ThresholdRule = ThresholdRule(),
                          x0=REFERENCE_INITIAL_STATE, jobs: int = 1) -> list:
    """Label every ``(kBT, r)`` cell; rows follow `r_values`, columns `kBT_values`.

    Returns a list of rows of `ControllabilityCell`. Failed cells carry
    ``label=None`` and the error in ``notes``.
    """
    tasks = [(base.replace(kBT=T, r=r), grid, weights, config, rule, x0)
             for r in r_values for T in kBT_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_table_cell, tasks))
    else:
        cells = [_table_cell(t) for t in tasks]
    n = len(kBT_values)
    return [cells[i:i + n] for i in range(0, len(cells), n)]
