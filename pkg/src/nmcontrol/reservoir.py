"""Ohmic (Lorentz-Drude) reservoir: kernels and the time-dependent coefficients.

Units: hbar = k_B = 1 and frequencies are measured in units of the
system transition frequency ``omega0``. The coefficient formulas carry
the coupling ``alpha2``; the bare kernels do not, so every quadrature
of a kernel is multiplied by ``alpha2 / 2`` to land in the same
normalization as the closed forms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import zeta

from .bloch import TimeGrid
from .special import DEFAULT_TOL, SeriesNonConvergence, f_bar, g_bar

#: Series path for the diffusion coefficient is used only when exp(-nu1 t) <= this.
SERIES_MAX_ARGUMENT = 0.95
#: kBT / omega0 at and above which the Markovian trace uses the high-T diffusion limit.
HIGH_T_MARKOV_THRESHOLD = 30.0
POLE_DISTANCE = 1e-9
DEGENERATE_RTOL = 1e-6


class Method(str, enum.Enum):
    EXACT = "exact"
    HIGH_T = "high-t"
    MARKOVIAN = "markovian"
    QUADRATURE = "quadrature"


class CoefficientError(ArithmeticError):
    """A coefficient could not be evaluated at some grid sample."""


@dataclass(frozen=True)
class ReservoirParams:
    """Bath and system parameters.

    ``r`` is the cutoff ratio ``omega_c / omega0``; ``gamma0`` scales the
    spectral density (1 in the standard Lorentz-Drude convention).
    """

    alpha2: float = 0.01
    omega0: float = 1.0
    r: float = 0.1
    kBT: float = 300.0
    gamma0: float = 1.0

    def __post_init__(self):
        for name in ("alpha2", "omega0", "r", "kBT", "gamma0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be > 0, got {value!r}")

    @property
    def omega_c(self) -> float:
        return self.r * self.omega0

    @property
    def nu1(self) -> float:
        """First Matsubara frequency ``2 pi kBT``."""
        return 2.0 * math.pi * self.kBT

    @property
    def r0(self) -> float:
        return self.omega0 / self.nu1

    @property
    def rc(self) -> float:
        return self.omega_c / self.nu1

    @property
    def rate_scale(self) -> float:
        """``gamma0 alpha2 omega0 r^2 / (1 + r^2)``, the common coefficient prefactor."""
        r2 = self.r * self.r
        return self.gamma0 * self.alpha2 * self.omega0 * r2 / (1.0 + r2)

    def replace(self, **changes) -> "ReservoirParams":
        values = {k: getattr(self, k) for k in ("alpha2", "omega0", "r", "kBT", "gamma0")}
        values.update(changes)
        return ReservoirParams(**values)


@dataclass
class CoefficientTrace:
    grid: TimeGrid
    delta: np.ndarray
    gamma: np.ndarray
    method: Method
    #: samples that were filled from the quadrature oracle instead of the series
    quadrature_fallback: np.ndarray = field(default=None)
    omega0: float = 1.0

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        n = self.grid.n_steps + 1
        if self.delta.shape != (n,) or self.gamma.shape != (n,):
            raise ValueError(f"coefficient arrays must have length {n}")
        if self.quadrature_fallback is None:
            self.quadrature_fallback = np.zeros(n, dtype=bool)

    @classmethod
    def constant(cls, grid: TimeGrid, delta: float, gamma: float,
                 method: Method = Method.MARKOVIAN, omega0: float = 1.0) -> "CoefficientTrace":
        n = grid.n_steps + 1
        return cls(grid, np.full(n, float(delta)), np.full(n, float(gamma)), method,
                   omega0=omega0)


class MarkovianLimits(NamedTuple):
    gamma_M: float
    delta_M: float
    delta_M_HT: float


# -- spectral density and kernels ------------------------------------------------

def spectral_density(omega, params: ReservoirParams):
    """``(2 gamma0 / pi) omega omega_c^2 / (omega_c^2 + omega^2)``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    wc2 = params.omega_c ** 2
    out = 2.0 * params.gamma0 / math.pi * omega * wc2 / (wc2 + omega * omega)
    return out[()] if out.ndim == 0 else out


def dissipation_kernel(tau, params: ReservoirParams):
    """``2 gamma0 omega_c^2 exp(-omega_c |tau|) sign(tau)``."""
    tau = np.asarray(tau, dtype=float)
    wc = params.omega_c
    out = 2.0 * params.gamma0 * wc * wc * np.exp(-wc * np.abs(tau)) * np.sign(tau)
    return out[()] if out.ndim == 0 else out


def _degenerate_index(params: ReservoirParams):
    """Matsubara index n >= 1 with |nu_n| ~= omega_c, or None."""
    m = round(params.rc)
    if m >= 1 and abs(params.rc - m) <= DEGENERATE_RTOL * params.rc:
        return int(m)
    return None


def noise_kernel(tau, params: ReservoirParams, n_matsubara: int = 200):
    """Matsubara series of the noise kernel, truncated at ``|n| <= n_matsubara``.

    The ``+n`` and ``-n`` terms are paired. A term with ``|nu_n| == omega_c``
    is replaced by its limit ``(1 - omega_c tau) exp(-omega_c tau) / (2 omega_c)``.
    """
    if n_matsubara < 1:
        raise ValueError("n_matsubara must be >= 1")
    tau = np.abs(np.asarray(tau, dtype=float))
    wc = params.omega_c
    nu = params.nu1 * np.arange(1, n_matsubara + 1)
    t = tau[..., None]
    ec = np.exp(-wc * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (wc * ec - nu * np.exp(-nu * t)) / (wc * wc - nu * nu)
    m = _degenerate_index(params)
    if m is not None and m <= n_matsubara:
        terms[..., m - 1] = (1.0 - wc * tau) * np.exp(-wc * tau) / (2.0 * wc)
    out = 4.0 * params.gamma0 * params.kBT * wc * wc * (
        np.exp(-wc * tau) / wc + 2.0 * terms.sum(axis=-1)
    )
    return out[()] if out.ndim == 0 else out


def noise_kernel_tail_bound(tau, params: ReservoirParams, n_matsubara: int):
    """Upper bound on the magnitude of the Matsubara terms omitted by `noise_kernel`.

    Infinite at ``tau = 0``, where the full series diverges logarithmically,
    and whenever ``n_matsubara`` does not exceed ``omega_c / nu1``.
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    n, a = n_matsubara, params.rc
    if n <= a:
        return np.full(tau.shape, np.inf)[()]
    nu1, wc = params.nu1, params.omega_c
    q = np.exp(-nu1 * tau)
    const_part = wc * np.exp(-wc * tau) / nu1 ** 2 / (n - a)
    with np.errstate(divide="ignore"):
        exp_part = q ** (n + 1) / ((n + 1) * -np.expm1(-nu1 * tau)) / nu1
    exp_part = exp_part / (1.0 - (a / (n + 1)) ** 2)
    out = 8.0 * params.gamma0 * params.kBT * wc * wc * (const_part + exp_part)
    return out[()] if np.ndim(out) == 0 else out


class _ResummedNoiseKernel:
    """Noise kernel in a form that converges uniformly down to tau = 0.

    The slowly convergent pieces of the Matsubara series are summed in
    closed form: ``sum_n exp(-nu_n tau) / nu_n = -log(1 - exp(-nu1 tau)) / nu1``
    and ``sum_n 1 / (omega_c^2 - nu_n^2)`` via Hurwitz zeta tails. What
    remains decays like ``n^-3``.
    """

    def __init__(self, params: ReservoirParams, n_terms: int):
        self.params = params
        wc, nu1, a = params.omega_c, params.nu1, params.rc
        if n_terms <= 2 * a:
            n_terms = int(2 * a) + 1
        self.n_terms = n_terms
        n = np.arange(1, n_terms + 1)
        self.nu = nu1 * n
        self.skip = _degenerate_index(params)
        keep = np.ones(n_terms, dtype=bool)
        if self.skip is not None:
            keep[self.skip - 1] = False
        self.keep = keep
        head = np.sum(1.0 / (wc * wc - self.nu[keep] ** 2))
        ratio = (a / (n_terms + 1)) ** 2
        tail = 0.0
        k = 0
        while True:
            piece = a ** (2 * k) * zeta(2 * k + 2, n_terms + 1)
            tail += piece
            k += 1
            if piece <= 1e-18 * abs(tail) or k > 200 or ratio == 0.0:
                break
        self.s1 = head - tail / nu1 ** 2
        self.coef = wc * wc / (self.nu[keep] * (self.nu[keep] ** 2 - wc * wc))
        self.scale = 4.0 * params.gamma0 * params.kBT * wc * wc

    def __call__(self, tau: float) -> float:
        p = self.params
        wc, nu1 = p.omega_c, p.nu1
        ec = math.exp(-wc * tau)
        log_part = -math.log(-math.expm1(-nu1 * tau)) / nu1
        rest = float(np.dot(self.coef, np.exp(-self.nu[self.keep] * tau)))
        total = wc * ec * self.s1 + log_part + rest
        if self.skip is not None:
            nu_m = self.nu[self.skip - 1]
            total += (1.0 - wc * tau) * ec / (2.0 * wc) - math.exp(-nu_m * tau) / nu_m
        return self.scale * (ec / wc + 2.0 * total)

    @staticmethod
    def integrated_tail_bound(params: ReservoirParams, n_terms: int) -> float:
        """Bound on the omitted remainder after multiplying by cos and integrating over tau."""
        a = params.rc
        if n_terms + 1 <= a:
            return math.inf
        wc, nu1 = params.omega_c, params.nu1
        return (4.0 * params.gamma0 * params.alpha2 * params.kBT * wc ** 4
                / (nu1 ** 4 * 3.0 * n_terms ** 3 * (1.0 - (a / (n_terms + 1)) ** 2)))

    @classmethod
    def for_tolerance(cls, params: ReservoirParams, rel_tol: float = 1e-9,
                      start: int = 200, cap: int = 1 << 20) -> "_ResummedNoiseKernel":
        scale = params.rate_scale * max(1.0, 1.0 / math.tanh(math.pi * params.r0))
        n = start
        while cls.integrated_tail_bound(params, n) > rel_tol * scale and n < cap:
            n *= 2
        return cls(params, n)


# -- closed-form coefficients ----------------------------------------------------

def gamma_exact(t, params: ReservoirParams):
    """Dissipation coefficient in closed form."""
    t = np.asarray(t, dtype=float)
    w0, r = params.omega0, params.r
    env = np.exp(-r * w0 * t)
    out = params.rate_scale * (1.0 - env * np.cos(w0 * t) - r * env * np.sin(w0 * t))
    return out[()] if out.ndim == 0 else out


def delta_highT(t, params: ReservoirParams):
    """High-temperature limit of the diffusion coefficient."""
    t = np.asarray(t, dtype=float)
    w0, r = params.omega0, params.r
    env = np.exp(-r * w0 * t)
    amp = 2.0 * params.gamma0 * params.alpha2 * params.kBT * r * r / (1.0 + r * r)
    out = amp * (1.0 - env * (np.cos(w0 * t) - np.sin(w0 * t) / r))
    return out[()] if out.ndim == 0 else out


def markovian_limits(params: ReservoirParams) -> MarkovianLimits:
    k = params.rate_scale
    r2 = params.r ** 2
    return MarkovianLimits(
        gamma_M=k,
        delta_M=k / math.tanh(math.pi * params.r0),
        delta_M_HT=2.0 * params.gamma0 * params.alpha2 * params.kBT * r2 / (1.0 + r2),
    )


def series_threshold_time(params: ReservoirParams) -> float:
    """Smallest t for which the diffusion series is used (exp(-nu1 t) <= 0.95)."""
    return -math.log(SERIES_MAX_ARGUMENT) / params.nu1


def check_cot_pole(params: ReservoirParams) -> None:
    m = round(params.rc)
    if m >= 1 and abs(params.rc - m) < POLE_DISTANCE:
        raise CoefficientError(
            f"omega_c / (2 pi kBT) = {params.rc!r} is within {POLE_DISTANCE} of the "
            f"integer {m}: cot(pi r_c) pole in the closed-form diffusion coefficient"
        )


def _delta_exact_scalar(t: float, p: ReservoirParams, tol: float) -> float:
    if t <= 0:
        raise ValueError("closed-form diffusion coefficient requires t > 0")
    w0, r, r0, rc = p.omega0, p.r, p.r0, p.rc
    c, s = math.cos(w0 * t), math.sin(w0 * t)
    f_mc = f_bar(-rc, t, p, tol)
    f_pc = f_bar(rc, t, p, tol)
    f_pi = f_bar(1j * r0, t, p, tol)
    f_mi = f_bar(-1j * r0, t, p, tol)
    g_mi = g_bar(-1j * r0, t, p, tol)
    g_pi = g_bar(1j * r0, t, p, tol)
    bracket = (
        1.0 / math.tanh(math.pi * r0)
        - math.exp(-p.omega_c * t) * (r * c - s) / math.tan(math.pi * rc)
        + c / (math.pi * r0) * (f_mc + f_pc - f_pi - f_mi)
        - s / math.pi * (
            math.exp(-p.nu1 * t) / (r0 * (1.0 + r0 * r0))
            * ((r0 - 1j) * g_mi + (r0 + 1j) * g_pi)
            + (f_mc - f_pc) / rc
        )
    )
    if abs(bracket.imag) > 10.0 * tol * max(1.0, 1.0 / (math.pi * r0)):
        raise CoefficientError(
            f"closed-form diffusion coefficient has imaginary residue {bracket.imag:.3g} at t={t}"
        )
    return p.rate_scale * bracket.real


def delta_exact(t, params: ReservoirParams, tol: float = DEFAULT_TOL):
    """Diffusion coefficient from its hypergeometric closed form.

    Requires ``t > 0``; close to ``t = 0`` the series may exceed its
    term cap and raise `SeriesNonConvergence` (use the quadrature
    oracle there, as `coefficient_trace` does).
    """
    check_cot_pole(params)
    if np.ndim(t) == 0:
        return _delta_exact_scalar(float(t), params, tol)
    t = np.asarray(t, dtype=float)
    return np.array([_delta_exact_scalar(float(v), params, tol) for v in t.ravel()]).reshape(t.shape)


# -- quadrature oracle ------------------------------------------------------------

def _cumulative_integral(f, times, epsabs: float, epsrel: float = 1e-12,
                         breakpoints=()) -> np.ndarray:
    """``int_0^t f`` at each of `times` by adaptive quadrature between consecutive times.

    `breakpoints` are extra partition points (not reported) placed where
    `f` has structure narrower than the sample spacing.
    """
    times = np.asarray(times, dtype=float)
    flat = times.ravel()
    if np.any(flat < 0):
        raise ValueError("times must be >= 0")
    order = np.argsort(flat, kind="stable")
    extra = sorted(b for b in breakpoints if b > 0)
    out = np.empty_like(flat)
    acc = 0.0
    prev = 0.0
    for idx in order:
        t = flat[idx]
        if t > prev:
            nodes = [prev] + [b for b in extra if prev < b < t] + [t]
            for lo, hi in zip(nodes[:-1], nodes[1:]):
                val, _ = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=500)
                acc += val
            prev = t
        out[idx] = acc
    return out.reshape(times.shape)


def gamma_quadrature(t, params: ReservoirParams):
    """``(alpha2 / 2) int_0^t mu(tau) sin(omega0 tau) dtau`` by adaptive quadrature."""
    w0 = params.omega0

    def integrand(tau):
        return dissipation_kernel(tau, params) * math.sin(w0 * tau)

    out = 0.5 * params.alpha2 * _cumulative_integral(
        integrand, t, epsabs=1e-12 * params.rate_scale / params.alpha2
    )
    return out[()] if np.ndim(out) == 0 else out


def delta_quadrature(t, params: ReservoirParams, rel_tol: float = 1e-9):
    """``(alpha2 / 2) int_0^t k(tau) cos(omega0 tau) dtau`` by adaptive quadrature.

    The noise kernel comes from its Matsubara series, with the number of
    retained terms chosen so the omitted remainder contributes less than
    `rel_tol` of the stationary diffusion coefficient.
    """
    kernel = _ResummedNoiseKernel.for_tolerance(params, rel_tol)
    w0 = params.omega0

    def integrand(tau):
        return kernel(tau) * math.cos(w0 * tau)

    scale = params.rate_scale * max(1.0, 1.0 / math.tanh(math.pi * params.r0))
    # the kernel has a log singularity of width ~1/nu1 at tau = 0
    spike = [c / params.nu1 for c in (1.0, 8.0, 40.0)]
    out = 0.5 * params.alpha2 * _cumulative_integral(
        integrand, t, epsabs=1e-3 * rel_tol * scale / params.alpha2, breakpoints=spike
    )
    return out[()] if np.ndim(out) == 0 else out


# -- traces -----------------------------------------------------------------------

def markovian_trace_values(params: ReservoirParams) -> tuple[float, float]:
    """(delta, gamma) used for the Markovian trace, applying the high-T rule."""
    lim = markovian_limits(params)
    if params.kBT >= HIGH_T_MARKOV_THRESHOLD * params.omega0:
        return lim.delta_M_HT, lim.gamma_M
    return lim.delta_M, lim.gamma_M


def coefficient_trace(grid: TimeGrid, params: ReservoirParams, method=Method.EXACT,
                      tol: float = DEFAULT_TOL) -> CoefficientTrace:
    """Sample the diffusion and dissipation coefficients on `grid`."""
    method = Method(method)
    if grid.t0 != 0.0:
        raise ValueError("coefficient traces start at t0 = 0")
    t = grid.times
    if method is Method.MARKOVIAN:
        d, g = markovian_trace_values(params)
        return CoefficientTrace.constant(grid, d, g, method, params.omega0)
    if method is Method.HIGH_T:
        return CoefficientTrace(grid, delta_highT(t, params), gamma_exact(t, params), method,
                                omega0=params.omega0)
    if method is Method.QUADRATURE:
        return CoefficientTrace(grid, delta_quadrature(t, params),
                                gamma_quadrature(t, params), method,
                                np.ones(t.shape, dtype=bool), params.omega0)

    check_cot_pole(params)
    delta = np.zeros_like(t)
    fallback = (t > 0) & (t < series_threshold_time(params))
    if fallback.any():
        delta[fallback] = delta_quadrature(t[fallback], params)
    for i in np.flatnonzero((t > 0) & ~fallback):
        try:
            delta[i] = _delta_exact_scalar(float(t[i]), params, tol)
        except (SeriesNonConvergence, CoefficientError) as exc:
            raise CoefficientError(f"sample {i} (t={t[i]!r}): {exc}") from exc
    return CoefficientTrace(grid, delta, gamma_exact(t, params), method, fallback,
                            params.omega0)
