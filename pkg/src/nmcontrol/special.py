"""Gauss hypergeometric series and Pochhammer symbols.

Only the region ``|z| < 1`` is supported; there is no analytic
continuation. All arithmetic is complex, because the diffusion
coefficient needs the series at imaginary parameters.
"""
from __future__ import annotations

import cmath
import math
from typing import NamedTuple

from ._backend import kernels

DEFAULT_TOL = 1e-10
MAX_TERMS = 100_000


class SeriesNonConvergence(ArithmeticError):
    """The series tail bound did not drop below tolerance within the term cap."""


class SeriesInfo(NamedTuple):
    n_terms: int
    tail_bound: float


def pochhammer(a: complex, n: int) -> complex:
    """Rising factorial ``a (a+1) ... (a+n-1)``; 1 for ``n == 0``."""
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    out = 1.0 + 0.0j
    a = complex(a)
    for k in range(int(n)):
        out *= a + k
    if not cmath.isfinite(out):
        raise OverflowError(f"pochhammer({a}, {n}) overflows double precision")
    return out


def _is_nonpositive_integer(c: complex) -> bool:
    return c.imag == 0.0 and c.real <= 0.0 and c.real == math.floor(c.real)


def hyp2f1(a, b, c, z, tol: float = DEFAULT_TOL, max_terms: int = MAX_TERMS,
           full_output: bool = False):
    """Gauss hypergeometric function by direct series summation.

    Parameters
    ----------
    a, b, c, z : complex
        Series parameters and argument, ``|z| < 1``. `c` must not be a
        non-positive integer.
    tol : float
        Absolute bound on the neglected tail.
    max_terms : int
        Term cap; exceeding it raises `SeriesNonConvergence`.
    full_output : bool
        If true, also return a `SeriesInfo` with the number of terms
        summed and the tail bound actually achieved.

    Notes
    -----
    Summation stops once ``|t_n| rho / (1 - rho)`` is below `tol`, where
    ``rho`` bounds every later term ratio
    ``|(a+m)(b+m) / ((c+m)(m+1))| |z|``, ``m >= n``.
    """
    a, b, c, z = complex(a), complex(b), complex(c), complex(z)
    if not abs(z) < 1.0:
        raise ValueError(f"series requires |z| < 1, got |z| = {abs(z)}")
    if _is_nonpositive_integer(c):
        raise ValueError(f"c must not be a non-positive integer, got {c}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    value, n, tail, ok = kernels.hyp2f1_series(a, b, c, z, float(tol), int(max_terms))
    if not ok:
        raise SeriesNonConvergence(
            f"2F1({a}, {b}; {c}; {z}) not converged after {n} terms "
            f"(tail bound {tail:.3g}); argument too close to 1 for the series"
        )
    if full_output:
        return complex(value), SeriesInfo(int(n), float(tail))
    return complex(value)


def f_bar(x, t: float, params, tol: float = DEFAULT_TOL) -> complex:
    """``2F1(x, 1; 1+x; exp(-nu1 t))`` for the reservoir's first Matsubara frequency."""
    if t <= 0:
        raise ValueError("f_bar requires t > 0")
    x = complex(x)
    return hyp2f1(x, 1.0, 1.0 + x, math.exp(-params.nu1 * t), tol)


def g_bar(x, t: float, params, tol: float = DEFAULT_TOL) -> complex:
    """``2F1(2, 1+x; 2+x; exp(-nu1 t))``."""
    if t <= 0:
        raise ValueError("g_bar requires t > 0")
    x = complex(x)
    return hyp2f1(2.0, 1.0 + x, 2.0 + x, math.exp(-params.nu1 * t), tol)
