# cython: language_level=3
"""Compiled hot loops: Gauss series summation and the RK4 state/costate sweeps.

Mirrors ``_pykernels`` operation for operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


cdef extern from "complex.h":
    double cabs(double complex)
    double creal(double complex)


def hyp2f1_series(a, b, c, z, double tol, long max_terms):
    cdef double complex ca = a, cb = b, cc = c, cz = z
    cdef double complex total = 1.0, term = 1.0
    cdef double absz = cabs(cz)
    cdef double am1 = cabs(ca - 1.0)
    cdef double bmc = cabs(cb - cc)
    cdef double tail = INFINITY, rho, cr
    cdef long n = 0
    while n < max_terms:
        term = term * ((ca + n) * (cb + n) / ((cc + n) * (n + 1.0))) * cz
        n += 1
        total = total + term
        if term == 0.0:
            return complex(total), n, 0.0, True
        cr = creal(cc) + n
        if cr > 0.0:
            rho = absz * (1.0 + am1 / (n + 1.0)) * (1.0 + bmc / cr)
            if rho < 1.0:
                tail = cabs(term) * rho / (1.0 - rho)
                if tail <= tol:
                    return complex(total), n, tail, True
    return complex(total), n, tail, False


cdef inline void _rhs(double x1, double x2, double x3, double ux, double uy,
                      double d, double g, double w0, double* out) noexcept nogil:
    out[0] = -d * x1 - w0 * x2 + uy * x3
    out[1] = w0 * x1 - d * x2 - ux * x3
    out[2] = -2.0 * d * x3 - 2.0 * g + ux * x2 - uy * x1


cdef inline void _costate_rhs(double l1, double l2, double l3, double e1, double e2,
                              double e3, double ux, double uy, double d, double w0,
                              double* out) noexcept nogil:
    out[0] = -2.0 * e1 + d * l1 - w0 * l2 + uy * l3
    out[1] = -2.0 * e2 + w0 * l1 + d * l2 - ux * l3
    out[2] = -2.0 * e3 - uy * l1 + ux * l2 + 2.0 * d * l3


def rk4_state(x0, ux, uy, delta, gamma, double h, double omega0):
    cdef const double[::1] u = np.ascontiguousarray(ux, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const double[::1] dd = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const double[::1] gg = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0], k
    out_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double x1 = x0[0], x2 = x0[1], x3 = x0[2]
    cdef double um, vm, dm, gm
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double e[3]
    out[0, 0] = x1
    out[0, 1] = x2
    out[0, 2] = x3
    with nogil:
        for k in range(n - 1):
            um = 0.5 * (u[k] + u[k + 1])
            vm = 0.5 * (v[k] + v[k + 1])
            dm = 0.5 * (dd[k] + dd[k + 1])
            gm = 0.5 * (gg[k] + gg[k + 1])
            _rhs(x1, x2, x3, u[k], v[k], dd[k], gg[k], omega0, a)
            _rhs(x1 + 0.5 * h * a[0], x2 + 0.5 * h * a[1], x3 + 0.5 * h * a[2],
                 um, vm, dm, gm, omega0, b)
            _rhs(x1 + 0.5 * h * b[0], x2 + 0.5 * h * b[1], x3 + 0.5 * h * b[2],
                 um, vm, dm, gm, omega0, c)
            _rhs(x1 + h * c[0], x2 + h * c[1], x3 + h * c[2],
                 u[k + 1], v[k + 1], dd[k + 1], gg[k + 1], omega0, e)
            x1 = x1 + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + e[0])
            x2 = x2 + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + e[1])
            x3 = x3 + h / 6.0 * (a[2] + 2.0 * b[2] + 2.0 * c[2] + e[2])
            out[k + 1, 0] = x1
            out[k + 1, 1] = x2
            out[k + 1, 2] = x3
    return out_arr


def rk4_costate(states, target, target_mid, ux, uy, delta, gamma, double h, double omega0):
    cdef const double[:, ::1] X = np.ascontiguousarray(states, dtype=np.float64)
    cdef const double[:, ::1] XT = np.ascontiguousarray(target, dtype=np.float64)
    cdef const double[:, ::1] XM = np.ascontiguousarray(target_mid, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(ux, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const double[::1] dd = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const double[::1] gg = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0], k
    out_arr = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double l1 = 0.0, l2 = 0.0, l3 = 0.0
    cdef double m1, m2, m3, um, vm, dm
    cdef double fk[3]
    cdef double fp[3]
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double e[3]
    with nogil:
        _rhs(X[n - 1, 0], X[n - 1, 1], X[n - 1, 2], u[n - 1], v[n - 1], dd[n - 1],
             gg[n - 1], omega0, fk)
        for k in range(n - 1, 0, -1):
            _rhs(X[k - 1, 0], X[k - 1, 1], X[k - 1, 2], u[k - 1], v[k - 1], dd[k - 1],
                 gg[k - 1], omega0, fp)
            m1 = 0.5 * (X[k, 0] + X[k - 1, 0]) + h / 8.0 * (fp[0] - fk[0])
            m2 = 0.5 * (X[k, 1] + X[k - 1, 1]) + h / 8.0 * (fp[1] - fk[1])
            m3 = 0.5 * (X[k, 2] + X[k - 1, 2]) + h / 8.0 * (fp[2] - fk[2])
            um = 0.5 * (u[k] + u[k - 1])
            vm = 0.5 * (v[k] + v[k - 1])
            dm = 0.5 * (dd[k] + dd[k - 1])
            _costate_rhs(l1, l2, l3, X[k, 0] - XT[k, 0], X[k, 1] - XT[k, 1],
                         X[k, 2] - XT[k, 2], u[k], v[k], dd[k], omega0, a)
            _costate_rhs(l1 - 0.5 * h * a[0], l2 - 0.5 * h * a[1], l3 - 0.5 * h * a[2],
                         m1 - XM[k - 1, 0], m2 - XM[k - 1, 1], m3 - XM[k - 1, 2],
                         um, vm, dm, omega0, b)
            _costate_rhs(l1 - 0.5 * h * b[0], l2 - 0.5 * h * b[1], l3 - 0.5 * h * b[2],
                         m1 - XM[k - 1, 0], m2 - XM[k - 1, 1], m3 - XM[k - 1, 2],
                         um, vm, dm, omega0, c)
            _costate_rhs(l1 - h * c[0], l2 - h * c[1], l3 - h * c[2],
                         X[k - 1, 0] - XT[k - 1, 0], X[k - 1, 1] - XT[k - 1, 1],
                         X[k - 1, 2] - XT[k - 1, 2], u[k - 1], v[k - 1], dd[k - 1],
                         omega0, e)
            l1 = l1 - h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + e[0])
            l2 = l2 - h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + e[1])
            l3 = l3 - h / 6.0 * (a[2] + 2.0 * b[2] + 2.0 * c[2] + e[2])
            out[k - 1, 0] = l1
            out[k - 1, 1] = l2
            out[k - 1, 2] = l3
            fk[0] = fp[0]
            fk[1] = fp[1]
            fk[2] = fp[2]
    return out_arr
