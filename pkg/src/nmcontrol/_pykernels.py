"""Pure-Python reference kernels.

Used when the compiled extension is unavailable (or when
``NMCONTROL_PURE_PYTHON`` is set). Signatures and floating-point
operation order match ``_ckernels.pyx`` so both backends agree to
rounding.
"""
import numpy as np


def hyp2f1_series(a, b, c, z, tol, max_terms):
    """Sum the Gauss series until a geometric majorant of the tail is below `tol`.

    Returns ``(value, n_terms, tail_bound, converged)``.
    """
    a = complex(a)
    b = complex(b)
    c = complex(c)
    z = complex(z)
    absz = abs(z)
    am1 = abs(a - 1.0)
    bmc = abs(b - c)
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    tail = float("inf")
    n = 0
    while n < max_terms:
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        n += 1
        total = total + term
        if term == 0.0:
            return total, n, 0.0, True
        cr = c.real + n
        if cr > 0.0:
            # ratio bound for every later term index m >= n; decreasing in m
            rho = absz * (1.0 + am1 / (n + 1.0)) * (1.0 + bmc / cr)
            if rho < 1.0:
                tail = abs(term) * rho / (1.0 - rho)
                if tail <= tol:
                    return total, n, tail, True
    return total, n, tail, False


def _rhs(x1, x2, x3, ux, uy, d, g, w0):
    return (
        -d * x1 - w0 * x2 + uy * x3,
        w0 * x1 - d * x2 - ux * x3,
        -2.0 * d * x3 - 2.0 * g + ux * x2 - uy * x1,
    )


def rk4_state(x0, ux, uy, delta, gamma, h, omega0):
    """Classical RK4 for x' = A(t) x + B(t); half-step inputs by linear interpolation."""
    ux = np.asarray(ux, dtype=float).tolist()
    uy = np.asarray(uy, dtype=float).tolist()
    delta = np.asarray(delta, dtype=float).tolist()
    gamma = np.asarray(gamma, dtype=float).tolist()
    n = len(ux)
    w0 = float(omega0)
    h = float(h)
    out = np.empty((n, 3))
    x1, x2, x3 = (float(v) for v in x0)
    out[0] = (x1, x2, x3)
    for k in range(n - 1):
        um = 0.5 * (ux[k] + ux[k + 1])
        vm = 0.5 * (uy[k] + uy[k + 1])
        dm = 0.5 * (delta[k] + delta[k + 1])
        gm = 0.5 * (gamma[k] + gamma[k + 1])
        a1, a2, a3 = _rhs(x1, x2, x3, ux[k], uy[k], delta[k], gamma[k], w0)
        b1, b2, b3 = _rhs(x1 + 0.5 * h * a1, x2 + 0.5 * h * a2, x3 + 0.5 * h * a3,
                          um, vm, dm, gm, w0)
        c1, c2, c3 = _rhs(x1 + 0.5 * h * b1, x2 + 0.5 * h * b2, x3 + 0.5 * h * b3,
                          um, vm, dm, gm, w0)
        d1, d2, d3 = _rhs(x1 + h * c1, x2 + h * c2, x3 + h * c3,
                          ux[k + 1], uy[k + 1], delta[k + 1], gamma[k + 1], w0)
        x1 = x1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        x2 = x2 + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        x3 = x3 + h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        out[k + 1] = (x1, x2, x3)
    return out


def _costate_rhs(l1, l2, l3, e1, e2, e3, ux, uy, d, w0):
    # -2 (x - x_target) - A^T lambda
    return (
        -2.0 * e1 + d * l1 - w0 * l2 + uy * l3,
        -2.0 * e2 + w0 * l1 + d * l2 - ux * l3,
        -2.0 * e3 - uy * l1 + ux * l2 + 2.0 * d * l3,
    )


def rk4_costate(states, target, target_mid, ux, uy, delta, gamma, h, omega0):
    """Backward RK4 for the costate from lambda(t_f) = 0.

    The state at half steps is the cubic Hermite interpolant built from
    the grid values and the state derivative.
    """
    X = np.asarray(states, dtype=float).tolist()
    XT = np.asarray(target, dtype=float).tolist()
    XM = np.asarray(target_mid, dtype=float).tolist()
    ux = np.asarray(ux, dtype=float).tolist()
    uy = np.asarray(uy, dtype=float).tolist()
    delta = np.asarray(delta, dtype=float).tolist()
    gamma = np.asarray(gamma, dtype=float).tolist()
    n = len(ux)
    w0 = float(omega0)
    h = float(h)
    out = np.zeros((n, 3))
    l1 = l2 = l3 = 0.0
    fk = _rhs(*X[n - 1], ux[n - 1], uy[n - 1], delta[n - 1], gamma[n - 1], w0)
    for k in range(n - 1, 0, -1):
        xk = X[k]
        xp = X[k - 1]
        fp = _rhs(*xp, ux[k - 1], uy[k - 1], delta[k - 1], gamma[k - 1], w0)
        m1 = 0.5 * (xk[0] + xp[0]) + h / 8.0 * (fp[0] - fk[0])
        m2 = 0.5 * (xk[1] + xp[1]) + h / 8.0 * (fp[1] - fk[1])
        m3 = 0.5 * (xk[2] + xp[2]) + h / 8.0 * (fp[2] - fk[2])
        um = 0.5 * (ux[k] + ux[k - 1])
        vm = 0.5 * (uy[k] + uy[k - 1])
        dm = 0.5 * (delta[k] + delta[k - 1])
        tk = XT[k]
        tm = XM[k - 1]
        tp = XT[k - 1]
        a1, a2, a3 = _costate_rhs(l1, l2, l3, xk[0] - tk[0], xk[1] - tk[1], xk[2] - tk[2],
                                  ux[k], uy[k], delta[k], w0)
        b1, b2, b3 = _costate_rhs(l1 - 0.5 * h * a1, l2 - 0.5 * h * a2, l3 - 0.5 * h * a3,
                                  m1 - tm[0], m2 - tm[1], m3 - tm[2], um, vm, dm, w0)
        c1, c2, c3 = _costate_rhs(l1 - 0.5 * h * b1, l2 - 0.5 * h * b2, l3 - 0.5 * h * b3,
                                  m1 - tm[0], m2 - tm[1], m3 - tm[2], um, vm, dm, w0)
        d1, d2, d3 = _costate_rhs(l1 - h * c1, l2 - h * c2, l3 - h * c3,
                                  xp[0] - tp[0], xp[1] - tp[1], xp[2] - tp[2],
                                  ux[k - 1], uy[k - 1], delta[k - 1], w0)
        l1 = l1 - h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        l2 = l2 - h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        l3 = l3 - h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        out[k - 1] = (l1, l2, l3)
        fk = fp
    return out
