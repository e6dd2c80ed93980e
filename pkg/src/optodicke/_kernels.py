"""Compiled inner loops: vector field, fixed-step RK4 and adaptive RK45.

Kept free of Python objects so numba can cache the machine code.  The
parameter vector layout is (omega_a, omega, omega_m, kappa, gamma_m, g, u,
delta0, eta_p); the state layout is (sx, sy, sz, a1, a2, b1, b2).
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_UNDERFLOW = 2
STATUS_OVERFLOW = 3  # sample buffer exhausted (adaptive mode)


@njit(cache=True)
def rhs_kernel(y, c, out):
    sx, sy, sz, a1, a2, b1, b2 = y[0], y[1], y[2], y[3], y[4], y[5], y[6]
    omega_a, omega, omega_m, kappa, gamma_m, g, u, delta0, eta_p = (
        c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8])
    n = a1 * a1 + a2 * a2
    wt = omega_a + u * n
    phi = omega + u * sz + 2.0 * delta0 * b1
    out[0] = -wt * sy
    out[1] = wt * sx - 4.0 * g * a1 * sz
    out[2] = 4.0 * g * a1 * sy
    out[3] = -kappa * a1 + phi * a2
    out[4] = -kappa * a2 - phi * a1 - 2.0 * g * sx
    out[5] = omega_m * b2 - gamma_m * b1
    out[6] = -omega_m * b1 - delta0 * n - eta_p - gamma_m * b2


@njit(cache=True)
def _finite7(y):
    for i in range(7):
        if not np.isfinite(y[i]):
            return False
    return True


@njit(cache=True)
def rk4_kernel(y0, c, dt, n_steps, sample_every, times, states):
    """Classic fixed-step RK4.  Samples are written every ``sample_every``
    steps (plus the initial point); returns (status, n_samples, t_last)."""
    y = y0.copy()
    k1 = np.empty(7); k2 = np.empty(7); k3 = np.empty(7); k4 = np.empty(7)
    tmp = np.empty(7)
    times[0] = 0.0
    states[0] = y
    j = 1
    t_last = 0.0
    for i in range(n_steps):
        rhs_kernel(y, c, k1)
        for m in range(7):
            tmp[m] = y[m] + 0.5 * dt * k1[m]
        rhs_kernel(tmp, c, k2)
        for m in range(7):
            tmp[m] = y[m] + 0.5 * dt * k2[m]
        rhs_kernel(tmp, c, k3)
        for m in range(7):
            tmp[m] = y[m] + dt * k3[m]
        rhs_kernel(tmp, c, k4)
        for m in range(7):
            y[m] = y[m] + (dt / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
        if (i + 1) % sample_every == 0 or i == n_steps - 1:
            if not _finite7(y):
                return STATUS_BLOWUP, j, t_last
            times[j] = (i + 1) * dt
            states[j] = y
            t_last = times[j]
            j += 1
    return STATUS_OK, j, t_last


# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
_E1, _E3, _E4, _E5, _E6, _E7 = (35.0 / 384.0 - 5179.0 / 57600.0,
                                500.0 / 1113.0 - 7571.0 / 16695.0,
                                125.0 / 192.0 - 393.0 / 640.0,
                                -2187.0 / 6784.0 + 92097.0 / 339200.0,
                                11.0 / 84.0 - 187.0 / 2100.0,
                                -1.0 / 40.0)


@njit(cache=True)
def rk45_kernel(y0, c, t_end, h0, rtol, atol, sample_every, times, states):
    """Adaptive Dormand-Prince 5(4) with FSAL.

    Accepted steps are recorded every ``sample_every``-th one.  Returns
    (status, n_samples, t_last, n_accepted, n_rejected).
    """
    y = y0.copy()
    t = 0.0
    h = h0
    k1 = np.empty(7); k2 = np.empty(7); k3 = np.empty(7); k4 = np.empty(7)
    k5 = np.empty(7); k6 = np.empty(7); k7 = np.empty(7)
    ytmp = np.empty(7); ynew = np.empty(7)
    cap = times.shape[0]
    times[0] = 0.0
    states[0] = y
    j = 1
    n_acc = 0
    n_rej = 0
    rhs_kernel(y, c, k1)
    while t < t_end:
        if h > t_end - t:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            return STATUS_UNDERFLOW, j, t, n_acc, n_rej
        for m in range(7):
            ytmp[m] = y[m] + h * _A21 * k1[m]
        rhs_kernel(ytmp, c, k2)
        for m in range(7):
            ytmp[m] = y[m] + h * (_A31 * k1[m] + _A32 * k2[m])
        rhs_kernel(ytmp, c, k3)
        for m in range(7):
            ytmp[m] = y[m] + h * (_A41 * k1[m] + _A42 * k2[m] + _A43 * k3[m])
        rhs_kernel(ytmp, c, k4)
        for m in range(7):
            ytmp[m] = y[m] + h * (_A51 * k1[m] + _A52 * k2[m] + _A53 * k3[m]
                                  + _A54 * k4[m])
        rhs_kernel(ytmp, c, k5)
        for m in range(7):
            ytmp[m] = y[m] + h * (_A61 * k1[m] + _A62 * k2[m] + _A63 * k3[m]
                                  + _A64 * k4[m] + _A65 * k5[m])
        rhs_kernel(ytmp, c, k6)
        for m in range(7):
            ynew[m] = y[m] + h * (_B1 * k1[m] + _B3 * k3[m] + _B4 * k4[m]
                                  + _B5 * k5[m] + _B6 * k6[m])
        rhs_kernel(ynew, c, k7)
        # scaled RMS of the embedded 4th/5th order difference
        err = 0.0
        for m in range(7):
            e = h * (_E1 * k1[m] + _E3 * k3[m] + _E4 * k4[m] + _E5 * k5[m]
                     + _E6 * k6[m] + _E7 * k7[m])
            sc = atol + rtol * max(abs(y[m]), abs(ynew[m]))
            r = e / sc
            err += r * r
        err = np.sqrt(err / 7.0)
        if not np.isfinite(err):
            return STATUS_BLOWUP, j, t, n_acc, n_rej
        if err <= 1.0:
            t += h
            for m in range(7):
                y[m] = ynew[m]
                k1[m] = k7[m]  # FSAL
            n_acc += 1
            if not _finite7(y):
                return STATUS_BLOWUP, j, t, n_acc, n_rej
            if n_acc % sample_every == 0 or t >= t_end:
                if j >= cap:
                    return STATUS_OVERFLOW, j, t, n_acc, n_rej
                times[j] = t
                states[j] = y
                j += 1
        else:
            n_rej += 1
        fac = 0.9 * err ** -0.2 if err > 0.0 else 5.0
        if fac < 0.2:
            fac = 0.2
        elif fac > 5.0:
            fac = 5.0
        h *= fac
    return STATUS_OK, j, t, n_acc, n_rej
