"""Adaptive integrating-factor Runge-Kutta kernels (numba-compiled).

State layout: y = [a, b1, b2] complex128, in dimensionless form (time in
units of 1/omega_m1, rates divided by omega_m1, flux divided by
sqrt(omega_m1)). The linear diagonal part

    L = diag(i*delta - kappa/2, -i - gamma1/2, -i*om2 - gamma2/2)

is integrated exactly by per-step exponential factors (Lawson / integrating
factor); the Dormand-Prince 5(4) embedded pair with FSAL handles the
remaining nonlinear/forcing part

    N(y) = [-i*(2*g1*Re b1 + 2*g2*Re b2)*a + sqrt(kappa_e)*S,
            -i*g1*|a|^2,
            -i*g2*|a|^2].

Consequences relied on elsewhere: with g = S = 0 the propagation is exact
to rounding (pure e^{Lh} factors), so linear decay and the lossless
conservation limit carry no truncation error; and all step-acceptance logic
is fixed floating-point arithmetic, so identical inputs give bit-identical
trajectories.

Parameter packing (float64 array):
    p = [delta, kappa, kappa_e, om2, g1, g2, gam1, gam2, s_in]

Status codes returned by the marchers:
    0  all output times reached
    1  step-size underflow (stiffness collapse); last good state returned
    2  non-finite state encountered; last good state returned
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) nodes, propagating weights (row 7) and error weights.
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0

_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2


@njit(cache=True, nogil=True)
def _nl(y, g1, g2, ke_s):
    """Nonlinear + forcing part of the vector field (v-space at c=0)."""
    shift = 2.0 * (g1 * y[1].real + g2 * y[2].real)
    na = -1j * shift * y[0] + ke_s
    nph = y[0].real * y[0].real + y[0].imag * y[0].imag
    return na, -1j * g1 * nph, -1j * g2 * nph


@njit(cache=True, nogil=True)
def march(y0, t0, t_out, p, rtol, atol, h_max, h0):
    """Integrate from (t0, y0), recording the state at each t_out.

    Returns (out, status, t_last, y_last, n_accept, n_reject). On a
    non-zero status, output slots not reached hold the last good state and
    t_last marks how far the integration got.
    """
    delta, kappa, kappa_e, om2 = p[0], p[1], p[2], p[3]
    g1, g2, gam1, gam2, s_in = p[4], p[5], p[6], p[7], p[8]
    ke_s = np.sqrt(kappa_e) * s_in

    L = np.empty(3, np.complex128)
    L[0] = 1j * delta - 0.5 * kappa
    L[1] = -1j - 0.5 * gam1
    L[2] = -1j * om2 - 0.5 * gam2

    nout = t_out.shape[0]
    out = np.empty((nout, 3), np.complex128)

    y = y0.copy()
    k1 = np.empty(3, np.complex128)
    k2 = np.empty(3, np.complex128)
    k3 = np.empty(3, np.complex128)
    k4 = np.empty(3, np.complex128)
    k5 = np.empty(3, np.complex128)
    k6 = np.empty(3, np.complex128)
    k7 = np.empty(3, np.complex128)
    yt = np.empty(3, np.complex128)
    ynew = np.empty(3, np.complex128)
    E2 = np.empty(3, np.complex128)
    E3 = np.empty(3, np.complex128)
    E4 = np.empty(3, np.complex128)
    E5 = np.empty(3, np.complex128)
    E6 = np.empty(3, np.complex128)

    na, nb1, nb2 = _nl(y, g1, g2, ke_s)
    k1[0], k1[1], k1[2] = na, nb1, nb2

    t = t0
    h = h0
    n_accept = 0
    n_reject = 0
    status = STATUS_OK

    for iout in range(nout):
        target = t_out[iout]
        while t < target and status == STATUS_OK:
            gap = target - t
            if h >= gap or gap - h < 0.05 * h:
                hs = gap
                clipped = True
            else:
                hs = h
                clipped = False

            for m in range(3):
                z = L[m] * hs
                E2[m] = np.exp(_C2 * z)
                E3[m] = np.exp(_C3 * z)
                E4[m] = np.exp(_C4 * z)
                E5[m] = np.exp(_C5 * z)
                E6[m] = np.exp(z)

            for m in range(3):
                yt[m] = E2[m] * (y[m] + hs * _A21 * k1[m])
            na, nb1, nb2 = _nl(yt, g1, g2, ke_s)
            k2[0], k2[1], k2[2] = na / E2[0], nb1 / E2[1], nb2 / E2[2]

            for m in range(3):
                yt[m] = E3[m] * (y[m] + hs * (_A31 * k1[m] + _A32 * k2[m]))
            na, nb1, nb2 = _nl(yt, g1, g2, ke_s)
            k3[0], k3[1], k3[2] = na / E3[0], nb1 / E3[1], nb2 / E3[2]

            for m in range(3):
                yt[m] = E4[m] * (y[m] + hs * (_A41 * k1[m] + _A42 * k2[m]
                                              + _A43 * k3[m]))
            na, nb1, nb2 = _nl(yt, g1, g2, ke_s)
            k4[0], k4[1], k4[2] = na / E4[0], nb1 / E4[1], nb2 / E4[2]

            for m in range(3):
                yt[m] = E5[m] * (y[m] + hs * (_A51 * k1[m] + _A52 * k2[m]
                                              + _A53 * k3[m] + _A54 * k4[m]))
            na, nb1, nb2 = _nl(yt, g1, g2, ke_s)
            k5[0], k5[1], k5[2] = na / E5[0], nb1 / E5[1], nb2 / E5[2]

            for m in range(3):
                yt[m] = E6[m] * (y[m] + hs * (_A61 * k1[m] + _A62 * k2[m]
                                              + _A63 * k3[m] + _A64 * k4[m]
                                              + _A65 * k5[m]))
            na, nb1, nb2 = _nl(yt, g1, g2, ke_s)
            k6[0], k6[1], k6[2] = na / E6[0], nb1 / E6[1], nb2 / E6[2]

            for m in range(3):
                ynew[m] = E6[m] * (y[m] + hs * (_B1 * k1[m] + _B3 * k3[m]
                                                + _B4 * k4[m] + _B5 * k5[m]
                                                + _B6 * k6[m]))
            na, nb1, nb2 = _nl(ynew, g1, g2, ke_s)
            k7[0], k7[1], k7[2] = na / E6[0], nb1 / E6[1], nb2 / E6[2]

            finite = True
            for m in range(3):
                if not (np.isfinite(ynew[m].real) and np.isfinite(ynew[m].imag)):
                    finite = False
            if not finite:
                status = STATUS_NONFINITE
                break

            errsq = 0.0
            for m in range(3):
                ev = hs * (_E1 * k1[m] + _E3 * k3[m] + _E4 * k4[m]
                           + _E5 * k5[m] + _E6 * k6[m] + _E7 * k7[m])
                ya = abs(y[m])
                yb = abs(ynew[m])
                sc = atol + rtol * (ya if ya > yb else yb)
                r = abs(ev) / sc
                errsq += r * r
            err = np.sqrt(errsq / 3.0)

            if err <= 1.0:
                if clipped:
                    t = target
                else:
                    t = t + hs
                for m in range(3):
                    y[m] = ynew[m]
                    k1[m] = E6[m] * k7[m]  # FSAL: N at the new point
                n_accept += 1
                if err < 1e-12:
                    fac = 5.0
                else:
                    fac = 0.9 * err ** -0.2
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                hcand = hs * fac
                if hcand > h_max:
                    hcand = h_max
                if not clipped or err >= 0.5:
                    h = hcand
            else:
                n_reject += 1
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                hmin = 1e-13 * (abs(t) if abs(t) > 1.0 else 1.0)
                if hs <= hmin:
                    status = STATUS_UNDERFLOW
                    break
                h = hs * fac

        for m in range(3):
            out[iout, m] = y[m]
        if status != STATUS_OK:
            for j in range(iout, nout):
                for m in range(3):
                    out[j, m] = y[m]
            break

    return out, status, t, y, n_accept, n_reject


@njit(cache=True, nogil=True)
def march_prescribed(a0, t0, t_out, delta, kappa, kappa_e, s_in, g, om_b,
                     b_amp, rtol, atol, h_max, h0):
    """Cavity-only integration with a prescribed mechanical limit cycle.

    b(t) = b_amp * exp(-i*om_b*t) is imposed (back-action frozen), leaving
    the linear cavity equation with a periodically modulated detuning:

        da/dt = (i*delta - kappa/2)*a - 2i*g*b_amp*cos(om_b*t)*a
                + sqrt(kappa_e)*S.

    Same Lawson-DP54 machinery as :func:`march`, scalar complex state.
    Returns (out, status, t_last, a_last, n_accept, n_reject).
    """
    ke_s = np.sqrt(kappa_e) * s_in
    La = 1j * delta - 0.5 * kappa
    mod = 2.0 * g * b_amp

    nout = t_out.shape[0]
    out = np.empty(nout, np.complex128)

    a = a0
    t = t0
    h = h0
    n_accept = 0
    n_reject = 0
    status = STATUS_OK

    k1 = -1j * mod * np.cos(om_b * t) * a + ke_s

    for iout in range(nout):
        target = t_out[iout]
        while t < target and status == STATUS_OK:
            gap = target - t
            if h >= gap or gap - h < 0.05 * h:
                hs = gap
                clipped = True
            else:
                hs = h
                clipped = False

            z = La * hs
            e2 = np.exp(_C2 * z)
            e3 = np.exp(_C3 * z)
            e4 = np.exp(_C4 * z)
            e5 = np.exp(_C5 * z)
            e6 = np.exp(z)

            yt = e2 * (a + hs * _A21 * k1)
            k2 = (-1j * mod * np.cos(om_b * (t + _C2 * hs)) * yt + ke_s) / e2
            yt = e3 * (a + hs * (_A31 * k1 + _A32 * k2))
            k3 = (-1j * mod * np.cos(om_b * (t + _C3 * hs)) * yt + ke_s) / e3
            yt = e4 * (a + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k4 = (-1j * mod * np.cos(om_b * (t + _C4 * hs)) * yt + ke_s) / e4
            yt = e5 * (a + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3
                                 + _A54 * k4))
            k5 = (-1j * mod * np.cos(om_b * (t + _C5 * hs)) * yt + ke_s) / e5
            yt = e6 * (a + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3
                                 + _A64 * k4 + _A65 * k5))
            k6 = (-1j * mod * np.cos(om_b * (t + hs)) * yt + ke_s) / e6
            anew = e6 * (a + hs * (_B1 * k1 + _B3 * k3 + _B4 * k4
                                   + _B5 * k5 + _B6 * k6))
            k7 = (-1j * mod * np.cos(om_b * (t + hs)) * anew + ke_s) / e6

            if not (np.isfinite(anew.real) and np.isfinite(anew.imag)):
                status = STATUS_NONFINITE
                break

            ev = hs * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5
                       + _E6 * k6 + _E7 * k7)
            ya = abs(a)
            yb = abs(anew)
            sc = atol + rtol * (ya if ya > yb else yb)
            err = abs(ev) / sc

            if err <= 1.0:
                if clipped:
                    t = target
                else:
                    t = t + hs
                a = anew
                k1 = e6 * k7
                n_accept += 1
                if err < 1e-12:
                    fac = 5.0
                else:
                    fac = 0.9 * err ** -0.2
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                hcand = hs * fac
                if hcand > h_max:
                    hcand = h_max
                if not clipped or err >= 0.5:
                    h = hcand
            else:
                n_reject += 1
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                hmin = 1e-13 * (abs(t) if abs(t) > 1.0 else 1.0)
                if hs <= hmin:
                    status = STATUS_UNDERFLOW
                    break
                h = hs * fac

        out[iout] = a
        if status != STATUS_OK:
            for j in range(iout, nout):
                out[j] = a
            break

    return out, status, t, a, n_accept, n_reject
