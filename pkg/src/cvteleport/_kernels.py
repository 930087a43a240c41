"""Compiled inner loops for the slice-by-slice feedback protocol.

Per slice ``n`` (time ``t = n tau``) the atomic rotating-frame vector evolves as

    X <- (1 + (kappa/N) f(t) v(t)^T) X + f(t)/sqrt(N) x_in + (kappa/sqrt(N)) k(t) p_in

with ``f`` the feedback gains, ``v`` the readout direction and ``k`` the kick direction.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def _slice_vectors(t, om1, om2, amp, freq, phase, f, v, k):
    for i in range(4):
        arg = freq[i] * t + phase[i]
        if i % 2 == 0:
            f[i] = amp[i] * np.sin(arg)
        else:
            f[i] = amp[i] * np.cos(arg)
    s1 = np.sin(om1 * t)
    c1 = np.cos(om1 * t)
    s2 = np.sin(om2 * t)
    c2 = np.cos(om2 * t)
    v[0] = -s1
    v[1] = c1
    v[2] = -s2
    v[3] = c2
    k[0] = c1
    k[1] = s1
    k[2] = c2
    k[3] = s2


@numba.njit(cache=True)
def backward_map(n_total, n_window, tau, kappa, om1, om2, amp, freq, phase):
    """Return ``(S, T_noise)`` for the first ``n_window`` slices.

    Runs the time-ordered product backwards so that each light column is
    ``P_n b_n`` with ``P_n`` the propagator from slice ``n`` to the end.
    """
    P = np.eye(4)
    tn = np.zeros((4, 2 * n_window))
    c = kappa / n_total
    sq = 1.0 / np.sqrt(n_total)
    f = np.empty(4)
    v = np.empty(4)
    k = np.empty(4)
    pf = np.empty(4)
    for n in range(n_window, 0, -1):
        _slice_vectors(n * tau, om1, om2, amp, freq, phase, f, v, k)
        for i in range(4):
            a = 0.0
            b = 0.0
            for j in range(4):
                a += P[i, j] * f[j]
                b += P[i, j] * k[j]
            pf[i] = a
            tn[i, n - 1] = a * sq
            tn[i, n_window + n - 1] = b * kappa * sq
        for i in range(4):
            for j in range(4):
                P[i, j] += c * pf[i] * v[j]
    return P, tn


@numba.njit(cache=True)
def displacement_trajectory(n_total, n_window, tau, kappa, om1, om2, amp, freq, phase, d0, drive):
    """Mean atomic vector after every slice, with ``drive[n-1]`` added at the start of slice ``n``."""
    out = np.zeros((n_window + 1, 4))
    D = d0.copy()
    out[0] = D
    c = kappa / n_total
    f = np.empty(4)
    v = np.empty(4)
    k = np.empty(4)
    for n in range(1, n_window + 1):
        for i in range(4):
            D[i] += drive[n - 1, i]
        _slice_vectors(n * tau, om1, om2, amp, freq, phase, f, v, k)
        pick = 0.0
        for j in range(4):
            pick += v[j] * D[j]
        for i in range(4):
            D[i] += c * f[i] * pick
        out[n] = D
    return out
