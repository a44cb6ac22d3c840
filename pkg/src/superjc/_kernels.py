"""Compiled inner loops for the Schrödinger integrator.

Only the "active" amplitudes are touched: the coupling conserves
sigma^dag sigma + n1 + n2, so amplitudes in excitation blocks that start at
zero stay exactly zero.  Every reduction goes through :func:`exact_sum`, which
is correctly rounded and therefore independent of summation order; this is
what makes a run and its mode-swapped mirror agree bit for bit.
"""
import math

import numpy as np
from numba import njit

EDGE_NAMES = ("mode1_lower", "mode1_upper", "mode2_lower", "mode2_upper")


@njit(cache=True)
def exact_sum(x):
    """Correctly rounded float sum (Shewchuk partials, as in ``math.fsum``)."""
    p = np.empty(80)
    n = 0
    for k in range(x.size):
        v = x[k]
        i = 0
        for j in range(n):
            y = p[j]
            if abs(v) < abs(y):
                v, y = y, v
            hi = v + y
            lo = y - (hi - v)
            if lo != 0.0:
                p[i] = lo
                i += 1
            v = hi
        n = i
        p[n] = v
        n += 1
    if n == 0:
        return 0.0
    n -= 1
    hi = p[n]
    lo = 0.0
    while n > 0:
        v = hi
        n -= 1
        y = p[n]
        hi = v + y
        yr = hi - v
        lo = y - yr
        if lo != 0.0:
            break
    if n > 0 and ((lo < 0.0 and p[n - 1] < 0.0) or (lo > 0.0 and p[n - 1] > 0.0)):
        y = lo * 2.0
        v = hi + y
        yr = v - hi
        if y == yr:
            hi = v
    return hi


@njit(cache=True)
def _coefficients(tau, g1, g2, d1, d2):
    # -i * G_j * exp(-tau^2) * exp(-+ i Delta_j tau)
    f = math.exp(-tau * tau)
    a1 = g1 * f
    a2 = g2 * f
    c1 = math.cos(d1 * tau)
    s1 = math.sin(d1 * tau)
    c2 = math.cos(d2 * tau)
    s2 = math.sin(d2 * tau)
    # -i * (c - i s) = -s - i c ; -i * (c + i s) = s - i c
    cx1 = complex(-a1 * s1, -a1 * c1)
    cx2 = complex(-a2 * s2, -a2 * c2)
    cg1 = complex(a1 * s1, -a1 * c1)
    cg2 = complex(a2 * s2, -a2 * c2)
    return cx1, cx2, cg1, cg2


@njit(cache=True)
def rhs_into(psi, out, tau, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2):
    cx1, cx2, cg1, cg2 = _coefficients(tau, g1, g2, d1, d2)
    for k in range(act.size):
        if is_x[k]:
            a = cx1
            b = cx2
        else:
            a = cg1
            b = cg2
        t1 = 0j
        t2 = 0j
        if nb1[k] >= 0:
            t1 = (a * s1[k]) * psi[nb1[k]]
        if nb2[k] >= 0:
            t2 = (b * s2[k]) * psi[nb2[k]]
        out[act[k]] = t1 + t2


@njit(cache=True)
def _sq_norm(psi, act, buf):
    for k in range(act.size):
        z = psi[act[k]]
        buf[k] = z.real * z.real + z.imag * z.imag
    return exact_sum(buf)


@njit(cache=True)
def rk4_into(psi, tau, dt, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2,
             k1, k2, k3, k4, tmp, buf):
    """One classical RK4 step in place, then renormalize.

    Returns the pre-normalization deviation ``| ||psi|| - 1 |``.
    """
    half = 0.5 * dt
    rhs_into(psi, k1, tau, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2)
    for k in range(act.size):
        i = act[k]
        tmp[i] = psi[i] + half * k1[i]
    rhs_into(tmp, k2, tau + half, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2)
    for k in range(act.size):
        i = act[k]
        tmp[i] = psi[i] + half * k2[i]
    rhs_into(tmp, k3, tau + half, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2)
    for k in range(act.size):
        i = act[k]
        tmp[i] = psi[i] + dt * k3[i]
    rhs_into(tmp, k4, tau + dt, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2)
    sixth = dt / 6.0
    for k in range(act.size):
        i = act[k]
        psi[i] = psi[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    norm = math.sqrt(_sq_norm(psi, act, buf))
    for k in range(act.size):
        i = act[k]
        psi[i] = psi[i] / norm
    return abs(norm - 1.0)


@njit(cache=True)
def observe(psi, act, is_x, n1, n2, edges, buf, out_edges):
    """Return (p_x, <n1>, <n2>, <N>) and fill ``out_edges`` with edge probabilities
    (four edges, then their union)."""
    m = act.size
    prob = np.empty(m)
    for k in range(m):
        z = psi[act[k]]
        prob[k] = z.real * z.real + z.imag * z.imag
    for k in range(m):
        buf[k] = prob[k] if is_x[k] else 0.0
    p_x = exact_sum(buf)
    for k in range(m):
        buf[k] = n1[k] * prob[k]
    m1 = exact_sum(buf)
    for k in range(m):
        buf[k] = n2[k] * prob[k]
    m2 = exact_sum(buf)
    for k in range(m):
        buf[k] = (n1[k] + n2[k] + (1.0 if is_x[k] else 0.0)) * prob[k]
    exc = exact_sum(buf)
    for e in range(5):
        out_edges[e] = 0.0
    for k in range(m):
        mask = edges[k]
        if mask:
            out_edges[4] += prob[k]
            for e in range(4):
                if mask & (1 << e):
                    out_edges[e] += prob[k]
    return p_x, m1, m2, exc


@njit(cache=True)
def evolve_loop(psi, tau0, dt, n_steps, stride, g1, g2, d1, d2,
                act, is_x, nb1, s1, nb2, s2, n1, n2, edges,
                rec, rec_edges, snapshots, keep):
    """Integrate ``n_steps`` RK4 steps from ``tau0``.

    ``rec[r] = (tau, p_x, n1, n2, N, norm_drift)`` every ``stride`` steps
    starting at step 0.  Returns the max per-step norm drift and the max
    edge occupancy seen at any step: per edge in slots 0-3, and in slot 4
    the total weight on edge states, each state counted once.
    """
    dim = psi.size
    k1 = np.zeros(dim, dtype=np.complex128)
    k2 = np.zeros(dim, dtype=np.complex128)
    k3 = np.zeros(dim, dtype=np.complex128)
    k4 = np.zeros(dim, dtype=np.complex128)
    tmp = np.zeros(dim, dtype=np.complex128)
    buf = np.empty(act.size)
    edge_now = np.zeros(5)
    edge_max = np.zeros(5)
    p, a, b, e = observe(psi, act, is_x, n1, n2, edges, buf, edge_now)
    for j in range(5):
        edge_max[j] = max(edge_max[j], edge_now[j])
    r = 0
    rec[r, 0] = tau0
    rec[r, 1] = p
    rec[r, 2] = a
    rec[r, 3] = b
    rec[r, 4] = e
    rec[r, 5] = 0.0
    rec_edges[r, :] = edge_now
    if keep:
        snapshots[r, :] = psi
    max_drift = 0.0
    for step in range(n_steps):
        tau = tau0 + step * dt
        drift = rk4_into(psi, tau, dt, g1, g2, d1, d2, act, is_x, nb1, s1, nb2, s2,
                         k1, k2, k3, k4, tmp, buf)
        if drift > max_drift:
            max_drift = drift
        done = step + 1
        if done % stride == 0:
            p, a, b, e = observe(psi, act, is_x, n1, n2, edges, buf, edge_now)
            r += 1
            rec[r, 0] = tau0 + done * dt
            rec[r, 1] = p
            rec[r, 2] = a
            rec[r, 3] = b
            rec[r, 4] = e
            rec[r, 5] = drift
            rec_edges[r, :] = edge_now
            if keep:
                snapshots[r, :] = psi
        else:
            _edge_probs(psi, act, edges, edge_now)
        for j in range(5):
            if edge_now[j] > edge_max[j]:
                edge_max[j] = edge_now[j]
    return max_drift, edge_max


@njit(cache=True)
def _edge_probs(psi, act, edges, out):
    for j in range(5):
        out[j] = 0.0
    for k in range(act.size):
        mask = edges[k]
        if mask:
            z = psi[act[k]]
            pr = z.real * z.real + z.imag * z.imag
            out[4] += pr
            for j in range(4):
                if mask & (1 << j):
                    out[j] += pr
