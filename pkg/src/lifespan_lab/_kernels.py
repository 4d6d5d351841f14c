"""Compiled grid kernels shared by the solver and the Picard iteration."""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True, inline="always")
def _power(w, p):
    aw = abs(w)
    if p == 2.0:
        return aw * aw
    if p == 3.0:
        return aw * aw * aw
    return aw**p


@numba.njit(cache=True, nogil=True)
def source(r, s, wgt, p, lo, hi, out):
    """out[i] = |(r - s)/2|^p * wgt[i] on [lo, hi]."""
    for i in range(lo, hi + 1):
        out[i] = _power(0.5 * (r[i] - s[i]), p) * wgt[i]


@numba.njit(cache=True, nogil=True)
def heun_level(r, s, u, n_old, wgt, p, d, lo, hi, nonlinear, r_new, s_new, u_new, n_new):
    """Advance one unit-CFL level on nodes lo..hi.

    r = u_t + u_x travels left, s = u_t - u_x travels right; both pick up
    the source along their characteristic by Heun's rule. Returns
    (max|w|, max|u|, all_finite) over the updated window.
    """
    half = 0.5 * d
    maxw = 0.0
    maxu = 0.0
    finite = True
    for i in range(lo, hi + 1):
        rf = r[i + 1]
        sf = s[i - 1]
        if nonlinear:
            nr = n_old[i + 1]
            ns = n_old[i - 1]
            rp = rf + d * nr
            sp = sf + d * ns
            npred = _power(0.5 * (rp - sp), p) * wgt[i]
            rn = rf + half * (nr + npred)
            sn = sf + half * (ns + npred)
        else:
            rn = rf
            sn = sf
        r_new[i] = rn
        s_new[i] = sn
        v_old = 0.5 * (r[i] + s[i])
        v_new = 0.5 * (rn + sn)
        un = u[i] + half * (v_old + v_new)
        u_new[i] = un
        w = 0.5 * (rn - sn)
        if nonlinear:
            n_new[i] = _power(w, p) * wgt[i]
        aw = abs(w)
        au = abs(un)
        if not (np.isfinite(aw) and np.isfinite(au)):
            finite = False
        if aw > maxw:
            maxw = aw
        if au > maxu:
            maxu = au
    return maxw, maxu, finite


@numba.njit(cache=True, nogil=True)
def line_integrals(src, d, a_out, b_out):
    """Trapezoid integrals of ``src`` (levels x nodes) along both characteristics.

    a_out[n, i] integrates src(x_i + t_n - s, s) over s in [0, t_n] (the
    line through nodes (i + n - m, m)); b_out[n, i] integrates
    src(x_i - t_n + s, s). Recurrences such as
    A(i, n+1) = A(i+1, n) + d/2 (F(i+1, n) + F(i, n+1)) use grid nodes only;
    values beyond the array edges count as zero.
    """
    levels, nodes = src.shape
    half = 0.5 * d
    for i in range(nodes):
        a_out[0, i] = 0.0
        b_out[0, i] = 0.0
    for n in range(1, levels):
        for i in range(nodes):
            if i + 1 < nodes:
                a_out[n, i] = a_out[n - 1, i + 1] + half * (src[n - 1, i + 1] + src[n, i])
            else:
                a_out[n, i] = half * src[n, i]
            if i >= 1:
                b_out[n, i] = b_out[n - 1, i - 1] + half * (src[n - 1, i - 1] + src[n, i])
            else:
                b_out[n, i] = half * src[n, i]


@numba.njit(cache=True)
def _etd_weights(h, rate):
    """Cox-Matthews ETDRK4 weights (q, f1, f2, f3) for a scalar rate."""
    z = h * rate
    if abs(z) >= 1.0:
        # staged division keeps huge steps finite
        ez = np.exp(z)
        q = h * (np.exp(z / 2) - 1) / z
        f1 = h * ((-4 - z) / z / z / z + ez * ((4 - 3 * z) / z / z / z + 1 / z))
        f2 = h * ((2 + z) / z / z / z + ez * (1 / z / z - 2 / z / z / z))
        f3 = h * ((-4 - 3 * z) / z / z / z - 1 / z + ez * (4 / z / z / z - 1 / z / z))
        return q, f1, f2, f3
    # contour average on a unit circle around z avoids the cancellation
    q = f1 = f2 = f3 = 0.0
    m = 32
    for k in range(m):
        r = z + np.exp(2j * np.pi * (k + 0.5) / m)
        er = np.exp(r)
        r3 = r * r * r
        q += ((np.exp(r / 2) - 1) / r).real
        f1 += ((-4 - r + er * (4 - 3 * r + r * r)) / r3).real
        f2 += ((2 + r + er * (r - 2)) / r3).real
        f3 += ((-4 - 3 * r - r * r + er * (4 - r)) / r3).real
    return h * q / m, h * f1 / m, h * f2 / m, h * f3 / m


@numba.njit(cache=True)
def _lem1_force(t, h, p, D2, forcing, q):
    return forcing * t ** (q - 2) + D2 * t ** (-1 - 2 * p + q) * abs(h) ** p


@numba.njit(cache=True)
def _lem1_step(t, y, v, h, p, D2, forcing, q):
    k1y, k1v = v, _lem1_force(t, y, p, D2, forcing, q)
    k2y, k2v = v + h / 2 * k1v, _lem1_force(t + h / 2, y + h / 2 * k1y, p, D2, forcing, q)
    k3y, k3v = v + h / 2 * k2v, _lem1_force(t + h / 2, y + h / 2 * k2y, p, D2, forcing, q)
    k4y, k4v = v + h * k3v, _lem1_force(t + h, y + h * k3y, p, D2, forcing, q)
    return (y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y),
            v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


@numba.njit(cache=True)
def _lizhou_step(t, g, v, h, p, a, M2):
    """ETDRK4 in P = G + V/2 (rate 0) and V (rate -2)."""
    q0, a0, b0, c0 = h / 2, h / 6, h / 6, h / 6
    q2, a2, b2, c2 = _etd_weights(h, -2.0)
    e, e2 = np.exp(-2 * h), np.exp(-h)
    P = g + v / 2
    n0 = M2 * abs(g) ** p * (1 + t) ** (-a)
    Pa = P + q0 * n0 / 2
    Va = e2 * v + q2 * n0
    na = M2 * abs(Pa - Va / 2) ** p * (1 + t + h / 2) ** (-a)
    Pb = P + q0 * na / 2
    Vb = e2 * v + q2 * na
    nb = M2 * abs(Pb - Vb / 2) ** p * (1 + t + h / 2) ** (-a)
    Pc = Pa + q0 * (2 * nb - n0) / 2
    Vc = e2 * Va + q2 * (2 * nb - n0)
    nc = M2 * abs(Pc - Vc / 2) ** p * (1 + t + h) ** (-a)
    P_new = P + (a0 * n0 + 2 * b0 * (na + nb) + c0 * nc) / 2
    V_new = e * v + a2 * n0 + 2 * b2 * (na + nb) + c2 * nc
    return P_new - V_new / 2, V_new


@numba.njit(cache=True)
def escape_time(kind, p, a, c2, forcing, t0, y0, v0, step0, t_cap, level):
    """First time y exceeds ``level``; nan if t_cap is reached first.

    kind 0: H'' = forcing t^{q-2} + c2 t^{1-2p-a/p} |H|^p, q = 2 - a/p (RK4).
    kind 1: G'' + 2G' = c2 |G|^p (1+t)^{-a} (ETDRK4).
    The step is step0 * min(1 + t, y/|y'|), halved until the update is
    finite; the crossing inside the last step is interpolated in log y.
    """
    q = 2 - a / p
    t, y, v = t0, y0, v0
    while t < t_cap:
        scale = 1.0 + t
        if v != 0:
            scale = min(scale, abs(y / v))
        h = step0 * scale
        while True:
            if kind == 0:
                yn, vn = _lem1_step(t, y, v, h, p, c2, forcing, q)
            else:
                yn, vn = _lizhou_step(t, y, v, h, p, a, c2)
            if np.isfinite(yn) and np.isfinite(vn) and yn <= 1e3 * max(y, 1.0) * level:
                break
            h /= 2
        if yn >= level:
            frac = (np.log(level) - np.log(y)) / (np.log(yn) - np.log(y))
            return t + frac * h
        t, y, v = t + h, yn, vn
    return np.nan
