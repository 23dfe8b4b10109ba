"""Compiled inner loops for long runs.

Method codes: 0 Euler, 1 RK2 (Heun), 2 RK4, 3 collapsed quantum step.
The collapsed step carries a unit complex vector and a scale and applies the
post-selected nonlinear map followed by the block-encoded matrix.
"""
from __future__ import annotations

import numpy as np
from numba import njit

EULER, RK2, RK4, COLLAPSED = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _rhs(x, y, z, s, r, b):
    return s * (y - x), x * (r - z) - y, x * y - b * z


@njit(cache=True)
def _classical_step(method, x, y, z, s, r, b, dt):
    if method == EULER:
        fx, fy, fz = _rhs(x, y, z, s, r, b)
        return x + dt * fx, y + dt * fy, z + dt * fz
    if method == RK2:
        ax, ay, az = _rhs(x, y, z, s, r, b)
        bx, by, bz = _rhs(x + dt * ax, y + dt * ay, z + dt * az, s, r, b)
        h = 0.5 * dt
        return x + h * (ax + bx), y + h * (ay + by), z + h * (az + bz)
    k1x, k1y, k1z = _rhs(x, y, z, s, r, b)
    h = 0.5 * dt
    k2x, k2y, k2z = _rhs(x + h * k1x, y + h * k1y, z + h * k1z, s, r, b)
    k3x, k3y, k3z = _rhs(x + h * k2x, y + h * k2y, z + h * k2z, s, r, b)
    k4x, k4y, k4z = _rhs(x + dt * k3x, y + dt * k3y, z + dt * k3z, s, r, b)
    w = dt / 6.0
    return (x + w * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + w * (k1y + 2 * k2y + 2 * k3y + k4y),
            z + w * (k1z + 2 * k2z + 2 * k3z + k4z))


@njit(cache=True)
def _collapsed_step(amps, scale, tables, degrees, nreg, block, sigma, vec, nl, out):
    """Advance ``(amps, scale)`` in place; returns ``(scale, p_nl, p_block)``."""
    d = amps.shape[0]
    for i in range(d):
        vec[i] = scale * amps[i]
    p = 0
    best = abs(vec[0])
    for i in range(1, 3):
        if abs(vec[i]) > best:
            best = abs(vec[i])
            p = i
    cp = abs(vec[p].real)
    wsum = 0.0
    for t in range(degrees.shape[0]):
        wsum += cp ** (degrees[t] - 1)
    const = cp ** (nreg - 1) / (wsum * scale ** nreg)
    for i in range(d):
        nl[i] = 0.0
    for t in range(degrees.shape[0]):
        for i in range(d):
            acc = vec[tables[t, 0, i]]
            for k in range(1, degrees[t]):
                acc *= vec[tables[t, k, i]]
            nl[i] += acc
    p_nl = 0.0
    for i in range(d):
        v = const * nl[i]
        p_nl += v.real * v.real + v.imag * v.imag
    norm_nl = np.sqrt(p_nl)
    scale_nl = norm_nl / const
    for i in range(d):
        nl[i] = const * nl[i] / norm_nl
    p_block = 0.0
    for i in range(d):
        acc = 0.0j
        for j in range(d):
            acc += block[i, j] * nl[j]
        out[i] = acc
        p_block += acc.real * acc.real + acc.imag * acc.imag
    nb = np.sqrt(p_block)
    for i in range(d):
        amps[i] = out[i] / nb
    return scale_nl * sigma * nb, p_nl, p_block


@njit(cache=True)
def chain(method, x0, y0, z0, s, r, b, dt, nsteps, amps0, scale0, tables, degrees, nreg,
          block, sigma):
    """Full trajectory ``(nsteps + 1, 3)`` plus per-step probabilities."""
    xyz = np.empty((nsteps + 1, 3))
    pnl = np.ones(nsteps)
    pbl = np.ones(nsteps)
    xyz[0, 0], xyz[0, 1], xyz[0, 2] = x0, y0, z0
    x, y, z = x0, y0, z0
    amps = amps0.copy()
    scale = scale0
    d = amps.shape[0]
    vec = np.empty(d, dtype=np.complex128)
    nl = np.empty(d, dtype=np.complex128)
    out = np.empty(d, dtype=np.complex128)
    for n in range(nsteps):
        if method == COLLAPSED:
            scale, a, c = _collapsed_step(amps, scale, tables, degrees, nreg, block, sigma,
                                          vec, nl, out)
            pnl[n] = a
            pbl[n] = c
            x = (scale * amps[0]).real
            y = (scale * amps[1]).real
            z = (scale * amps[2]).real
        else:
            x, y, z = _classical_step(method, x, y, z, s, r, b, dt)
        xyz[n + 1, 0], xyz[n + 1, 1], xyz[n + 1, 2] = x, y, z
    return xyz, pnl, pbl


@njit(cache=True)
def section(method, x0, y0, z0, s, r, b, dt, nsteps, skip, amps0, scale0, tables, degrees,
            nreg, block, sigma):
    """Descending x = 0 crossings ``(t, y, z)`` after step ``skip``, interpolated linearly."""
    cap = 1024
    rec = np.empty((cap, 3))
    count = 0
    x, y, z = x0, y0, z0
    amps = amps0.copy()
    scale = scale0
    d = amps.shape[0]
    vec = np.empty(d, dtype=np.complex128)
    nl = np.empty(d, dtype=np.complex128)
    out = np.empty(d, dtype=np.complex128)
    for n in range(nsteps):
        if method == COLLAPSED:
            scale, _, _ = _collapsed_step(amps, scale, tables, degrees, nreg, block, sigma,
                                          vec, nl, out)
            xn = (scale * amps[0]).real
            yn = (scale * amps[1]).real
            zn = (scale * amps[2]).real
        else:
            xn, yn, zn = _classical_step(method, x, y, z, s, r, b, dt)
        if n >= skip and x > 0.0 and xn <= 0.0:
            f = x / (x - xn)
            yc = y + f * (yn - y)
            if yc < 0.0:  # dx/dt = sigma * y at x = 0
                if count == cap:
                    bigger = np.empty((2 * cap, 3))
                    bigger[:cap] = rec
                    rec = bigger
                    cap *= 2
                rec[count, 0] = (n + f) * dt
                rec[count, 1] = yc
                rec[count, 2] = z + f * (zn - z)
                count += 1
        x, y, z = xn, yn, zn
    return rec[:count].copy()
