"""Compiled explicit Euler kernel shared by every integration path.

The arithmetic order matches :func:`rdsynth.model.vector_field` exactly so
that compiled and pure-numpy integrations agree bit for bit.
"""

import numpy as np
from numba import njit

CUBIC = 0
POLY = 1


@njit(cache=True, nogil=True)
def euler_rows(Y, nsteps, dt, sigma, ih2, b, kind, theta, coeffs):
    """Apply ``nsteps`` Euler steps to every row of ``Y`` (shape ``(n, M)``)."""
    n, M = Y.shape
    out = np.empty_like(Y)
    y = np.empty(M)
    f = np.empty(M)
    deg = coeffs.shape[0] - 1
    for j in range(n):
        for i in range(M):
            y[i] = Y[j, i]
        for _ in range(nsteps):
            for i in range(M):
                v = -2.0 * y[i]
                if i > 0:
                    v += y[i - 1]
                if i < M - 1:
                    v += y[i + 1]
                yi = y[i]
                if kind == CUBIC:
                    r = yi * (1.0 - yi) * (yi - theta)
                else:
                    r = coeffs[deg]
                    for q in range(deg - 1, -1, -1):
                        r = r * yi + coeffs[q]
                f[i] = sigma * (v * ih2) + b[i] + r
            for i in range(M):
                y[i] = y[i] + dt * f[i]
        for i in range(M):
            out[j, i] = y[i]
    return out


@njit(cache=True, nogil=True)
def _field(y, sigma, ih2, b, kind, theta, coeffs, out):
    M = y.shape[0]
    deg = coeffs.shape[0] - 1
    for i in range(M):
        v = -2.0 * y[i]
        if i > 0:
            v += y[i - 1]
        if i < M - 1:
            v += y[i + 1]
        yi = y[i]
        if kind == CUBIC:
            r = yi * (1.0 - yi) * (yi - theta)
        else:
            r = coeffs[deg]
            for q in range(deg - 1, -1, -1):
                r = r * yi + coeffs[q]
        out[i] = sigma * (v * ih2) + b[i] + r


@njit(cache=True, nogil=True)
def rk4_rows(Y, nsteps, h, sigma, ih2, b, kind, theta, coeffs):
    """Classical fourth-order Runge-Kutta with fixed step ``h``, row by row."""
    n, M = Y.shape
    out = np.empty_like(Y)
    y = np.empty(M)
    tmp = np.empty(M)
    k1 = np.empty(M)
    k2 = np.empty(M)
    k3 = np.empty(M)
    k4 = np.empty(M)
    for j in range(n):
        for i in range(M):
            y[i] = Y[j, i]
        for _ in range(nsteps):
            _field(y, sigma, ih2, b, kind, theta, coeffs, k1)
            for i in range(M):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            _field(tmp, sigma, ih2, b, kind, theta, coeffs, k2)
            for i in range(M):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            _field(tmp, sigma, ih2, b, kind, theta, coeffs, k3)
            for i in range(M):
                tmp[i] = y[i] + h * k3[i]
            _field(tmp, sigma, ih2, b, kind, theta, coeffs, k4)
            for i in range(M):
                y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(M):
            out[j, i] = y[i]
    return out


def reaction_args(reaction):
    if reaction.kind == "bistable-cubic":
        return CUBIC, float(reaction.theta), np.zeros(1)
    return POLY, 0.0, np.ascontiguousarray(reaction.coeffs, dtype=np.float64)
