"""Compiled inner loops.  Callers validate arguments; nothing here does."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def levinson_innovations(acov, x):
    """One-step prediction errors and their variances for a Toeplitz covariance.

    Returns ``(e, v)`` with ``e[t] = x[t] - E[x[t] | x[:t]]`` and
    ``v[t] = Var(e[t])``.
    """
    n = x.shape[0]
    e = np.empty(n)
    v = np.empty(n)
    phi = np.zeros(n)
    prev = np.zeros(n)
    v[0] = acov[0]
    e[0] = x[0]
    for t in range(1, n):
        # phi holds phi_{t-1, 1..t-1}; extend to order t
        acc = acov[t]
        for j in range(1, t):
            acc -= prev[j] * acov[t - j]
        k = acc / v[t - 1]
        phi[t] = k
        for j in range(1, t):
            phi[j] = prev[j] - k * prev[t - j]
        v[t] = v[t - 1] * (1.0 - k * k)
        pred = 0.0
        for j in range(1, t + 1):
            pred += phi[j] * x[t - j]
        e[t] = x[t] - pred
        for j in range(1, t + 1):
            prev[j] = phi[j]
    return e, v


@njit(cache=True)
def levinson_forecast(acov, x, h):
    """Best linear predictors of ``x[n .. n+h-1]`` given ``x[:n]`` (zero mean).

    Iterated projections: the order-m one-step coefficients applied to the
    data padded with earlier predictions give the exact finite-past
    predictor at every step.  ``acov`` needs lags ``0 .. n+h-1``.
    """
    n = x.shape[0]
    total = n + h
    z = np.zeros(total)
    z[:n] = x
    phi = np.zeros(total)
    prev = np.zeros(total)
    v = acov[0]
    for m in range(1, total):
        acc = acov[m]
        for j in range(1, m):
            acc -= prev[j] * acov[m - j]
        k = acc / v
        phi[m] = k
        for j in range(1, m):
            phi[j] = prev[j] - k * prev[m - j]
        v = v * (1.0 - k * k)
        for j in range(1, m + 1):
            prev[j] = phi[j]
        if m >= n:
            pred = 0.0
            for j in range(1, m + 1):
                pred += phi[j] * z[m - j]
            z[m] = pred
    return z[n:]


@njit(cache=True)
def _stationary_cov(Tm, RR):
    r = Tm.shape[0]
    A = np.eye(r * r) - np.kron(Tm, Tm)
    vec = np.linalg.solve(A, RR.copy().reshape(r * r))
    return vec.reshape((r, r))


@njit(cache=True)
def arma_kalman(y, ar, ma):
    """Exact Gaussian filter for a zero-mean ARMA(p, q) with unit innovation variance.

    Returns ``(v, F, a_next)``: innovations, their variance multipliers
    and the predicted state for period ``len(y)``.  Once the state
    covariance has converged the gain is frozen.
    """
    p = ar.shape[0]
    q = ma.shape[0]
    r = max(p, q + 1)
    phi = np.zeros(r)
    for i in range(p):
        phi[i] = ar[i]
    Tm = np.zeros((r, r))
    for i in range(r):
        Tm[i, 0] = phi[i]
    for i in range(r - 1):
        Tm[i, i + 1] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    for i in range(q):
        R[i + 1] = ma[i]
    RR = np.outer(R, R)
    P = _stationary_cov(Tm, RR)
    TP = np.empty((r, r))
    Pn = np.empty((r, r))
    a = np.zeros(r)
    n = y.shape[0]
    v = np.empty(n)
    F = np.empty(n)
    K = np.zeros(r)
    steady = False
    for t in range(n):
        Ft = P[0, 0]
        vt = y[t] - a[0]
        v[t] = vt
        F[t] = Ft
        if not steady:
            # (Tm P)[i, j] = phi_i P[0, j] + P[i+1, j]
            for i in range(r):
                for j in range(r):
                    acc = phi[i] * P[0, j]
                    if i + 1 < r:
                        acc += P[i + 1, j]
                    TP[i, j] = acc
            for i in range(r):
                K[i] = TP[i, 0] / Ft
        # a <- Tm a + K v
        a0 = a[0]
        for i in range(r):
            nxt = a[i + 1] if i + 1 < r else 0.0
            a[i] = phi[i] * a0 + nxt + K[i] * vt
        if not steady:
            diff = 0.0
            for i in range(r):
                for j in range(r):
                    acc = TP[i, 0] * phi[j]
                    if j + 1 < r:
                        acc += TP[i, j + 1]
                    acc += RR[i, j] - K[i] * K[j] * Ft
                    Pn[i, j] = acc
                    diff = max(diff, abs(acc - P[i, j]))
            for i in range(r):
                for j in range(r):
                    P[i, j] = Pn[i, j]
            if diff < 1e-12 * P[0, 0]:
                steady = True
    return v, F, a


@njit(cache=True)
def arma_state_forecast(a_next, ar, ma, h):
    p = ar.shape[0]
    q = ma.shape[0]
    r = max(p, q + 1)
    Tm = np.zeros((r, r))
    for i in range(p):
        Tm[i, 0] = ar[i]
    for i in range(r - 1):
        Tm[i, i + 1] = 1.0
    out = np.empty(h)
    a = a_next.copy()
    for k in range(h):
        out[k] = a[0]
        a = Tm @ a
    return out


@njit(cache=True)
def ar1_aggregate(alpha, x0, noise, out):
    """Add ``x_{i,t} = alpha_i x_{i,t-1} + noise[i, t]`` started at ``x0`` into ``out``."""
    N, L = noise.shape
    for i in range(N):
        s = x0[i]
        a = alpha[i]
        for t in range(L):
            s = a * s + noise[i, t]
            out[t] += s


@njit(cache=True)
def ar_recursion_forecast(intercept, coefs, history, h):
    """Iterate ``y_t = c + sum_j coefs[j] y_{t-1-j}`` ``h`` steps past ``history``."""
    p = coefs.shape[0]
    n = history.shape[0]
    z = np.empty(n + h)
    z[:n] = history
    for k in range(h):
        t = n + k
        acc = intercept
        for j in range(p):
            acc += coefs[j] * z[t - 1 - j]
        z[t] = acc
    return z[n:]
