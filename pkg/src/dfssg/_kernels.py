"""Compiled inner loops of the defender solver.

Vectors here are short (tens of targets) and the ascent loop is dominated by
interpreter overhead under plain numpy, so these run under numba.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def project(v, budget):
    n = v.shape[0]
    x = np.empty(n)
    total = 0.0
    for i in range(n):
        x[i] = min(max(v[i], 0.0), 1.0)
        total += x[i]
    if total <= budget:
        return x
    kinks = np.empty(2 * n + 1)
    m = 1
    kinks[0] = 0.0
    for i in range(n):
        if v[i] > 0.0:
            kinks[m] = v[i]
            m += 1
        if v[i] - 1.0 > 0.0:
            kinks[m] = v[i] - 1.0
            m += 1
    kinks = np.sort(kinks[:m])
    # sum(clip(v - tau, 0, 1)) is nonincreasing in tau; find the last kink above budget
    lo = kinks[0]
    hi = kinks[m - 1]
    a, b = 0, m - 1
    while b - a > 1:
        c = (a + b) // 2
        s = 0.0
        for i in range(n):
            s += min(max(v[i] - kinks[c], 0.0), 1.0)
        if s > budget:
            a = c
        else:
            b = c
    lo = kinks[a]
    hi = kinks[b]
    mid = 0.5 * (lo + hi)
    free_sum = 0.0
    free_count = 0
    upper = 0
    for i in range(n):
        d = v[i] - mid
        if d >= 1.0:
            upper += 1
        elif d > 0.0:
            free_sum += v[i]
            free_count += 1
    tau = (free_sum + upper - budget) / free_count
    for i in range(n):
        x[i] = min(max(v[i] - tau, 0.0), 1.0)
    return x


@njit(cache=True)
def attack_distribution(x, phi, w):
    n = x.shape[0]
    z = np.empty(n)
    zmax = -np.inf
    for i in range(n):
        z[i] = w * x[i] + phi[i]
        if z[i] > zmax:
            zmax = z[i]
    total = 0.0
    for i in range(n):
        z[i] = np.exp(z[i] - zmax)
        total += z[i]
    for i in range(n):
        z[i] /= total
    return z


@njit(cache=True)
def value(x, phi, w, u):
    q = attack_distribution(x, phi, w)
    f = 0.0
    for i in range(x.shape[0]):
        f += (1.0 - x[i]) * u[i] * q[i]
    return f


@njit(cache=True)
def value_and_gradient(x, phi, w, u):
    n = x.shape[0]
    q = attack_distribution(x, phi, w)
    f = 0.0
    for i in range(n):
        f += (1.0 - x[i]) * u[i] * q[i]
    g = np.empty(n)
    for i in range(n):
        g[i] = q[i] * (-u[i] + w * ((1.0 - x[i]) * u[i] - f))
    return f, g


@njit(cache=True)
def residual(x, g, budget, step):
    y = project(x + step * g, budget)
    s = 0.0
    for i in range(x.shape[0]):
        s += (x[i] - y[i]) ** 2
    return np.sqrt(s) / step


@njit(cache=True)
def ascend(phi, w, u, x0, budget, s0, tol, max_iterations, beta, min_step, armijo):
    """Projected gradient ascent; returns (x, f, iterations, trace)."""
    x = project(x0, budget)
    f, g = value_and_gradient(x, phi, w, u)
    trace = np.empty(max_iterations + 1)
    trace[0] = f
    count = 1
    step = s0
    it = 0
    for it in range(1, max_iterations + 1):
        if residual(x, g, budget, s0) <= tol:
            break
        step = min(2.0 * step, 1e4 * s0)
        accepted = False
        while step >= min_step:
            x_new = project(x + step * g, budget)
            f_new = value(x_new, phi, w, u)
            if f_new >= f + armijo * np.dot(g, x_new - x):
                accepted = True
                break
            step *= beta
        if not accepted:
            break
        x = x_new
        f, g = value_and_gradient(x, phi, w, u)
        trace[count] = f
        count += 1
    return x, f, it, trace[:count]
