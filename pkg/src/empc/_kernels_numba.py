"""Numba-jitted implementations of the hot evaluation kernels.

Same contracts as ``empc._kernels_numpy``; plain loops so the JIT emits
tight scalar code.  ``fastmath`` stays off: results must be deterministic
and bit-stable across runs.
"""

import numpy as np
from numba import njit

COST_POLY = 0
COST_ABSXY = 1


@njit(cache=True)
def monomial_batch(E, X):
    K, n = X.shape
    p = E.shape[0]
    phi = np.empty((K, p))
    dphi = np.zeros((K, p, n))
    for k in range(K):
        for i in range(p):
            v = 1.0
            for j in range(n):
                e = E[i, j]
                if e > 0:
                    v *= X[k, j] ** e
            phi[k, i] = v
            for j in range(n):
                e = E[i, j]
                if e == 0:
                    continue
                d = float(e)
                for q in range(n):
                    eq = E[i, q]
                    if q == j:
                        if eq > 1:
                            d *= X[k, q] ** (eq - 1)
                    elif eq > 0:
                        d *= X[k, q] ** eq
                dphi[k, i, j] = d
    return phi, dphi


@njit(cache=True)
def stage_cost_batch(kind, EX, EU, C, X, U):
    K, n = X.shape
    m = U.shape[1]
    l = np.zeros(K)
    lx = np.zeros((K, n))
    lu = np.zeros((K, m))
    if kind == COST_ABSXY:
        for k in range(K):
            s = X[k, 0] * X[k, 1]
            l[k] = abs(s)
            sg = 0.0
            if s > 0.0:
                sg = 1.0
            elif s < 0.0:
                sg = -1.0
            lx[k, 0] = sg * X[k, 1]
            lx[k, 1] = sg * X[k, 0]
        return l, lx, lu
    phix, dphix = monomial_batch(EX, X)
    phiu, dphiu = monomial_batch(EU, U)
    q = C.shape[0]
    for k in range(K):
        acc = 0.0
        for i in range(q):
            acc += C[i] * phix[k, i] * phiu[k, i]
            for j in range(n):
                lx[k, j] += C[i] * phiu[k, i] * dphix[k, i, j]
            for j in range(m):
                lu[k, j] += C[i] * phix[k, i] * dphiu[k, i, j]
        l[k] = acc
    return l, lx, lu


@njit(cache=True)
def state_poly_batch(E, C, X):
    K, n = X.shape
    phi, dphi = monomial_batch(E, X)
    q = C.shape[0]
    v = np.zeros(K)
    vx = np.zeros((K, n))
    for k in range(K):
        for i in range(q):
            v[k] += C[i] * phi[k, i]
            for j in range(n):
                vx[k, j] += C[i] * dphi[k, i, j]
    return v, vx


@njit(cache=True)
def ocp_objective(z, N, n, m, p, kind, EX, EU, C, VE, VC):
    nx = (N + 1) * n
    nu = N * m
    X = z[:nx].copy().reshape(N + 1, n)
    U = z[nx:nx + nu].copy().reshape(N, m)
    l, lx, lu = stage_cost_batch(kind, EX, EU, C, X[:N], U)
    vf, vfx = state_poly_batch(VE, VC, X[N:])
    grad = np.zeros(z.shape[0])
    val = vf[0]
    for k in range(N):
        val += l[k]
        for j in range(n):
            grad[k * n + j] = lx[k, j]
        for j in range(m):
            grad[nx + k * m + j] = lu[k, j]
    for j in range(n):
        grad[N * n + j] = vfx[0, j]
    return val, grad


@njit(cache=True)
def ocp_dissipation(z, N, n, m, p, kind, EX, EU, C, SE, rho_w, xs, ls):
    nv = z.shape[0]
    nx = (N + 1) * n
    nu = N * m
    X = z[:nx].copy().reshape(N + 1, n)
    U = z[nx:nx + nu].copy().reshape(N, m)
    TH = z[nx + nu:].copy().reshape(N + 1, p)
    phi, dphi = monomial_batch(SE, X)
    lam = np.zeros(N + 1)
    dlam = np.zeros((N + 1, n))
    for k in range(N + 1):
        for i in range(p):
            lam[k] += TH[k, i] * phi[k, i]
            for j in range(n):
                dlam[k, j] += TH[k, i] * dphi[k, i, j]
    l, lx, lu = stage_cost_batch(kind, EX, EU, C, X[:N], U)
    vals = np.zeros(N)
    jac = np.zeros((N, nv))
    for k in range(N):
        r = 0.0
        for j in range(n):
            dj = X[k, j] - xs[j]
            r += dj * dj
        vals[k] = lam[k + 1] - lam[k] + rho_w * r - l[k] + ls
        for j in range(n):
            jac[k, k * n + j] = -dlam[k, j] + 2.0 * rho_w * (X[k, j] - xs[j]) - lx[k, j]
            jac[k, (k + 1) * n + j] = dlam[k + 1, j]
        for j in range(m):
            jac[k, nx + k * m + j] = -lu[k, j]
        for i in range(p):
            jac[k, nx + nu + k * p + i] = -phi[k, i]
            jac[k, nx + nu + (k + 1) * p + i] = phi[k + 1, i]
    return vals, jac
