"""Vectorized numpy implementations of the hot evaluation kernels.

This is the fallback path selected by ``EMPC_NO_NUMBA=1`` and the reference
the jitted path is tested against.  All functions are pure and allocate
fresh output arrays.

Decision-vector layout used by the ``ocp_*`` kernels (fixed, documented):
``z = [x_0..x_N | u_0..u_{N-1} | theta_0..theta_N]`` flattened row-wise.
"""

import numpy as np

COST_POLY = 0
COST_ABSXY = 1


def monomial_batch(E, X):
    """Evaluate monomials and their state gradients for a batch of states.

    E is a (p, n) integer exponent matrix, X a (K, n) batch.  Returns
    ``phi`` (K, p) with ``phi[k, i] = prod_j X[k, j]**E[i, j]`` and
    ``dphi`` (K, p, n).
    """
    K, n = X.shape
    p = E.shape[0]
    P = X[:, None, :] ** E[None, :, :]
    phi = P.prod(axis=2)
    dphi = np.empty((K, p, n))
    for j in range(n):
        rest = P.copy()
        rest[:, :, j] = 1.0
        rest = rest.prod(axis=2)
        em1 = np.maximum(E[:, j] - 1, 0)
        dphi[:, :, j] = E[None, :, j] * (X[:, None, j] ** em1[None, :]) * rest
    return phi, dphi


def stage_cost_batch(kind, EX, EU, C, X, U):
    """Stage cost and gradients for a batch of (x, u) pairs.

    ``kind`` selects COST_POLY (terms given by exponent rows EX/EU with
    coefficients C) or COST_ABSXY (|x1*x2|, subgradient 0 on the kink).
    Returns (l (K,), lx (K, n), lu (K, m)).
    """
    K, n = X.shape
    m = U.shape[1]
    if kind == COST_ABSXY:
        s = X[:, 0] * X[:, 1]
        sg = np.sign(s)
        lx = np.zeros((K, n))
        lx[:, 0] = sg * X[:, 1]
        lx[:, 1] = sg * X[:, 0]
        return np.abs(s), lx, np.zeros((K, m))
    phix, dphix = monomial_batch(EX, X)
    phiu, dphiu = monomial_batch(EU, U)
    l = (phix * phiu) @ C
    lx = np.einsum("kq,kqn,q->kn", phiu, dphix, C)
    lu = np.einsum("kq,kqm,q->km", phix, dphiu, C)
    return l, lx, lu


def state_poly_batch(E, C, X):
    """Polynomial in the state only: value (K,) and gradient (K, n)."""
    phi, dphi = monomial_batch(E, X)
    return phi @ C, np.einsum("kqn,q->kn", dphi, C)


def ocp_objective(z, N, n, m, p, kind, EX, EU, C, VE, VC):
    """Horizon objective sum(l(x_k, u_k)) + V_f(x_N); returns (value, grad)."""
    nx = (N + 1) * n
    nu = N * m
    X = z[:nx].reshape(N + 1, n)
    U = z[nx:nx + nu].reshape(N, m)
    l, lx, lu = stage_cost_batch(kind, EX, EU, C, X[:N], U)
    vf, vfx = state_poly_batch(VE, VC, X[N:])
    grad = np.zeros(z.shape[0])
    grad[:N * n] = lx.ravel()
    grad[N * n:nx] = vfx[0]
    grad[nx:nx + nu] = lu.ravel()
    return float(l.sum() + vf[0]), grad


def ocp_dissipation(z, N, n, m, p, kind, EX, EU, C, SE, rho_w, xs, ls):
    """Per-step dissipation residuals along the horizon and their Jacobian.

    Row k is ``lam(th_{k+1}, x_{k+1}) - lam(th_k, x_k) + rho_w*|x_k - xs|^2
    - l(x_k, u_k) + ls``; feasible iff <= 0.  Returns (vals (N,), jac (N, nv)).
    """
    nx = (N + 1) * n
    nu = N * m
    X = z[:nx].reshape(N + 1, n)
    U = z[nx:nx + nu].reshape(N, m)
    TH = z[nx + nu:].reshape(N + 1, p)
    phi, dphi = monomial_batch(SE, X)
    lam = (phi * TH).sum(axis=1)
    dlam = np.einsum("kp,kpn->kn", TH, dphi)
    l, lx, lu = stage_cost_batch(kind, EX, EU, C, X[:N], U)
    dev = X[:N] - xs[None, :]
    vals = lam[1:] - lam[:N] + rho_w * (dev ** 2).sum(axis=1) - l + ls

    rows = np.arange(N)
    Jx = np.zeros((N, N + 1, n))
    Jx[rows, rows] = -dlam[:N] + 2.0 * rho_w * dev - lx
    Jx[rows, rows + 1] = dlam[1:]
    Ju = np.zeros((N, N, m))
    Ju[rows, rows] = -lu
    Jt = np.zeros((N, N + 1, p))
    Jt[rows, rows] = -phi[:N]
    Jt[rows, rows + 1] = phi[1:]
    jac = np.concatenate(
        [Jx.reshape(N, nx), Ju.reshape(N, nu), Jt.reshape(N, (N + 1) * p)], axis=1
    )
    return vals, jac
