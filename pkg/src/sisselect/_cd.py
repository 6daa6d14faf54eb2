"""Compiled kernels: weighted-L1 coordinate descent and LLA along a lambda path.

Both work in covariance form, ``G = Z^T Z / n`` and ``c = Z^T y / n``, so a
coordinate update costs O(d) regardless of n.
"""

import numpy as np
from numba import njit

L1, SCAD, MCP, ADAPTIVE = 0, 1, 2, 3


@njit(cache=True)
def _cd_gram(G, c, w, beta, Gb, max_sweeps, tol):
    """Minimize ``b^T G b / 2 - c^T b + sum_j w_j |b_j|`` in place.

    ``Gb`` must equal ``G @ beta`` on entry and is kept in sync.
    Returns ``(sweeps, last_max_change)``.
    """
    d = G.shape[0]
    sweeps = 0
    max_change = np.inf
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in range(d):
            old = beta[j]
            gjj = G[j, j]
            if gjj <= 0.0 or w[j] == np.inf:
                new = 0.0
            else:
                z = c[j] - Gb[j] + gjj * old
                if z > w[j]:
                    new = (z - w[j]) / gjj
                elif z < -w[j]:
                    new = (z + w[j]) / gjj
                else:
                    new = 0.0
            if new != old:
                delta = new - old
                for k in range(d):
                    Gb[k] += G[k, j] * delta
                beta[j] = new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if max_change <= tol:
            break
    return sweeps, max_change


@njit(cache=True)
def weighted_l1_cd(G, c, w, beta, max_sweeps, tol):
    Gb = G @ beta
    return _cd_gram(G, c, w, beta, Gb, max_sweeps, tol)


@njit(cache=True)
def _weights(kind, lam, a, unit, beta, out):
    for j in range(beta.shape[0]):
        t = abs(beta[j])
        if kind == L1:
            out[j] = lam
        elif kind == SCAD:
            if lam == 0.0:
                out[j] = 0.0
            elif t <= lam:
                out[j] = lam
            else:
                out[j] = max(a * lam - t, 0.0) / (a - 1.0)
        elif kind == MCP:
            out[j] = max(a * lam - t, 0.0) / a
        else:
            out[j] = lam * unit[j]


@njit(cache=True)
def lla_path(G, c, grid, init, kind, a, unit, max_outer, max_inner, tol):
    """LLA fit at every lambda of ``grid``, warm-starting the inner solver.

    The penalty is first linearized at ``init`` for every lambda. Returns
    ``(betas, outer_steps, converged)``.
    """
    d = G.shape[0]
    L = grid.shape[0]
    betas = np.zeros((L, d))
    outer = np.zeros(L, dtype=np.int64)
    ok = np.ones(L, dtype=np.bool_)
    warm = np.zeros(d)
    w = np.empty(d)
    convex = kind == L1 or kind == ADAPTIVE
    for li in range(L):
        lam = grid[li]
        cur = init.copy()
        beta = warm.copy()
        conv = True
        settled = False
        steps = 0
        for it in range(max_outer):
            steps += 1
            _weights(kind, lam, a, unit, cur, w)
            for j in range(d):
                if w[j] == np.inf:
                    beta[j] = 0.0
            Gb = G @ beta
            sweeps, ch = _cd_gram(G, c, w, beta, Gb, max_inner, tol)
            conv = ch <= tol
            change = 0.0
            for j in range(d):
                dj = abs(beta[j] - cur[j])
                if dj > change:
                    change = dj
                cur[j] = beta[j]
            if convex or change <= tol:
                settled = True
                break
        if not settled:
            conv = False
        betas[li] = cur
        outer[li] = steps
        ok[li] = conv
        warm = cur.copy()
    return betas, outer, ok
