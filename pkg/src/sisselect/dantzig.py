"""Dantzig selector through its linear-program form, with a dense simplex solver.

The selector solves ``min ||b||_1`` subject to
``||Z^T (y - Z b)||_inf <= lambda_d * sigma``. Writing ``b = b+ - b-`` and
bounding ``|b| <= u`` turns it into an LP over ``(u, b+, b-) >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ModelEstimate, floor_n_over_log_n, ols_fit
from .exceptions import BadSize, BadSpec, Infeasible, PivotLimit, Unbounded
from .screening import rank_by_magnitude


@dataclass(frozen=True)
class LinearProgram:
    """``min c^T x`` subject to ``A_ub x <= b_ub`` and ``x >= var_lower_bounds``.

    Lower bounds are 0 or ``-inf`` (free variable).
    """

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    var_lower_bounds: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A_ub, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b_ub, dtype=float)
        lb = np.asarray(self.var_lower_bounds, dtype=float)
        if b.shape != (A.shape[0],) or lb.shape != c.shape:
            raise BadSpec("inconsistent LP dimensions")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise BadSpec("LP data must be finite")
        if not np.all((lb == 0.0) | (lb == -np.inf)):
            raise BadSpec("lower bounds must be 0 or -inf")
        for name, arr in (("c", c), ("A_ub", A), ("b_ub", b), ("var_lower_bounds", lb)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return self.A_ub.shape


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    pivots: int
    pivot_path: tuple = ()


@dataclass(frozen=True)
class DantzigConfig:
    lambda_d: Optional[float] = None
    sigma: Optional[float] = None
    lp_tol: float = 1e-8
    max_pivots: int = 50_000

    def __post_init__(self):
        if self.lambda_d is not None and self.lambda_d < 0:
            raise BadSpec("lambda_d must be >= 0")
        if self.sigma is not None and not self.sigma > 0:
            raise BadSpec("sigma must be > 0")
        if not self.lp_tol > 0:
            raise BadSpec("lp_tol must be > 0")

    def bound(self, d: int) -> float:
        """``lambda_d * sigma`` with ``lambda_d`` defaulting to ``sqrt(2 log d)``."""
        if self.sigma is None:
            raise BadSpec("sigma is unset; pass a known or estimated noise level")
        lam = math.sqrt(2.0 * math.log(d)) if self.lambda_d is None else self.lambda_d
        return lam * self.sigma


def build_dantzig_lp(Z_sub, y, cfg: DantzigConfig) -> LinearProgram:
    """LP over ``x = (u, b+, b-)`` (``3d`` variables, ``4d`` inequality rows).

    Rows, in order: ``b+ - b- - u <= 0``, ``-b+ + b- - u <= 0``,
    ``G(b+ - b-) <= t + Z^T y`` and ``-G(b+ - b-) <= t - Z^T y`` with
    ``G = Z^T Z`` and ``t = lambda_d * sigma``.
    """
    Z = np.asarray(Z_sub, dtype=float)
    d = Z.shape[1]
    if d < 1:
        raise BadSize("need at least one column")
    t = cfg.bound(d)
    G = Z.T @ Z
    zy = Z.T @ y
    I = np.eye(d)
    O = np.zeros((d, d))
    A = np.block([
        [-I, I, -I],
        [-I, -I, I],
        [O, G, -G],
        [O, -G, G],
    ])
    b = np.concatenate([np.zeros(2 * d), t + zy, t - zy])
    c = np.concatenate([np.ones(d), np.zeros(2 * d)])
    return LinearProgram(c=c, A_ub=A, b_ub=b, var_lower_bounds=np.zeros(3 * d))


def _pivot(T, row, col):
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])


class _Tableau:
    """Dense tableau ``[B^-1 A | B^-1 b]`` with reduced-cost rows below the constraints.

    The original ``A`` and ``rhs`` are kept so the tableau can be rebuilt
    from the current basis; this stops rounding error from piling up over
    long runs of pivots.
    """

    def __init__(self, A, rhs, costs, basis):
        self.A = A
        self.rhs = rhs
        self.costs = costs  # one row per objective
        self.basis = list(basis)
        self.m, self.ncols = A.shape
        self.rebuild()

    def rebuild(self):
        m = self.m
        B = self.A[:, self.basis]
        T = np.empty((m + len(self.costs), self.ncols + 1))
        T[:m, :-1] = np.linalg.solve(B, self.A)
        T[:m, -1] = np.linalg.solve(B, self.rhs)
        for k, c in enumerate(self.costs):
            cb = c[self.basis]
            T[m + k, :-1] = c - cb @ T[:m, :-1]
            T[m + k, -1] = -(cb @ T[:m, -1])
        self.T = T

    def drop_cost(self, k):
        del self.costs[k]
        self.T = np.delete(self.T, self.m + k, axis=0)


def _run_simplex(tab, obj, tol, max_pivots, pivots, path, allowed, bland_after=50,
                 refactor_every=200):
    """Minimize cost row ``obj`` from the current basic feasible solution.

    Entering columns are priced by the most negative reduced cost; after
    ``bland_after`` consecutive degenerate pivots the rule switches to
    Bland's (lowest index enters, lowest basic index leaves on ratio ties)
    until the objective moves again, which rules out cycling.
    """
    m = tab.m
    degenerate_run = 0
    since_refactor = 0
    while True:
        T = tab.T
        rc = T[m + obj, :-1]
        cand = np.flatnonzero((rc < -tol) & allowed)
        if cand.size == 0:
            return pivots
        bland = degenerate_run >= bland_after
        entering = int(cand[0]) if bland else int(cand[np.argmin(rc[cand])])
        col = T[:m, entering]
        pos = col > tol
        if not np.any(pos):
            raise Unbounded("objective is unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(T[:m, -1][pos], 0.0) / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol)
        if bland:
            leaving = int(ties[np.argmin(np.asarray(tab.basis)[ties])])
        else:
            # among ties prefer the largest pivot element for stability
            leaving = int(ties[np.argmax(col[ties])])
        if pivots >= max_pivots:
            raise PivotLimit(f"pivot limit {max_pivots} reached")
        degenerate_run = degenerate_run + 1 if best <= tol else 0
        _pivot(T, leaving, entering)
        tab.basis[leaving] = entering
        pivots += 1
        since_refactor += 1
        path.append((leaving, entering))
        if since_refactor >= refactor_every:
            tab.rebuild()
            since_refactor = 0


def simplex_solve(lp: LinearProgram, tol: float = 1e-9, max_pivots: int = 50_000,
                  record_path: bool = False) -> LPSolution:
    """Two-phase dense tableau simplex (most-negative pricing, Bland fallback on stalls).

    Free variables are split into two non-negative parts; every inequality
    gets a slack; rows with a negative right-hand side are negated and get
    an artificial variable for phase one. Rows are equilibrated to unit
    max-norm before solving.

    Raises
    ------
    Infeasible, Unbounded, PivotLimit
    """
    A, b, c = lp.A_ub, lp.b_ub, lp.c
    m, nv = A.shape
    free = np.isinf(lp.var_lower_bounds)
    n_free = int(free.sum())
    row_scale = np.abs(A).max(axis=1)
    row_scale[row_scale == 0] = 1.0
    As = A / row_scale[:, None]
    bs = b / row_scale
    # columns: original, negated copies of free variables, slacks, artificials
    A_std = np.hstack([As, -As[:, free], np.eye(m)])
    c_std = np.concatenate([c, -c[free], np.zeros(m)])
    neg = bs < 0
    A_std[neg] *= -1.0
    rhs = np.abs(bs)
    n_art = int(neg.sum())
    n_base = A_std.shape[1]
    art = np.zeros((m, n_art))
    art[np.flatnonzero(neg), np.arange(n_art)] = 1.0
    A_full = np.hstack([A_std, art])
    ncols = A_full.shape[1]
    slack0 = nv + n_free
    basis = [slack0 + i for i in range(m)]
    for k, i in enumerate(np.flatnonzero(neg)):
        basis[i] = n_base + k
    cost2 = np.concatenate([c_std, np.zeros(n_art)])
    is_art = np.zeros(ncols, dtype=bool)
    is_art[n_base:] = True

    path = []
    pivots = 0
    if n_art:
        tab = _Tableau(A_full, rhs, [cost2, is_art.astype(float)], basis)
        pivots = _run_simplex(tab, 1, tol, max_pivots, pivots, path, np.ones(ncols, bool))
        tab.rebuild()
        infeas = -tab.T[tab.m + 1, -1]
        if infeas > tol * max(1.0, float(rhs.max())) * 100:
            raise Infeasible(f"phase one ended with infeasibility {infeas:.3g}")
        # drive artificials still basic (at zero level) out of the basis
        T = tab.T
        redundant = []
        for i in range(tab.m):
            if is_art[tab.basis[i]]:
                cand = np.flatnonzero((np.abs(T[i, :-1]) > 1e-7) & ~is_art)
                if cand.size:
                    _pivot(T, i, int(cand[0]))
                    tab.basis[i] = int(cand[0])
                    pivots += 1
                    path.append((i, int(cand[0])))
                else:
                    redundant.append(i)
        if redundant:
            keep = [i for i in range(tab.m) if i not in redundant]
            tab = _Tableau(A_full[keep], rhs[keep], [cost2], [tab.basis[i] for i in keep])
        else:
            tab.drop_cost(1)
            tab.rebuild()
        allowed = ~is_art
    else:
        tab = _Tableau(A_full, rhs, [cost2], basis)
        allowed = np.ones(ncols, dtype=bool)
    pivots = _run_simplex(tab, 0, tol, max_pivots, pivots, path, allowed)
    tab.rebuild()
    if np.any(tab.T[tab.m, :-1][allowed] < -tol * 100):
        raise PivotLimit("final reduced costs are not dual feasible")

    x_std = np.zeros(ncols)
    x_std[tab.basis] = np.maximum(tab.T[: tab.m, -1], 0.0)
    x = x_std[:nv].copy()
    x[free] -= x_std[nv: nv + n_free]
    obj = float(c @ x)
    return LPSolution(x=x, objective=obj, pivots=pivots,
                      pivot_path=tuple(path) if record_path else ())


def estimate_sigma(Z, y, d: Optional[int] = None) -> float:
    """Residual standard deviation of OLS on the top-``d`` SIS columns (default ``[n/log n]``)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    d = min(floor_n_over_log_n(n) if d is None else d, Z.shape[1], n - 2)
    top = rank_by_magnitude(Z.T @ y)[:d]
    r = y - Z[:, top] @ ols_fit(Z[:, top], y)
    return float(math.sqrt(r @ r / (n - d - 1)))


def dantzig_select(Z_sub, y, cfg: DantzigConfig) -> ModelEstimate:
    """Dantzig selector estimate; entries with ``|b_j| <= lp_tol`` are snapped to zero."""
    Z = np.asarray(Z_sub, dtype=float)
    y = np.asarray(y, dtype=float)
    d = Z.shape[1]
    lp = build_dantzig_lp(Z, y, cfg)
    sol = simplex_solve(lp, tol=min(cfg.lp_tol, 1e-9), max_pivots=cfg.max_pivots)
    beta = sol.x[d: 2 * d] - sol.x[2 * d:]
    beta[np.abs(beta) <= cfg.lp_tol] = 0.0
    return ModelEstimate(beta=beta, objective=float(np.abs(beta).sum()), iterations=sol.pivots)


def hard_threshold_topk(est: ModelEstimate, k: int) -> np.ndarray:
    """Indices of the ``k`` largest ``|beta_j|`` (ties by ascending index), sorted."""
    beta = np.asarray(est.beta)
    if not 0 <= k <= beta.size:
        raise BadSize(f"k={k} outside [0, {beta.size}]")
    order = np.lexsort((np.arange(beta.size), -np.abs(beta)))
    return np.sort(order[:k])
