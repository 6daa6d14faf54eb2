"""Penalized least squares with folded-concave penalties.

The objective is ``(1/2n)||y - Z b||^2 + sum_j p_lambda(|b_j|)``. Concave
penalties (SCAD, MCP) are handled by local linear approximation: each outer
step linearizes the penalty at the current iterate and solves the resulting
weighted-L1 problem by cyclic coordinate descent.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _cd
from .core import ModelEstimate, floor_n_over_log_n, ols_fit
from .exceptions import BadSpec, ConvergenceWarning, RankDeficient


class Penalty(str, enum.Enum):
    L1 = "L1"
    SCAD = "SCAD"
    MCP = "MCP"
    ADAPTIVE_L1 = "ADAPTIVE_L1"


@dataclass(frozen=True)
class PenaltySpec:
    kind: Penalty = Penalty.SCAD
    lam: float = 1.0
    a: float = 3.7
    gamma: float = 1.0
    base_beta: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Penalty(self.kind))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise BadSpec(f"lambda must be finite and non-negative, got {self.lam}")
        if self.kind is Penalty.SCAD and not self.a > 2:
            raise BadSpec(f"SCAD needs a > 2, got {self.a}")
        if self.kind is Penalty.MCP and not self.a > 0:
            raise BadSpec(f"MCP needs a > 0, got {self.a}")
        if self.kind is Penalty.ADAPTIVE_L1:
            if self.base_beta is None:
                raise BadSpec("adaptive L1 needs base_beta")
            if not self.gamma >= 0:
                raise BadSpec(f"gamma must be >= 0, got {self.gamma}")
            base = np.array(self.base_beta, dtype=float)
            base.setflags(write=False)
            object.__setattr__(self, "base_beta", base)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class SolverConfig:
    max_outer: int = 20
    max_inner: int = 1000
    tol: float = 1e-7
    lambda_grid: Optional[tuple] = None
    n_lambda: int = 50
    lambda_min_ratio: float = 1e-3

    def __post_init__(self):
        if self.max_outer < 1 or self.max_inner < 1:
            raise BadSpec("iteration caps must be >= 1")
        if not self.tol > 0:
            raise BadSpec("tol must be positive")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid:
                raise BadSpec("lambda_grid is empty")
            if any(v <= 0 for v in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
                raise BadSpec("lambda_grid must be positive and strictly descending")
            object.__setattr__(self, "lambda_grid", grid)


def _adaptive_weights(spec: PenaltySpec) -> np.ndarray:
    base = np.abs(spec.base_beta)
    with np.errstate(divide="ignore"):
        w = spec.lam / base**spec.gamma
    # gamma = 0 gives 0**0 = 1, i.e. plain Lasso even where base is zero
    w = np.where(base == 0.0, np.inf if spec.gamma > 0 else spec.lam, w)
    return w


def penalty_deriv(spec: PenaltySpec, t):
    """Derivative ``p'_lambda(t)`` for ``t >= 0`` (vectorized).

    For the adaptive L1 family the result is the per-coordinate weight vector
    ``lambda / |base_beta|**gamma`` and ``t`` only fixes the output shape.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise BadSpec("penalty derivative needs t >= 0")
    lam, a = spec.lam, spec.a
    if spec.kind is Penalty.L1:
        out = np.full_like(t, lam)
    elif spec.kind is Penalty.SCAD:
        if lam == 0:
            out = np.zeros_like(t)
        else:
            out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
    elif spec.kind is Penalty.MCP:
        out = np.maximum(a * lam - t, 0.0) / a
    else:
        out = np.broadcast_to(_adaptive_weights(spec), t.shape).astype(float)
    return out if out.ndim else float(out)


def penalty_value(spec: PenaltySpec, t):
    """Penalty ``p_lambda(t) = integral_0^t p'_lambda(s) ds`` (vectorized)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise BadSpec("penalty value needs t >= 0")
    lam, a = spec.lam, spec.a
    if spec.kind is Penalty.L1:
        out = lam * t
    elif spec.kind is Penalty.SCAD:
        mid = (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
        out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, (a + 1.0) * lam * lam / 2.0))
    elif spec.kind is Penalty.MCP:
        out = np.where(t <= a * lam, lam * t - t * t / (2.0 * a), a * lam * lam / 2.0)
    else:
        w = np.broadcast_to(_adaptive_weights(spec), t.shape)
        with np.errstate(invalid="ignore"):
            out = np.where(t == 0.0, 0.0, w * t)
    return out if out.ndim else float(out)


def pls_objective(Z, y, beta, spec: PenaltySpec) -> float:
    """``(1/2n)||y - Z beta||^2 + sum_j p_lambda(|beta_j|)``."""
    r = y - Z @ beta
    return float(r @ r / (2 * len(y)) + np.sum(penalty_value(spec, np.abs(beta))))


def kkt_violation(Z, y, beta, weights) -> float:
    """Largest violation of the weighted-L1 optimality conditions.

    With ``g = Z^T r / n``: ``|g_j| <= w_j`` where ``beta_j = 0`` and
    ``g_j = w_j sign(beta_j)`` elsewhere.
    """
    Z = np.asarray(Z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    weights = np.asarray(weights, dtype=float)
    g = Z.T @ (y - Z @ beta) / len(y)
    active = beta != 0
    viol = np.zeros_like(beta)
    finite = np.isfinite(weights)
    zero = ~active & finite
    viol[zero] = np.maximum(np.abs(g[zero]) - weights[zero], 0.0)
    viol[active] = np.abs(g[active] - weights[active] * np.sign(beta[active]))
    # an active coordinate with infinite weight is a hard violation
    viol[active & ~finite] = np.inf
    return float(viol.max()) if viol.size else 0.0


def _gram(Z, y):
    n = Z.shape[0]
    return np.ascontiguousarray(Z.T @ Z / n), np.ascontiguousarray(Z.T @ y / n)


def weighted_lasso_cd(Z_sub, y, weights, cfg: SolverConfig = SolverConfig(), init=None,
                      _gram_cache=None) -> ModelEstimate:
    """Cyclic coordinate descent for ``(1/2n)||y - Z b||^2 + sum_j w_j |b_j|``.

    Coordinates are swept in ascending order until the largest coefficient
    change in a sweep is at most ``cfg.tol``. If ``cfg.max_inner`` sweeps are
    exhausted first a :class:`ConvergenceWarning` is issued and the
    returned estimate has ``converged=False``.
    """
    Z = np.ascontiguousarray(Z_sub, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, d = Z.shape
    if d < 1:
        raise BadSpec("need at least one column")
    if w.shape != (d,) or np.any(np.isnan(w)) or np.any(w < 0):
        raise BadSpec("weights must be a non-negative vector of length d")
    beta = np.zeros(d) if init is None else np.array(init, dtype=float)
    beta[np.isinf(w)] = 0.0
    G, c = _gram(Z, y) if _gram_cache is None else _gram_cache
    sweeps, change = _cd.weighted_l1_cd(G, c, w, beta, int(cfg.max_inner), float(cfg.tol))
    converged = change <= cfg.tol
    if not converged:
        warnings.warn(f"coordinate descent stopped after {sweeps} sweeps "
                      f"(last change {change:.3g})", ConvergenceWarning, stacklevel=2)
    r = y - Z @ beta
    with np.errstate(invalid="ignore"):
        penalty = float(np.sum(np.where(beta == 0.0, 0.0, w * np.abs(beta))))
    return ModelEstimate(beta=beta, objective=float(r @ r) / (2 * n) + penalty,
                         iterations=int(sweeps), converged=bool(converged))


def lla_fit(Z_sub, y, spec: PenaltySpec, cfg: SolverConfig = SolverConfig(), init=None,
            warm_start=None, max_outer=None, trace: Optional[list] = None) -> ModelEstimate:
    """Local linear approximation fit of a penalized least-squares problem.

    Parameters
    ----------
    Z_sub, y : arrays
        Design (n x d) and response.
    spec : PenaltySpec
    cfg : SolverConfig
    init : array, optional
        Point at which the penalty is first linearized (zero if omitted, which
        makes the first step a Lasso fit).
    warm_start : array, optional
        Starting point for the inner coordinate descent; does not change the
        solution, only the work needed to reach it.
    max_outer : int, optional
        Overrides ``cfg.max_outer``.
    trace : list, optional
        If given, receives the penalized objective after every outer step.

    Returns
    -------
    ModelEstimate
        ``objective`` is the penalized objective and ``iterations`` the
        number of outer steps.
    """
    Z = np.ascontiguousarray(Z_sub, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    d = Z.shape[1]
    cur = np.zeros(d) if init is None else np.array(init, dtype=float)
    if cur.shape != (d,):
        raise BadSpec(f"init must have length {d}")
    start = cur.copy() if warm_start is None else np.array(warm_start, dtype=float)
    gram = _gram(Z, y)
    outer_cap = cfg.max_outer if max_outer is None else max_outer
    convex = spec.kind in (Penalty.L1, Penalty.ADAPTIVE_L1)
    converged = True
    steps = 0
    for steps in range(1, outer_cap + 1):
        weights = penalty_deriv(spec, np.abs(cur))
        est = weighted_lasso_cd(Z, y, weights, cfg, init=start, _gram_cache=gram)
        new = np.array(est.beta)
        change = float(np.max(np.abs(new - cur))) if d else 0.0
        converged = est.converged
        cur = new
        start = new
        if trace is not None:
            trace.append(pls_objective(Z, y, cur, spec))
        if convex or change <= cfg.tol:
            break
    else:
        converged = False
    return ModelEstimate(beta=cur, objective=pls_objective(Z, y, cur, spec),
                         iterations=steps, converged=converged)


def lambda_max(Z_sub, y) -> float:
    """Smallest common lambda at which the Lasso solution is zero."""
    Z = np.asarray(Z_sub, dtype=float)
    return float(np.max(np.abs(Z.T @ y)) / len(y)) if Z.shape[1] else 0.0


def default_lambda_grid(Z_sub, y, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Log-spaced grid from ``lambda_max`` down to ``lambda_min_ratio * lambda_max``."""
    if cfg.lambda_grid is not None:
        return np.array(cfg.lambda_grid)
    lmax = lambda_max(Z_sub, y)
    if lmax <= 0:
        return np.array([1.0])
    return np.geomspace(lmax, lmax * cfg.lambda_min_ratio, cfg.n_lambda)


def lla_init(Z_sub, y) -> np.ndarray:
    """Linearization point: OLS when ``d <= [n/log n]``, zero otherwise."""
    n, d = Z_sub.shape
    if d <= floor_n_over_log_n(n):
        try:
            return ols_fit(Z_sub, y)
        except RankDeficient:
            pass
    return np.zeros(d)


def bic(rss: float, df: int, n: int, y_ss: float = 0.0) -> float:
    """``n log(RSS/n) + df log n``; RSS is floored at ``1e-12 * ||y||^2`` to keep exact fits finite."""
    floor = max(1e-12 * y_ss, 1e-300)
    return n * math.log(max(rss, floor) / n) + df * math.log(n)


@dataclass(frozen=True)
class PathFit:
    """One fitted point on a lambda path."""

    lam: float
    estimate: ModelEstimate
    rss: float
    bic: float


_KIND_CODE = {Penalty.L1: _cd.L1, Penalty.SCAD: _cd.SCAD, Penalty.MCP: _cd.MCP,
              Penalty.ADAPTIVE_L1: _cd.ADAPTIVE}


def fit_path(Z_sub, y, family: PenaltySpec, cfg: SolverConfig = SolverConfig(),
             init=None) -> list:
    """Fit ``family`` at every lambda of the grid, largest first, with warm starts.

    Produces the same estimates as calling :func:`lla_fit` once per lambda
    with the previous solution as ``warm_start``, in a single compiled loop.
    """
    Z = np.ascontiguousarray(Z_sub, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, d = Z.shape
    grid = default_lambda_grid(Z, y, cfg)
    if init is None and family.kind in (Penalty.SCAD, Penalty.MCP):
        init = lla_init(Z, y)
    init = np.zeros(d) if init is None else np.asarray(init, dtype=float)
    if family.kind is Penalty.ADAPTIVE_L1:
        unit = _adaptive_weights(family.with_lambda(1.0))
    else:
        unit = np.zeros(d)
    G, c = _gram(Z, y)
    betas, outer, ok = _cd.lla_path(G, c, np.asarray(grid, dtype=float), init,
                                    _KIND_CODE[family.kind], float(family.a), unit,
                                    int(cfg.max_outer), int(cfg.max_inner), float(cfg.tol))
    y_ss = float(y @ y)
    resid = y[:, None] - Z @ betas.T
    rss = np.einsum("ij,ij->j", resid, resid)
    out = []
    for k, lam in enumerate(grid):
        beta = betas[k]
        spec = family.with_lambda(lam)
        est = ModelEstimate(beta=beta, objective=pls_objective(Z, y, beta, spec),
                            iterations=int(outer[k]), converged=bool(ok[k]))
        out.append(PathFit(float(lam), est, float(rss[k]), bic(float(rss[k]), est.size, n, y_ss)))
    return out


def bic_select(Z_sub, y, family: PenaltySpec = PenaltySpec(), cfg: SolverConfig = SolverConfig(),
               init=None):
    """Tune lambda by BIC along a descending grid.

    Returns ``(best_lambda, estimate)``. On ties the larger lambda wins.
    """
    path = fit_path(Z_sub, y, family, cfg, init=init)
    best = path[0]
    for pf in path[1:]:
        if pf.bic < best.bic:
            best = pf
    return best.lam, best.estimate


def adaptive_lasso_fit(Z_sub, y, lam: float, gamma: float, base_beta,
                       cfg: SolverConfig = SolverConfig()) -> ModelEstimate:
    """Weighted Lasso with weights ``lam / |base_beta_j|**gamma``.

    Coordinates with ``base_beta_j = 0`` (and ``gamma > 0``) are pinned at zero.
    """
    spec = PenaltySpec(Penalty.ADAPTIVE_L1, lam=lam, gamma=gamma, base_beta=base_beta)
    if spec.base_beta.shape != (np.shape(Z_sub)[1],):
        raise BadSpec("base_beta length must match the number of columns")
    return lla_fit(Z_sub, y, spec, cfg)


def soft_threshold(z, w):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - w, 0.0)
