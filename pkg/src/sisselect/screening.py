"""Marginal screening: SIS, iterated ridge screening (ITRRS), ISIS and the two-class screener.

All rankings order ``|omega|`` non-increasingly, break ties by ascending
column index and put constant columns last.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from .core import ModelEstimate, StandardizedDesign, floor_n_over_log_n, ols_fit
from .exceptions import BadSize, BadSpec, OneClassOnly, SingularSystem
from .penalized import PenaltySpec, SolverConfig, bic_select


class Ridge(enum.Enum):
    """Sentinel for the ``lambda -> infinity`` limit of the ridge screener."""

    INF = "inf"


RIDGE_INF = Ridge.INF


@dataclass(frozen=True)
class ScreeningResult:
    omega: np.ndarray
    ranking: np.ndarray
    selected: np.ndarray
    d: int
    steps: tuple = ()

    def __post_init__(self):
        for name, dt in (("omega", float), ("ranking", np.intp), ("selected", np.intp)):
            arr = np.array(getattr(self, name), dtype=dt)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def rank_by_magnitude(values, constant=None) -> np.ndarray:
    """Permutation sorting ``|values|`` descending; ties by index, constant columns last."""
    values = np.asarray(values, dtype=float)
    idx = np.arange(values.size)
    last = np.zeros(values.size, dtype=bool) if constant is None else np.asarray(constant, bool)
    # lexsort uses the last key as primary
    return np.lexsort((idx, -np.abs(values), last)).astype(np.intp)


def _result(omega, d, constant=None, steps=()) -> ScreeningResult:
    ranking = rank_by_magnitude(omega, constant)
    return ScreeningResult(omega=omega, ranking=ranking, selected=np.sort(ranking[:d]), d=d,
                           steps=steps)


def sis_rank(sd: StandardizedDesign) -> ScreeningResult:
    """Componentwise regression ``omega = Z^T y`` and the full ranking (``d = p``)."""
    omega = sd.Z.T @ sd.y_centered
    return _result(omega, sd.p, sd.constant)


def sis_screen(sd: StandardizedDesign, d: int) -> ScreeningResult:
    """Keep the ``d`` columns with the largest ``|Z_j^T y|``."""
    if not 1 <= d <= sd.p:
        raise BadSize(f"d={d} outside [1, {sd.p}]")
    res = sis_rank(sd)
    return ScreeningResult(omega=res.omega, ranking=res.ranking,
                           selected=np.sort(res.ranking[:d]), d=d)


@dataclass(frozen=True)
class ItrrsConfig:
    lam: Union[float, Ridge]
    delta: float
    d_final: int

    def __post_init__(self):
        if not isinstance(self.lam, Ridge) and not (self.lam >= 0 and math.isfinite(self.lam)):
            raise BadSpec("ridge lambda must be finite and non-negative, or RIDGE_INF")
        if not 0 < self.delta < 1:
            raise BadSpec("delta must lie in (0, 1)")
        if self.d_final < 1:
            raise BadSpec("d_final must be >= 1")


def ridge_omega(Z: np.ndarray, y: np.ndarray, lam: Union[float, Ridge]) -> np.ndarray:
    """``(Z^T Z + lam I)^{-1} Z^T y``; the dual ``n x n`` system is used when ``p > n``."""
    if lam is RIDGE_INF:
        return Z.T @ y
    n, p = Z.shape
    if lam == 0 and p >= n:
        raise SingularSystem("lambda = 0 needs fewer columns than rows")
    try:
        if p > n:
            K = Z @ Z.T
            K[np.diag_indices_from(K)] += lam
            return Z.T @ linalg.solve(K, y, assume_a="pos")
        G = Z.T @ Z
        G[np.diag_indices_from(G)] += lam
        return linalg.solve(G, Z.T @ y, assume_a="pos")
    except (linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularSystem(str(exc)) from None


def itrrs_step(sd_sub: StandardizedDesign, lam: Union[float, Ridge], delta: float) -> ScreeningResult:
    """One ridge screening step: keep the top ``[delta * p_cur]`` columns by ``|omega^lambda|``.

    Indices in the result are local to ``sd_sub``.
    """
    p_cur = sd_sub.p
    keep = int(math.floor(delta * p_cur))
    if p_cur < 2 or keep < 1:
        raise BadSize(f"cannot retain [{delta} * {p_cur}] = {keep} columns")
    omega = ridge_omega(sd_sub.Z, sd_sub.y_centered, lam)
    if lam is not RIDGE_INF and p_cur <= sd_sub.n:
        cond = np.linalg.cond(sd_sub.Z.T @ sd_sub.Z + lam * np.eye(p_cur))
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularSystem(f"ridge system condition number {cond:.3g}")
    return _result(omega, keep, sd_sub.constant)


def itrrs_screen(sd: StandardizedDesign, cfg: ItrrsConfig) -> ScreeningResult:
    """Iterated ridge screening down to at most ``cfg.d_final`` columns.

    Each step keeps ``[delta * p_cur]`` columns of the previous survivors;
    steps repeat until the survivor count is at most ``d_final``. The returned
    ``ranking`` lists the final survivors first, then earlier casualties with
    later-eliminated columns ahead of earlier ones. ``steps`` holds the
    surviving global indices after every step.
    """
    if cfg.d_final >= sd.n:
        raise BadSpec(f"d_final={cfg.d_final} must be below n={sd.n}")
    if sd.p <= cfg.d_final:
        raise BadSize(f"p={sd.p} is already at most d_final={cfg.d_final}")
    current = np.arange(sd.p)
    omega = np.zeros(sd.p)
    eliminated = []  # per step, dropped global indices in within-step rank order
    steps = []
    while current.size > cfg.d_final:
        res = itrrs_step(sd.columns(current), cfg.lam, cfg.delta)
        omega[current] = res.omega
        order = current[res.ranking]
        eliminated.append(order[res.d:])
        current = order[: res.d]
        steps.append(np.sort(current))
    ranking = np.concatenate([current] + eliminated[::-1])
    return ScreeningResult(omega=omega, ranking=ranking, selected=np.sort(current),
                           d=int(current.size), steps=tuple(steps))


# ISIS -----------------------------------------------------------------------------------

InnerSelector = Callable[[StandardizedDesign], Union[ModelEstimate, np.ndarray]]


@dataclass(frozen=True)
class IsisConfig:
    d_total: int
    inner_d: int
    max_steps: int = 50

    def __post_init__(self):
        if not 1 <= self.inner_d:
            raise BadSpec("inner_d must be >= 1")
        if self.d_total < 1:
            raise BadSpec("d_total must be >= 1")
        if self.max_steps < 1:
            raise BadSpec("max_steps must be >= 1")

    @classmethod
    def for_n(cls, n: int, d_total: Optional[int] = None, max_steps: int = 50) -> "IsisConfig":
        return cls(d_total=n - 1 if d_total is None else d_total,
                   inner_d=floor_n_over_log_n(n), max_steps=max_steps)


@dataclass(frozen=True)
class IsisResult:
    selected: np.ndarray
    groups: tuple
    residual_norms: tuple = field(default=())

    @property
    def n_steps(self) -> int:
        return len(self.groups)


def sis_scad_selector(inner_d: int, scad=None, cfg=None) -> InnerSelector:
    """Inner ISIS step: SIS to ``inner_d`` columns, then BIC-tuned SCAD.

    Returns a ``ModelEstimate`` over all columns of the design it is given.
    If BIC prefers the empty model, the top screened column is kept alone
    with its OLS coefficient, so every step recruits something.
    """
    scad = scad or PenaltySpec()
    cfg = cfg or SolverConfig()

    def select(sd_sub: StandardizedDesign) -> ModelEstimate:
        d = min(inner_d, sd_sub.p, sd_sub.n - 1)
        screen = sis_screen(sd_sub, d)
        keep = screen.selected
        _, est = bic_select(sd_sub.Z[:, keep], sd_sub.y_centered, scad, cfg)
        beta = np.zeros(sd_sub.p)
        beta[keep] = est.beta
        top = screen.ranking[0]
        if not np.any(beta) and screen.omega[top] != 0:
            beta[top] = ols_fit(sd_sub.Z[:, [top]], sd_sub.y_centered)[0]
        return ModelEstimate(beta=beta, objective=est.objective, iterations=est.iterations,
                             converged=est.converged)

    return select


def isis_select(sd: StandardizedDesign, cfg: IsisConfig,
                inner_selector: Optional[InnerSelector] = None,
                project: bool = True) -> IsisResult:
    """Iterative SIS: alternate inner selection with refitting on residuals.

    Parameters
    ----------
    sd : StandardizedDesign
    cfg : IsisConfig
        ``d_total`` must be below ``n`` so the residual OLS stays identifiable.
    inner_selector : callable, optional
        Called with a design restricted to the not-yet-selected columns whose
        ``y_centered`` is the current residual. Returns either a
        ``ModelEstimate`` over those columns (its support is the step group
        and its coefficients rank members when the group overflows) or an
        array of local indices. Defaults to SIS-SCAD with ``cfg.inner_d``.

    Returns
    -------
    IsisResult
        The union of groups (global indices, sorted) and the per-step groups.
    """
    if cfg.d_total >= sd.n:
        raise BadSpec(f"d_total={cfg.d_total} must be below n={sd.n}")
    selector = inner_selector or sis_scad_selector(cfg.inner_d)
    y = sd.y_centered
    y_norm = float(np.linalg.norm(y))
    chosen = np.zeros(0, dtype=np.intp)
    groups = []
    norms = []
    resid = y
    Q = None
    for _ in range(cfg.max_steps):
        remaining = np.setdiff1d(np.arange(sd.p), chosen, assume_unique=True)
        if remaining.size == 0:
            break
        sub = sd.columns(remaining, response=resid)
        if project and chosen.size:
            sub = _project_out(sub, Q)
        out = selector(sub)
        if isinstance(out, ModelEstimate):
            local = np.asarray(out.support, dtype=np.intp)
            coef = np.asarray(out.beta)[local]
        else:
            local = np.unique(np.asarray(out, dtype=np.intp))
            coef = None
        if local.size == 0:
            break
        budget = cfg.d_total - chosen.size
        if local.size > budget:
            if coef is None:
                coef = ols_fit(sd.Z[:, remaining[local]], resid)
            order = np.lexsort((local, -np.abs(coef)))
            local = np.sort(local[order[:budget]])
        group = remaining[local]
        groups.append(group)
        chosen = np.sort(np.concatenate([chosen, group]))
        Zc = sd.Z[:, chosen]
        resid = y - Zc @ ols_fit(Zc, y)
        Q = np.linalg.qr(Zc)[0]
        norms.append(float(np.linalg.norm(resid)))
        if chosen.size >= cfg.d_total or norms[-1] <= 1e-10 * y_norm:
            break
    return IsisResult(selected=chosen, groups=tuple(groups), residual_norms=tuple(norms))


def _project_out(sub: StandardizedDesign, Q: np.ndarray) -> StandardizedDesign:
    """Orthogonalize columns against ``span(Q)`` and rescale them to unit sample sd."""
    Zp = sub.Z - Q @ (Q.T @ sub.Z)
    sd = np.sqrt(np.einsum("ij,ij->j", Zp, Zp) / (Zp.shape[0] - 1))
    flat = sd <= 1e-10
    Zp = Zp / np.where(flat, 1.0, sd)
    Zp[:, flat] = 0.0
    return StandardizedDesign(Z=Zp, col_means=sub.col_means, col_scales=sub.col_scales,
                              y_centered=sub.y_centered, constant=sub.constant | flat,
                              y_mean=sub.y_mean)


def classif_screen(sd: StandardizedDesign, d: int) -> ScreeningResult:
    """Two-class screener ``omega = sum_{y=+1} z_i - sum_{y=-1} z_i``.

    ``sd.y_centered`` is ignored; labels are read from its sign pattern via
    :func:`class_labels`, so pass a design built from a Dataset with
    ``y`` in ``{+1, -1}``.
    """
    labels = class_labels(sd)
    if not 1 <= d <= sd.p:
        raise BadSize(f"d={d} outside [1, {sd.p}]")
    omega = sd.Z[labels > 0].sum(axis=0) - sd.Z[labels < 0].sum(axis=0)
    return _result(omega, d, sd.constant)


def class_labels(sd: StandardizedDesign) -> np.ndarray:
    """Recover ``{+1, -1}`` labels from a standardized two-class design."""
    y = np.asarray(sd.y_centered) + sd.y_mean
    labels = np.rint(y)
    if not np.all(np.isin(labels, (-1.0, 1.0))) or not np.allclose(labels, y, atol=1e-8):
        raise BadSpec("labels must be +1 or -1")
    if np.all(labels > 0) or np.all(labels < 0):
        raise OneClassOnly("both classes must be present")
    return labels
