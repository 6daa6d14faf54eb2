"""Screening-then-selection pipelines and the two-class rules built on them.

Every pipeline standardizes the data, screens down to a first-stage set,
optionally reduces it further, and fits a final penalized model. Estimates
are reported on the standardized scale in the original column indexing;
``PipelineOutcome.beta_raw`` gives the same coefficients in raw units.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np

from .core import Dataset, ModelEstimate, StandardizedDesign, floor_n_over_log_n, standardize
from .dantzig import DantzigConfig, dantzig_select, estimate_sigma, hard_threshold_topk
from .exceptions import BadSpec, SisError, StageError, TargetSizeUnreachable
from .penalized import Penalty, PenaltySpec, SolverConfig, bic_select, fit_path
from .screening import IsisConfig, classif_screen, isis_select, sis_scad_selector, sis_screen


class Method(str, enum.Enum):
    SIS_SCAD = "SIS_SCAD"
    SIS_DS = "SIS_DS"
    SIS_DS_SCAD = "SIS_DS_SCAD"
    SIS_DS_ADALASSO = "SIS_DS_ADALASSO"
    ISIS_SCAD = "ISIS_SCAD"
    SIS_SCAD_LD = "SIS_SCAD_LD"
    SIS_SCAD_NB = "SIS_SCAD_NB"


Size = Union[int, str]

_SIZE_RULES = {
    "n-1": lambda n: n - 1,
    "n/log n": lambda n: floor_n_over_log_n(n),
    "3n/2log n": lambda n: floor_n_over_log_n(n, 1.5),
    "2n/log n": lambda n: floor_n_over_log_n(n, 2.0),
}

_DEFAULT_D = {
    Method.SIS_SCAD: "n/log n",
    Method.SIS_DS: "n/log n",
    Method.SIS_DS_SCAD: "n-1",
    Method.SIS_DS_ADALASSO: "n-1",
    Method.ISIS_SCAD: "n/log n",
    Method.SIS_SCAD_LD: "2n/log n",
    Method.SIS_SCAD_NB: "2n/log n",
}

_TWO_STAGE = (Method.SIS_DS_SCAD, Method.SIS_DS_ADALASSO)


def resolve_size(size: Size, n: int) -> int:
    """An explicit integer or one of the rules ``n-1``, ``n/log n``, ``3n/2log n``, ``2n/log n``."""
    if isinstance(size, (int, np.integer)) and not isinstance(size, bool):
        return int(size)
    try:
        return _SIZE_RULES[str(size).strip()](n)
    except KeyError:
        raise BadSpec(f"unknown size rule {size!r}; use an integer or one of "
                      f"{sorted(_SIZE_RULES)}") from None


@dataclass(frozen=True)
class PipelineSpec:
    """A named method with its stage sizes and per-stage settings.

    ``d`` is the first-stage size (for ISIS the size of the union it
    collects) and ``d_prime`` the size kept after the Dantzig stage. Sizes
    may be integers or rule strings resolved against n at run time.
    """

    name: Method
    d: Optional[Size] = None
    d_prime: Optional[Size] = None
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    dantzig: DantzigConfig = field(default_factory=DantzigConfig)
    gamma: float = 1.0
    inner_d: Optional[Size] = None
    max_steps: int = 50
    isis_project: bool = True
    target_size: Optional[int] = None
    allow_d_ge_n: bool = False
    tag: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "name", Method(self.name))
        if self.d is None:
            object.__setattr__(self, "d", _DEFAULT_D[self.name])
        if self.name in _TWO_STAGE and self.d_prime is None:
            object.__setattr__(self, "d_prime", "n/log n")
        if self.name in (Method.SIS_SCAD_LD, Method.SIS_SCAD_NB) and self.target_size is None:
            raise BadSpec(f"{self.name.value} needs target_size")
        if self.name is Method.ISIS_SCAD and self.inner_d is None:
            object.__setattr__(self, "inner_d", "n/log n")

    @property
    def label(self) -> str:
        return self.tag or self.name.value

    def sizes(self, n: int, p: int) -> tuple:
        """Resolved ``(d, d_prime)``; validates them against ``n`` and ``p``."""
        d = resolve_size(self.d, n)
        dp = None if self.d_prime is None else resolve_size(self.d_prime, n)
        d = min(d, p)
        if d < 1:
            raise BadSpec(f"first-stage size {d} < 1")
        if d >= n and not self.allow_d_ge_n:
            raise BadSpec(f"first-stage size {d} must be below n={n}")
        if dp is not None and not 1 <= dp < d:
            raise BadSpec(f"second-stage size {dp} must lie in [1, {d})")
        return d, dp

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineSpec":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise BadSpec(f"unknown pipeline keys: {sorted(unknown)}")
        for key, typ in (("penalty", PenaltySpec), ("solver", SolverConfig),
                         ("dantzig", DantzigConfig)):
            if key in raw:
                sub = raw[key]
                if not isinstance(sub, dict):
                    raise BadSpec(f"{key} must be an object")
                allowed = {f.name for f in fields(typ)}
                bad = set(sub) - allowed
                if bad:
                    raise BadSpec(f"unknown {key} keys: {sorted(bad)}")
                raw[key] = typ(**sub)
        return cls(**raw)


@dataclass(frozen=True)
class PipelineOutcome:
    final_estimate: ModelEstimate
    beta_raw: np.ndarray
    stage_trace: tuple
    timing: dict
    lam: Optional[float] = None

    @property
    def first_stage(self) -> np.ndarray:
        return self.stage_trace[0][1]

    def stage(self, name: str) -> np.ndarray:
        for key, idx in self.stage_trace:
            if key == name:
                return idx
        raise KeyError(name)


def _embed(p: int, idx: np.ndarray, est: ModelEstimate) -> ModelEstimate:
    beta = np.zeros(p)
    beta[idx] = est.beta
    return ModelEstimate(beta=beta, objective=est.objective, iterations=est.iterations,
                         converged=est.converged)


class _Stages:
    """Runs named stages, timing each and tagging failures with the stage name."""

    def __init__(self, method: Method):
        self.method = method
        self.trace = []
        self.timing = {}

    def run(self, name, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except SisError as exc:
            raise StageError(self.method.value, name, exc) from exc
        self.timing[name] = time.perf_counter() - t0
        return out

    def record(self, name, idx):
        idx = np.asarray(idx, dtype=np.intp)
        if self.trace and not np.all(np.isin(idx, self.trace[-1][1])):
            raise AssertionError(f"stage {name} left the previous stage's set")
        if np.unique(idx).size != idx.size:
            raise AssertionError(f"stage {name} has duplicate indices")
        self.trace.append((name, idx))


def _dantzig_cfg(spec: PipelineSpec, sd: StandardizedDesign, sigma: Optional[float]):
    if spec.dantzig.sigma is not None:
        return spec.dantzig
    s = sigma if sigma is not None else estimate_sigma(sd.Z, sd.y_centered)
    # an exact fit estimates sigma = 0; keep the bound positive but negligible
    s = max(s, 1e-12 * max(1.0, float(np.std(sd.y_centered))))
    return DantzigConfig(lambda_d=spec.dantzig.lambda_d, sigma=s, lp_tol=spec.dantzig.lp_tol,
                         max_pivots=spec.dantzig.max_pivots)


def run_pipeline(data: Dataset, spec: PipelineSpec, sigma: Optional[float] = None) -> PipelineOutcome:
    """Run one named method end to end.

    Parameters
    ----------
    data : Dataset
    spec : PipelineSpec
    sigma : float, optional
        Known noise level for the Dantzig stage. When neither this nor
        ``spec.dantzig.sigma`` is given it is estimated from the data.

    Raises
    ------
    StageError
        Wraps any library error with the failing method and stage.
    """
    sd = standardize(data)
    n, p = sd.n, sd.p
    d, dp = spec.sizes(n, p)
    st = _Stages(spec.name)
    y = sd.y_centered
    scad = spec.penalty
    lam = None
    m = spec.name

    if m is Method.ISIS_SCAD:
        cfg = IsisConfig(d_total=d, inner_d=resolve_size(spec.inner_d, n), max_steps=spec.max_steps)
        selector = sis_scad_selector(cfg.inner_d, spec.penalty, spec.solver)
        res = st.run("isis", isis_select, sd, cfg, selector, spec.isis_project)
        first = res.selected
    elif m in (Method.SIS_SCAD_LD, Method.SIS_SCAD_NB):
        first = st.run("classif_screen", classif_screen, sd, d).selected
    else:
        first = st.run("sis", sis_screen, sd, d).selected
    st.record(_first_stage_name(m), first)

    if m in (Method.SIS_SCAD, Method.ISIS_SCAD):
        lam, est = st.run("scad", bic_select, sd.Z[:, first], y, scad, spec.solver)
        final = _embed(p, first, est)
    elif m is Method.SIS_DS:
        cfg = _dantzig_cfg(spec, sd, sigma)
        est = st.run("dantzig", dantzig_select, sd.Z[:, first], y, cfg)
        final = _embed(p, first, est)
    elif m in _TWO_STAGE:
        cfg = _dantzig_cfg(spec, sd, sigma)
        ds = st.run("dantzig", dantzig_select, sd.Z[:, first], y, cfg)
        local = hard_threshold_topk(ds, dp)
        second = first[local]
        st.record("threshold", second)
        if m is Method.SIS_DS_SCAD:
            lam, est = st.run("scad", bic_select, sd.Z[:, second], y, scad, spec.solver)
        else:
            family = PenaltySpec(Penalty.ADAPTIVE_L1, gamma=spec.gamma, base_beta=ds.beta[local])
            lam, est = st.run("adalasso", bic_select, sd.Z[:, second], y, family, spec.solver)
        final = _embed(p, second, est)
    else:
        lam, est = st.run("scad", target_size_fit, sd.Z[:, first], y, spec.target_size, scad,
                          spec.solver)
        final = _embed(p, first, est)

    if final.size:
        st.record("final", final.support)
    return PipelineOutcome(final_estimate=final, beta_raw=sd.to_raw_coef(final.beta),
                           stage_trace=tuple(st.trace), timing=dict(st.timing), lam=lam)


def _first_stage_name(m: Method) -> str:
    if m is Method.ISIS_SCAD:
        return "isis"
    if m in (Method.SIS_SCAD_LD, Method.SIS_SCAD_NB):
        return "classif_screen"
    return "sis"


def target_size_fit(Z_sub, y, target_size: int, family: PenaltySpec = PenaltySpec(),
                    cfg: SolverConfig = SolverConfig()):
    """Walk the lambda path and return the fit whose support size is closest to
    ``target_size`` from below (largest lambda among equals).

    Raises
    ------
    TargetSizeUnreachable
        If every lambda on the grid gives a support larger than the target.
    """
    if target_size < 0:
        raise TargetSizeUnreachable("target size must be >= 0")
    best = None
    for pf in fit_path(Z_sub, y, family, cfg):
        size = pf.estimate.size
        if size <= target_size and (best is None or size > best.estimate.size):
            best = pf
    if best is None:
        raise TargetSizeUnreachable(f"no lambda on the grid gives at most {target_size} variables")
    return best.lam, best.estimate


# classification ------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    train_errors: int
    test_errors: int
    selected_features: np.ndarray
    lam: float


def _ld_rule(Zs, labels, beta):
    mplus = Zs[labels > 0].mean(axis=0)
    mminus = Zs[labels < 0].mean(axis=0)
    intercept = -0.5 * float((mplus + mminus) @ beta)
    return lambda Zq: np.where(Zq @ beta + intercept >= 0, 1.0, -1.0)


def _nb_rule(Zs, labels):
    params = []
    for cls in (1.0, -1.0):
        block = Zs[labels == cls]
        mu = block.mean(axis=0)
        var = block.var(axis=0, ddof=1) if block.shape[0] > 1 else np.ones(Zs.shape[1])
        var = np.maximum(var, 1e-12)
        prior = block.shape[0] / Zs.shape[0]
        params.append((mu, var, math.log(prior)))

    def predict(Zq):
        scores = []
        for mu, var, lp in params:
            ll = -0.5 * np.sum(np.log(2 * np.pi * var) + (Zq - mu) ** 2 / var, axis=1)
            scores.append(ll + lp)
        return np.where(scores[0] >= scores[1], 1.0, -1.0)

    return predict


def classify(train: Dataset, test: Dataset, spec: PipelineSpec,
             target_size: Optional[int] = None) -> ClassificationResult:
    """SIS-SCAD feature selection followed by a linear (LD) or naive Bayes (NB) rule.

    Labels are ``+1``/``-1``. The two-class screener keeps ``spec.d``
    features (``[2n/log n]`` by default); SCAD is then tuned to the support
    size closest to ``target_size`` from below. Test features are
    standardized with the training statistics.
    """
    if spec.name not in (Method.SIS_SCAD_LD, Method.SIS_SCAD_NB):
        raise BadSpec("classify needs SIS_SCAD_LD or SIS_SCAD_NB")
    if target_size is not None and target_size != spec.target_size:
        spec = replace(spec, target_size=target_size)
    if train.p != test.p:
        raise BadSpec("train and test must have the same predictors")
    out = run_pipeline(train, spec)
    sd = standardize(train)
    labels = np.asarray(train.y)
    sel = out.final_estimate.support
    Ztr = sd.Z[:, sel]
    Zte = ((test.X - sd.col_means) / sd.col_scales)[:, sel]
    if spec.name is Method.SIS_SCAD_LD:
        rule = _ld_rule(Ztr, labels, out.final_estimate.beta[sel])
    else:
        rule = _nb_rule(Ztr, labels)
    train_err = int(np.sum(rule(Ztr) != labels))
    test_err = int(np.sum(rule(Zte) != np.asarray(test.y)))
    return ClassificationResult(train_err, test_err, sel, out.lam)
