"""Seeded generators for the synthetic designs.

Designs
-------
SIM1      i.i.d. N(0, 1) predictors, sparse random coefficients.
SIM2      a correlated block drawn from N(0, A) with a prescribed condition
          number, plus predictors linked to it through ``r``.
EX1..EX3  equicorrelated Gaussian predictors with fixed coefficients; EX2
          adds a variable uncorrelated with the response, EX3 a weak
          independent one on top.
TWOCLASS  Gaussian classes separated by a mean shift on chosen features.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, GroundTruth, write_dataset_csv
from .exceptions import BadSpec
from .rng import as_rng


class Design(str, enum.Enum):
    SIM1 = "SIM1"
    SIM2 = "SIM2"
    EX1 = "EX1"
    EX2 = "EX2"
    EX3 = "EX3"
    TWOCLASS = "TWOCLASS"
    IID_CORR = "IID_CORR"


_EX_SIZES = {Design.EX1: 3, Design.EX2: 4, Design.EX3: 5}


@dataclass(frozen=True)
class SimulationSpec:
    design: Design
    n: int
    p: int
    s: int = 0
    sigma: float = 1.0
    a_coef: Optional[float] = None
    rho: float = 0.0
    r: Optional[float] = None
    cond: Optional[float] = None
    gap: float = 0.0
    n1: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "design", Design(self.design))
        design = self.design
        if design in _EX_SIZES and self.s == 0:
            object.__setattr__(self, "s", _EX_SIZES[design])
        if self.n < 2:
            raise BadSpec("n must be >= 2")
        if not self.p >= self.s >= 0:
            raise BadSpec("need p >= s >= 0")
        if self.sigma < 0:
            raise BadSpec("sigma must be >= 0")
        if not 0 <= self.rho < 1:
            raise BadSpec("rho must lie in [0, 1)")
        if design in _EX_SIZES and self.s != _EX_SIZES[design]:
            raise BadSpec(f"{design.value} has exactly {_EX_SIZES[design]} true variables")
        if design in (Design.EX2, Design.EX3) and self.rho == 0:
            raise BadSpec(f"{design.value} needs rho > 0")
        if design in (Design.SIM1, Design.SIM2) and self.s < 1:
            raise BadSpec("s must be >= 1")
        if design is Design.SIM2 and not 2 * self.s < self.p:
            raise BadSpec("SIM2 needs 2s < p")
        if not 0 <= self.seed < 2**64:
            raise BadSpec("seed must fit in 64 bits")

    @property
    def coef_floor(self) -> float:
        """``a_coef`` or the default ``4 log n / sqrt(n)``."""
        return default_a_coef(self.n) if self.a_coef is None else float(self.a_coef)

    @property
    def linkage(self) -> float:
        """SIM2 ``r`` or the default ``1 - 4 log n / p``."""
        return 1.0 - 4.0 * math.log(self.n) / self.p if self.r is None else float(self.r)

    @property
    def condition(self) -> float:
        """SIM2 condition number or the default ``sqrt(n) / log n``."""
        return math.sqrt(self.n) / math.log(self.n) if self.cond is None else float(self.cond)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["design"] = self.design.value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulationSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise BadSpec(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class GeneratedInstance:
    data: Dataset
    truth: GroundTruth
    sigma_used: float
    design_echo: SimulationSpec


def default_a_coef(n: int, factor: float = 4.0) -> float:
    return factor * math.log(n) / math.sqrt(n)


def gen_coefficients(p: int, s: int, a_coef: float, rng) -> np.ndarray:
    """``s`` nonzeros ``(-1)^u (a + |z|)`` at uniform positions; ``u ~ Bernoulli(0.4)``."""
    rng = as_rng(rng)
    if s < 1 or s > p:
        raise BadSpec(f"need 1 <= s <= p, got s={s}, p={p}")
    beta = np.zeros(p)
    pos = rng.choice(p, size=s, replace=False)
    u = rng.random(s) < 0.4
    z = rng.standard_normal(s)
    beta[pos] = np.where(u, -1.0, 1.0) * (a_coef + np.abs(z))
    return beta


def _finish(spec, X, beta, rng) -> GeneratedInstance:
    noise = spec.sigma * rng.standard_normal(spec.n) if spec.sigma > 0 else np.zeros(spec.n)
    y = X @ beta + noise
    return GeneratedInstance(
        data=Dataset(y=y, X=X),
        truth=GroundTruth(beta_true=beta, sigma=spec.sigma),
        sigma_used=spec.sigma,
        design_echo=spec,
    )


def gen_sim1(spec: SimulationSpec, rng) -> GeneratedInstance:
    rng = as_rng(rng)
    beta = gen_coefficients(spec.p, spec.s, spec.coef_floor, rng)
    X = rng.standard_normal((spec.n, spec.p))
    return _finish(spec, X, beta, rng)


def random_spd(s: int, cond: float, rng) -> np.ndarray:
    """Random SPD matrix: Haar orthogonal basis, eigenvalues log-spaced on ``[1, cond]``."""
    rng = as_rng(rng)
    Q, R = np.linalg.qr(rng.standard_normal((s, s)))
    Q = Q * np.sign(np.diag(R))
    eig = np.geomspace(1.0, cond, s) if s > 1 else np.ones(1)
    A = (Q * eig) @ Q.T
    return (A + A.T) / 2


def gen_sim2(spec: SimulationSpec, rng) -> GeneratedInstance:
    rng = as_rng(rng)
    n, p, s, r = spec.n, spec.p, spec.s, spec.linkage
    beta = gen_coefficients(p, s, spec.coef_floor, rng)
    # the nonzero positions are drawn over all p columns, as in SIM1
    A = random_spd(s, spec.condition, rng)
    L = np.linalg.cholesky(A)
    X = np.empty((n, p))
    X[:, :s] = rng.standard_normal((n, s)) @ L.T
    Zr = rng.standard_normal((n, p - s))
    X[:, s:2 * s] = Zr[:, :s] + r * X[:, :s]
    X[:, 2 * s:] = Zr[:, s:] + (1.0 - r) * X[:, [0]]
    return _finish(spec, X, beta, rng)


def example_coefficients(spec: SimulationSpec) -> np.ndarray:
    beta = np.zeros(spec.p)
    beta[:3] = 5.0
    if spec.design in (Design.EX2, Design.EX3):
        beta[3] = -15.0 * math.sqrt(spec.rho)
    if spec.design is Design.EX3:
        beta[4] = 1.0
    return beta


def example_covariance(spec: SimulationSpec) -> np.ndarray:
    """Population covariance of the predictors for EX1-EX3.

    Unit variances; ``rho`` between ordinary predictors; ``sqrt(rho)``
    between X4 and every ordinary predictor (EX2, EX3); X5 independent of
    everything (EX3).
    """
    p, rho = spec.p, spec.rho
    S = np.full((p, p), rho)
    if spec.design in (Design.EX2, Design.EX3):
        S[3, :] = S[:, 3] = math.sqrt(rho)
    if spec.design is Design.EX3:
        S[4, :] = S[:, 4] = 0.0
    np.fill_diagonal(S, 1.0)
    return S


def example_response_cov(spec: SimulationSpec) -> np.ndarray:
    """Population ``cov(X_j, Y)`` for every predictor, from the closed-form covariance."""
    return example_covariance(spec) @ example_coefficients(spec)


def gen_example(spec: SimulationSpec, rng) -> GeneratedInstance:
    """EX1-EX3 through a one-factor representation.

    Ordinary predictors are ``sqrt(rho) F + sqrt(1 - rho) e_j``; X4 is the
    factor ``F`` itself, so it has correlation ``sqrt(rho)`` with each of
    them; X5 (EX3) is an independent standard normal.
    """
    rng = as_rng(rng)
    if spec.design not in _EX_SIZES:
        raise BadSpec(f"not an example design: {spec.design}")
    n, p, rho = spec.n, spec.p, spec.rho
    F = rng.standard_normal((n, 1))
    X = math.sqrt(rho) * F + math.sqrt(1.0 - rho) * rng.standard_normal((n, p))
    if spec.design in (Design.EX2, Design.EX3):
        X[:, 3] = F[:, 0]
        if abs(example_response_cov(spec)[3]) > 1e-12:
            raise AssertionError("cov(X4, Y) must vanish")
    if spec.design is Design.EX3:
        X[:, 4] = rng.standard_normal(n)
    return _finish(spec, X, example_coefficients(spec), rng)


def gen_iid_corr(n: int, p: int, rng) -> np.ndarray:
    """Plain ``n x p`` matrix of i.i.d. N(0, 1) entries."""
    if n < 2 or p < 2:
        raise BadSpec("need n, p >= 2")
    return as_rng(rng).standard_normal((n, p))


def gen_twoclass(n1: int, n2: int, p: int, informative, gap: float, rng) -> Dataset:
    """Class +1 (first ``n1`` rows) ~ N(gap on ``informative``, I); class -1 ~ N(0, I)."""
    if n1 < 2 or n2 < 2:
        raise BadSpec("each class needs at least two samples")
    rng = as_rng(rng)
    X = rng.standard_normal((n1 + n2, p))
    X[np.ix_(np.arange(n1), np.asarray(informative, dtype=np.intp))] += gap
    y = np.concatenate([np.ones(n1), -np.ones(n2)])
    return Dataset(y=y, X=X)


def generate(spec: SimulationSpec, rng=None) -> GeneratedInstance:
    """Draw one instance of ``spec``; ``rng`` defaults to the stream of ``spec.seed``."""
    rng = as_rng(spec.seed if rng is None else rng)
    if spec.design is Design.SIM1:
        return gen_sim1(spec, rng)
    if spec.design is Design.SIM2:
        return gen_sim2(spec, rng)
    if spec.design in _EX_SIZES:
        return gen_example(spec, rng)
    if spec.design is Design.TWOCLASS:
        n1 = spec.n // 2 if spec.n1 is None else spec.n1
        informative = np.arange(spec.s)
        data = gen_twoclass(n1, spec.n - n1, spec.p, informative, spec.gap, rng)
        beta = np.zeros(spec.p)
        beta[informative] = spec.gap
        return GeneratedInstance(data, GroundTruth(beta, 0.0), 0.0, spec)
    raise BadSpec(f"{spec.design.value} has no response; use gen_iid_corr")


def write_instance(inst: GeneratedInstance, data_path, truth_path) -> None:
    """Dataset CSV plus a sidecar ``index,beta_true`` CSV (1-based indices)."""
    write_dataset_csv(inst.data, data_path)
    with Path(truth_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "beta_true"])
        for j, b in enumerate(inst.truth.beta_true, start=1):
            w.writerow([j, repr(float(b))])


def with_seed(spec: SimulationSpec, seed: int) -> SimulationSpec:
    return replace(spec, seed=seed)
