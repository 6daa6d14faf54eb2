"""Monte Carlo checks of the distributional facts behind sure screening.

Each check returns a :class:`DistributionReport` with the sorted sample of
the statistic, the reference law it is compared against and, where that law
is a proper distribution, the Kolmogorov-Smirnov distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, stats

from .core import standardize
from .exceptions import BadSpec, SingularDraw
from .rng import as_rng
from .screening import sis_rank
from .simgen import GeneratedInstance, gen_iid_corr


@dataclass(frozen=True)
class DistributionReport:
    sample: np.ndarray
    reference: str
    params: dict
    ks_statistic: Optional[float]
    n_draws: int
    summary: dict = field(default_factory=dict)
    secondary: Optional[np.ndarray] = None
    redraws: int = 0

    def __post_init__(self):
        s = np.sort(np.asarray(self.sample, dtype=float))
        s.setflags(write=False)
        object.__setattr__(self, "sample", s)
        if self.secondary is not None:
            t = np.sort(np.asarray(self.secondary, dtype=float))
            t.setflags(write=False)
            object.__setattr__(self, "secondary", t)
        if self.ks_statistic is not None and not 0.0 <= self.ks_statistic <= 1.0:
            raise ValueError("ks_statistic must lie in [0, 1]")

    @property
    def median(self) -> float:
        return float(np.median(self.sample))


def ks_critical(n_draws: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value, ``c(alpha) / sqrt(n)``."""
    return float(stats.kstwobign.isf(alpha)) / math.sqrt(n_draws)


def _projection_diag(Z) -> float:
    z1 = Z[:, 0]
    gram = Z @ Z.T
    try:
        c = linalg.cho_factor(gram, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularDraw(str(exc)) from None
    d = np.diag(c[0])
    if d.min() <= 1e-8 * d.max():
        raise SingularDraw("ill-conditioned Gram matrix")
    return float(z1 @ linalg.cho_solve(c, z1, check_finite=False))


def projection_diag_check(n: int, p: int, n_draws: int, rng=None,
                          max_redraws: int = 1000) -> DistributionReport:
    """First diagonal entry of the projection onto the row space of an i.i.d.
    Gaussian ``n x p`` matrix, compared with Beta(n/2, (p-n)/2).

    Singular draws are redrawn; the count is reported in ``redraws``.
    """
    if not p > n >= 1:
        raise BadSpec("need p > n >= 1")
    if n_draws < 1:
        raise BadSpec("n_draws must be >= 1")
    rng = as_rng(rng)
    out = np.empty(n_draws)
    redraws = 0
    i = 0
    while i < n_draws:
        try:
            out[i] = _projection_diag(rng.standard_normal((n, p)))
        except SingularDraw:
            redraws += 1
            if redraws > max_redraws:
                raise
            continue
        i += 1
    a, b = n / 2.0, (p - n) / 2.0
    ks = stats.kstest(out, stats.beta(a, b).cdf).statistic
    return DistributionReport(sample=out, reference="beta", params={"a": a, "b": b},
                              ks_statistic=float(ks), n_draws=n_draws,
                              summary={"mean": float(out.mean()), "reference_mean": n / p},
                              redraws=redraws)


def eigen_concentration_check(n: int, p: int, n_draws: int, rng=None) -> DistributionReport:
    """Extreme singular values of ``Z / sqrt(p)`` for i.i.d. Gaussian ``n x p`` Z.

    ``sample`` holds ``sqrt(lambda_max(Z Z^T / p))`` and ``secondary`` holds
    ``sqrt(lambda_min)``; their medians approach ``1 +/- (n/p)^(1/2)``.
    """
    if n < 1 or p <= n:
        raise BadSpec("need p > n >= 1")
    rng = as_rng(rng)
    top = np.empty(n_draws)
    bottom = np.empty(n_draws)
    for i in range(n_draws):
        Z = rng.standard_normal((n, p))
        ev = linalg.eigvalsh(Z @ Z.T / p, check_finite=False)
        top[i] = math.sqrt(max(ev[-1], 0.0))
        bottom[i] = math.sqrt(max(ev[0], 0.0))
    root = math.sqrt(n / p)
    summary = {
        "median_sqrt_lmax": float(np.median(top)),
        "median_sqrt_lmin": float(np.median(bottom)),
        "limit_sqrt_lmax": 1.0 + root,
        "limit_sqrt_lmin": 1.0 - root,
    }
    return DistributionReport(sample=top, reference="limit 1 +/- sqrt(n/p)",
                              params={"gamma": p / n}, ks_statistic=None, n_draws=n_draws,
                              summary=summary, secondary=bottom)


def _abs_corr_with_first(X) -> float:
    Xc = X - X.mean(axis=0)
    Xc /= np.linalg.norm(Xc, axis=0)
    return float(np.max(np.abs(Xc[:, 1:].T @ Xc[:, 0])))


def _pairwise_max(X, rng, cap) -> float:
    p = X.shape[1]
    Xc = X - X.mean(axis=0)
    Xc /= np.linalg.norm(Xc, axis=0)
    n_pairs = p * (p - 1) // 2
    if n_pairs <= cap:
        C = np.abs(Xc.T @ Xc)
        return float(C[np.triu_indices(p, 1)].max())
    i = rng.integers(0, p, size=cap)
    j = rng.integers(0, p - 1, size=cap)
    j = np.where(j >= i, j + 1, j)
    return float(np.max(np.abs(np.einsum("ij,ij->j", Xc[:, i], Xc[:, j]))))


def max_spurious_corr(n: int, p: int, n_draws: int, rng=None, pairwise: bool = False,
                      pair_cap: int = 10**6) -> DistributionReport:
    """Maximum absolute sample correlation among independent Gaussian predictors.

    By default the maximum is over ``|corr(X_j, X_1)|``, ``j >= 2``. With
    ``pairwise`` it runs over all pairs, subsampled to ``pair_cap`` pairs
    when there are more.
    """
    if p < 2:
        raise BadSpec("need p >= 2")
    rng = as_rng(rng)
    out = np.empty(n_draws)
    for i in range(n_draws):
        X = gen_iid_corr(n, p, rng)
        out[i] = _pairwise_max(X, rng, pair_cap) if pairwise else _abs_corr_with_first(X)
    return DistributionReport(sample=out, reference="extreme value sqrt(2 log p / n)",
                              params={"n": n, "p": p, "pairwise": pairwise},
                              ks_statistic=None, n_draws=n_draws,
                              summary={"median": float(np.median(out)),
                                       "scale": math.sqrt(2 * math.log(p) / n)})


def min_model_size_to_cover(instance: GeneratedInstance) -> int:
    """Smallest SIS model size whose selection contains every true variable."""
    truth = np.asarray(instance.truth.true_model, dtype=np.intp)
    if truth.size == 0:
        raise BadSpec("true model is empty")
    ranking = sis_rank(standardize(instance.data)).ranking
    pos = np.empty_like(ranking)
    pos[ranking] = np.arange(1, ranking.size + 1)
    return int(pos[truth].max())
