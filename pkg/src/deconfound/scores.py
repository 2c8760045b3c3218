"""Parent-set scores: Gaussian BIC and additive-GP marginal likelihoods.

Five score kinds share one interface through :class:`Scorer`:

``vanilla_bic``   BIC on the sample covariance of ``X``.
``pcss_bic``      BIC on the covariance of ``X - S_hat``.
``cam``           GP marginal likelihood of ``x_j`` given its parents.
``cam_obs``       as ``cam`` plus one kernel block over the true confounders ``H``.
``decamfound``    GP marginal likelihood of ``x_j - s_hat_j`` given the parents
                  and one kernel block over ``S_hat`` restricted to the parents.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .gp import GpHyperParams, ScoreValue, fit_hypers
from .graph import Dag
from .pcss import PcssResult

__all__ = [
    "ScoreKind",
    "CovarianceEstimate",
    "ScoreValue",
    "SingularConditioningError",
    "bic_score",
    "covariance_for",
    "gp_inputs",
    "gp_parent_score",
    "Scorer",
    "score_dag",
    "posterior_over_candidates",
    "log_odds",
]


class SingularConditioningError(ValueError):
    pass


class ScoreKind(str, enum.Enum):
    VANILLA_BIC = "vanilla_bic"
    PCSS_BIC = "pcss_bic"
    CAM = "cam"
    CAM_OBS = "cam_obs"
    DECAMFOUND = "decamfound"

    @property
    def is_gp(self) -> bool:
        return self in (ScoreKind.CAM, ScoreKind.CAM_OBS, ScoreKind.DECAMFOUND)

    @property
    def needs_s_hat(self) -> bool:
        return self in (ScoreKind.PCSS_BIC, ScoreKind.DECAMFOUND)


@dataclass(frozen=True)
class CovarianceEstimate:
    Sigma: np.ndarray
    source: str  # "sample_cov" | "pcss_residual_cov"


def _centered_cov(Z: np.ndarray) -> np.ndarray:
    Zc = Z - Z.mean(axis=0)
    S = Zc.T @ Zc / Z.shape[0]
    return (S + S.T) / 2.0


def covariance_for(kind, X, S_hat=None) -> CovarianceEstimate:
    kind = ScoreKind(kind)
    X = np.asarray(X, dtype=float)
    if kind is ScoreKind.VANILLA_BIC:
        return CovarianceEstimate(_centered_cov(X), "sample_cov")
    if kind is ScoreKind.PCSS_BIC:
        if S_hat is None:
            raise ValueError("pcss_bic needs S_hat")
        S = S_hat.S_hat if isinstance(S_hat, PcssResult) else np.asarray(S_hat, dtype=float)
        return CovarianceEstimate(_centered_cov(X - S), "pcss_residual_cov")
    raise ValueError(f"{kind.value} is not a BIC score")


def bic_score(j: int, parents: Iterable[int], Sigma, N: int) -> ScoreValue:
    """Gaussian BIC of node ``j`` given ``parents``.

    ``-(N/2) log(2 pi s2) - N/2 - 0.5 log(N) (|P| + 2)`` where ``s2`` is the
    Schur-complement conditional variance of ``j`` given ``P``.
    """
    if isinstance(Sigma, CovarianceEstimate):
        Sigma = Sigma.Sigma
    Sigma = np.asarray(Sigma, dtype=float)
    P = sorted(int(i) for i in parents)
    if j in P:
        raise ValueError("target cannot be its own parent")
    ridge = 0.0
    if P:
        S_pp = Sigma[np.ix_(P, P)]
        s_pj = Sigma[P, j]
        if np.linalg.cond(S_pp) > 1e10:
            ridge = 1e-8 * np.trace(S_pp) / len(P)
            S_pp = S_pp + ridge * np.eye(len(P))
        s2 = Sigma[j, j] - s_pj @ scipy.linalg.solve(S_pp, s_pj, assume_a="pos")
    else:
        s2 = Sigma[j, j]
    if not s2 > 1e-12:
        raise SingularConditioningError(f"conditional variance of node {j} given {P} is {s2:.3g}")
    value = -(N / 2.0) * np.log(2.0 * np.pi * s2) - N / 2.0 - 0.5 * np.log(N) * (len(P) + 2)
    return ScoreValue(float(value), None, {"cond_var": float(s2), "ridge": float(ridge)})


def _standardize(Z: np.ndarray) -> np.ndarray:
    # constant columns carry no information for an RBF kernel and are dropped
    sd = Z.std(axis=0)
    keep = sd > 1e-12 * max(1.0, float(np.abs(Z).max(initial=0.0)))
    Z = Z[:, keep]
    return (Z - Z.mean(axis=0)) / sd[keep]


def gp_inputs(kind, j: int, parents: Sequence[int], X, S_hat=None, H=None, s_columns=None):
    """Target vector and kernel input blocks for one GP parent-set score.

    ``s_columns`` overrides the ``S_hat`` columns fed to the sufficient-statistic
    block (defaults to the parent set).
    """
    kind = ScoreKind(kind)
    X = np.asarray(X, dtype=float)
    P = sorted(int(i) for i in parents)
    if j in P:
        raise ValueError("target cannot be its own parent")
    blocks = [_standardize(X[:, [i]]) for i in P]
    y = X[:, j]
    extra = None
    if kind is ScoreKind.DECAMFOUND:
        if S_hat is None:
            raise ValueError("decamfound needs S_hat")
        S = S_hat.S_hat if isinstance(S_hat, PcssResult) else np.asarray(S_hat, dtype=float)
        y = y - S[:, j]
        cols = P if s_columns is None else sorted(int(c) for c in s_columns)
        if cols:
            extra = S[:, cols]
    elif kind is ScoreKind.CAM_OBS:
        if H is None:
            raise ValueError("cam_obs needs H")
        extra = np.asarray(H, dtype=float).reshape(X.shape[0], -1)
    elif kind is not ScoreKind.CAM:
        raise ValueError(f"{kind.value} is not a GP score")
    blocks = [z for z in blocks if z.shape[1]]
    if extra is not None:
        z = _standardize(extra)
        if z.shape[1]:
            blocks.append(z)
    return y - y.mean(), blocks


def gp_parent_score(
    kind,
    j: int,
    parents: Sequence[int],
    X,
    S_hat=None,
    H=None,
    iters: int = 100,
    step: float = 0.01,
    s_columns=None,
) -> ScoreValue:
    """Type-II maximized log marginal likelihood of node ``j`` given ``parents``."""
    y, blocks = gp_inputs(kind, j, parents, X, S_hat, H, s_columns)
    _, value = fit_hypers(y, blocks, iters=iters, step=step)
    value.diagnostics["n_blocks"] = len(blocks)
    return value


class Scorer:
    """Caches parent-set scores for one dataset.

    Parameters
    ----------
    X : (N, p) array
        Observed data.
    S_hat : PcssResult or (N, p) array, optional
        Estimated sufficient statistics, needed by ``pcss_bic`` and ``decamfound``.
    H : (N, K) array, optional
        True confounders, needed by ``cam_obs``.
    gp_iters, gp_step : int, float
        Optimizer settings for the GP scores.
    """

    def __init__(self, X, S_hat=None, H=None, gp_iters: int = 100, gp_step: float = 0.01):
        self.X = np.asarray(X, dtype=float)
        self.S_hat = S_hat.S_hat if isinstance(S_hat, PcssResult) else (
            None if S_hat is None else np.asarray(S_hat, dtype=float)
        )
        self.H = None if H is None else np.asarray(H, dtype=float)
        self.gp_iters = gp_iters
        self.gp_step = gp_step
        self._cov: dict[ScoreKind, CovarianceEstimate] = {}
        self._cache: dict[tuple, ScoreValue] = {}
        self._lock = threading.Lock()

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def covariance(self, kind) -> CovarianceEstimate:
        kind = ScoreKind(kind)
        if kind not in self._cov:
            self._cov[kind] = covariance_for(kind, self.X, self.S_hat)
        return self._cov[kind]

    def score(self, kind, j: int, parents: Iterable[int]) -> ScoreValue:
        kind = ScoreKind(kind)
        key = (kind, int(j), tuple(sorted(int(i) for i in parents)))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        if kind.is_gp:
            value = gp_parent_score(
                kind, key[1], key[2], self.X, self.S_hat, self.H, self.gp_iters, self.gp_step
            )
        else:
            value = bic_score(key[1], key[2], self.covariance(kind), self.N)
        with self._lock:
            return self._cache.setdefault(key, value)

    def __call__(self, kind, j: int, parents: Iterable[int]) -> float:
        return self.score(kind, j, parents).log_score


def score_dag(kind, dag: Dag, scorer: Scorer) -> float:
    """Decomposable DAG score: sum of per-node parent-set scores."""
    if dag.p != scorer.p:
        raise ValueError("DAG and data disagree on p")
    return float(sum(scorer(kind, j, dag.parents[j]) for j in range(dag.p)))


def posterior_over_candidates(scores) -> np.ndarray:
    """Softmax of log scores; ``-inf`` entries get probability zero."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0 or np.any(np.isnan(s)) or np.any(s == np.inf) or np.all(np.isneginf(s)):
        raise ValueError("scores must be non-empty, not NaN or +inf, and not all -inf")
    return np.exp(s - logsumexp(s))


def log_odds(scores, reference: float) -> np.ndarray:
    """Log posterior odds of each candidate against the reference under a uniform prior."""
    s = np.asarray(scores, dtype=float)
    with np.errstate(invalid="ignore"):
        lo = s - float(reference)
    # two degenerate (-inf) scores are treated as a tie
    return np.where(np.isnan(lo), 0.0, lo)
