"""Principal confounding sufficient statistics.

Estimates ``s = E[x | h]`` for every sample by projecting it onto the top-M
eigenvectors of the sample covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg


class EigenDecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PcssConfig:
    M: int = 1
    center: bool = True

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be non-negative")


@dataclass(frozen=True)
class PcssResult:
    """Output of :func:`pcss`.

    Attributes
    ----------
    S_hat : (N, p) ndarray
        Estimated sufficient statistics, column means restored.
    eigenvalues : (min(N, p),) ndarray
        Leading eigenvalues of the sample covariance, descending. The
        remaining ``p - min(N, p)`` eigenvalues are zero and omitted.
    V_M : (p, M) ndarray
        Orthonormal top-M eigenvectors.
    column_means : (p,) ndarray
        Means subtracted before the projection (zeros when not centering).
    """

    S_hat: np.ndarray
    eigenvalues: np.ndarray
    V_M: np.ndarray
    column_means: np.ndarray

    @property
    def M(self) -> int:
        return self.V_M.shape[1]

    def residuals(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) - self.S_hat

    def suggested_m(self) -> int:
        n = len(self.eigenvalues)
        return suggest_m(self.eigenvalues, max_k=max(1, min(n // 2, n - 1)))


def _top_eigh(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, V = scipy.linalg.eigh(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenDecompositionError(str(exc)) from exc
    idx = np.argsort(-w, kind="stable")
    return w[idx], V[:, idx]


def pcss(X, config: PcssConfig = PcssConfig()) -> PcssResult:
    """Project each row of ``X`` onto the top-``config.M`` principal subspace.

    With ``Xc`` the (optionally) column-centered data and ``Sigma = Xc^T Xc / N``,
    returns ``S_hat = Xc V_M V_M^T + means``. When ``p > N`` the eigenvectors
    are obtained from the ``N x N`` Gram matrix ``Xc Xc^T / N`` instead.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    N, p = X.shape
    if N < 2 or p < 1:
        raise ValueError("need N >= 2 and p >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    M = config.M
    if M > min(N, p):
        raise ValueError(f"M={M} exceeds min(N, p)={min(N, p)}")

    means = X.mean(axis=0) if config.center else np.zeros(p)
    Xc = X - means

    if p <= N:
        w, V = _top_eigh(Xc.T @ Xc / N)
        V_M = V[:, :M]
    else:
        w, U = _top_eigh(Xc @ Xc.T / N)
        # v = Xc^T u / sqrt(N lambda); renormalize to absorb round-off
        V_M = Xc.T @ U[:, :M]
        norms = np.linalg.norm(V_M, axis=0)
        if M and np.any(norms <= 1e-12 * max(1.0, np.linalg.norm(Xc))):
            raise EigenDecompositionError("requested component lies in the null space of X")
        V_M = V_M / np.where(norms > 0, norms, 1.0)
    w = w[: min(N, p)]

    S_hat = (Xc @ V_M) @ V_M.T + means
    return PcssResult(S_hat, w, V_M, means)


def max_mse(S_hat, S_true, columns: Optional[Sequence[int]] = None) -> float:
    """``max_j mean_n (S_true[n, j] - S_hat[n, j])**2`` over the selected columns."""
    S_hat = np.asarray(S_hat, dtype=float)
    S_true = np.asarray(S_true, dtype=float)
    if S_hat.shape != S_true.shape:
        raise ValueError(f"shape mismatch: {S_hat.shape} vs {S_true.shape}")
    if columns is None:
        columns = np.arange(S_true.shape[1])
    columns = np.asarray(columns, dtype=int)
    if columns.size == 0:
        raise ValueError("empty column set")
    err = np.mean((S_true[:, columns] - S_hat[:, columns]) ** 2, axis=0)
    return float(err.max())


def suggest_m(eigenvalues, max_k: Optional[int] = None) -> int:
    """Number of spiked eigenvalues by the largest consecutive ratio ``l_k / l_{k+1}``.

    ``max_k`` bounds the search (``k <= max_k``); pass ``min(N, p) // 2`` to
    keep the near-zero tail of a rank-deficient spectrum from winning. Ties go
    to the smallest ``k``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < 2:
        raise ValueError("need at least 2 eigenvalues")
    kmax = lam.size - 1 if max_k is None else int(np.clip(max_k, 1, lam.size - 1))
    floor = np.finfo(float).eps * max(abs(lam[0]), 1.0)
    ratios = lam[:kmax] / np.maximum(lam[1 : kmax + 1], floor)
    return int(np.argmax(ratios)) + 1
