"""Additive RBF Gaussian processes and type-II maximum likelihood.

All positive hyperparameters are optimized in log-space. Parameter vector
layout for ``B`` input blocks::

    theta = [log lengthscale_1..B, log signal_scale_1..B, log noise_var]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

LOG_2PI = float(np.log(2.0 * np.pi))
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4, 1e-2)


class KernelFactorizationError(np.linalg.LinAlgError):
    pass


class GpFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GpHyperParams:
    lengthscales: np.ndarray
    signal_scales: np.ndarray
    noise_var: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        sc = np.atleast_1d(np.asarray(self.signal_scales, dtype=float))
        if ls.shape != sc.shape or ls.ndim != 1:
            raise ValueError("lengthscales and signal_scales must be 1-D of equal length")
        if np.any(ls <= 0) or np.any(sc <= 0) or not self.noise_var > 0:
            raise ValueError("hyperparameters must be strictly positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_scales", sc)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @classmethod
    def default(cls, n_blocks: int, noise_var: float) -> "GpHyperParams":
        return cls(np.ones(n_blocks), np.ones(n_blocks), noise_var)

    @property
    def n_blocks(self) -> int:
        return self.lengthscales.size

    def to_log(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscales), np.log(self.signal_scales), [np.log(self.noise_var)]])

    @classmethod
    def from_log(cls, theta) -> "GpHyperParams":
        theta = np.asarray(theta, dtype=float)
        b = (theta.size - 1) // 2
        return cls(np.exp(theta[:b]), np.exp(theta[b : 2 * b]), float(np.exp(theta[-1])))

    def to_dict(self) -> dict:
        return {
            "lengthscales": self.lengthscales.tolist(),
            "signal_scales": self.signal_scales.tolist(),
            "noise_var": self.noise_var,
        }


@dataclass
class ScoreValue:
    log_score: float
    fitted_hypers: Optional[GpHyperParams] = None
    diagnostics: dict = field(default_factory=dict)


def _as_blocks(inputs: Sequence) -> list[np.ndarray]:
    blocks = []
    for z in inputs:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if not np.all(np.isfinite(z)):
            raise ValueError("kernel inputs contain non-finite values")
        blocks.append(z)
    return blocks


def _sqdist(z: np.ndarray) -> np.ndarray:
    sq = np.sum(z * z, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def additive_kernel_matrix(inputs: Sequence, hypers: GpHyperParams, n: Optional[int] = None) -> np.ndarray:
    """Sum over blocks of ``scale_b**2 * exp(-||z_b - z_b'||**2 / (2 lengthscale_b**2))``.

    ``n`` gives the matrix size when there are no blocks.
    """
    blocks = _as_blocks(inputs)
    if len(blocks) != hypers.n_blocks:
        raise ValueError(f"{len(blocks)} input blocks but {hypers.n_blocks} hyperparameter blocks")
    if not blocks:
        if n is None:
            raise ValueError("n is required when there are no input blocks")
        return np.zeros((n, n))
    K = np.zeros((blocks[0].shape[0],) * 2)
    for z, ls, sc in zip(blocks, hypers.lengthscales, hypers.signal_scales):
        K += sc**2 * np.exp(-_sqdist(z) / (2.0 * ls**2))
    return K


def _cholesky(L: np.ndarray):
    """Cholesky of ``L`` with escalating diagonal jitter; returns (factor, jitter)."""
    scale = max(float(np.mean(np.diag(L))), np.finfo(float).tiny)
    for rel in JITTER_LADDER:
        jitter = rel * scale
        try:
            c = scipy.linalg.cholesky(L + jitter * np.eye(L.shape[0]), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(c)):
            return c, jitter
    raise KernelFactorizationError("kernel matrix not positive definite after maximum jitter")


def gp_log_marginal(targets, K, noise_var: float) -> float:
    """``-0.5 [y^T L^{-1} y + log det L + N log 2 pi]`` with ``L = K + noise_var I``."""
    y = np.asarray(targets, dtype=float).ravel()
    K = np.asarray(K, dtype=float)
    if K.shape != (y.size, y.size):
        raise ValueError("kernel and target sizes differ")
    c, _ = _cholesky(K + noise_var * np.eye(y.size))
    a = scipy.linalg.solve_triangular(c, y, lower=True, check_finite=False)
    return float(-0.5 * (a @ a) - np.sum(np.log(np.diag(c))) - 0.5 * y.size * LOG_2PI)


class _Objective:
    """Log marginal likelihood and its gradient in log-hyperparameter space."""

    def __init__(self, y: np.ndarray, blocks: list[np.ndarray]):
        self.y = y
        self.n = y.size
        self.dists = [_sqdist(z) for z in blocks]

    def __call__(self, theta: np.ndarray):
        b = len(self.dists)
        ls, sc = np.exp(theta[:b]), np.exp(theta[b : 2 * b])
        noise = float(np.exp(theta[-1]))
        Ks = [s**2 * np.exp(-D / (2.0 * l**2)) for D, l, s in zip(self.dists, ls, sc)]
        K = sum(Ks) if Ks else np.zeros((self.n, self.n))
        c, jitter = _cholesky(K + noise * np.eye(self.n))
        alpha = scipy.linalg.cho_solve((c, True), self.y, check_finite=False)
        value = -0.5 * (self.y @ alpha) - np.sum(np.log(np.diag(c))) - 0.5 * self.n * LOG_2PI
        Linv = scipy.linalg.cho_solve((c, True), np.eye(self.n), check_finite=False)
        W = np.outer(alpha, alpha) - Linv
        grad = np.empty(2 * b + 1)
        for idx, (D, l, Kb) in enumerate(zip(self.dists, ls, Ks)):
            grad[idx] = 0.5 * np.sum(W * Kb * D) / l**2
            grad[b + idx] = np.sum(W * Kb)
        grad[-1] = 0.5 * noise * np.trace(W)
        return float(value), grad, jitter


def log_marginal_and_grad(targets, inputs: Sequence, hypers: GpHyperParams):
    """Value and gradient w.r.t. ``hypers.to_log()``."""
    y = np.asarray(targets, dtype=float).ravel()
    value, grad, _ = _Objective(y, _as_blocks(inputs))(hypers.to_log())
    return value, grad


def fit_hypers(
    targets,
    inputs: Sequence,
    init: Optional[GpHyperParams] = None,
    iters: int = 100,
    step: float = 0.01,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[GpHyperParams, ScoreValue]:
    """Adam ascent on the log marginal likelihood over log-hyperparameters.

    Returns the hyperparameters after ``iters`` updates and the log marginal
    likelihood evaluated there.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    y = np.asarray(targets, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise GpFitError("targets contain non-finite values")
    blocks = _as_blocks(inputs)
    if init is None:
        init = GpHyperParams.default(len(blocks), max(0.5 * float(np.var(y)), 1e-6))
    if init.n_blocks != len(blocks):
        raise ValueError("init has the wrong number of blocks")
    obj = _Objective(y, blocks)
    theta = init.to_log()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2 = betas
    max_jitter = 0.0
    for t in range(1, iters + 1):
        value, grad, jitter = obj(theta)
        max_jitter = max(max_jitter, jitter)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise GpFitError(f"non-finite objective at iteration {t}: value={value}, grad={grad}")
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad**2
        theta = theta + step * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    value, grad, jitter = obj(theta)
    if not np.isfinite(value):
        raise GpFitError("non-finite final log marginal likelihood")
    hypers = GpHyperParams.from_log(theta)
    diag = {"iters": iters, "grad_norm": float(np.linalg.norm(grad)), "max_jitter": max(max_jitter, jitter)}
    return hypers, ScoreValue(float(value), hypers, diag)
