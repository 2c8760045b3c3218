"""Synthetic causal additive models with latent confounders.

Each node is generated as

    x_j = c_par[j] * sum_i f_ij(x_i) + c_confound[j] * sum_k g_kj(h_k) + eps_j

with trends drawn from {linear, seasonal, quadratic}. The two constants are
solved per node, in topological order, from the moments of the
already-normalized prefix (exact for linear instances, Monte-Carlo otherwise)
so that every node has unit variance and the confounders explain a fixed
share ``sigma_h_sq`` of it.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .graph import ConfounderAttachment, Dag


class DegenerateVarianceError(ValueError):
    pass


class TrendKind(str, enum.Enum):
    LINEAR = "linear"
    SEASONAL = "seasonal"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class TrendFn:
    """``weight * f(x) - offset`` with ``f`` one of ``x``, ``sin(pi x)``, ``x**2``.

    ``offset`` holds the Monte-Carlo mean of the un-centered term; it is zero
    for linear trends, whose inputs are zero-mean by construction.
    """

    kind: TrendKind
    weight: float
    offset: float = 0.0

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is TrendKind.LINEAR:
            return self.weight * x
        if self.kind is TrendKind.SEASONAL:
            return self.weight * np.sin(np.pi * x)
        return self.weight * x**2

    def __call__(self, x):
        return self.raw(x) - self.offset


@dataclass(frozen=True)
class ScmConfig:
    p: int
    K: int = 1
    sigma_noise_sq: float = 0.2
    sigma_h_sq: float = 0.4
    linear_only: bool = True
    exclude_linear_trend: bool = False
    attach_prob: float = 0.7
    mc_samples: int = 10_000
    expected_neighborhood: float = 5.0

    def __post_init__(self):
        if self.p < 1 or self.K < 0:
            raise ValueError("need p >= 1 and K >= 0")
        if self.sigma_noise_sq < 0 or self.sigma_h_sq < 0:
            raise ValueError("variances must be non-negative")
        if self.sigma_noise_sq + self.sigma_h_sq > 1.0 + 1e-12:
            raise ValueError("sigma_noise_sq + sigma_h_sq must not exceed 1")
        if self.linear_only and self.exclude_linear_trend:
            raise ValueError("linear_only and exclude_linear_trend are incompatible")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be >= 2")

    @property
    def sigma_signal_sq(self) -> float:
        return max(0.0, 1.0 - self.sigma_noise_sq - self.sigma_h_sq)

    @property
    def trend_kinds(self) -> tuple[TrendKind, ...]:
        if self.linear_only:
            return (TrendKind.LINEAR,)
        if self.exclude_linear_trend:
            return (TrendKind.SEASONAL, TrendKind.QUADRATIC)
        return tuple(TrendKind)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LinearScm:
    """``x = B^T x + Theta h + eps`` with ``B[i, j]`` the weight of edge ``i -> j``."""

    B: np.ndarray
    Theta: np.ndarray
    noise_vars: np.ndarray


@dataclass(frozen=True)
class ScmInstance:
    config: ScmConfig
    dag: Dag
    attachment: ConfounderAttachment
    observed_trends: dict  # (i, j) -> TrendFn
    confounder_trends: dict  # (k, j) -> TrendFn
    c_par: np.ndarray
    c_confound: np.ndarray
    node_noise_var: np.ndarray

    @property
    def p(self) -> int:
        return self.dag.p

    @property
    def K(self) -> int:
        return self.attachment.K

    @property
    def is_linear(self) -> bool:
        return all(
            t.kind is TrendKind.LINEAR
            for t in (*self.observed_trends.values(), *self.confounder_trends.values())
        )

    def confounder_only_nodes(self) -> np.ndarray:
        """Nodes with confounder parents but no observed parents."""
        conf = self.attachment.edges.any(axis=0)
        return np.array([j for j in range(self.p) if conf[j] and not self.dag.parents[j]], dtype=int)

    def unconfounded_nodes(self) -> np.ndarray:
        """Nodes with no confounder among themselves or their ancestors (so ``s_j = 0``)."""
        conf = self.attachment.edges.any(axis=0)
        hit = np.zeros(self.p, dtype=bool)
        for j in self.dag.order:
            hit[j] = conf[j] or any(hit[i] for i in self.dag.parents[j])
        return np.flatnonzero(~hit)

    def observed_component(self, j: int, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0])
        for i in self.dag.parents[j]:
            out += self.observed_trends[(i, j)](X[:, i])
        return self.c_par[j] * out

    def confounder_component(self, j: int, H: np.ndarray) -> np.ndarray:
        out = np.zeros(H.shape[0])
        for k in self.attachment.confounders_of(j):
            out += self.confounder_trends[(int(k), j)](H[:, k])
        return self.c_confound[j] * out

    def as_linear(self) -> LinearScm:
        if not self.is_linear:
            raise ValueError("instance has non-linear trends")
        B = np.zeros((self.p, self.p))
        Theta = np.zeros((self.p, self.K))
        for (i, j), t in self.observed_trends.items():
            B[i, j] = self.c_par[j] * t.weight
        for (k, j), t in self.confounder_trends.items():
            Theta[j, k] = self.c_confound[j] * t.weight
        return LinearScm(B, Theta, self.node_noise_var.copy())


@dataclass
class Dataset:
    X: np.ndarray
    H: Optional[np.ndarray] = None
    S_true: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        for name in ("H", "S_true"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.ndim != 2 or arr.shape[0] != self.X.shape[0]:
                    raise ValueError(f"{name} must be 2-D with {self.X.shape[0]} rows")
                setattr(self, name, arr)
        if self.S_true is not None and self.S_true.shape[1] != self.X.shape[1]:
            raise ValueError("S_true must have as many columns as X")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def known_s_columns(self) -> np.ndarray:
        """Columns of ``S_true`` that hold values (non-NaN)."""
        if self.S_true is None:
            return np.array([], dtype=int)
        return np.flatnonzero(~np.isnan(self.S_true).any(axis=0))


def _sample_weight(rng) -> float:
    return float(rng.choice((-1.0, 1.0)) * rng.uniform(0.25, 1.0))


def _positive_root(a: float, b: float, c: float) -> float:
    # larger root of a x^2 + b x + c with c <= 0
    disc = max(b * b - 4.0 * a * c, 0.0)
    return max((-b + np.sqrt(disc)) / (2.0 * a), 0.0)


def sample_instance(config: ScmConfig, dag: Dag, attachment: ConfounderAttachment, rng_seed: int) -> ScmInstance:
    """Draw trends and weights, then solve the normalization constants node by node.

    For non-linear instances a single Monte-Carlo sample of
    ``(h, x_1, ..., x_{j-1})`` of size ``config.mc_samples`` is grown column by
    column as nodes are normalized; it is a draw from the same prefix marginal
    the constants are defined on. Linear instances propagate the exact
    covariance of ``(h, x)`` instead, so their constants carry no Monte-Carlo
    error.
    """
    if dag.p != config.p or attachment.p != config.p or attachment.K != config.K:
        raise ValueError("dag / attachment dimensions do not match config")
    rng = np.random.default_rng(rng_seed)
    kinds = config.trend_kinds
    p, K, n_mc = config.p, config.K, config.mc_samples

    raw_obs = {}
    raw_conf = {}
    for j in range(p):
        for i in dag.parents[j]:
            raw_obs[(i, j)] = TrendFn(kinds[rng.integers(len(kinds))], _sample_weight(rng))
        for k in attachment.confounders_of(j):
            raw_conf[(int(k), j)] = TrendFn(kinds[rng.integers(len(kinds))], _sample_weight(rng))

    exact = all(t.kind is TrendKind.LINEAR for t in (*raw_obs.values(), *raw_conf.values()))
    if exact:
        # covariance of (h_1..h_K, x_1..x_p); rows of x are filled in topological order
        cov = np.zeros((K + p, K + p))
        cov[:K, :K] = np.eye(K)
    else:
        H_mc = rng.standard_normal((n_mc, K))
        X_mc = np.zeros((n_mc, p))
    c_par = np.zeros(p)
    c_conf = np.zeros(p)
    noise_var = np.ones(p)
    obs_trends = {}
    conf_trends = {}
    s2_noise, s2_h, s2_sig = config.sigma_noise_sq, config.sigma_h_sq, config.sigma_signal_sq

    for j in dag.order:
        if exact:
            w_obs = np.zeros(K + p)
            w_conf = np.zeros(K + p)
            for i in dag.parents[j]:
                obs_trends[(i, j)] = raw_obs[(i, j)]
                w_obs[K + i] = raw_obs[(i, j)].weight
            for k in attachment.confounders_of(j):
                conf_trends[(int(k), j)] = raw_conf[(int(k), j)]
                w_conf[int(k)] = raw_conf[(int(k), j)].weight
            var_o = float(w_obs @ cov @ w_obs)
            var_c = float(w_conf @ cov @ w_conf)
            cov_oc = float(w_obs @ cov @ w_conf)
        else:
            O = np.zeros(n_mc)
            for i in dag.parents[j]:
                t = raw_obs[(i, j)]
                vals = t.raw(X_mc[:, i])
                off = 0.0 if t.kind is TrendKind.LINEAR else float(vals.mean())
                obs_trends[(i, j)] = TrendFn(t.kind, t.weight, off)
                O += vals - off
            C = np.zeros(n_mc)
            for k in attachment.confounders_of(j):
                t = raw_conf[(int(k), j)]
                vals = t.raw(H_mc[:, k])
                off = 0.0 if t.kind is TrendKind.LINEAR else float(vals.mean())
                conf_trends[(int(k), j)] = TrendFn(t.kind, t.weight, off)
                C += vals - off
            var_o = float(np.var(O))
            var_c = float(np.var(C))
            cov_oc = float(np.mean((O - O.mean()) * (C - C.mean())))

        has_obs = bool(dag.parents[j])
        has_conf = bool(attachment.edges[:, j].any())
        if has_conf:
            if var_c < 1e-12:
                raise DegenerateVarianceError(f"confounder term of node {j} is constant")
            c_conf[j] = np.sqrt(s2_h / var_c)
        if has_obs:
            if var_o < 1e-12:
                raise DegenerateVarianceError(f"parent term of node {j} is constant")
            if has_conf:
                c_par[j] = _positive_root(var_o, 2.0 * c_conf[j] * cov_oc, -s2_sig)
            else:
                c_par[j] = np.sqrt((s2_sig + s2_h) / var_o)

        if not has_obs and not has_conf:
            noise_var[j] = 1.0
        elif not has_obs:
            noise_var[j] = s2_noise + s2_sig
        else:
            noise_var[j] = s2_noise

        if exact:
            a = c_par[j] * w_obs + c_conf[j] * w_conf
            row = a @ cov
            cov[K + j, :] = row
            cov[:, K + j] = row
            cov[K + j, K + j] = a @ row + noise_var[j]
        else:
            X_mc[:, j] = c_par[j] * O + c_conf[j] * C + rng.normal(0.0, np.sqrt(noise_var[j]), n_mc)

    return ScmInstance(config, dag, attachment, obs_trends, conf_trends, c_par, c_conf, noise_var)


def linear_suffstats(scm: LinearScm, H) -> np.ndarray:
    """Rows ``s = (I - B^T)^{-1} Theta h``, i.e. ``S = H Theta^T (I - B)^{-1}``."""
    H = np.asarray(H, dtype=float)
    p = scm.B.shape[0]
    if H.ndim != 2 or H.shape[1] != scm.Theta.shape[1] or scm.Theta.shape[0] != p:
        raise ValueError("dimension mismatch between H, B and Theta")
    # S (I - B) = H Theta^T  <=>  (I - B)^T S^T = Theta H^T
    try:
        St = np.linalg.solve((np.eye(p) - scm.B).T, scm.Theta @ H.T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("I - B is singular") from exc
    return St.T


def sample_dataset(instance: ScmInstance, N: int, rng_seed: int) -> Dataset:
    """Draw ``N`` i.i.d. rows; fills ``S_true`` where ``E[x_j | h]`` is computable.

    Linear instances get the full matrix. Otherwise only confounder-only nodes
    (``s_j = d_j``) and nodes with no confounded ancestry (``s_j = 0``) are
    filled; the remaining columns are NaN.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(rng_seed)
    p, K = instance.p, instance.K
    H = rng.standard_normal((N, K))
    eps = rng.standard_normal((N, p)) * np.sqrt(instance.node_noise_var)
    X = np.zeros((N, p))
    D = np.zeros((N, p))
    for j in instance.dag.order:
        D[:, j] = instance.confounder_component(j, H)
        X[:, j] = instance.observed_component(j, X) + D[:, j] + eps[:, j]

    if instance.is_linear:
        S = linear_suffstats(instance.as_linear(), H)
    else:
        S = np.full((N, p), np.nan)
        only = instance.confounder_only_nodes()
        S[:, only] = D[:, only]
        S[:, instance.unconfounded_nodes()] = 0.0
    meta = {"config": instance.config.to_dict(), "seed": int(rng_seed), "N": int(N)}
    return Dataset(X, H, S, meta)


def deconfound_residuals(X, S) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    if X.shape != S.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {S.shape}")
    return X - S


def generate(config: ScmConfig, N: int, seed: int) -> tuple[ScmInstance, Dataset]:
    """Graph, attachment, instance and dataset from one seed."""
    from .graph import sample_confounder_attachment, sample_erdos_renyi
    from .seeding import derive_seed

    dag = sample_erdos_renyi(config.p, config.expected_neighborhood, derive_seed(seed, "graph"))
    att = sample_confounder_attachment(config.p, config.K, config.attach_prob, derive_seed(seed, "attachment"))
    inst = sample_instance(config, dag, att, derive_seed(seed, "instance"))
    return inst, sample_dataset(inst, N, derive_seed(seed, "dataset"))
