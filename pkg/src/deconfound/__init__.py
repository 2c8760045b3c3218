"""Spectral confounder sufficient statistics and GP parent-set scores for causal additive models."""

from .graph import ConfounderAttachment, Dag, sample_confounder_attachment, sample_erdos_renyi, topological_order
from .scm import (
    Dataset,
    LinearScm,
    ScmConfig,
    ScmInstance,
    TrendFn,
    TrendKind,
    deconfound_residuals,
    generate,
    linear_suffstats,
    sample_dataset,
    sample_instance,
)
from .pcss import PcssConfig, PcssResult, max_mse, pcss, suggest_m
from .gp import GpHyperParams, ScoreValue, additive_kernel_matrix, fit_hypers, gp_log_marginal
from .scores import (
    CovarianceEstimate,
    ScoreKind,
    Scorer,
    bic_score,
    covariance_for,
    gp_parent_score,
    log_odds,
    posterior_over_candidates,
    score_dag,
)
from .bench import TaskReport, TaskSpec, candidate_dag_task, correct_parent_deletion, shd, wrong_parent_addition

__version__ = "0.1.0"
