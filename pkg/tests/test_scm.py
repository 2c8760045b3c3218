import numpy as np
import pytest

from deconfound.graph import ConfounderAttachment, Dag, sample_confounder_attachment, sample_erdos_renyi
from deconfound.scm import (
    Dataset,
    LinearScm,
    ScmConfig,
    TrendKind,
    deconfound_residuals,
    generate,
    linear_suffstats,
    sample_dataset,
    sample_instance,
)


def _both_kinds(inst):
    conf = inst.attachment.edges.any(axis=0)
    return [j for j in range(inst.p) if conf[j] and inst.dag.parents[j]]


def test_single_source_node():
    cfg = ScmConfig(p=1, K=0)
    inst, data = generate(cfg, 3, 0)
    assert inst.node_noise_var[0] == 1.0
    assert inst.c_par[0] == 0.0 and inst.c_confound[0] == 0.0
    np.testing.assert_array_equal(data.S_true, np.zeros((3, 1)))
    assert data.H.shape == (3, 0)


def test_normalized_variances_linear():
    cfg = ScmConfig(p=30, sigma_noise_sq=0.2, sigma_h_sq=0.3, expected_neighborhood=3.0)
    inst, data = generate(cfg, 10000, 3)
    nodes = _both_kinds(inst)
    assert nodes
    for j in nodes:
        assert abs(data.X[:, j].var() - 1.0) <= 0.05
        assert abs(inst.confounder_component(j, data.H).var() - 0.3) <= 0.05


def test_linear_constants_give_exact_population_variances():
    inst, _ = generate(ScmConfig(p=30, sigma_h_sq=0.3, expected_neighborhood=3.0), 2, 8)
    lin = inst.as_linear()
    # independent route: Cov(x) = A^T (Theta Theta^T + diag(noise)) A with A = (I - B)^{-1}
    A = np.linalg.inv(np.eye(30) - lin.B)
    cov = A.T @ (lin.Theta @ lin.Theta.T + np.diag(lin.noise_vars)) @ A
    np.testing.assert_allclose(np.diag(cov), 1.0, atol=1e-10)
    for j in _both_kinds(inst):
        assert lin.Theta[j] @ lin.Theta[j] == pytest.approx(0.3, abs=1e-12)


def test_nonlinear_normalization_consistent_with_many_mc_samples():
    # shallow graph, large Monte-Carlo and data samples: heavy tails of chained
    # quadratic trends do not build up, so the algebra can be checked tightly
    cfg = ScmConfig(p=12, sigma_h_sq=0.3, linear_only=False, expected_neighborhood=1.5, mc_samples=200_000)
    inst, data = generate(cfg, 200_000, 1)
    nodes = _both_kinds(inst)
    assert nodes
    for j in nodes:
        assert abs(data.X[:, j].var() - 1.0) <= 0.05
        assert abs(data.X[:, j].mean()) <= 0.05
        assert abs(inst.confounder_component(j, data.H).var() - 0.3) <= 0.05


def test_two_node_chain_closed_form():
    # Var(theta x1) = theta^2 for unit-variance x1, so c^2 theta^2 must equal the signal budget
    cfg = ScmConfig(p=2, K=1, sigma_h_sq=0.0, attach_prob=0.0)
    dag = Dag.from_edges(2, [(0, 1)])
    att = ConfounderAttachment(np.zeros((1, 2), dtype=bool))
    inst = sample_instance(cfg, dag, att, 5)
    theta = inst.observed_trends[(0, 1)].weight
    assert inst.node_noise_var[0] == 1.0
    assert inst.c_par[1] == pytest.approx(np.sqrt(cfg.sigma_signal_sq / theta**2), rel=1e-12)
    data = sample_dataset(inst, 20000, 1)
    assert data.X[:, 1].var() == pytest.approx(1.0, abs=0.05)


def test_linear_suffstats_trivial_cases():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((7, 2))
    Theta = rng.standard_normal((4, 2))
    np.testing.assert_allclose(linear_suffstats(LinearScm(np.zeros((4, 4)), Theta, np.ones(4)), H), H @ Theta.T)
    B = np.triu(rng.standard_normal((4, 4)), 1)
    np.testing.assert_array_equal(linear_suffstats(LinearScm(B, np.zeros((4, 2)), np.ones(4)), H), 0.0)


def test_linear_suffstats_two_nodes_by_hand():
    b, t1, t2 = 0.7, -0.4, 0.9
    B = np.array([[0.0, b], [0.0, 0.0]])
    h = np.array([[1.3], [-0.2]])
    S = linear_suffstats(LinearScm(B, np.array([[t1], [t2]]), np.ones(2)), h)
    np.testing.assert_allclose(S[:, 0], t1 * h[:, 0], atol=1e-14)
    np.testing.assert_allclose(S[:, 1], (b * t1 + t2) * h[:, 0], atol=1e-14)


def test_linear_suffstats_match_dense_inverse():
    inst, data = generate(ScmConfig(p=20, K=2), 50, 9)
    lin = inst.as_linear()
    # independent route: s = (I - B^T)^{-1} Theta h, row by row
    inv = np.linalg.inv(np.eye(20) - lin.B.T)
    expect = np.stack([inv @ lin.Theta @ h for h in data.H])
    np.testing.assert_allclose(data.S_true, expect, atol=1e-12)


def test_nonlinear_confounder_only_columns():
    cfg = ScmConfig(p=40, linear_only=False, attach_prob=1.0)
    inst, data = generate(cfg, 200, 2)
    only = inst.confounder_only_nodes()
    assert only.size
    for j in only:
        (key, trend), = [(k, t) for k, t in inst.confounder_trends.items() if k[1] == j]
        h = data.H[:, key[0]]
        if trend.kind is TrendKind.SEASONAL:
            raw = trend.weight * np.sin(np.pi * h)
        elif trend.kind is TrendKind.QUADRATIC:
            raw = trend.weight * h**2
        else:
            raw = trend.weight * h
        np.testing.assert_allclose(data.S_true[:, j], inst.c_confound[j] * (raw - trend.offset), atol=1e-12)
    assert len(data.known_s_columns()) < cfg.p


def test_residual_regression_recovers_edges():
    inst, data = generate(ScmConfig(p=15, sigma_h_sq=0.4, expected_neighborhood=3.0), 5000, 4)
    B = inst.as_linear().B
    R = deconfound_residuals(data.X, data.S_true)
    for j in range(inst.p):
        P = list(inst.dag.parents[j])
        if not P:
            continue
        coef, *_ = np.linalg.lstsq(R[:, P], R[:, j], rcond=None)
        np.testing.assert_allclose(coef, B[P, j], atol=0.05)


def test_deconfound_residuals_trivial():
    X = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(deconfound_residuals(X, np.zeros_like(X)), X)
    np.testing.assert_array_equal(deconfound_residuals(X, X), 0.0)
    with pytest.raises(ValueError):
        deconfound_residuals(X, X[:, :1])


def test_generate_is_deterministic():
    cfg = ScmConfig(p=12, linear_only=False, expected_neighborhood=3.0, mc_samples=2000)
    _, a = generate(cfg, 30, 17)
    _, b = generate(cfg, 30, 17)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.H, b.H)
    np.testing.assert_array_equal(a.S_true, b.S_true)
    _, c = generate(cfg, 30, 18)
    assert not np.array_equal(a.X, c.X)


def test_exclude_linear_trend():
    cfg = ScmConfig(p=25, linear_only=False, exclude_linear_trend=True, expected_neighborhood=3.0, mc_samples=2000)
    inst, _ = generate(cfg, 10, 0)
    kinds = {t.kind for t in (*inst.observed_trends.values(), *inst.confounder_trends.values())}
    assert TrendKind.LINEAR not in kinds


def test_config_validation():
    with pytest.raises(ValueError):
        ScmConfig(p=5, sigma_noise_sq=0.7, sigma_h_sq=0.5)
    with pytest.raises(ValueError):
        ScmConfig(p=0)


def test_dataset_shape_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), S_true=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), H=np.zeros((2, 1)))


def test_attachment_dimension_check():
    cfg = ScmConfig(p=4)
    with pytest.raises(ValueError):
        sample_instance(cfg, sample_erdos_renyi(5, 1.0, 0), sample_confounder_attachment(4, 1, 0.5, 0), 0)
