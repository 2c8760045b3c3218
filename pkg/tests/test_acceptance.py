"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
every criterion. The slow criteria (5, 6, 7) take a few minutes in total.
"""

import json

import numpy as np
import pytest

from deconfound.bench import TaskSpec, run_task, summarize
from deconfound.cli import EXIT_OK, main
from deconfound.gp import GpHyperParams, additive_kernel_matrix, gp_log_marginal, log_marginal_and_grad
from deconfound.pcss import PcssConfig, max_mse, pcss
from deconfound.scm import ScmConfig, generate
from deconfound.scores import Scorer, bic_score

# evaluated to 30 digits with mpmath
BIC_EMPTY_UNIT_N100 = -146.49902350645536554606895655
BIC_CORR08_N50 = -51.273679980076322016668908187

SEEDS = tuple(range(10))


def _record(log, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    log.append(line)
    print(line)
    return ok


def test_c01_pcss_error_shrinks_with_p(acceptance_log):
    medians = {}
    worst_ratio = 0.0
    for s2 in (0.2, 0.4, 0.6):
        for p in (250, 500, 1000):
            errs = []
            for seed in SEEDS:
                _, data = generate(ScmConfig(p=p, sigma_h_sq=s2), p // 2, seed)
                est = max_mse(pcss(data.X, PcssConfig(M=1)).S_hat, data.S_true)
                zero = max_mse(np.zeros_like(data.S_true), data.S_true)
                errs.append(est)
                worst_ratio = max(worst_ratio, est / zero)
            medians[(s2, p)] = float(np.median(errs))
    decreasing = all(medians[(s2, 250)] > medians[(s2, 500)] > medians[(s2, 1000)] for s2 in (0.2, 0.4, 0.6))
    ok = decreasing and worst_ratio < 1.0
    detail = ", ".join(f"s2={s2}: " + "/".join(f"{medians[(s2, p)]:.4f}" for p in (250, 500, 1000))
                       for s2 in (0.2, 0.4, 0.6))
    _record(acceptance_log, "1 PCSS max-MSE decreases in p", ok, f"{detail}; worst PCSS/zero ratio {worst_ratio:.3f}")
    assert ok


def test_c02_gp_marginal_matches_dense_density(acceptance_log):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        N = int(rng.integers(1, 9))
        blocks = [rng.standard_normal((N, int(rng.integers(1, 3)))) for _ in range(int(rng.integers(0, 4)))]
        b = len(blocks)
        h = GpHyperParams(rng.uniform(0.2, 3.0, b), rng.uniform(0.2, 3.0, b), rng.uniform(0.01, 2.0))
        y = rng.standard_normal(N) * 2.0
        K = additive_kernel_matrix(blocks, h, n=N)
        L = K + h.noise_var * np.eye(N)
        _, logdet = np.linalg.slogdet(L)
        dense = -0.5 * (y @ np.linalg.inv(L) @ y + logdet + N * np.log(2 * np.pi))
        worst = max(worst, abs(gp_log_marginal(y, K, h.noise_var) - dense))
    ok = worst < 1e-8
    _record(acceptance_log, "2 GP marginal likelihood oracle", ok, f"max abs error {worst:.2e} over 50 problems")
    assert ok


def test_c03_hypergradient_finite_differences(acceptance_log):
    rng = np.random.default_rng(3)
    worst = 0.0
    step = 1e-5
    for _ in range(20):
        b = int(rng.integers(1, 4))
        blocks = [rng.standard_normal((20, int(rng.integers(1, 3)))) for _ in range(b)]
        h = GpHyperParams(rng.uniform(0.3, 2.0, b), rng.uniform(0.3, 2.0, b), rng.uniform(0.05, 1.0))
        y = rng.standard_normal(20)
        _, grad = log_marginal_and_grad(y, blocks, h)
        theta = h.to_log()
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += step
            down[i] -= step
            fd = (log_marginal_and_grad(y, blocks, GpHyperParams.from_log(up))[0]
                  - log_marginal_and_grad(y, blocks, GpHyperParams.from_log(down))[0]) / (2 * step)
            worst = max(worst, abs(grad[i] - fd) / max(abs(fd), 1e-12))
    ok = worst < 1e-4
    _record(acceptance_log, "3 hypergradient vs finite differences", ok, f"max relative error {worst:.2e}")
    assert ok


def test_c04_bic_worked_examples(acceptance_log):
    e1 = abs(bic_score(0, [], np.eye(1), 100).log_score - BIC_EMPTY_UNIT_N100)
    ident = [bic_score(0, range(1, 1 + k), np.eye(4), 100).log_score for k in range(4)]
    penalty_only = np.max(np.abs(np.diff(ident) + 0.5 * np.log(100)))
    e3 = abs(bic_score(1, [0], np.array([[1.0, 0.8], [0.8, 1.0]]), 50).log_score - BIC_CORR08_N50)
    ok = e1 < 1e-10 and penalty_only < 1e-10 and all(np.diff(ident) < 0) and e3 < 1e-10
    _record(acceptance_log, "4 BIC closed-form examples", ok,
            f"errors {e1:.1e}, {penalty_only:.1e}, {e3:.1e}")
    assert ok


@pytest.mark.slow
def test_c05_wrong_parent_addition(acceptance_log):
    linear = TaskSpec("wrong_parent_addition", methods=("vanilla_bic", "pcss_bic"), seeds=SEEDS,
                      scm=ScmConfig(p=100, sigma_h_sq=0.4), N=100)
    lin = summarize(run_task(linear))
    nonlinear = TaskSpec("wrong_parent_addition", M=30, methods=("cam", "decamfound"), seeds=SEEDS,
                         scm=ScmConfig(p=50, sigma_h_sq=0.4, linear_only=False), N=100)
    nl = summarize(run_task(nonlinear))
    a = (lin["pcss_bic"]["prop_wrong_beats_true"], lin["vanilla_bic"]["prop_wrong_beats_true"])
    b = (nl["decamfound"]["prop_wrong_beats_true"], nl["cam"]["prop_wrong_beats_true"])
    ok = a[0] < a[1] and b[0] <= b[1]
    _record(acceptance_log, "5 wrong parent addition ordering", ok,
            f"linear pcss_bic {a[0]:.3f} < vanilla_bic {a[1]:.3f}; non-linear decamfound {b[0]:.3f} <= cam {b[1]:.3f}")
    assert ok


@pytest.mark.slow
def test_c06_correct_parent_deletion(acceptance_log):
    spec = TaskSpec("correct_parent_deletion", methods=("vanilla_bic", "pcss_bic", "decamfound"), seeds=SEEDS,
                    scm=ScmConfig(p=50, sigma_h_sq=0.4, linear_only=False, exclude_linear_trend=True), N=100)
    s = summarize(run_task(spec))
    d, v, pb = (s[m]["prop_wrong_beats_true"] for m in ("decamfound", "vanilla_bic", "pcss_bic"))
    ok = d < v and d < pb
    _record(acceptance_log, "6 correct parent deletion ordering", ok,
            f"decamfound {d:.3f} < vanilla_bic {v:.3f} and < pcss_bic {pb:.3f}")
    assert ok


def _candidate_reports(sigma_h_sq):
    spec = TaskSpec("candidate_dags", M=20, methods=("vanilla_bic", "pcss_bic"), seeds=SEEDS,
                    scm=ScmConfig(p=5, sigma_h_sq=sigma_h_sq, expected_neighborhood=2.0), N=2000)
    return run_task(spec)


@pytest.mark.slow
def test_c07a_candidate_dags_unconfounded(acceptance_log):
    reports = _candidate_reports(0.0)
    hits = sum(r.methods["vanilla_bic"].map_shd == 0 for r in reports)
    ok = hits >= 8
    _record(acceptance_log, "7a candidate DAGs, no confounding", ok, f"vanilla_bic MAP SHD = 0 in {hits}/10 seeds")
    assert ok


@pytest.mark.slow
def test_c07b_candidate_dags_confounded(acceptance_log):
    s = summarize(_candidate_reports(0.5))
    pb, v = s["pcss_bic"]["avg_posterior_shd"], s["vanilla_bic"]["avg_posterior_shd"]
    ok = pb <= v
    _record(acceptance_log, "7b candidate DAGs, confounded", ok,
            f"median avg posterior SHD pcss_bic {pb:.3f} <= vanilla_bic {v:.3f}")
    assert ok


@pytest.mark.slow
def test_c08_degeneracy_identities(acceptance_log):
    _, data = generate(ScmConfig(p=10, linear_only=False, expected_neighborhood=3.0), 100, 8)
    X = data.X
    zero_s = Scorer(X, np.zeros_like(X))
    no_h = Scorer(X, H=np.zeros((X.shape[0], 0)))
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(10):
        j = int(rng.integers(10))
        others = [i for i in range(10) if i != j]
        P = sorted(rng.choice(others, size=int(rng.integers(0, 4)), replace=False).tolist())
        cam = zero_s("cam", j, P)
        mismatches += zero_s("decamfound", j, P) != cam
        mismatches += no_h("cam_obs", j, P) != no_h("cam", j, P)
    ok = mismatches == 0
    _record(acceptance_log, "8 degeneracy identities", ok, f"{mismatches} inexact pairs out of 20 comparisons")
    assert ok


def _digests(out):
    return json.loads((out / "manifest.json").read_text())["outputs"]


def test_c09_cli_determinism(acceptance_log, tmp_path):
    gen = tmp_path / "gen.toml"
    gen.write_text("seed = 7\n[scm]\np = 6\nexpected_neighborhood = 2.0\n[generate]\nN = 40\n")
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    assert main(["generate", "--config", str(gen), "--out", str(data_dir)]) == EXIT_OK
    sets = tmp_path / "sets.json"
    sets.write_text(json.dumps([{"target": 3, "parents": [0, 1]}, {"target": 5, "parents": []}]))
    score_cfg = tmp_path / "score.toml"
    score_cfg.write_text("[score]\ngp_iters = 10\n")
    bench_cfg = tmp_path / "bench.toml"
    bench_cfg.write_text("seed = 1\n[bench]\ntask = \"wrong_parent_addition\"\nM = 5\nN = 60\nn_seeds = 2\n"
                         "[bench.scm]\np = 20\n")
    mse_cfg = tmp_path / "mse.toml"
    mse_cfg.write_text("[mse_report]\np = [40, 80]\nsigma_h_sq = [0.4]\nn_seeds = 2\n")
    X = str(data_dir / "X.csv")
    commands = {
        "generate": ["generate", "--config", str(gen)],
        "pcss": ["pcss", "--data", X, "--m", "2"],
        "score": ["score", "--config", str(score_cfg), "--data", X, "--parent-sets", str(sets), "--kind", "decamfound"],
        "bench": ["bench", "--config", str(bench_cfg)],
        "mse-report": ["mse-report", "--config", str(mse_cfg)],
    }
    stable = []
    for name, argv in commands.items():
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}-{rep}"
            out.mkdir()
            assert main(argv + ["--out", str(out)]) == EXIT_OK
            runs.append(_digests(out))
        stable.append(runs[0] == runs[1] and bool(runs[0]))
    ok = all(stable)
    _record(acceptance_log, "9 CLI determinism", ok, f"{sum(stable)}/{len(stable)} commands byte-identical")
    assert ok


def _normalization(linear_only):
    worst_var = worst_mean = 0.0
    n_nodes = 0
    for seed in range(5):
        inst, data = generate(ScmConfig(p=50, linear_only=linear_only), 10_000, seed)
        conf = inst.attachment.edges.any(axis=0)
        for j in range(inst.p):
            if conf[j] and inst.dag.parents[j]:
                n_nodes += 1
                worst_var = max(worst_var, abs(data.X[:, j].var() - 1.0))
                worst_mean = max(worst_mean, abs(data.X[:, j].mean()))
    return worst_var, worst_mean, n_nodes


@pytest.mark.parametrize("linear_only", [True, False], ids=["linear", "nonlinear"])
def test_c10_normalization(acceptance_log, linear_only):
    worst_var, worst_mean, n = _normalization(linear_only)
    ok = worst_var <= 0.05 and worst_mean <= 0.05
    kind = "linear" if linear_only else "non-linear"
    _record(acceptance_log, f"10 unit variance / zero mean ({kind})", ok,
            f"max |Var-1| {worst_var:.4f}, max |mean| {worst_mean:.4f} over {n} nodes")
    assert ok
