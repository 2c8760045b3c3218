"""The three evaluation tasks on small simulated problems.

Wrong parent addition asks whether a score prefers the true parent set over
the true set plus a spurious confounded node. Correct parent deletion asks
whether it prefers the true set over the set with one true parent removed.
The candidate-DAG task ranks the true graph among randomly perturbed copies.
"""

from deconfound import ScmConfig, TaskSpec
from deconfound.bench import run_task, summarize

# %%
spec = TaskSpec("wrong_parent_addition", M=30, methods=("vanilla_bic", "pcss_bic"),
                seeds=range(5), scm=ScmConfig(p=100), N=100)
for method, metrics in summarize(run_task(spec)).items():
    print(f"{method:12s} median share of wrong sets preferred: {metrics['prop_wrong_beats_true']:.2f}")

# %%
spec = TaskSpec("correct_parent_deletion", methods=("vanilla_bic", "pcss_bic"),
                seeds=range(5), scm=ScmConfig(p=50), N=100)
for method, metrics in summarize(run_task(spec)).items():
    print(f"{method:12s} median share of deletions preferred: {metrics['prop_wrong_beats_true']:.2f}")

# %%
spec = TaskSpec("candidate_dags", M=20, methods=("vanilla_bic",), seeds=range(5),
                scm=ScmConfig(p=5, sigma_h_sq=0.0, expected_neighborhood=2.0), N=2000)
for rep in run_task(spec):
    res = rep.methods["vanilla_bic"]
    print(f"seed {rep.seed}: posterior-weighted SHD {res.avg_posterior_shd:.3f}, best-scoring SHD {res.map_shd}")
