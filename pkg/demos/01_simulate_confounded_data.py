"""Simulating a causal additive model with a hidden confounder.

Draw a random DAG, attach one latent variable to most nodes, and generate
data whose nodes all have unit variance. The confounder explains a fixed
share of each confounded node's variance.
"""

import numpy as np

from deconfound import ScmConfig, generate

# %%
# A linear model on 30 nodes. ``sigma_h_sq`` is the share of variance the
# confounder explains in nodes that have both kinds of parents.
config = ScmConfig(p=30, K=1, sigma_h_sq=0.4, expected_neighborhood=3.0)
instance, data = generate(config, N=5000, seed=0)
print(f"{instance.dag.n_edges} edges, {instance.attachment.edges.sum()} confounder links")

# %%
# Every node comes out with (close to) unit variance and zero mean.
print("node variances:", np.round(data.X.var(axis=0)[:8], 3))
print("node means:    ", np.round(data.X.mean(axis=0)[:8], 3))

# %%
# For linear models the conditional mean of each node given the confounder is
# available in closed form. Subtracting it removes the confounding.
both = [j for j in range(config.p) if instance.dag.parents[j] and instance.attachment.edges[:, j].any()]
j = both[0]
share = instance.confounder_component(j, data.H).var()
print(f"node {j}: confounder share of variance {share:.3f} (target {config.sigma_h_sq})")
resid = data.X - data.S_true
print(f"corr(h, x_{j}) = {np.corrcoef(data.H[:, 0], data.X[:, j])[0, 1]:+.3f}, "
      f"after removing s_{j}: {np.corrcoef(data.H[:, 0], resid[:, j])[0, 1]:+.3f}")

# %%
# Non-linear models mix linear, seasonal and quadratic trends.
nl_config = ScmConfig(p=30, linear_only=False, expected_neighborhood=3.0)
nl_instance, nl_data = generate(nl_config, N=2000, seed=1)
kinds = [t.kind.value for t in nl_instance.observed_trends.values()]
print({k: kinds.count(k) for k in sorted(set(kinds))})
