"""Gaussian BIC parent-set scores, with and without deconfounding.

With a hidden confounder, two confounded nodes look correlated even when
neither causes the other. A BIC score on the raw covariance then rewards the
spurious parent. Scoring the residuals after removing the estimated
confounder signal does not.
"""

import numpy as np

from deconfound import PcssConfig, Scorer, ScmConfig, generate, pcss

# %%
instance, data = generate(ScmConfig(p=100, sigma_h_sq=0.4), N=100, seed=2)
scorer = Scorer(data.X, pcss(data.X, PcssConfig(M=1)))
confounded = instance.attachment.confounded_nodes()
target = next(int(j) for j in confounded if instance.dag.parents[j])
truth = list(instance.dag.parents[target])
print(f"target node {target}, true parents {truth}")

# %%
# Add each other confounded node as a wrong parent and count how often the
# wrong set outscores the true one.
wrong = [int(j) for j in confounded if j != target and j not in truth][:30]
for kind in ("vanilla_bic", "pcss_bic"):
    base = scorer(kind, target, truth)
    wins = sum(scorer(kind, target, truth + [w]) > base for w in wrong)
    print(f"{kind:12s} wrong parent wins {wins}/{len(wrong)}")
