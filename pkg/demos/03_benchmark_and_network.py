"""Shared-split benchmark of every method, then a posterior interaction network.

The prior network here is random; with real data it would come from a
protein interaction database exported as ``name_a, name_b, score`` rows.

    python demos/03_benchmark_and_network.py
"""

import itertools

import numpy as np

from stackfeat_rl import (InteractionNetwork, SynthSpec, benchmark, extract_modules,
                          gen_linear, jaccard, make_selector, posterior_from_psi)
from stackfeat_rl.episode import EpisodeConfig
from stackfeat_rl.harness import benchmark_payload, render_table

ds, truth = gen_linear(SynthSpec.planted(160, 40, 4, 1.2, 0.8, seed=2))

selectors = {
    "StackFeatRL": make_selector("StackFeatRL", config=EpisodeConfig(episodes=5)),
    "StackFeat": make_selector("StackFeat"),
    "ElasticNet": make_selector("ElasticNet"),
    "mRMR": make_selector("mRMR", k="matched"),
}
result = benchmark(ds, selectors, F=5, seed=2)
print(render_table(benchmark_payload(result, deterministic=True)))

cons = {o.method_name: set(o.consensus_panel) for o in result.outcomes}
for a, b in itertools.combinations(cons, 2):
    print(f"Jaccard {a} vs {b}: {jaccard(cons[a], cons[b]):.2f}")

# %% posterior network from the co-selection counts of the first outer fold
rng = np.random.default_rng(0)
p = ds.n_features
edges = {(i, j): float(rng.uniform(0.7, 1.0)) for i, j in itertools.combinations(range(p), 2)
         if rng.random() < 0.05 or (i < 4 and j < 4)}
prior = InteractionNetwork(edges, ds.feature_names)
index = {n: k for k, n in enumerate(ds.feature_names)}
psi = {(index[a], index[b]): v
       for a, b, v in result.outcome("StackFeatRL").per_fold[0].extra["psi"]}
modules = extract_modules(posterior_from_psi(prior, psi), min_psi=0.5)
for m in modules:
    print(f"module of {len(m.genes)}: {' '.join(m.genes)}")
