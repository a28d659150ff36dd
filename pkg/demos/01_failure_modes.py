"""Why selection needs both a frequency and a magnitude criterion.

Two engineered features defeat single-criterion rules: one whose sign flips
between resamples (frequent, mean near zero) and one shadowed by a highly
correlated twin (consistent sign, rarely chosen).  Run from the repo root:

    python demos/01_failure_modes.py
"""

import numpy as np

from stackfeat_rl import (EpisodeConfig, PolicyParams, SynthSpec, gen_correlated_shadow,
                          gen_sign_inconsistent, normalized_estimates, run_episode,
                          standardize_train_apply)
from stackfeat_rl.baselines import StabilityConfig, stability_scores
from stackfeat_rl.episode import anchor_alpha

config = EpisodeConfig(l1_ratio=1.0, m_frac_override=0.25, max_iterations=40, tolerance=1e-12)


def episode(ds):
    X, _, _, _ = standardize_train_apply(ds.matrix)
    return run_episode(ds, anchor_alpha(X, ds.labels, config), PolicyParams(), config)


# %% sign-inconsistent copy of feature 0
effects = {j: (1.0 if j % 2 == 0 else -1.0) for j in range(6)}
ds, flip = gen_sign_inconsistent(SynthSpec(200, 10, effects, 1.0, flip_feature=9,
                                           flip_source=0, seed=0))
res = episode(ds)
w, c = normalized_estimates(res.accumulator)
print(f"flip feature: selection frequency {c[flip]:.2f}, mean coefficient {w[flip]:+.3f}")
print(f"its source:   selection frequency {c[0]:.2f}, mean coefficient {w[0]:+.3f}")
print("frequency >= 0.5 keeps it:", c[flip] >= 0.5)
print("stability score:", round(float(stability_scores(ds, StabilityConfig())[flip]), 2))
print("dual panel:", [ds.feature_names[j] for j in res.panel])

# %% correlated shadow of feature 0
ds, shadow = gen_correlated_shadow(SynthSpec(200, 50, {0: 1.0, 1: -1.0, 2: 1.0}, 0.5,
                                             shadow_feature=49, twin_feature=0, seed=0))
res = episode(ds)
w, c = normalized_estimates(res.accumulator)
print(f"\nshadow: frequency {c[shadow]:.2f}, twin: frequency {c[0]:.2f}")
print("correlation with twin:", round(float(np.corrcoef(ds.matrix[:, 0],
                                                        ds.matrix[:, shadow])[0, 1]), 3))
print("shadow in dual panel:", shadow in res.panel.tolist())
