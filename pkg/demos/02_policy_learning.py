"""Watch the policy parameters move across episodes on one training set.

    python demos/02_policy_learning.py
"""

import numpy as np

from stackfeat_rl import EpisodeConfig, SynthSpec, gen_linear, m_frac, run_fold

ds, truth = gen_linear(SynthSpec.planted(200, 100, 5, 1.0, 1.0, seed=1))
run = run_fold(ds, EpisodeConfig(seed=1))

print(f"anchored alpha {run.alpha:.4f}, {run.counter.total} fits in total")
print(" ep  iters  genes  reward   m_frac   theta")
for e in run.episodes:
    theta = " ".join(f"{v:+.3f}" for v in e.theta_after)
    print(f"{e.episode:3d}  {e.iterations_run:5d}  {e.panel.size:5d}  {e.reward:.4f}  "
          f"{e.m_frac:.3f}   {theta}")

planted = set(truth["support"])
print("\nfinal panel:", sorted(run.panel.tolist()))
print("planted recovered:", len(planted & set(run.panel.tolist())), "of", len(planted))
print("m_frac at the learned theta5:", round(m_frac(run.theta[4]), 3))

# the bias feature tends to grow while most genes stay unselected
print("theta5 sign:", int(np.sign(run.theta[4])))
