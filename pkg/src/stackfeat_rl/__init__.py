"""Policy-gradient tuned dual-criterion feature selection."""

from .accumulator import Accumulator, dual_select, normalized_estimates, state_matrix
from .baselines import (StabilityConfig, enet_select, mrmr, stability_selection,
                        stackfeat_fixed)
from .classifier import fit_logreg, panel_auc, panel_cv_auc, roc_auc
from .core import (DataError, ExpressionDataset, FitCounter, FitResult, FoldPlan, derive_seed,
                   load_dataset, make_folds, standardize_train_apply, write_dataset)
from .enet import PenaltyVector, cv_select_alpha, fit_enet, fit_weighted_enet
from .episode import EpisodeConfig, run_episode, run_fold
from .harness import (benchmark, consensus_panel, jaccard, make_selector, nested_cv,
                      overlap_coefficient, paired_t_test, summarize)
from .network import (InteractionNetwork, extract_modules, load_network, posterior,
                      posterior_from_psi)
from .policy import PolicyParams, gene_penalties, m_frac, update_policy
from .synth import SynthSpec, gen_correlated_shadow, gen_linear, gen_sign_inconsistent

__version__ = "0.1.0"

__all__ = [
    "Accumulator", "DataError", "EpisodeConfig", "ExpressionDataset", "FitCounter",
    "FitResult", "FoldPlan", "InteractionNetwork", "PenaltyVector", "PolicyParams",
    "StabilityConfig", "SynthSpec", "benchmark", "consensus_panel", "cv_select_alpha",
    "derive_seed", "dual_select", "enet_select", "extract_modules", "fit_enet", "fit_logreg",
    "fit_weighted_enet", "gen_correlated_shadow", "gen_linear", "gen_sign_inconsistent",
    "gene_penalties", "jaccard", "load_dataset", "load_network", "m_frac", "make_folds",
    "make_selector", "mrmr", "nested_cv", "normalized_estimates", "overlap_coefficient",
    "paired_t_test", "panel_auc", "panel_cv_auc", "posterior", "posterior_from_psi",
    "roc_auc", "run_episode", "run_fold", "stability_selection", "stackfeat_fixed",
    "standardize_train_apply", "state_matrix", "summarize", "update_policy", "write_dataset",
]
