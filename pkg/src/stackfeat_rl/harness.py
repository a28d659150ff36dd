"""Nested cross-validation benchmark and its summary statistics.

Every selector in a benchmark sees the same outer fold plan and only the
outer-training slice of the data; the outer-test slice is touched solely by
the evaluation step.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import betainc

from .baselines import StabilityConfig, enet_select, mrmr, stability_selection, stackfeat_fixed
from .classifier import DEFAULT_L2, panel_auc
from .core import ExpressionDataset, FitCounter, FoldPlan, derive_seed, make_folds
from .enet import DEFAULT_L1_RATIO
from .episode import EpisodeConfig, run_fold

EMPTY_PANEL_AUC = 0.5


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------

@dataclass
class Selection:
    """A selector's answer on one outer-training slice."""

    panel: np.ndarray
    extra: dict = field(default_factory=dict)


def _as_selection(out) -> Selection:
    if isinstance(out, Selection):
        out.panel = np.unique(np.asarray(out.panel, dtype=np.int64))
        return out
    return Selection(np.unique(np.asarray(out, dtype=np.int64)))


@dataclass
class StackFeatRLSelector:
    config: EpisodeConfig = field(default_factory=EpisodeConfig)
    network: object = None
    name: str = "StackFeatRL"

    def __call__(self, train, seed, counter):
        run = run_fold(train, replace(self.config, seed=seed), self.network, counter)
        i, j, v = run.final_accumulator.psi_pairs()
        names = train.feature_names
        return Selection(run.panel, {
            "alpha": run.alpha,
            "theta": run.theta.tolist(),
            "baseline": run.baseline,
            "theta_trajectory": run.theta_trajectory,
            "episodes": [e.as_dict(names) for e in run.episodes],
            "psi": [[names[a], names[b], float(x)] for a, b, x in zip(i, j, v)],
        })


@dataclass
class StackFeatSelector:
    config: EpisodeConfig = field(default_factory=EpisodeConfig)
    network: object = None
    penalty_mode: str = "uniform"
    m_frac_value: float = 0.25
    name: str = "StackFeat"

    def __call__(self, train, seed, counter):
        return stackfeat_fixed(train, replace(self.config, seed=seed), counter, self.network,
                               self.penalty_mode, self.m_frac_value)


@dataclass
class ElasticNetSelector:
    k_cv: int = 5
    n_alphas: int = 100
    l1_ratio: float = DEFAULT_L1_RATIO
    name: str = "ElasticNet"

    def __call__(self, train, seed, counter):
        panel, alpha = enet_select(train, seed, self.k_cv, self.n_alphas, self.l1_ratio,
                                   counter, return_alpha=True)
        return Selection(panel, {"alpha": alpha})


@dataclass
class StabilitySelector:
    config: StabilityConfig = field(default_factory=StabilityConfig)
    name: str = "Stability"

    def __call__(self, train, seed, counter):
        return stability_selection(train, self.config, seed, counter)


@dataclass
class MRMRSelector:
    """``k="matched"`` must be resolved with :meth:`matched_to` before use."""

    k: int | str = 10
    n_bins: int = 10
    name: str = "mRMR"

    def matched_to(self, outcome: "SelectorOutcome") -> "MRMRSelector":
        mean_size = np.mean([len(r.panel) for r in outcome.per_fold])
        return replace(self, k=max(1, int(round(mean_size))))

    def __call__(self, train, seed, counter):
        if not isinstance(self.k, int):
            raise ValueError("mRMR k is unresolved; match it to a reference method first")
        order = mrmr(train, min(self.k, train.n_features), self.n_bins)
        return Selection(order, {"order": [train.feature_names[j] for j in order]})


@dataclass
class AllFeaturesSelector:
    name: str = "AllFeatures"

    def __call__(self, train, seed, counter):
        return np.arange(train.n_features)


SELECTORS: dict[str, Callable[..., object]] = {
    "StackFeatRL": StackFeatRLSelector,
    "StackFeat": StackFeatSelector,
    "ElasticNet": ElasticNetSelector,
    "Stability": StabilitySelector,
    "mRMR": MRMRSelector,
    "AllFeatures": AllFeaturesSelector,
}


def make_selector(name: str, **params):
    try:
        factory = SELECTORS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; registered methods: "
                         f"{', '.join(SELECTORS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# nested CV
# ---------------------------------------------------------------------------

@dataclass
class FoldRecord:
    fold: int
    auc: float
    panel: tuple[str, ...]
    runtime: float
    fit_count: dict
    empty: bool = False
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"fold": self.fold, "auc": self.auc, "panel": list(self.panel),
                "n_genes": len(self.panel), "runtime": self.runtime,
                "fit_count": dict(self.fit_count), "empty_panel": self.empty,
                "extra": self.extra}


@dataclass
class SelectorOutcome:
    method_name: str
    per_fold: list[FoldRecord]
    consensus_panel: tuple[str, ...]
    consensus_threshold: tuple[int, int] = (6, 10)

    @property
    def aucs(self) -> np.ndarray:
        return np.array([r.auc for r in self.per_fold])

    @property
    def panels(self) -> list[tuple[str, ...]]:
        return [r.panel for r in self.per_fold]

    @property
    def fit_count(self) -> dict:
        keys = ("single_fits", "cv_fits", "total")
        return {k: sum(r.fit_count.get(k, 0) for r in self.per_fold) for k in keys}

    def as_dict(self) -> dict:
        return {"method": self.method_name,
                "consensus_panel": list(self.consensus_panel),
                "consensus_threshold": list(self.consensus_threshold),
                "summary": summarize(self),
                "fit_count": self.fit_count,
                "per_fold": [r.as_dict() for r in self.per_fold]}


def outer_plan(dataset: ExpressionDataset, F: int, seed: int, stratified: bool = True) -> FoldPlan:
    if F < 2:
        raise ValueError("need F >= 2 outer folds")
    return make_folds(dataset.labels, F, derive_seed(seed, "outer"), stratified)


def _evaluate_fold(dataset, selector, plan, fold, seed, l2_strength) -> FoldRecord:
    tr, te = plan.train_test(fold)
    train = dataset.rows(tr)
    counter = FitCounter()
    start = time.perf_counter()
    sel = _as_selection(selector(train, derive_seed(seed, "outer_fold", fold), counter))
    runtime = time.perf_counter() - start
    names = tuple(dataset.feature_names[j] for j in sel.panel)
    if sel.panel.size == 0:
        auc = EMPTY_PANEL_AUC
    else:
        auc = panel_auc(train, dataset.rows(te), sel.panel, l2_strength)
    return FoldRecord(fold, float(auc), names, runtime, counter.as_dict(),
                      sel.panel.size == 0, sel.extra)


def nested_cv(dataset: ExpressionDataset, selector, F: int = 10, seed: int = 0,
              name: str | None = None, plan: FoldPlan | None = None, jobs: int = 1,
              consensus: tuple[int, int] = (6, 10),
              l2_strength: float = DEFAULT_L2) -> SelectorOutcome:
    """Run ``selector`` on each outer-training slice and score its panel on
    the held-out slice with the shared logistic classifier.

    ``selector(train, seed, counter)`` returns panel indices or a
    :class:`Selection`.  An empty panel is recorded with AUC 0.5 and flagged.
    """
    dataset.require_both_classes()
    plan = plan if plan is not None else outer_plan(dataset, F, seed)
    if plan.k != F:
        raise ValueError(f"plan has {plan.k} folds, expected F={F}")
    args = [(dataset, selector, plan, f, seed, l2_strength) for f in range(F)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_evaluate_fold, *zip(*args)))
    else:
        records = [_evaluate_fold(*a) for a in args]
    name = name or getattr(selector, "name", None) or getattr(selector, "__name__", "selector")
    num, den = consensus
    return SelectorOutcome(name, records, consensus_panel([r.panel for r in records], num, den),
                           (num, den))


@dataclass
class BenchmarkResult:
    plan: FoldPlan
    outcomes: list[SelectorOutcome]
    comparisons: list["Comparison"]
    reference: str

    def outcome(self, name: str) -> SelectorOutcome:
        for o in self.outcomes:
            if o.method_name == name:
                return o
        raise KeyError(name)


def benchmark(dataset: ExpressionDataset, selectors: dict[str, object], F: int = 10,
              seed: int = 0, jobs: int = 1, reference: str | None = None,
              consensus: tuple[int, int] = (6, 10),
              l2_strength: float = DEFAULT_L2) -> BenchmarkResult:
    """Shared-split benchmark over named selectors.

    mRMR selectors with ``k="matched"`` are run after the reference method
    and take its mean panel size.  Comparisons are paired t-tests on the
    per-fold AUCs of every method against the reference (the first method
    unless given).
    """
    if not selectors:
        raise ValueError("no methods to benchmark")
    names = list(selectors)
    reference = reference or names[0]
    if reference not in selectors:
        raise ValueError(f"reference method {reference!r} is not in the benchmark")
    plan = outer_plan(dataset, F, seed)
    matched = [n for n in names if getattr(selectors[n], "k", None) == "matched"]
    if reference in matched:
        raise ValueError("the reference method cannot itself be matched")
    done: dict[str, SelectorOutcome] = {}
    for n in [n for n in names if n not in matched] + matched:
        sel = selectors[n]
        if n in matched:
            sel = sel.matched_to(done[reference])
        done[n] = nested_cv(dataset, sel, F, seed, n, plan, jobs, consensus, l2_strength)
    outcomes = [done[n] for n in names]
    ref = done[reference]
    comparisons = [compare(ref, o) for o in outcomes if o.method_name != reference]
    return BenchmarkResult(plan, outcomes, comparisons, reference)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def consensus_panel(per_fold_panels, threshold_num: int = 6, threshold_den: int = 10,
                    F: int | None = None) -> tuple[str, ...]:
    """Features present in at least ``ceil(F * num / den)`` panels."""
    panels = [set(p) for p in per_fold_panels]
    if not panels:
        raise ValueError("need at least one panel")
    if threshold_den <= 0 or not 0 <= threshold_num <= threshold_den:
        raise ValueError("threshold must satisfy 0 <= num <= den, den > 0")
    F = len(panels) if F is None else F
    need = max(1, -(-F * threshold_num // threshold_den))
    counts: dict = {}
    for p in panels:
        for g in p:
            counts[g] = counts.get(g, 0) + 1
    return tuple(sorted(g for g, c in counts.items() if c >= need))


@dataclass(frozen=True)
class Comparison:
    method_a: str
    method_b: str
    mean_diff: float
    t_statistic: float
    p_value: float
    n: int

    def as_dict(self) -> dict:
        return {"method_a": self.method_a, "method_b": self.method_b,
                "mean_diff": self.mean_diff, "t": self.t_statistic,
                "p": self.p_value, "n": self.n}


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_t_test(a, b, method_a: str = "a", method_b: str = "b") -> Comparison:
    """Two-sided paired t-test on ``a - b`` with ``n - 1`` degrees of freedom.

    Constant nonzero differences give ``t = +-inf, p = 0``; all-zero
    differences give ``t = 0, p = 1``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            t, p = 0.0, 1.0
        else:
            t, p = math.copysign(math.inf, mean), 0.0
    else:
        t = mean / (sd / math.sqrt(n))
        p = student_t_sf2(t, n - 1)
    return Comparison(method_a, method_b, mean, float(t), min(1.0, max(0.0, p)), n)


def compare(a: SelectorOutcome, b: SelectorOutcome) -> Comparison:
    return paired_t_test(a.aucs, b.aucs, a.method_name, b.method_name)


def jaccard(p1, p2) -> float:
    """``|A & B| / |A | B|``; two empty sets count as identical."""
    s1, s2 = set(p1), set(p2)
    union = s1 | s2
    return 1.0 if not union else len(s1 & s2) / len(union)


def overlap_coefficient(p1, p2) -> float:
    """``|A & B| / min(|A|, |B|)``; 1 when either set is empty."""
    s1, s2 = set(p1), set(p2)
    small = min(len(s1), len(s2))
    return 1.0 if small == 0 else len(s1 & s2) / small


def summarize(outcome: SelectorOutcome | list[FoldRecord]) -> dict:
    """Mean, sample std, and median AUC plus mean panel size."""
    records = outcome.per_fold if isinstance(outcome, SelectorOutcome) else list(outcome)
    if not records:
        raise ValueError("no folds to summarise")
    aucs = np.array([r.auc for r in records])
    single = aucs.size == 1
    return {
        "mean_auc": float(aucs.mean()),
        "std_auc": 0.0 if single else float(aucs.std(ddof=1)),
        "median_auc": float(np.median(aucs)),
        "mean_genes": float(np.mean([len(r.panel) for r in records])),
        "n_folds": int(aucs.size),
        "single_fold": single,
        "empty_folds": int(sum(r.empty for r in records)),
    }


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _strip_runtime(d: dict) -> dict:
    for r in d["per_fold"]:
        r["runtime"] = 0.0
    return d


def benchmark_payload(result: BenchmarkResult, config: dict | None = None,
                      deterministic: bool = False) -> dict:
    outcomes = [o.as_dict() for o in result.outcomes]
    if deterministic:
        outcomes = [_strip_runtime(o) for o in outcomes]
    return {
        "config": config or {},
        "reference": result.reference,
        "outer_folds": {"k": result.plan.k, "seed": result.plan.seed,
                        "assignments": result.plan.assignments.tolist()},
        "methods": outcomes,
        "comparisons": [c.as_dict() for c in result.comparisons],
    }


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def write_json(path, payload: dict):
    # inf is written as a string so the file stays strict JSON
    text = json.dumps(_finite(payload), indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n")


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def write_folds_csv(path, outcomes: list[SelectorOutcome], deterministic: bool = False):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "fold", "auc", "n_genes", "runtime"])
        for o in outcomes:
            for r in o.per_fold:
                w.writerow([o.method_name, r.fold, repr(r.auc), len(r.panel),
                            "0.0" if deterministic else f"{r.runtime:.6f}"])


def write_panels_csv(path, outcomes: list[SelectorOutcome]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "fold", "feature"])
        for o in outcomes:
            for r in o.per_fold:
                for g in r.panel:
                    w.writerow([o.method_name, r.fold, g])
            for g in o.consensus_panel:
                w.writerow([o.method_name, "consensus", g])


def render_table(payload: dict) -> str:
    """Plain-text summary and comparison tables from a benchmark payload."""
    rows = [(m["method"], m["summary"], len(m["consensus_panel"])) for m in payload["methods"]]
    width = max([len("Method")] + [len(n) for n, _, _ in rows])
    lines = [f"{'Method':<{width}}  {'Mean AUC':>8}  {'Std':>6}  {'Median':>6}  "
             f"{'Avg genes':>9}  {'Cons.':>5}"]
    for n, s, cons in rows:
        lines.append(f"{n:<{width}}  {s['mean_auc']:>8.3f}  {s['std_auc']:>6.3f}  "
                     f"{s['median_auc']:>6.3f}  {s['mean_genes']:>9.1f}  {cons:>5d}")
    comps = payload.get("comparisons", [])
    if comps:
        ref = payload.get("reference", comps[0]["method_a"])
        lines += ["", f"Paired t-test vs {ref} (two-sided, uncorrected)",
                  f"{'Method':<{width}}  {'Diff':>7}  {'t':>7}  {'p':>7}"]
        for c in comps:
            t = float(c["t"])
            lines.append(f"{c['method_b']:<{width}}  {-c['mean_diff']:>+7.3f}  "
                         f"{-t:>+7.2f}  {float(c['p']):>7.4f}")
    return "\n".join(lines) + "\n"
