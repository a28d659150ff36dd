"""Command-line entry point: ``stackfeat-rl {select,bench,synth,network,report}``.

Settings come from an optional INI file (one section per component) and are
overridden by flags.  The effective settings are echoed into every output.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .baselines import StabilityConfig
from .core import DataError, derive_seed, load_dataset, write_dataset
from .episode import EpisodeConfig
from .harness import (SELECTORS, benchmark, benchmark_payload, make_selector, render_table,
                      write_folds_csv, write_json, write_panels_csv)
from .network import (InteractionNetwork, extract_modules, load_network, posterior_from_psi,
                      write_modules_json, write_posterior_tsv)
from .synth import SynthSpec, gen_correlated_shadow, gen_linear, gen_sign_inconsistent

PSI_FILE = "psi.json"
REPORT_FILE = "report.json"


# ---------------------------------------------------------------------------
# settings schema
# ---------------------------------------------------------------------------

def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return float(s)


def _int_or_matched(s):
    return "matched" if str(s).strip().lower() == "matched" else int(s)


def _methods(s):
    return [m.strip() for m in str(s).split(",") if m.strip()]


def _dataclass_schema(cls, skip=()):
    out = {}
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, bool):
            conv = _bool
        elif isinstance(default, int):
            conv = int
        elif isinstance(default, float):
            conv = float
        elif default is None:
            conv = _opt_float
        elif isinstance(default, str):
            conv = str
        else:
            continue
        out[f.name] = (conv, default)
    return out


SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "matrix": (str, None), "labels": (str, None), "network": (str, None),
        "transposed": (_bool, False), "methods": (_methods, ["StackFeatRL"]),
        "reference": (str, None), "outer_folds": (int, 10), "seed": (int, 0),
        "out": (str, "results"), "jobs": (int, 1), "deterministic": (_bool, False),
        "consensus_num": (int, 6), "consensus_den": (int, 10),
    },
    "episode": _dataclass_schema(EpisodeConfig, skip=("seed",)),
    "stability": {"n_lambdas": (int, 25), "lambda_min": (float, 1e-3),
                  "lambda_max": (float, 1e-1), "n_subsamples": (int, 100),
                  "threshold": (float, 0.9), "subsample_fraction": (float, 0.5)},
    "mrmr": {"k": (_int_or_matched, "matched"), "n_bins": (int, 10)},
    "elasticnet": {"k_cv": (int, 5), "n_alphas": (int, 100), "l1_ratio": (float, 0.5)},
    "stackfeat": {"penalty_mode": (str, "uniform"), "m_frac": (float, 0.25)},
    "network": {"raw_threshold": (float, 700.0), "binary": (_bool, False),
                "min_psi": (float, 0.5), "psi": (str, None), "fold": (str, "mean")},
}


def _flag(section, key):
    return f"--{key.replace('_', '-')}" if section in ("run", "episode") else \
        f"--{section}-{key.replace('_', '-')}"


def _dest(section, key):
    return f"{section}__{key}"


def load_settings(config_path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the INI file, then flag overrides (``section__key``)."""
    settings = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    if config_path:
        parser = configparser.ConfigParser()
        path = Path(config_path)
        if not path.exists():
            raise DataError(f"{path}: config file not found")
        parser.read(path)
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise DataError(f"{path}: unknown section [{sec}]")
            for key, raw in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise DataError(f"{path}: unknown key {key!r} in [{sec}]")
                try:
                    settings[sec][key] = SCHEMA[sec][key][0](raw)
                except ValueError as exc:
                    raise DataError(f"{path}: [{sec}] {key}: {exc}") from None
    for dest, value in (overrides or {}).items():
        if value is None:
            continue
        sec, key = dest.split("__", 1)
        settings[sec][key] = value
    return settings


def _add_schema_flags(parser, sections):
    for sec in sections:
        group = parser.add_argument_group(sec)
        for key, (conv, default) in SCHEMA[sec].items():
            group.add_argument(_flag(sec, key), dest=_dest(sec, key), type=conv, default=None,
                               metavar=key.upper(), help=f"(default: {default})")


def _overrides(args) -> dict:
    return {k: v for k, v in vars(args).items() if "__" in k}


def episode_config(settings, seed=None) -> EpisodeConfig:
    ep = dict(settings["episode"])
    return EpisodeConfig(seed=settings["run"]["seed"] if seed is None else seed, **ep)


def stability_config(settings) -> StabilityConfig:
    s = settings["stability"]
    return StabilityConfig(s["n_lambdas"], (s["lambda_min"], s["lambda_max"]),
                           s["n_subsamples"], s["threshold"], s["subsample_fraction"])


def build_selectors(settings, methods, network=None) -> dict:
    unknown = [m for m in methods if m not in SELECTORS]
    if unknown:
        raise ValueError(f"unknown method(s) {', '.join(unknown)}; registered methods: "
                         f"{', '.join(SELECTORS)}")
    ep = episode_config(settings)
    params = {
        "StackFeatRL": dict(config=ep, network=network),
        "StackFeat": dict(config=ep, network=network,
                          penalty_mode=settings["stackfeat"]["penalty_mode"],
                          m_frac_value=settings["stackfeat"]["m_frac"]),
        "ElasticNet": dict(settings["elasticnet"]),
        "Stability": dict(config=stability_config(settings)),
        "mRMR": dict(settings["mrmr"]),
        "AllFeatures": {},
    }
    return {m: make_selector(m, **params[m]) for m in methods}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load(settings):
    run = settings["run"]
    if not run["matrix"] or not run["labels"]:
        raise DataError("both a matrix and a labels file are required")
    ds = load_dataset(run["matrix"], run["labels"], run["transposed"])
    network = None
    if run["network"]:
        network = load_network(run["network"], ds.feature_names,
                               settings["network"]["raw_threshold"],
                               settings["network"]["binary"])
    return ds, network


def _echo(settings) -> dict:
    echo = json.loads(json.dumps(settings))
    echo["resolved_seed"] = settings["run"]["seed"]
    echo["outer_seed"] = derive_seed(settings["run"]["seed"], "outer")
    return echo


def _validate_json(path):
    json.loads(Path(path).read_text())


def _run(settings, methods, write_psi: bool) -> int:
    ds, network = _load(settings)
    run = settings["run"]
    out = Path(run["out"])
    out.mkdir(parents=True, exist_ok=True)
    reference = run["reference"] or methods[0]
    if "mRMR" in methods and settings["mrmr"]["k"] == "matched" and reference == "mRMR":
        raise ValueError("mRMR k='matched' needs a different reference method")
    result = benchmark(ds, build_selectors(settings, methods, network), run["outer_folds"],
                       run["seed"], run["jobs"], reference,
                       (run["consensus_num"], run["consensus_den"]),
                       settings["episode"]["l2_strength"])
    echo = _echo(settings)
    payload = benchmark_payload(result, echo, run["deterministic"])
    written = [out / REPORT_FILE, out / "folds.csv", out / "panels.csv", out / "table.txt"]
    write_json(written[0], payload)
    write_folds_csv(written[1], result.outcomes, run["deterministic"])
    write_panels_csv(written[2], result.outcomes)
    written[3].write_text(render_table(payload))
    if "StackFeatRL" in methods:
        sf = result.outcome("StackFeatRL")
        written.append(out / "theta.csv")
        _write_theta(written[-1], sf)
        if write_psi:
            written.append(out / PSI_FILE)
            write_json(written[-1], {
                "config": echo, "feature_names": list(ds.feature_names),
                "folds": [{"fold": r.fold, "pairs": r.extra.get("psi", [])}
                          for r in sf.per_fold]})
    for path in written:
        if not path.exists():
            raise OSError(f"{path} was not written")
        if path.suffix == ".json":
            _validate_json(path)
    sys.stdout.write(render_table(payload))
    return 0


def _write_theta(path, outcome):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "episode", "theta1", "theta2", "theta3", "theta4", "theta5",
                    "m_frac", "reward", "n_genes"])
        for r in outcome.per_fold:
            for e in r.extra.get("episodes", []):
                w.writerow([r.fold, e["episode"], *(repr(v) for v in e["theta"]),
                            repr(e["m_frac"]), repr(e["reward"]), len(e["panel"])])


def cmd_select(settings) -> int:
    return _run(settings, ["StackFeatRL"], write_psi=True)


def cmd_bench(settings) -> int:
    methods = settings["run"]["methods"]
    if not methods:
        raise ValueError("no methods named")
    return _run(settings, methods, write_psi="StackFeatRL" in methods)


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    effects = {j: args.effect * (1 if j % 2 == 0 else -1) for j in range(args.n_true)}
    spec = SynthSpec(args.n_samples, args.n_features, effects, args.noise_sd, seed=args.seed)
    last = args.n_features - 1
    if args.kind == "linear":
        ds, truth = gen_linear(spec)
    elif args.kind == "sign":
        spec = dataclasses.replace(spec, flip_feature=last, flip_source=0)
        ds, idx = gen_sign_inconsistent(spec)
        truth = {"kind": "sign_inconsistent", "flip_feature": idx, "spec": spec.to_json()}
    else:
        spec = dataclasses.replace(spec, shadow_feature=last, twin_feature=0,
                                   shadow_rho=args.rho)
        ds, idx = gen_correlated_shadow(spec)
        truth = {"kind": "correlated_shadow", "shadow_feature": idx, "spec": spec.to_json()}
    truth["feature_names"] = list(ds.feature_names)
    write_dataset(ds, out / "matrix.csv", out / "labels.csv")
    write_json(out / "truth.json", truth)
    print(f"wrote {ds.n_samples} x {ds.n_features} dataset to {out}")
    return 0


def _mean_psi(snapshot, fold) -> dict[tuple[str, str], float]:
    folds = snapshot.get("folds", [])
    if fold != "mean":
        chosen = [f for f in folds if str(f["fold"]) == str(fold)]
        if not chosen:
            raise ValueError(f"psi snapshot has no fold {fold}")
        folds = chosen
    total: dict[tuple[str, str], float] = {}
    for f in folds:
        for a, b, v in f["pairs"]:
            key = (a, b) if a <= b else (b, a)
            total[key] = total.get(key, 0.0) + float(v)
    return {k: v / max(len(folds), 1) for k, v in total.items()}


def cmd_network(settings) -> int:
    run, net = settings["run"], settings["network"]
    psi_path = Path(net["psi"]) if net["psi"] else Path(run["out"]) / PSI_FILE
    if not psi_path.exists():
        raise DataError(f"{psi_path}: no co-selection snapshot; run `stackfeat-rl select` "
                        f"first (it writes {PSI_FILE} into its output directory)")
    if not run["network"]:
        raise DataError("a prior network file is required")
    snapshot = json.loads(psi_path.read_text())
    names = snapshot["feature_names"]
    prior = load_network(run["network"], names, net["raw_threshold"], net["binary"])
    named = _mean_psi(snapshot, net["fold"])
    if not named:
        warnings.warn("co-selection snapshot is empty; the posterior network has no edges")
    index = {n: k for k, n in enumerate(names)}
    psi = {(index[a], index[b]): v for (a, b), v in named.items()}
    Mstar = posterior_from_psi(prior, psi, str(psi_path))
    modules = extract_modules(Mstar, net["min_psi"])
    out = Path(run["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_posterior_tsv(out / "posterior_network.tsv", Mstar)
    write_modules_json(out / "modules.json", modules,
                       {"config": _echo(settings), "n_posterior_edges": len(Mstar.edges)})
    _validate_json(out / "modules.json")
    print(f"{len(Mstar.edges)} posterior edges, {len(modules)} module(s) "
          f"at min_psi={net['min_psi']}")
    for m in modules:
        print(f"  [{len(m.genes)}] {' '.join(m.genes)}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / REPORT_FILE
    if not path.exists():
        raise DataError(f"{path}: report not found")
    text = render_table(json.loads(path.read_text()))
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackfeat-rl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, sections, help_ in [
        ("select", ["run", "episode", "network"], "run the policy-tuned selector under nested CV"),
        ("bench", ["run", "episode", "stability", "mrmr", "elasticnet", "stackfeat", "network"],
         "shared-split benchmark of several methods"),
        ("network", ["run", "network"], "filter a prior network by co-selection"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI settings file")
        _add_schema_flags(p, sections)

    p = sub.add_parser("synth", help="write a synthetic dataset with ground truth")
    p.add_argument("--kind", choices=["linear", "sign", "shadow"], default="linear")
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--n-features", type=int, default=100)
    p.add_argument("--n-true", type=int, default=5)
    p.add_argument("--effect", type=float, default=1.0)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth")

    p = sub.add_parser("report", help="render the summary table of a finished run")
    p.add_argument("input", help="report.json or the run's output directory")
    p.add_argument("--output", help="also write the table here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("synth", "report"):
            return {"synth": cmd_synth, "report": cmd_report}[args.command](args)
        settings = load_settings(args.config, _overrides(args))
        return {"select": cmd_select, "bench": cmd_bench,
                "network": cmd_network}[args.command](settings)
    except (DataError, ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"stackfeat-rl: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
