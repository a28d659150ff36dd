"""Feature-interaction prior, posterior filtering by co-selection, modules."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .core import DataError

SCORE_SCALE = 1000.0


class InteractionNetwork:
    """Symmetric weighted prior over feature pairs, weights in [0, 1].

    ``edges`` maps ``(i, j)`` with ``i < j`` to a weight.  With
    ``binary=True`` every retained edge has weight 1.
    """

    def __init__(self, edges: dict[tuple[int, int], float], feature_names,
                 score_threshold: float | None = None, dropped: int = 0):
        self.feature_names = tuple(feature_names)
        self.n_features = len(self.feature_names)
        clean = {}
        for (i, j), wt in edges.items():
            if i == j:
                continue
            if not 0.0 <= wt <= 1.0:
                raise ValueError(f"edge weight {wt} outside [0, 1]")
            key = (min(i, j), max(i, j))
            clean[key] = max(wt, clean.get(key, 0.0))
        self.edges = clean
        self.score_threshold = score_threshold
        self.dropped = dropped
        self._matrix = None

    @classmethod
    def empty(cls, feature_names):
        return cls({}, feature_names)

    @property
    def matrix(self) -> sparse.csr_matrix:
        if self._matrix is None:
            p = self.n_features
            if self.edges:
                ij = np.array(list(self.edges.keys()), dtype=np.int64)
                wt = np.array(list(self.edges.values()))
                rows = np.concatenate([ij[:, 0], ij[:, 1]])
                cols = np.concatenate([ij[:, 1], ij[:, 0]])
                self._matrix = sparse.csr_matrix(
                    (np.concatenate([wt, wt]), (rows, cols)), shape=(p, p))
            else:
                self._matrix = sparse.csr_matrix((p, p))
        return self._matrix

    def weight(self, i: int, j: int) -> float:
        return self.edges.get((min(i, j), max(i, j)), 0.0)

    def mean_weight_to(self, selection) -> np.ndarray:
        """``mean_{j in selection} M_ij`` for every feature ``i``."""
        sel = np.asarray(selection, dtype=np.int64)
        if sel.size == 0:
            return np.zeros(self.n_features)
        ind = np.zeros(self.n_features)
        ind[sel] = 1.0
        return np.asarray(self.matrix @ ind).ravel() / sel.size

    def __len__(self):
        return len(self.edges)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_network(path, feature_names, raw_threshold: float = 700,
                 binary: bool = False) -> InteractionNetwork:
    """Read ``name_a, name_b, combined_score`` rows (0-1000 scale).

    Rows with score > ``raw_threshold`` are kept with weight ``score / 1000``
    (or 1 when ``binary``).  Rows naming unknown features are dropped and
    counted; duplicate or reversed rows keep the maximum score.
    """
    path = Path(path)
    index = {name: k for k, name in enumerate(feature_names)}
    with open(path, newline="") as fh:
        sample = fh.readline()
    delim = "\t" if "\t" in sample else ","
    edges: dict[tuple[int, int], float] = {}
    dropped = 0
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            a, b, raw = (c.strip() for c in row)
            if not _is_number(raw):
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: score {raw!r} is not numeric")
            score = float(raw)
            if not 0 <= score <= SCORE_SCALE:
                raise DataError(f"{path}:{lineno}: score {score} outside 0-1000")
            if score <= raw_threshold:
                continue
            if a not in index or b not in index:
                dropped += 1
                continue
            i, j = index[a], index[b]
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            wt = 1.0 if binary else score / SCORE_SCALE
            edges[key] = max(wt, edges.get(key, 0.0))
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} edge(s) naming unknown features")
    return InteractionNetwork(edges, feature_names, raw_threshold, dropped)


@dataclass(frozen=True)
class PosteriorEdge:
    prior: float
    psi: float
    product: float


@dataclass
class PosteriorNetwork:
    feature_names: tuple[str, ...]
    edges: dict[tuple[int, int], PosteriorEdge]
    source: str | None = None

    def named_edges(self):
        for (i, j), e in sorted(self.edges.items()):
            yield self.feature_names[i], self.feature_names[j], e


@dataclass
class Module:
    genes: tuple[str, ...]
    edges: list[tuple[str, str, float, float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"genes": list(self.genes), "size": len(self.genes),
                "edges": [{"a": a, "b": b, "psi": psi, "product": prod}
                          for a, b, psi, prod in self.edges]}


def posterior_from_psi(M: InteractionNetwork, psi: dict[tuple[int, int], float],
                       source: str | None = None) -> PosteriorNetwork:
    """Keep prior edges whose co-selection frequency is positive."""
    out = {}
    for (i, j), prior in M.edges.items():
        v = psi.get((i, j), psi.get((j, i), 0.0))
        if v > 0:
            out[(i, j)] = PosteriorEdge(prior, float(v), prior * float(v))
    return PosteriorNetwork(M.feature_names, out, source)


def posterior(M: InteractionNetwork, acc, source: str | None = None) -> PosteriorNetwork:
    """Elementwise product of the prior and co-selection frequencies."""
    if acc.fold_fits < 1:
        raise ValueError("accumulator has absorbed no fits")
    out = {}
    for (i, j), prior in M.edges.items():
        v = acc.psi(i, j)
        if v > 0:
            out[(i, j)] = PosteriorEdge(prior, v, prior * v)
    return PosteriorNetwork(M.feature_names, out, source)


def extract_modules(Mstar: PosteriorNetwork, min_psi: float = 0.0) -> list[Module]:
    """Connected components (size >= 2) of edges with ``psi >= min_psi``,
    largest first, then lexicographic by gene names."""
    if not 0.0 <= min_psi <= 1.0:
        raise ValueError("min_psi must lie in [0, 1]")
    kept = [(i, j, e) for (i, j), e in Mstar.edges.items() if e.psi >= min_psi]
    p = len(Mstar.feature_names)
    if kept:
        ij = np.array([(i, j) for i, j, _ in kept], dtype=np.int64)
        graph = sparse.csr_matrix((np.ones(len(kept)), (ij[:, 0], ij[:, 1])), shape=(p, p))
    else:
        graph = sparse.csr_matrix((p, p))
    _, labels = connected_components(graph, directed=False)
    names = Mstar.feature_names
    touched = sorted({k for i, j, _ in kept for k in (i, j)})
    groups: dict[int, list[int]] = {}
    for node in touched:
        groups.setdefault(int(labels[node]), []).append(node)
    modules = []
    for nodes in groups.values():
        members = set(nodes)
        edges = sorted(
            (names[i], names[j], e.psi, e.product) for i, j, e in kept if i in members)
        modules.append(Module(tuple(sorted(names[n] for n in nodes)), edges))
    modules.sort(key=lambda m: (-len(m.genes), m.genes))
    return [m for m in modules if len(m.genes) >= 2]


def write_posterior_tsv(path, Mstar: PosteriorNetwork):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["name_a", "name_b", "prior", "psi", "product"])
        for a, b, e in Mstar.named_edges():
            w.writerow([a, b, repr(e.prior), repr(e.psi), repr(e.product)])


def write_modules_json(path, modules: list[Module], extra: dict | None = None):
    payload = dict(extra or {})
    payload["modules"] = [m.as_dict() for m in modules]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
