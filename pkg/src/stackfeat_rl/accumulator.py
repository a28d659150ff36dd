"""Cross-iteration selection statistics and the dual-criterion selector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FitResult


@dataclass(frozen=True)
class StateFeatures:
    p_hat: float
    mu_abs: float
    n_net: float
    d_cosel: float

    def as_vector(self) -> np.ndarray:
        """State vector with the constant bias component appended."""
        return np.array([self.p_hat, self.mu_abs, self.n_net, self.d_cosel, 1.0])


class Accumulator:
    """Running signed-coefficient sums ``w``, selection counts ``c`` and
    pairwise co-selection counts over absorbed elastic-net fits.

    Co-selection pairs are kept as a log of flattened ``i * p + j`` keys
    (``i < j``) per fit and reduced to counts on demand.
    """

    def __init__(self, n_features: int):
        self.n_features = int(n_features)
        self.w = np.zeros(self.n_features)
        self.c = np.zeros(self.n_features, dtype=np.int64)
        self.fold_fits = 0
        self.genes_per_fold: list[int] = []
        self.history: list[np.ndarray] = []
        self.last_selection = np.zeros(0, dtype=np.int64)
        self.max_abs_beta = 0.0
        self._pair_chunks: list[np.ndarray] = []
        self._pair_cache = None

    def absorb_fit(self, fit: FitResult) -> "Accumulator":
        coef = np.asarray(fit.coefficients)
        if coef.shape != (self.n_features,):
            raise ValueError(
                f"fit has {coef.shape[0]} coefficients, accumulator {self.n_features}")
        sel = fit.selected
        self.w += coef
        self.c[sel] += 1
        if sel.size > 1:
            ii, jj = np.triu_indices(sel.size, k=1)
            self._pair_chunks.append(sel[ii] * self.n_features + sel[jj])
            self._pair_cache = None
        self.fold_fits += 1
        self.genes_per_fold.append(int(sel.size))
        self.history.append(sel.copy())
        if sel.size:
            self.max_abs_beta = max(self.max_abs_beta, float(np.abs(coef).max()))
        return self

    # -- co-selection -------------------------------------------------------

    def _pairs(self):
        if self._pair_cache is None:
            if self._pair_chunks:
                keys, counts = np.unique(np.concatenate(self._pair_chunks),
                                         return_counts=True)
            else:
                keys = np.zeros(0, dtype=np.int64)
                counts = np.zeros(0, dtype=np.int64)
            self._pair_cache = (keys, counts)
        return self._pair_cache

    @property
    def coselect(self) -> dict[tuple[int, int], int]:
        keys, counts = self._pairs()
        p = self.n_features
        return {(int(k // p), int(k % p)): int(v) for k, v in zip(keys, counts)}

    def coselect_count(self, i: int, j: int) -> int:
        if i == j:
            return int(self.c[i])
        i, j = min(i, j), max(i, j)
        keys, counts = self._pairs()
        key = i * self.n_features + j
        pos = np.searchsorted(keys, key)
        if pos < keys.size and keys[pos] == key:
            return int(counts[pos])
        return 0

    def psi(self, i: int, j: int) -> float:
        if self.fold_fits == 0:
            return 0.0
        return self.coselect_count(i, j) / self.fold_fits

    def psi_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sparse co-selection frequencies as ``(i, j, psi)`` arrays, ``i < j``."""
        keys, counts = self._pairs()
        p = self.n_features
        denom = max(self.fold_fits, 1)
        return keys // p, keys % p, counts / denom

    def cosel_with(self, selection) -> np.ndarray:
        """For every gene ``i``: sum over fits of ``1[i active] * |active ∩ S|``.

        This equals ``sum_{j in S} coselect[i, j]`` with the diagonal taken as
        ``c_i`` (a gene is co-selected with itself whenever it is selected).
        """
        mask = np.zeros(self.n_features, dtype=bool)
        mask[np.asarray(selection, dtype=np.int64)] = True
        out = np.zeros(self.n_features)
        for active in self.history:
            overlap = int(mask[active].sum())
            if overlap:
                out[active] += overlap
        return out

    def to_json_dict(self, feature_names=None) -> dict:
        i, j, psi = self.psi_pairs()
        name = (lambda k: feature_names[k]) if feature_names is not None else int
        return {
            "fold_fits": self.fold_fits,
            "w": self.w.tolist(),
            "c": self.c.tolist(),
            "genes_per_fold": list(self.genes_per_fold),
            "psi": [[name(int(a)), name(int(b)), float(v)] for a, b, v in zip(i, j, psi)],
        }


def absorb_fit(acc: Accumulator, fit: FitResult) -> Accumulator:
    return acc.absorb_fit(fit)


def state_matrix(acc: Accumulator, network=None, selection=None) -> np.ndarray:
    """Per-gene state vectors ``(p_hat, |mu|, n_net, d_cosel, 1)``, shape (p, 5).

    ``selection`` defaults to ``acc.last_selection``; an empty selection gives
    zero network and co-selection features.  ``network`` is an
    :class:`~stackfeat_rl.network.InteractionNetwork` or None (no prior).
    """
    if acc.fold_fits == 0:
        raise ValueError("state undefined before any fit has been absorbed")
    sel = acc.last_selection if selection is None else np.asarray(selection, dtype=np.int64)
    n = acc.fold_fits
    S = np.zeros((acc.n_features, 5))
    S[:, 0] = acc.c / n
    S[:, 1] = np.abs(acc.w) / n
    if sel.size:
        if network is not None:
            S[:, 2] = network.mean_weight_to(sel)
        S[:, 3] = acc.cosel_with(sel) / (n * sel.size)
    S[:, 4] = 1.0
    return S


def state_features(acc: Accumulator, network, gene: int, t: int,
                   selection=None) -> StateFeatures:
    """State of one gene at iteration ``t`` (requires ``t >= 2``)."""
    if t < 2:
        raise ValueError("no state during warmup (t < 2)")
    row = state_matrix(acc, network, selection)[gene]
    return StateFeatures(*(float(v) for v in row[:4]))


def _top_m(values: np.ndarray, m: int) -> np.ndarray:
    order = np.lexsort((np.arange(values.size), -values))
    top = order[:m]
    return top[values[top] > 0]


def dual_select(acc: Accumulator, m: int) -> np.ndarray:
    """Features in the top ``m`` by ``|w|`` and in the top ``m`` by ``c``.

    Ties go to the smaller index; features with a zero statistic never count
    as top-ranked.
    """
    return dual_select_arrays(acc.w, acc.c, m)


def dual_select_arrays(w, c, m: int) -> np.ndarray:
    w = np.abs(np.asarray(w, dtype=np.float64))
    c = np.asarray(c, dtype=np.float64)
    if not 1 <= m <= w.size:
        raise ValueError(f"m must lie in [1, {w.size}], got {m}")
    return np.intersect1d(_top_m(w, m), _top_m(c, m))


def normalized_estimates(acc: Accumulator) -> tuple[np.ndarray, np.ndarray]:
    """Running means ``(w / fits, c / fits)``."""
    if acc.fold_fits < 1:
        raise ValueError("no fits absorbed")
    return acc.w / acc.fold_fits, acc.c / acc.fold_fits
