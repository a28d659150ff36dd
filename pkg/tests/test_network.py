import itertools
import json

import numpy as np
import pytest

from stackfeat_rl.accumulator import Accumulator
from stackfeat_rl.core import DataError, FitResult
from stackfeat_rl.network import (InteractionNetwork, extract_modules, load_network, posterior,
                                  posterior_from_psi, write_modules_json, write_posterior_tsv)

FIXTURE = [("HBB", "HBA1", 1.00), ("HBB", "HBG1", 0.80), ("HBB", "ALAS2", 0.73),
           ("HBA1", "HBG1", 0.80), ("DAO", "ALAS2", 0.60), ("GSTM3", "PRDX6", 0.67),
           ("ATG101", "ATG4B", 0.73)]
GENES = sorted({g for a, b, _ in FIXTURE for g in (a, b)} | {"APOE", "CLU"})


def fixture_posterior(edges=FIXTURE, genes=GENES):
    idx = {g: k for k, g in enumerate(genes)}
    M = InteractionNetwork({(idx[a], idx[b]): 1.0 for a, b, _ in edges}, genes)
    psi = {(idx[a], idx[b]): v for a, b, v in edges}
    return posterior_from_psi(M, psi)


def write_rows(path, rows, header=True):
    lines = ["protein1\tprotein2\tcombined_score"] if header else []
    lines += [f"{a}\t{b}\t{s}" for a, b, s in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_threshold_and_scale(tmp_path):
    write_rows(tmp_path / "n.tsv", [("A", "B", 800), ("A", "C", 650), ("B", "C", 700)])
    M = load_network(tmp_path / "n.tsv", ["A", "B", "C"])
    assert M.edges == {(0, 1): 0.8}


def test_load_symmetrises_with_max(tmp_path):
    write_rows(tmp_path / "n.tsv", [("A", "B", 800), ("B", "A", 900)])
    M = load_network(tmp_path / "n.tsv", ["A", "B"])
    assert M.edges == {(0, 1): 0.9}
    assert M.weight(1, 0) == 0.9
    assert M.matrix.toarray().tolist() == [[0, 0.9], [0.9, 0]]


def test_load_drops_unknown_with_warning(tmp_path):
    write_rows(tmp_path / "n.tsv", [("A", "B", 800), ("A", "Z", 900)])
    with pytest.warns(UserWarning, match="dropped 1"):
        M = load_network(tmp_path / "n.tsv", ["A", "B"])
    assert M.dropped == 1 and len(M) == 1


def test_load_binary_and_csv(tmp_path):
    (tmp_path / "n.csv").write_text("A,B,950\n")
    M = load_network(tmp_path / "n.csv", ["A", "B"], binary=True)
    assert M.edges == {(0, 1): 1.0}


def test_load_malformed_reports_line(tmp_path):
    (tmp_path / "n.tsv").write_text("a\tb\tscore\nA\tB\t800\nA\tB\n")
    with pytest.raises(DataError, match=":3:"):
        load_network(tmp_path / "n.tsv", ["A", "B"])
    (tmp_path / "m.tsv").write_text("A\tB\t800\nA\tB\tx\n")
    with pytest.raises(DataError, match=":2:"):
        load_network(tmp_path / "m.tsv", ["A", "B"])


def test_mean_weight_to_selection():
    M = InteractionNetwork({(0, 1): 0.8, (0, 2): 0.4}, ["a", "b", "c"])
    assert np.allclose(M.mean_weight_to([1, 2]), [0.6, 0.0, 0.0])
    assert np.all(M.mean_weight_to([]) == 0)


def acc_from(selections, p):
    acc = Accumulator(p)
    for sel in selections:
        b = np.zeros(p)
        b[list(sel)] = 1.0
        acc.absorb_fit(FitResult(b, 0.0, 1, True))
    return acc


def test_posterior_examples():
    M = InteractionNetwork({(0, 1): 1.0, (1, 2): 0.8, (0, 2): 0.5}, ["a", "b", "c"])
    acc = acc_from([{0, 1, 2}, {0, 1}], 3)
    post = posterior(M, acc)
    assert post.edges[(0, 1)].product == 1.0
    assert post.edges[(1, 2)].product == pytest.approx(0.4)
    acc2 = acc_from([{0, 1}], 3)
    assert set(posterior(M, acc2).edges) == {(0, 1)}
    with pytest.raises(ValueError):
        posterior(M, Accumulator(3))


def test_posterior_monotone_under_more_fits():
    rng = np.random.default_rng(0)
    p = 8
    M = InteractionNetwork({(i, j): 1.0 for i, j in itertools.combinations(range(p), 2)},
                           [f"g{k}" for k in range(p)])
    acc = Accumulator(p)
    before = set()
    for _ in range(20):
        b = rng.normal(size=p) * (rng.random(p) < 0.3)
        acc.absorb_fit(FitResult(b, 0.0, 1, True))
        now = set(posterior(M, acc).edges)
        assert before <= now
        before = now


def test_fixture_yields_three_modules():
    mods = extract_modules(fixture_posterior(), 0.5)
    assert [len(m.genes) for m in mods] == [5, 2, 2]
    assert mods[0].genes == ("ALAS2", "DAO", "HBA1", "HBB", "HBG1")
    assert mods[1].genes == ("ATG101", "ATG4B")
    assert mods[2].genes == ("GSTM3", "PRDX6")
    assert len(mods[0].edges) == 5


def test_fixture_threshold_sweep():
    post = fixture_posterior()
    assert extract_modules(post, 1.0)[0].genes == ("HBA1", "HBB")
    assert extract_modules(post, 0.99) == extract_modules(post, 1.0)
    # DAO-ALAS2 at 0.60 is the first edge to leave
    assert [len(m.genes) for m in extract_modules(post, 0.65)] == [4, 2, 2]
    with pytest.raises(ValueError):
        extract_modules(post, 1.5)


def test_min_psi_above_all_is_empty():
    edges = [("a", "b", 0.3), ("b", "c", 0.2)]
    assert extract_modules(fixture_posterior(edges, ["a", "b", "c"]), 0.5) == []


def test_triangle_with_weak_edge_is_one_component():
    edges = [("a", "b", 0.9), ("b", "c", 0.8), ("a", "c", 0.1)]
    mods = extract_modules(fixture_posterior(edges, ["a", "b", "c"]), 0.5)
    assert len(mods) == 1 and mods[0].genes == ("a", "b", "c")
    assert len(mods[0].edges) == 2


def test_modules_independent_of_edge_order():
    ref = extract_modules(fixture_posterior(), 0.5)
    for seed in range(5):
        order = np.random.default_rng(seed).permutation(len(FIXTURE))
        shuffled = [FIXTURE[k] for k in order]
        assert extract_modules(fixture_posterior(shuffled), 0.5) == ref


def test_writers(tmp_path):
    post = fixture_posterior()
    write_posterior_tsv(tmp_path / "p.tsv", post)
    lines = (tmp_path / "p.tsv").read_text().splitlines()
    assert lines[0].split("\t") == ["name_a", "name_b", "prior", "psi", "product"]
    assert len(lines) == 1 + len(FIXTURE)
    write_modules_json(tmp_path / "m.json", extract_modules(post, 0.5), {"min_psi": 0.5})
    d = json.loads((tmp_path / "m.json").read_text())
    assert [m["size"] for m in d["modules"]] == [5, 2, 2] and d["min_psi"] == 0.5
