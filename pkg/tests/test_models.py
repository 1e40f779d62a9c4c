import networkx as nx
import numpy as np
import orjson
import pytest

from utils.errors import BalanceCertificateError
from utils.linalg import determinant
from utils.models import (
    EntryDistribution,
    SylowStatus,
    complete_graph,
    graph_from_edges,
    is_connected,
    random_tree,
    reduced_laplacian,
    relabel,
    sample_graph,
    sample_symmetric,
    sandpile_sylow_type,
    stream,
)
from utils.partitions import Partition


def test_streams_are_keyed_not_sequential():
    a = stream(7, 3, "graph").random(5)
    b = stream(7, 3, "graph").random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, stream(7, 4, "graph").random(5))
    assert not np.array_equal(a, stream(7, 3, "matrix").random(5))


def test_sample_graph_is_deterministic_and_symmetric():
    g = sample_graph(12, 0.3, seed=5, index=2)
    h = sample_graph(12, 0.3, seed=5, index=2)
    assert np.array_equal(g.adjacency, h.adjacency)
    assert np.array_equal(g.adjacency, g.adjacency.T)
    assert not g.adjacency.diagonal().any()
    assert g.to_edge_list().startswith("# n=12 q=0.3 seed=5 index=2\n")


@pytest.mark.parametrize("q", [0, 1, -0.5, 1.5])
def test_sample_graph_rejects_bad_q(q):
    with pytest.raises(ValueError):
        sample_graph(5, q, seed=0)


def test_connectivity():
    assert is_connected(complete_graph(4))
    assert not is_connected(graph_from_edges(4, [(0, 1), (2, 3)]))
    assert is_connected(random_tree(10, seed=1))
    for index in range(5):
        graph = sample_graph(8, 0.25, seed=2, index=index)
        assert is_connected(graph) == nx.is_connected(graph.to_networkx())


def test_tree_has_trivial_sandpile_group():
    tree = random_tree(12, seed=4)
    assert len(tree.edges) == 11
    assert abs(determinant(reduced_laplacian(tree))) == 1
    assert sandpile_sylow_type(tree, 2).partition == Partition()


def test_reduced_laplacian():
    assert reduced_laplacian(complete_graph(3)).rows() == [[-2, 1], [1, -2]]


def test_complete_graph_sylow_types():
    K5 = complete_graph(5)
    assert sandpile_sylow_type(K5, 5).partition == Partition.of(1, 1, 1)
    assert sandpile_sylow_type(K5, 2).partition == Partition()
    assert sandpile_sylow_type(K5, 2).status == SylowStatus.SATURATED


def test_disconnected_graph():
    result = sandpile_sylow_type(graph_from_edges(4, [(0, 1), (2, 3)]), 2)
    assert result.status == SylowStatus.DISCONNECTED
    assert result.partition is None


def test_relabeling_preserves_type():
    rng = np.random.default_rng(0)
    checked = 0
    for index in range(30):
        graph = sample_graph(10, 0.5, seed=9, index=index)
        if not is_connected(graph):
            continue
        types = {p: sandpile_sylow_type(graph, p).partition for p in (2, 3)}
        for _ in range(20):
            shuffled = relabel(graph, rng.permutation(10))
            assert {p: sandpile_sylow_type(shuffled, p).partition for p in (2, 3)} == types
        checked += 1
        if checked == 20:
            break
    assert checked == 20


def test_balance_certificate():
    with pytest.raises(BalanceCertificateError):
        EntryDistribution.from_pmf({-1: 0.5, 1: 0.5})
    with pytest.raises(BalanceCertificateError):
        EntryDistribution(kind="pmf", pmf={-1: 0.5, 1: 0.5})
    with pytest.raises(BalanceCertificateError):
        EntryDistribution(kind="uniform-mod", modulus=4, alpha=0.9)
    assert EntryDistribution.lazy_sign().pmf == {-1: 0.25, 0: 0.5, 1: 0.25}
    with pytest.raises(ValueError):
        EntryDistribution.from_pmf({0: 0.5, 1: 0.4})


def test_uniform_mod_caps():
    assert EntryDistribution.uniform_mod(8).caps() == {2: 3}
    assert EntryDistribution.uniform_mod(2, primes=(2, 3)).caps() == {2: 1, 3: 0}
    assert EntryDistribution.lazy_sign().caps() == {2: None}


def test_sample_symmetric():
    M = sample_symmetric(6, EntryDistribution.uniform_mod(8), seed=1, index=3)
    rows = np.array(M.rows())
    assert M.modulus == 8
    assert np.array_equal(rows, rows.T)
    assert rows.min() >= 0 and rows.max() < 8
    assert sample_symmetric(6, EntryDistribution.uniform_mod(8), seed=1, index=3).rows() == M.rows()

    N = sample_symmetric(6, EntryDistribution.lazy_sign(), seed=1)
    assert N.modulus is None
    assert set(np.unique(N.rows())) <= {-1, 0, 1}


def test_uniform_residues_are_balanced():
    entries = np.concatenate([
        sample_symmetric(40, EntryDistribution.uniform_mod(2), seed=6, index=i).entries[np.triu_indices(40)]
        for i in range(20)
    ])
    assert abs(entries.astype(float).mean() - 0.5) < 0.02


# --- Sampler statistics ---

def test_edge_density():
    n = 200
    pairs = n * (n - 1) // 2
    densities = [len(sample_graph(n, 0.3, seed=8, index=i).edges) / pairs for i in range(5)]
    assert abs(np.mean(densities) - 0.3) < 0.01


def test_edge_probability_near_one():
    graph = sample_graph(10, 0.999999, seed=1)
    assert len(graph.edges) == 45
    assert is_connected(graph)


def test_spanning_tree_parity():
    checked = 0
    for index in range(500):
        graph = sample_graph(8, 0.5, seed=12, index=index)
        if not is_connected(graph):
            continue
        odd = determinant(reduced_laplacian(graph)) % 2 == 1
        assert odd == (sandpile_sylow_type(graph, 2).partition == Partition())
        checked += 1
    assert checked > 450


# --- Pinned samples ---

def test_pinned_graph(golden):
    graph = sample_graph(4, 0.5, seed=42)
    payload = {"n": 4, "q": 0.5, "seed": 42, "index": 0, "adjacency": graph.adjacency.astype(int).tolist()}
    golden("graph-n4-q0.5-seed42.json", orjson.dumps(payload))


def test_pinned_matrix(golden):
    M = sample_symmetric(4, EntryDistribution.uniform_mod(4), seed=0)
    payload = {"n": 4, "modulus": 4, "seed": 0, "index": 0, "rows": M.rows()}
    golden("matrix-n4-mod4-seed0.json", orjson.dumps(payload))
