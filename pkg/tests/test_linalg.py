from math import prod

import numpy as np
import pytest

from utils.linalg import (
    ModMatrix,
    cokernel_sylow_type,
    determinant,
    p_valuation,
    rank_mod_p,
    snf_integer,
    snf_mod_prime_power,
)
from utils.models import complete_graph, graph_from_edges, is_connected, reduced_laplacian, sample_graph
from utils.partitions import Partition


def test_snf_integer_small():
    assert snf_integer(ModMatrix([[2, 0], [0, 3]])).diagonal == (1, 6)
    assert snf_integer(ModMatrix([[1, 2], [2, 4]])).diagonal == (1, 0)
    assert snf_integer(ModMatrix([[1, 2], [2, 4]])).corank == 1


def test_snf_product_matches_determinant():
    rng = np.random.default_rng(11)
    for _ in range(20):
        M = ModMatrix(rng.integers(-5, 6, size=(4, 4)))
        assert prod(snf_integer(M).diagonal) == abs(determinant(M))


def test_complete_graph_sandpile():
    L = reduced_laplacian(complete_graph(4))
    assert abs(determinant(L)) == 16
    assert snf_integer(L).diagonal == (1, 4, 4)
    result = cokernel_sylow_type(L, 2)
    assert result.partition == Partition.of(2, 2)
    assert result.saturated


def test_cycle_sandpile():
    cycle = graph_from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
    L = reduced_laplacian(cycle)
    assert cokernel_sylow_type(L, 2).partition == Partition.of(1)
    assert cokernel_sylow_type(L, 3).partition == Partition.of(1)
    assert cokernel_sylow_type(L, 5).partition == Partition()


def test_modular_and_integer_paths_agree():
    checked = 0
    for index in range(40):
        graph = sample_graph(9, 0.5, seed=3, index=index)
        if not is_connected(graph):
            continue
        L = reduced_laplacian(graph)
        invariants = snf_integer(L).diagonal
        for p in (2, 3):
            expected = Partition.from_multiset(p_valuation(d, p) for d in invariants)
            assert cokernel_sylow_type(L, p).partition == expected
        checked += 1
    assert checked > 10


def test_snf_mod_prime_power():
    result = snf_mod_prime_power(ModMatrix.diagonal([0, 2, 4], modulus=8))
    assert result.diagonal == (1, 2, 3)
    assert result.rank == 2
    assert result.corank == 1
    with pytest.raises(ValueError):
        snf_mod_prime_power(ModMatrix.diagonal([1, 2], modulus=12))


def test_saturation_retry_doubles_exponent():
    M = ModMatrix.diagonal([1, 2 ** 10])
    result = cokernel_sylow_type(M, 2, e=8, ceiling=64)
    assert result == (Partition.of(10), True, 16)
    capped = cokernel_sylow_type(M, 2, e=8, ceiling=8)
    assert capped.partition == Partition.of(8)
    assert not capped.saturated


def test_modular_matrix_is_capped_at_modulus():
    result = cokernel_sylow_type(ModMatrix.diagonal([0, 2], modulus=8), 2)
    assert result.partition == Partition.of(3, 1)
    assert result.exponent == 3
    with pytest.raises(ValueError):
        cokernel_sylow_type(ModMatrix.diagonal([0, 2], modulus=8), 3)


def test_rank_mod_p():
    assert rank_mod_p(ModMatrix([[1, 1], [1, 1]]), 2) == 1
    assert rank_mod_p(ModMatrix([[2, 0], [0, 3]]), 3) == 1
    assert rank_mod_p(ModMatrix.identity(5, modulus=4), 2) == 5


def test_text_format():
    text = "2 8\n1 2\n2 3\n"
    M = ModMatrix.from_text(text)
    assert M.modulus == 8
    assert M.symmetric
    assert M.to_text() == text
    integral = ModMatrix.from_text("2 Z\n-1 2\n2 3")
    assert integral.modulus is None
    assert integral.to_text().startswith("2 Z\n")
    with pytest.raises(ValueError):
        ModMatrix.from_text("3 8\n1 2\n2 3\n")


def test_matrix_validation():
    with pytest.raises(ValueError):
        ModMatrix([[0, 9]], modulus=8)
    with pytest.raises(ValueError):
        ModMatrix([[1, 2], [3, 4]], symmetric=True)
    assert ModMatrix.reduced([[-1, 9]], 8).rows() == [[7, 1]]


def test_reduce_mod():
    M = ModMatrix([[9, -1], [-1, 4]], symmetric=True)
    assert M.reduce_mod(8).rows() == [[1, 7], [7, 4]]
    assert M.reduce_mod(8).reduce_mod(4).rows() == [[1, 3], [3, 0]]
    with pytest.raises(ValueError):
        M.reduce_mod(8).reduce_mod(3)


def _integer_valuations(M: ModMatrix, p: int, e: int) -> tuple[int, ...]:
    return tuple(sorted(min(p_valuation(d, p), e) if d else e for d in snf_integer(M).diagonal))


@pytest.mark.parametrize("p", [2, 3, 5])
@pytest.mark.parametrize("e", [1, 2, 4])
def test_modular_snf_matches_integer_snf(p, e):
    rng = np.random.default_rng(100 * p + e)
    for _ in range(100):
        M = ModMatrix(rng.integers(-12, 13, size=(4, 4)))
        expected = _integer_valuations(M, p, e)
        result = snf_mod_prime_power(M.reduce_mod(p ** e))
        assert result.diagonal == expected
        assert rank_mod_p(M, p) == M.n - sum(1 for v in result.diagonal if v >= 1)
