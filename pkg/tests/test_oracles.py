import pytest

from utils.abelian import aut_order, enumerate_subgroups, hom_count, pairing_count, subgroup_table, sur_count
from utils.errors import OracleBoundExceeded
from utils.oracles import (
    SmallGroupTable,
    aut_order_bruteforce,
    enumerate_subgroups_bruteforce,
    hom_count_bruteforce,
    pairing_count_bruteforce,
    subgroups_by_closure,
    sur_count_bruteforce,
    symmetric_rank_counts,
)
from utils.partitions import GroupSpec, Partition, partitions_up_to
from utils.theory import macwilliams_rank_count

WIDE_BOUND = 1 << 16


def small_types(p: int, max_order: int) -> list[Partition]:
    return [lam for lam in partitions_up_to(8) if p ** lam.size <= max_order]


GRID = [(p, lam) for p in (2, 3) for lam in small_types(p, 256)]
PAIRS = [(p, mu, lam) for p in (2, 3) for mu in small_types(p, 64) for lam in small_types(p, 64)]


@pytest.mark.parametrize("p, lam", GRID)
def test_hom_count_matches_bruteforce(p, lam):
    for mu in small_types(p, 64):
        assert hom_count(p, mu, lam) == hom_count_bruteforce(p, mu, lam, bound=256)


@pytest.mark.parametrize("p, lam", GRID)
def test_aut_order_matches_bruteforce(p, lam):
    if hom_count(p, lam, lam) > WIDE_BOUND:
        pytest.skip("endomorphism ring too large to enumerate")
    assert aut_order(p, lam) == aut_order_bruteforce(p, lam, bound=WIDE_BOUND)


@pytest.mark.parametrize("p, lam", GRID)
def test_pairing_count_matches_bruteforce(p, lam):
    try:
        expected = pairing_count_bruteforce(p, lam, bound=WIDE_BOUND)
    except OracleBoundExceeded:
        pytest.skip("too many bilinear forms to enumerate")
    assert pairing_count(p, lam) == expected


@pytest.mark.parametrize("p, mu, lam", PAIRS)
def test_sur_count_matches_bruteforce(p, mu, lam):
    if hom_count(p, mu, lam) > WIDE_BOUND:
        pytest.skip("too many homomorphisms to enumerate")
    expected = sur_count_bruteforce(p, mu, lam, bound=WIDE_BOUND)
    assert sur_count(GroupSpec.sylow_only(p, mu), GroupSpec.sylow_only(p, lam)) == expected


@pytest.mark.parametrize("p, lam", [(p, lam) for p, lam in GRID if len(lam) <= 5])
def test_subgroup_counts_match_enumeration(p, lam):
    assert subgroup_table(p, lam) == enumerate_subgroups(p, lam, bound=256)


@pytest.mark.parametrize("p, lam", [(p, lam) for p in (2, 3) for lam in small_types(p, 32)])
def test_lattice_enumeration_matches_closure(p, lam):
    assert enumerate_subgroups_bruteforce(p, lam, bound=32) == subgroups_by_closure(p, lam, bound=32)


@pytest.mark.parametrize("p, n", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_symmetric_rank_counts(p, n):
    counts = symmetric_rank_counts(p, n)
    assert sum(counts.values()) == p ** (n * (n + 1) // 2)
    for r in range(n + 1):
        assert macwilliams_rank_count(p, n, n - r) == counts[r]


def test_table_layout():
    table = SmallGroupTable.build(2, Partition.of(2, 1))
    assert table.order == 8
    assert len(table.killed_by(1)) == 4
    assert table.subgroup_sizes(range(8)) == [8, 2, 1]


def test_bound_is_enforced():
    with pytest.raises(OracleBoundExceeded):
        SmallGroupTable.build(2, Partition.of(5, 5), bound=256)
    with pytest.raises(OracleBoundExceeded):
        enumerate_subgroups(2, Partition.of(5, 5), bound=256)
