import pytest

from utils.partitions import (
    GroupSpec,
    Partition,
    partitions_in_box,
    partitions_of,
    partitions_up_to,
    sub_partitions,
    transpose,
)


def test_parse_and_str():
    lam = Partition.parse("[3, 1,1]")
    assert lam == Partition.of(3, 1, 1)
    assert str(lam) == "[3,1,1]"
    assert Partition.parse("[]") == Partition()


@pytest.mark.parametrize("text", ["3,1", "[1,3]", "[0]", "[a]"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        Partition.parse(text)


def test_transpose():
    assert transpose(Partition.of(4, 2, 1)) == Partition.of(3, 2, 1, 1)
    assert transpose(Partition()) == Partition()
    for lam in partitions_up_to(8):
        assert transpose(transpose(lam)) == lam
        assert transpose(lam).size == lam.size


def test_partition_counts():
    assert len(list(partitions_of(5))) == 7
    assert len(list(partitions_up_to(4))) == 12
    assert set(partitions_in_box(2, 2)) == {
        Partition(), Partition.of(1), Partition.of(2), Partition.of(1, 1), Partition.of(2, 1), Partition.of(2, 2),
    }
    assert all(len(lam) <= 2 for lam in partitions_of(6, max_parts=2))


def test_sub_partitions():
    subs = set(sub_partitions(Partition.of(2, 1)))
    assert subs == {Partition(), Partition.of(1), Partition.of(1, 1), Partition.of(2), Partition.of(2, 1)}
    lam = Partition.of(3, 2, 2)
    assert all(lam.contains(mu) for mu in sub_partitions(lam))


def test_multiplicities_and_caps():
    assert Partition.of(2, 2, 1).multiplicities() == [1, 2]
    assert Partition.of(3, 1).capped(2) == Partition.of(2, 1)
    assert Partition.of(2).padded(3) == (2, 0, 0)
    with pytest.raises(ValueError):
        Partition.of(1, 1, 1).padded(2)


def test_group_spec_encoding():
    G = GroupSpec.parse("2:[2,1];3:[1]")
    assert G.order == 24
    assert G.exponent == 12
    assert G.invariant_factors() == [12, 2]
    assert str(G) == "2:[2,1];3:[1]"
    assert GroupSpec.from_invariant_factors([12, 2]) == G
    assert GroupSpec.parse(str(G)) == G


def test_trivial_group():
    assert GroupSpec.parse("1") == GroupSpec.trivial()
    assert str(GroupSpec.trivial()) == "1"
    assert GroupSpec.trivial().order == 1
    assert GroupSpec.trivial().invariant_factors() == []


@pytest.mark.parametrize("text", ["4:[1]", "2:[1];2:[2]", "2[1]"])
def test_group_spec_rejects(text):
    with pytest.raises(ValueError):
        GroupSpec.parse(text)


def test_invariant_factors_need_divisibility():
    with pytest.raises(ValueError):
        GroupSpec.from_invariant_factors([6, 4])


def test_cyclic_and_squarefree():
    assert GroupSpec.cyclic(12).is_cyclic()
    assert not GroupSpec.cyclic(12).is_squarefree_order()
    assert GroupSpec.cyclic(6).is_squarefree_order()
    assert not GroupSpec.parse("2:[1,1]").is_cyclic()


def test_restrict_and_cap():
    G = GroupSpec.parse("2:[3,1];3:[2]")
    assert G.restrict([3]) == GroupSpec.parse("3:[2]")
    assert G.capped({2: 2, 3: None}) == GroupSpec.parse("2:[2,1];3:[2]")
    assert G.sylow(5) == Partition()
