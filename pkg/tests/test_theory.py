from fractions import Fraction

import pytest

from utils.abelian import sum_wedge2_over_subgroups, sur_count, wedge2_order
from utils.errors import MissingPrimeError
from utils.partitions import GroupSpec, Partition, partitions_up_to
from utils.theory import (
    Estimate,
    cyclic_sylow_prob,
    cyclic_upper_bound,
    even_spanning_tree_limit,
    limit_hom_moment,
    limit_prob_multi,
    limit_prob_sylow,
    macwilliams_rank_count,
    normalization_deficit,
    normalizing_constant,
    prank_prob,
    squarefree_sylow_prob,
    squarefree_upper_bound,
    sylow_fraction,
    sylow_table,
    uniform_corank_distribution,
    zero_probability_bound,
)

P = Partition.of


def test_normalizing_constant():
    constant = normalizing_constant(2)
    assert float(constant) == pytest.approx(0.4194224, abs=1e-7)
    assert constant.error < 1e-12


def test_even_spanning_tree_limit():
    assert float(even_spanning_tree_limit()) == pytest.approx(0.5806, abs=1e-4)


@pytest.mark.parametrize("method", ["primes", "zeta"])
def test_cyclic_upper_bound(method):
    bound = cyclic_upper_bound(method=method)
    assert float(bound) == pytest.approx(0.7935212, abs=1e-6)
    assert bound.error < 1e-6


def test_cyclic_upper_bound_rejects_unknown_method():
    with pytest.raises(ValueError):
        cyclic_upper_bound(method="series")


def test_squarefree_upper_bound():
    assert float(squarefree_upper_bound()) == pytest.approx(0.48240306, abs=1e-6)


def test_sylow_probabilities_of_small_types():
    nc = float(normalizing_constant(2))
    assert float(limit_prob_sylow(2, P())) == pytest.approx(nc)
    assert float(limit_prob_sylow(2, P(1))) == pytest.approx(nc / 2)
    assert float(limit_prob_sylow(2, P(2))) == pytest.approx(nc / 4)
    assert sylow_fraction(2, P(1, 1)) == Fraction(4, 4 * 6)


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_both_closed_forms_agree(p):
    # limit_prob_sylow raises InconsistentFormulaError on disagreement
    for lam in partitions_up_to(12, max_part=6):
        assert limit_prob_sylow(p, lam).value > 0


@pytest.mark.parametrize("p", [2, 3])
def test_table_is_normalized(p):
    assert 0 <= normalization_deficit(p, 24) < 1e-6


@pytest.mark.parametrize("p", [2, 3, 5])
def test_rank_probabilities_sum_to_one(p):
    total = sum(prank_prob(p, r).value for r in range(41))
    assert float(total) == pytest.approx(1, abs=1e-10)
    assert float(prank_prob(p, 0)) == pytest.approx(float(normalizing_constant(p)), abs=1e-12)
    with pytest.raises(ValueError):
        prank_prob(p, -1)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_cyclic_and_squarefree_factors(p):
    assert float(cyclic_sylow_prob(p)) == pytest.approx(float(prank_prob(p, 0).value + prank_prob(p, 1).value))
    by_types = limit_prob_sylow(p, P()).value + limit_prob_sylow(p, P(1)).value
    assert float(squarefree_sylow_prob(p)) == pytest.approx(float(by_types))


@pytest.mark.parametrize("p, text", [(2, "2:[1]"), (2, "2:[2]"), (2, "2:[1,1]"), (3, "3:[1]"), (3, "3:[2]"), (3, "3:[1,1]")])
def test_sur_moments_of_the_limit(p, text):
    G = GroupSpec.parse(text)
    moment = sum(
        limit_prob_sylow(p, lam).value * sur_count(GroupSpec.sylow_only(p, lam), G)
        for lam in partitions_up_to(18)
    )
    assert float(moment) == pytest.approx(wedge2_order(p, G.sylow(p)), abs=1e-4)


def test_multi_prime_probability():
    G = GroupSpec.parse("2:[1];3:[1]")
    expected = limit_prob_sylow(2, P(1)).value * limit_prob_sylow(3, P(1)).value
    assert float(limit_prob_multi((2, 3), G)) == pytest.approx(float(expected))
    with pytest.raises(MissingPrimeError):
        limit_prob_multi((2,), GroupSpec.parse("3:[1]"))


def test_zero_probability_bound():
    bound = zero_probability_bound(GroupSpec.trivial(), 5)
    expected = normalizing_constant(2).value * normalizing_constant(3).value * normalizing_constant(5).value
    assert float(bound) == pytest.approx(float(expected))
    assert float(zero_probability_bound(GroupSpec.parse("7:[1]"), 5)) < float(bound)


def test_macwilliams_counts():
    assert macwilliams_rank_count(2, 1, 0) == 1
    assert macwilliams_rank_count(2, 2, 2) == 1
    assert sum(macwilliams_rank_count(3, 3, r) for r in range(4)) == 3 ** 6
    assert sum(uniform_corank_distribution(2, 5)) == 1
    with pytest.raises(ValueError):
        macwilliams_rank_count(2, 2, 3)


def test_capped_table_aggregates_types():
    table = sylow_table(2, 20, cap=1).as_dict()
    assert set(table) <= {P(*([1] * r)) for r in range(21)}
    assert table[P()] == pytest.approx(float(prank_prob(2, 0)))
    assert table[P(1)] == pytest.approx(float(prank_prob(2, 1)), abs=1e-4)


def test_estimate_arithmetic():
    a = Estimate(2, 0.1)
    assert a.scaled(-3).error == pytest.approx(0.3)
    product = a.times(Estimate(3, 0.2))
    assert product.value == 6
    assert product.error == pytest.approx(0.3 + 0.4 + 0.02)


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("lam", [P(), P(1), P(2), P(1, 1), P(3, 1), P(2, 2, 1), P(1, 1, 1, 1)], ids=str)
def test_hom_moments_match_subgroup_sums(p, lam):
    estimate = limit_hom_moment(p, lam)
    exact = sum_wedge2_over_subgroups(p, lam)
    assert abs(estimate.value - exact) <= 1e-25 * exact
    assert estimate.error <= 1e-20 * exact


def _elementary_moment(p, k):
    """sum over subspaces V of F_p^k of p^(dim V (dim V - 1) / 2)."""
    total = 0
    for j in range(k + 1):
        gaussian = Fraction(1)
        for i in range(j):
            gaussian *= Fraction(p ** (k - i) - 1, p ** (i + 1) - 1)
        total += gaussian.numerator * p ** (j * (j - 1) // 2)
    return total


def test_hom_moments_of_high_rank():
    assert abs(limit_hom_moment(2, P()).value - 1) < 1e-30
    for p, k in [(2, 12), (3, 8)]:
        exact = _elementary_moment(p, k)
        assert abs(limit_hom_moment(p, P(*[1] * k)).value - exact) <= 1e-25 * exact
