"""Limiting distributions of sandpile Sylow subgroups and their corollaries.

Every probability comes back as an Estimate carrying an absolute error bound
for the truncated infinite products it was built from.
"""

import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import prod

import mpmath
from cachetools import LRUCache, cached
from cachetools.keys import hashkey
from pydantic import BaseModel, ConfigDict, Field
from sympy import nextprime, primerange

from utils.abelian import aut_order, aut_order_group, pairing_count, pairing_count_group
from utils.errors import InconsistentFormulaError, MissingPrimeError
from utils.partitions import GroupSpec, Partition, partitions_up_to, transpose

logger = logging.getLogger(__name__)

PRECISION_DIGITS = 40
FORMULA_AGREEMENT = 1e-12

_theory_lock = threading.Lock()


class TruncationPolicy(BaseModel):
    """How far the infinite products are expanded."""

    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=1e-15, gt=0, le=1e-6)
    max_index: int = Field(default=256, ge=64)
    prime_tolerance: float = Field(default=1e-9, gt=0, le=1e-6)


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class Estimate:
    """value with |true value - value| <= error."""

    value: mpmath.mpf
    error: mpmath.mpf

    def __float__(self):
        return float(self.value)

    def scaled(self, factor) -> "Estimate":
        return Estimate(self.value * factor, abs(self.error * factor))

    def times(self, other: "Estimate") -> "Estimate":
        value = self.value * other.value
        return Estimate(value, abs(self.value) * other.error + abs(other.value) * self.error + self.error * other.error)


@dataclass(frozen=True)
class SylowRow:
    partition: Partition
    probability: float
    error: float


@dataclass(frozen=True)
class SylowTable:
    p: int
    rows: list[SylowRow]
    deficit: float
    cap: int | None = None

    def as_dict(self) -> dict[Partition, float]:
        return {row.partition: row.probability for row in self.rows}


# --- Infinite products ---

def _geometric_product(p: int, start: int, step: int, policy: TruncationPolicy) -> Estimate:
    """prod_{k>=0} (1 - p^-(start + step k)), stopping once a factor is within tolerance of 1."""
    value = mpmath.mpf(1)
    k = 0
    while True:
        x = mpmath.power(p, -(start + step * k))
        if x < policy.tolerance or k >= policy.max_index:
            break
        value *= 1 - x
        k += 1
    tail = x / (1 - mpmath.power(p, -step))
    return Estimate(value, value * tail)


def _inverse(estimate: Estimate) -> Estimate:
    value = 1 / estimate.value
    return Estimate(value, estimate.error / (estimate.value * (estimate.value - estimate.error)))


@mpmath.workdps(PRECISION_DIGITS)
def normalizing_constant(p: int, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """prod_{k>=0} (1 - p^(-2k-1))."""
    return _geometric_product(p, 1, 2, policy)


@mpmath.workdps(PRECISION_DIGITS)
def even_spanning_tree_limit(policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Limiting probability that G(n, q) has an even number of spanning trees."""
    constant = normalizing_constant(2, policy)
    return Estimate(1 - constant.value, constant.error)


# --- Sylow probabilities ---

def sylow_fraction(p: int, lam: Partition) -> Fraction:
    """#pairings / (|G_lambda| |Aut G_lambda|), exactly."""
    return Fraction(pairing_count(p, lam), p ** lam.size * aut_order(p, lam))


def sylow_fraction_transposed(p: int, lam: Partition) -> mpmath.mpf:
    """The same fraction through mu = lambda': p^(-sum mu_i(mu_i+1)/2) prod (1 - p^-2j)^-1."""
    mu = transpose(lam)
    value = mpmath.power(p, -sum(m * (m + 1) // 2 for m in mu))
    for i in range(1, lam.largest + 1):
        for j in range(1, (mu.part(i) - mu.part(i + 1)) // 2 + 1):
            value /= 1 - mpmath.power(p, -2 * j)
    return value


@cached(cache=LRUCache(maxsize=65536), key=lambda p, lam, policy=DEFAULT_POLICY: hashkey(p, lam, policy), lock=_theory_lock)
@mpmath.workdps(PRECISION_DIGITS)
def limit_prob_sylow(p: int, lam: Partition, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Limiting probability that the Sylow p-subgroup has type lambda."""
    exact = sylow_fraction(p, lam)
    direct = mpmath.mpf(exact.numerator) / exact.denominator
    transposed = sylow_fraction_transposed(p, lam)
    if abs(direct - transposed) > FORMULA_AGREEMENT * abs(direct):
        raise InconsistentFormulaError(
            f"Sylow fraction for p={p}, lambda={lam}: {mpmath.nstr(direct, 20)} vs {mpmath.nstr(transposed, 20)}"
        )
    return normalizing_constant(p, policy).scaled(direct)


@mpmath.workdps(PRECISION_DIGITS)
def limit_prob_multi(primes, G: GroupSpec, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Limiting probability that the Sylow subgroups at the primes in P together form G."""
    primes = sorted(set(primes))
    missing = [p for p in G.primes if p not in primes]
    if missing:
        raise MissingPrimeError(f"Prime set {primes} misses primes {missing} dividing |G| = {G.order}")
    fraction = Fraction(pairing_count_group(G), G.order * aut_order_group(G))
    result = Estimate(mpmath.mpf(fraction.numerator) / fraction.denominator, mpmath.mpf(0))
    for p in primes:
        result = result.times(normalizing_constant(p, policy))
    return result


@mpmath.workdps(PRECISION_DIGITS)
def prank_prob(p: int, r: int, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Limiting probability that the p-rank equals r."""
    if r < 0:
        raise ValueError(f"p-rank must be nonnegative, got r={r}")
    upper = _geometric_product(p, r + 1, 1, policy)
    lower = _inverse(_geometric_product(p, 2, 2, policy))
    return upper.times(lower).scaled(mpmath.power(p, -r * (r + 1) // 2))


def macwilliams_rank_count(p: int, n: int, r: int) -> int:
    """Number of symmetric n x n matrices over F_p of rank n - r."""
    if not 0 <= r <= n:
        raise ValueError(f"Corank must satisfy 0 <= r <= n, got r={r}, n={n}")
    count = Fraction(p) ** (n * (n + 1) // 2 - r * (r + 1) // 2)
    for i in range(1, (n - r) // 2 + 1):
        count /= 1 - Fraction(1, p ** (2 * i))
    for i in range(r + 1, n + 1):
        count *= 1 - Fraction(1, p ** i)
    if count.denominator != 1:
        raise InconsistentFormulaError(f"Symmetric rank count for p={p}, n={n}, r={r} is not an integer: {count}")
    return count.numerator


def uniform_corank_distribution(p: int, n: int) -> list[Fraction]:
    """P(corank = r) for a uniform symmetric n x n matrix over F_p, r = 0..n."""
    total = p ** (n * (n + 1) // 2)
    return [Fraction(macwilliams_rank_count(p, n, r), total) for r in range(n + 1)]


# --- Cyclic and square-free ---

@mpmath.workdps(PRECISION_DIGITS)
def cyclic_sylow_prob(p: int, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """prod_{i>=1} (1 - p^(-2i-1)): limiting probability of a cyclic Sylow p-subgroup."""
    return _geometric_product(p, 3, 2, policy)


@mpmath.workdps(PRECISION_DIGITS)
def squarefree_sylow_prob(p: int, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """(1 + 1/p) prod_{k>=0} (1 - p^(-2k-1)): the Sylow p-subgroup has order 1 or p."""
    return normalizing_constant(p, policy).scaled(1 + mpmath.mpf(1) / p)


def _cubic_prime_tail(bound: int) -> mpmath.mpf:
    """Upper bound on -log prod_{p > bound} cyclic_sylow_prob(p), via sum_{n > bound} (4/3) n^-3."""
    return mpmath.mpf(4) / 3 / (2 * mpmath.mpf(bound) ** 2)


def _prime_product(factor, policy: TruncationPolicy) -> tuple[Estimate, int]:
    value = mpmath.mpf(1)
    error = mpmath.mpf(0)
    p = 2
    while True:
        term = factor(p, policy)
        value *= term.value
        error = error * term.value + value / term.value * term.error
        tail = _cubic_prime_tail(p)
        if 1 - term.value < policy.prime_tolerance and tail < policy.prime_tolerance:
            break
        p = nextprime(p)
    return Estimate(value, error + value * tail), p


@mpmath.workdps(PRECISION_DIGITS)
def cyclic_upper_bound(policy: TruncationPolicy = DEFAULT_POLICY, method: str = "primes") -> Estimate:
    """Upper bound prod_p prod_{i>=1}(1 - p^(-2i-1)) = prod_{k>=1} zeta(2k+1)^-1 on P(S cyclic)."""
    if method == "zeta":
        value = mpmath.mpf(1)
        k = 1
        while True:
            excess = mpmath.zeta(2 * k + 1) - 1
            if excess < policy.tolerance or k >= policy.max_index:
                break
            value /= 1 + excess
            k += 1
        # zeta(s) - 1 <= 2^(1-s) for s >= 3
        tail = 2 * mpmath.power(2, -(2 * k + 1)) / (1 - mpmath.mpf(1) / 4)
        return Estimate(value, value * tail)
    if method != "primes":
        raise ValueError(f"Unknown method {method!r}; use 'primes' or 'zeta'")
    result, largest = _prime_product(cyclic_sylow_prob, policy)
    logger.debug(f"Cyclic bound over primes up to {largest}: {mpmath.nstr(result.value, 12)}")
    return result


@mpmath.workdps(PRECISION_DIGITS)
def squarefree_upper_bound(policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Upper bound prod_p (1 + 1/p) prod_{k>=0}(1 - p^(-2k-1)) on P(|S| square-free).

    The factor prod_p (1 - p^-2) converges too slowly over primes, so the partial
    product is completed with 1/zeta(2) divided by its own partial product.
    """
    result, largest = _prime_product(squarefree_sylow_prob, policy)
    partial = prod(1 - mpmath.power(p, -2) for p in primerange(2, largest + 1))
    correction = 1 / mpmath.zeta(2) / partial
    return result.scaled(correction)


@mpmath.workdps(PRECISION_DIGITS)
def zero_probability_bound(G: GroupSpec, bound: int, policy: TruncationPolicy = DEFAULT_POLICY) -> Estimate:
    """Upper bound on P(S = G) from the Sylow probabilities at all primes up to bound."""
    primes = sorted(set(primerange(2, bound + 1)) | set(G.primes))
    return limit_prob_multi(primes, G, policy)


# --- Tables ---

@mpmath.workdps(PRECISION_DIGITS)
def sylow_table(
    p: int,
    max_size: int,
    max_part: int | None = None,
    cap: int | None = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> SylowTable:
    """Limiting probabilities of all types with |lambda| <= max_size.

    With cap set, types are truncated at p^cap and their masses aggregated: the
    limiting law of S tensor Z/p^cap.
    """
    masses: dict[Partition, mpmath.mpf] = {}
    errors: dict[Partition, mpmath.mpf] = {}
    total = mpmath.mpf(0)
    for lam in partitions_up_to(max_size, max_part=max_part):
        estimate = limit_prob_sylow(p, lam, policy)
        key = lam.capped(cap) if cap else lam
        masses[key] = masses.get(key, 0) + estimate.value
        errors[key] = errors.get(key, 0) + estimate.error
        total += estimate.value
    deficit = float(1 - total)
    logger.debug(f"Sylow table p={p}, |lambda| <= {max_size}: normalization deficit {deficit:.3e}")
    rows = [SylowRow(lam, float(masses[lam]), float(errors[lam])) for lam in sorted(masses, key=lambda x: (x.size, x.parts))]
    return SylowTable(p, rows, deficit, cap)


def normalization_deficit(p: int, max_size: int, policy: TruncationPolicy = DEFAULT_POLICY) -> float:
    return sylow_table(p, max_size, policy=policy).deficit


# --- Hom-moments of the limiting law ---

HOM_MOMENT_MARGIN = 20


def _column_weight(p: int, d: int) -> mpmath.mpf:
    """prod_{j=1}^{floor(d/2)} (1 - p^-2j)^-1."""
    value = mpmath.mpf(1)
    for j in range(1, d // 2 + 1):
        value /= 1 - mpmath.power(p, -2 * j)
    return value


def _deep_columns(p: int, depth: int, weights: list) -> list:
    """T(r): total weight of every column sequence r >= s_1 >= s_2 >= ... that ends in zeros."""
    T = [mpmath.mpf(1)]
    for r in range(1, depth + 1):
        partial = sum(weights[r - s] * mpmath.power(p, -(s * (s + 1) // 2)) * T[s] for s in range(r))
        T.append(partial / (1 - mpmath.power(p, -(r * (r + 1) // 2))))
    return T


@mpmath.workdps(PRECISION_DIGITS)
def limit_hom_moment(p: int, group_type: Partition) -> Estimate:
    """E #Hom(S_p, G_lambda) under the limiting law.

    Both #Hom(S_p, G_lambda) = p^(sum_k lambda'_k r_k) and the limiting mass
    factor over the column lengths r_1 >= r_2 >= ... of the Sylow type, so the
    sum runs column by column. Columns longer than lambda'_1 + HOM_MOMENT_MARGIN are
    dropped.
    """
    exponents = transpose(group_type).parts or (0,)
    depth = exponents[0] + HOM_MOMENT_MARGIN
    weights = [_column_weight(p, d) for d in range(depth + 1)]
    level = _deep_columns(p, depth, weights)
    for i, e in enumerate(reversed(exponents)):
        if i:
            level = [sum(weights[r - s] * level[s] for s in range(r + 1)) for r in range(depth + 1)]
        level = [mpmath.power(p, e * r - r * (r + 1) // 2) * x for r, x in enumerate(level)]
    total = sum(level)
    constant = mpmath.qp(mpmath.mpf(1) / p, mpmath.mpf(1) / p ** 2)
    return Estimate(constant * total, constant * (2 * level[-1] + total * mpmath.eps))
