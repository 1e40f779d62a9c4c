"""Counting formulas for finite abelian p-groups G_lambda = sum Z/p^lambda_i."""

import itertools
import logging
import threading
from collections import Counter
from math import prod

import mpmath
from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from utils.errors import OracleBoundExceeded
from utils.linalg import cokernel_valuations, rank_of_vectors
from utils.partitions import GroupSpec, Partition, sub_partitions, transpose

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_BOUND = 4096

# --- Constants of the subgroup and moment bounds ---
# prod_{i>=1} (1 - 2^-i)
BINARY_EULER_PRODUCT = mpmath.qp(mpmath.mpf(1) / 2, mpmath.mpf(1) / 2)
# F = 2 / (1 - 2^(-1/8)) * prod_{i>=1} (1 - 2^-i)^-1
BOUNDMOM_CONSTANT = 2 / (1 - mpmath.power(2, -mpmath.mpf(1) / 8)) / BINARY_EULER_PRODUCT

_profile_lock = threading.Lock()


# --- Closed-form counts ---

def wedge2_order(p: int, lam: Partition) -> int:
    """|wedge^2 G_lambda| = p^(sum_j lambda'_j (lambda'_j - 1) / 2)."""
    return p ** sum(c * (c - 1) // 2 for c in transpose(lam))


def moment_value(G: GroupSpec) -> int:
    """prod_i a_i^(i-1) over the invariant factors a_r | ... | a_1 of G."""
    return prod(a ** i for i, a in enumerate(G.invariant_factors()))


def hom_count(p: int, mu: Partition, lam: Partition) -> int:
    """|Hom(G_mu, G_lambda)| = p^(sum_i mu'_i lambda'_i)."""
    return p ** sum(a * b for a, b in zip(transpose(mu), transpose(lam)))


def aut_order(p: int, lam: Partition) -> int:
    """|Aut(G_lambda)| = p^(sum lambda'_i^2) prod_i prod_{j <= m_i} (1 - p^-j), as an exact integer."""
    squares = sum(c * c for c in transpose(lam))
    mults = lam.multiplicities()
    shift = sum(m * (m + 1) // 2 for m in mults)
    return p ** (squares - shift) * prod(p ** j - 1 for m in mults for j in range(1, m + 1))


def pairing_count(p: int, lam: Partition) -> int:
    """Number of symmetric perfect pairings G_lambda x G_lambda -> C^*."""
    base = sum(c * (c + 1) // 2 for c in transpose(lam))
    halves = [(m + 1) // 2 for m in lam.multiplicities()]
    return p ** (base - sum(h * h for h in halves)) * prod(p ** (2 * j - 1) - 1 for h in halves for j in range(1, h + 1))


def aut_order_group(G: GroupSpec) -> int:
    return prod(aut_order(p, lam) for p, lam in G.factors)


def pairing_count_group(G: GroupSpec) -> int:
    return prod(pairing_count(p, lam) for p, lam in G.factors)


def hom_count_group(H: GroupSpec, G: GroupSpec) -> int:
    return prod(hom_count(p, H.sylow(p), lam) for p, lam in G.factors)


# --- Subgroups from generators ---

def subgroup_type_from_generators(p: int, lam: Partition, generators, e: int | None = None) -> Partition:
    """Type of the subgroup of G_lambda generated by exponent vectors.

    |p^j H| = |G| / |cok([diag(p^lambda_i) | p^j * gens])|, read off the
    relation-matrix diagonal over Z/p^e; successive quotients give the transpose
    of the type.
    """
    r = len(lam)
    gens = [tuple(int(x) for x in g) for g in generators]
    if any(len(g) != r for g in gens):
        raise ValueError(f"Generators must have {r} coordinates to lie in G_{lam}")
    gens = [g for g in gens if any(x % p ** lam[i] for i, x in enumerate(g))]
    if not gens:
        return Partition()
    e = max(e or 0, lam.largest + 1)
    moduli = [p ** x for x in lam]
    sizes = []
    for j in range(lam.largest + 1):
        scale = p ** j
        relations = [
            [moduli[i] if c == i else 0 for c in range(r)] + [(scale * g[i]) % moduli[i] for g in gens]
            for i in range(r)
        ]
        sizes.append(lam.size - sum(cokernel_valuations(relations, p, e)))
    conjugate = [sizes[j] - sizes[j + 1] for j in range(lam.largest)]
    return transpose(Partition(tuple(c for c in conjugate if c > 0)))


# --- Subspaces of F_p^r ---

def subspaces(p: int, r: int):
    """Every subspace of F_p^r, as a tuple of reduced row-echelon basis rows."""
    for d in range(r + 1):
        for pivots in itertools.combinations(range(r), d):
            pivot_set = set(pivots)
            free = [(row, col) for row, pc in enumerate(pivots) for col in range(pc + 1, r) if col not in pivot_set]
            for values in itertools.product(range(p), repeat=len(free)):
                rows = [[0] * r for _ in range(d)]
                for row, pc in enumerate(pivots):
                    rows[row][pc] = 1
                for (row, col), v in zip(free, values):
                    rows[row][col] = v
                yield tuple(tuple(row) for row in rows)


def gaussian_binomial(r: int, k: int, p: int) -> int:
    """Number of k-dimensional subspaces of F_p^r."""
    if k < 0 or k > r:
        return 0
    return prod(p ** (r - i) - 1 for i in range(k)) // prod(p ** (i + 1) - 1 for i in range(k))


def _mobius(p: int, k: int) -> int:
    return (-1) ** k * p ** (k * (k - 1) // 2)


# --- Surjections ---

@cached(cache=LRUCache(maxsize=4096), key=lambda p, lam: hashkey(p, lam), lock=_profile_lock)
def preimage_profile(p: int, lam: Partition) -> tuple[tuple[int, Partition, int], ...]:
    """(codimension k, type of pi^-1(W), multiplicity) over subspaces W of G/pG."""
    r = len(lam)
    profile = Counter()
    base = [tuple(p if c == i else 0 for c in range(r)) for i in range(r)]
    for basis in subspaces(p, r):
        kind = subgroup_type_from_generators(p, lam, base + list(basis))
        profile[(r - len(basis), kind)] += 1
    return tuple((k, kind, count) for (k, kind), count in sorted(profile.items()))


def _sur_count_p(p: int, mu: Partition, lam: Partition) -> int:
    if len(mu) < len(lam):
        return 0
    return sum(count * _mobius(p, k) * hom_count(p, mu, kind) for k, kind, count in preimage_profile(p, lam))


def sur_count(H: GroupSpec | None, G: GroupSpec) -> int:
    """#Sur(H, G), computed prime by prime through subspaces of G/pG."""
    if H is None:
        raise ValueError("sur_count needs a finite source group (disconnected graphs have infinite sandpile groups)")
    result = 1
    for p, lam in G.factors:
        result *= _sur_count_p(p, H.sylow(p), lam)
        if result == 0:
            return 0
    return result


# --- Injections and subgroup counts ---

@cached(cache=LRUCache(maxsize=4096), key=lambda p, mu: hashkey(p, mu), lock=_profile_lock)
def socle_profile(p: int, mu: Partition) -> tuple[tuple[int, Partition, int], ...]:
    """(dim W, type of G_mu / W, multiplicity) over subspaces W of the socle G_mu[p]."""
    r = len(mu)
    profile = Counter()
    for basis in subspaces(p, r):
        dim = len(basis)
        sizes = []
        for j in range(mu.largest + 1):
            outside = [i for i in range(r) if mu[i] <= j]
            projected = rank_of_vectors([[row[i] for i in outside] for row in basis], p) if outside and basis else 0
            sizes.append(sum(max(x - j, 0) for x in mu) - (dim - projected))
        conjugate = [sizes[j] - sizes[j + 1] for j in range(mu.largest)]
        quotient = transpose(Partition(tuple(c for c in conjugate if c > 0)))
        profile[(dim, quotient)] += 1
    return tuple((k, kind, count) for (k, kind), count in sorted(profile.items()))


def inj_count(p: int, mu: Partition, lam: Partition) -> int:
    """#Inj(G_mu, G_lambda) by inclusion-exclusion over kernels inside the socle."""
    if not lam.contains(mu):
        return 0
    return sum(count * _mobius(p, k) * hom_count(p, kind, lam) for k, kind, count in socle_profile(p, mu))


def subgroup_count(p: int, mu: Partition, lam: Partition) -> int:
    """Number of subgroups of type mu in G_lambda."""
    injections = inj_count(p, mu, lam)
    automorphisms = aut_order(p, mu)
    if injections % automorphisms:
        raise ArithmeticError(f"#Inj(G_{mu}, G_{lam}) = {injections} is not divisible by |Aut| = {automorphisms}")
    return injections // automorphisms


def subgroup_table(p: int, lam: Partition) -> list[tuple[Partition, int]]:
    """(mu, #subgroups of type mu) for every mu inside lambda, by counting."""
    return sorted((mu, subgroup_count(p, mu, lam)) for mu in sub_partitions(lam))


def enumerate_subgroups(p: int, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> list[tuple[Partition, int]]:
    """Subgroups of G_lambda by type, found by exhaustive enumeration."""
    from utils.oracles import enumerate_subgroups_bruteforce

    table = enumerate_subgroups_bruteforce(p, lam, bound=bound)
    return sorted(table.items())


def sum_wedge2_over_subgroups(p: int, lam: Partition, method: str = "count", bound: int = DEFAULT_ORACLE_BOUND) -> int:
    """sum over subgroups G_1 <= G_lambda of |wedge^2 G_1|."""
    if method == "count":
        table = subgroup_table(p, lam)
    elif method == "enumerate":
        table = enumerate_subgroups(p, lam, bound=bound)
    else:
        raise ValueError(f"Unknown method {method!r}; use 'count' or 'enumerate'")
    return sum(count * wedge2_order(p, mu) for mu, count in table)


# --- Bounds ---

def boundmom_bound(p: int, lam: Partition) -> mpmath.mpf:
    """F^lambda_1 * p^(sum lambda'_i (lambda'_i - 1) / 2)."""
    return BOUNDMOM_CONSTANT ** lam.largest * wedge2_order(p, lam)


def aut_order_bounds(p: int, lam: Partition) -> tuple[mpmath.mpf, int]:
    upper = p ** sum(c * c for c in transpose(lam))
    return BINARY_EULER_PRODUCT ** lam.largest * upper, upper


def nsub_bound(p: int, mu: Partition, lam: Partition) -> mpmath.mpf:
    """(prod (1 - 2^-i))^-lambda_1 * p^(sum mu'_i lambda'_i - mu'_i^2)."""
    mu_t, lam_t = transpose(mu), transpose(lam)
    exponent = sum(mu_t.part(i) * lam_t.part(i) - mu_t.part(i) ** 2 for i in range(1, max(mu.largest, lam.largest) + 1))
    return BINARY_EULER_PRODUCT ** (-lam.largest) * mpmath.power(p, exponent)


def nsub_bound_check(p: int, mu: Partition, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> bool:
    """Whether the enumerated number of type-mu subgroups of G_lambda respects the subgroup bound."""
    if p ** lam.size > bound:
        raise OracleBoundExceeded(p ** lam.size, bound)
    count = dict(enumerate_subgroups(p, lam, bound=bound)).get(mu, 0)
    return count <= nsub_bound(p, mu, lam)
