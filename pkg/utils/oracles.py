"""Exhaustive enumeration over explicit element tables of small abelian p-groups.

Nothing here uses the counting formulas of utils.abelian; these are the values
those formulas are checked against.
"""

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from math import prod

import numpy as np
from sympy import multiplicity

from utils.errors import OracleBoundExceeded
from utils.linalg import rank_of_vectors
from utils.partitions import Partition, transpose

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_BOUND = 4096
CHUNK = 256


@dataclass(frozen=True, eq=False)
class SmallGroupTable:
    """Every element of sum_i Z/p^lambda_i as an exponent vector, in mixed-radix order."""

    p: int
    lam: Partition
    elements: np.ndarray

    @classmethod
    def build(cls, p: int, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> "SmallGroupTable":
        order = p ** lam.size
        if order > bound:
            raise OracleBoundExceeded(order, bound)
        if not lam:
            return cls(p, lam, np.zeros((1, 0), dtype=np.int64))
        grid = np.indices([p ** x for x in lam]).reshape(len(lam), -1).T
        return cls(p, lam, grid.astype(np.int64))

    @property
    def e(self) -> int:
        return self.lam.largest

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def moduli(self) -> np.ndarray:
        return np.array([self.p ** x for x in self.lam], dtype=np.int64)

    @property
    def radix(self) -> np.ndarray:
        moduli = self.moduli
        return np.array([int(np.prod(moduli[i + 1:])) for i in range(len(moduli))], dtype=np.int64)

    def encode(self, vectors: np.ndarray) -> np.ndarray:
        """Row index of each exponent vector (last axis) after reduction."""
        if not self.lam:
            return np.zeros(np.shape(vectors)[:-1], dtype=np.int64)
        return ((vectors % self.moduli) * self.radix).sum(axis=-1)

    def killed_by(self, k: int) -> np.ndarray:
        """Elements g with p^k g = 0."""
        mask = ((self.elements * self.p ** k) % self.moduli == 0).all(axis=1)
        return self.elements[mask]

    def subgroup_sizes(self, codes) -> list[int]:
        """|p^j H| for j = 0..e, H given by its element codes."""
        members = self.elements[np.asarray(sorted(codes), dtype=np.int64)]
        return [len(np.unique(self.encode(members * self.p ** j))) for j in range(self.e + 1)]


def _type_from_sizes(p: int, sizes: list[int]) -> Partition:
    logs = [multiplicity(p, s) for s in sizes] + [0]
    conjugate = [logs[j] - logs[j + 1] for j in range(len(sizes))]
    return transpose(Partition(tuple(c for c in conjugate if c > 0)))


def _hom_images(source: Partition, target: SmallGroupTable, bound: int) -> np.ndarray:
    """All homomorphisms G_source -> target as (K, r_source, r_target) generator images."""
    candidates = [target.killed_by(m) for m in source]
    total = prod(len(c) for c in candidates)
    if total > bound:
        raise OracleBoundExceeded(total, bound, "homomorphisms")
    if not candidates:
        return np.zeros((1, 0, len(target.lam)), dtype=np.int64)
    index = np.indices([len(c) for c in candidates]).reshape(len(candidates), -1).T
    return np.stack([c[index[:, i]] for i, c in enumerate(candidates)], axis=1)


def _image_codes(source: SmallGroupTable, target: SmallGroupTable, homs: np.ndarray):
    """Codes of phi(x) for every element x of the source, in chunks of maps."""
    for start in range(0, len(homs), CHUNK):
        block = homs[start:start + CHUNK]
        images = np.einsum("nr,krc->knc", source.elements, block)
        yield target.encode(images)


# --- Homomorphism counts ---

def hom_count_bruteforce(p: int, mu: Partition, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> int:
    target = SmallGroupTable.build(p, lam, bound)
    return prod(len(target.killed_by(m)) for m in mu)


def aut_order_bruteforce(p: int, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> int:
    table = SmallGroupTable.build(p, lam, bound)
    homs = _hom_images(lam, table, bound)
    count = 0
    for codes in _image_codes(table, table, homs):
        count += int(((codes == 0).sum(axis=1) == 1).sum())
    return count


def sur_count_bruteforce(p: int, mu: Partition, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> int:
    source = SmallGroupTable.build(p, mu, bound)
    target = SmallGroupTable.build(p, lam, bound)
    homs = _hom_images(mu, target, bound)
    count = 0
    for codes in _image_codes(source, target, homs):
        ordered = np.sort(codes, axis=1)
        distinct = 1 + (np.diff(ordered, axis=1) != 0).sum(axis=1)
        count += int((distinct == target.order).sum())
    return count


def pairing_count_bruteforce(p: int, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> int:
    """Symmetric bilinear b with values b(e_i, e_j) = m_ij / p^min(lambda_i, lambda_j) and trivial kernel."""
    table = SmallGroupTable.build(p, lam, bound)
    r = len(lam)
    slots = [(i, j) for i in range(r) for j in range(i, r)]
    sizes = [p ** lam[j] for _, j in slots]
    total = prod(sizes)
    if total > bound:
        raise OracleBoundExceeded(total, bound, "bilinear forms")
    if not slots:
        return 1
    top = p ** lam.largest
    values = np.indices(sizes).reshape(len(slots), -1).T
    forms = np.zeros((len(values), r, r), dtype=np.int64)
    for s, (i, j) in enumerate(slots):
        scaled = values[:, s] * p ** (lam.largest - lam[j])
        forms[:, i, j] = scaled
        forms[:, j, i] = scaled
    count = 0
    for start in range(0, len(forms), CHUNK):
        block = forms[start:start + CHUNK]
        pairings = np.einsum("nr,krc->knc", table.elements, block) % top
        kernel = (pairings == 0).all(axis=2).sum(axis=1)
        count += int((kernel == 1).sum())
    return count


# --- Subgroups ---

def _lattice_rows(p: int, lam: Partition):
    """Upper-triangular Hermite bases of lattices L with diag(p^lambda) Z^r <= L <= Z^r.

    Rows are fixed bottom-up; whether p^lambda_k e_k lies in L only depends on
    rows k..r, so every partial basis is checked as soon as row k is placed.
    """
    r = len(lam)

    def contains(rows, k):
        v = [0] * r
        v[k] = p ** lam[k]
        for i, row in enumerate(rows, start=k):
            if v[i] % row[i]:
                return False
            c = v[i] // row[i]
            if c:
                v = [a - c * b for a, b in zip(v, row)]
        return not any(v)

    def extend(rows, k):
        if k < 0:
            yield rows
            return
        for t in range(lam[k] + 1):
            pivot = p ** t
            ranges = [range(rows[j - k - 1][j]) for j in range(k + 1, r)]
            for tail in itertools.product(*ranges):
                row = [0] * k + [pivot] + list(tail)
                candidate = [row] + rows
                if contains(candidate, k):
                    yield from extend(candidate, k - 1)

    yield from extend([], r - 1)


def enumerate_subgroups_bruteforce(p: int, lam: Partition, bound: int = DEFAULT_ORACLE_BOUND) -> Counter:
    """Counter {type: number of subgroups}, one Hermite basis per subgroup."""
    from utils.abelian import subgroup_type_from_generators

    order = p ** lam.size
    if order > bound:
        raise OracleBoundExceeded(order, bound)
    table = Counter()
    for rows in _lattice_rows(p, lam):
        table[subgroup_type_from_generators(p, lam, rows)] += 1
    logger.debug(f"Enumerated {sum(table.values())} subgroups of G_{lam} at p={p}")
    return table


def subgroups_by_closure(p: int, lam: Partition, bound: int = 64) -> Counter:
    """Subgroups as element sets, closing {0} under joins with cyclic subgroups."""
    table = SmallGroupTable.build(p, lam, bound)
    multiples = np.arange(max(p ** table.e, 1), dtype=np.int64)
    cyclics = {frozenset(table.encode(multiples[:, None] * g).tolist()) for g in table.elements}
    seen = {frozenset([0])}
    frontier = list(seen)
    while frontier:
        fresh = []
        for H in frontier:
            members = table.elements[sorted(H)]
            for C in cyclics:
                if C <= H:
                    continue
                generated = table.elements[sorted(C)]
                K = frozenset(table.encode(members[:, None, :] + generated[None, :, :]).ravel().tolist())
                if K not in seen:
                    seen.add(K)
                    fresh.append(K)
        frontier = fresh
    return Counter(_type_from_sizes(p, table.subgroup_sizes(H)) for H in seen)


# --- Symmetric matrices over F_p ---

def symmetric_rank_counts(p: int, n: int) -> Counter:
    """Counter {rank: number of symmetric n x n matrices over F_p}, exhaustively."""
    slots = [(i, j) for i in range(n) for j in range(i, n)]
    counts = Counter()
    for values in itertools.product(range(p), repeat=len(slots)):
        matrix = [[0] * n for _ in range(n)]
        for (i, j), v in zip(slots, values):
            matrix[i][j] = matrix[j][i] = v
        counts[rank_of_vectors(matrix, p) if n else 0] += 1
    return counts
