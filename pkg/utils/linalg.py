"""Exact diagonalization over Z and Z/p^eZ.

Integer Smith forms go through sympy's DomainMatrix machinery; the modular path is
a minimum-valuation elimination on numpy arrays, kept in int64 only while p^(2e)
leaves headroom in a machine word.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sympy import ZZ, factorint
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import invariant_factors

from utils.partitions import Partition

logger = logging.getLogger(__name__)

# int64 arithmetic is used only when every product of two residues stays below this
INT64_HEADROOM = 2 ** 62
INTEGER_MODULUS_TOKENS = {"0", "z", "zz", "integers"}


def _as_array(entries) -> np.ndarray:
    array = np.array(entries, dtype=object)
    if array.ndim != 2:
        raise ValueError(f"Matrix entries must be two-dimensional, got shape {array.shape}")
    if array.size and max(abs(int(x)) for x in array.flat) < INT64_HEADROOM:
        return array.astype(np.int64)
    return array


@dataclass(frozen=True, eq=False)
class ModMatrix:
    """Matrix over Z (modulus None) or over Z/modulus with canonical residues."""

    entries: np.ndarray
    modulus: int | None = None
    symmetric: bool = False

    def __post_init__(self):
        array = _as_array(self.entries)
        if self.modulus is not None:
            if self.modulus < 2:
                raise ValueError(f"Modulus must be at least 2, got {self.modulus}")
            if array.size and (array.min() < 0 or array.max() >= self.modulus):
                raise ValueError(f"Entries must lie in [0, {self.modulus}); use ModMatrix.reduced")
        if self.symmetric and not np.array_equal(array, array.T):
            raise ValueError("Matrix flagged symmetric but entries[i][j] != entries[j][i]")
        array.setflags(write=False)
        object.__setattr__(self, "entries", array)

    @classmethod
    def reduced(cls, entries, modulus: int | None, symmetric: bool = False) -> "ModMatrix":
        array = np.array(entries, dtype=object)
        if modulus is not None:
            array = array % modulus
        return cls(array, modulus, symmetric)

    @classmethod
    def identity(cls, n: int, modulus: int | None = None) -> "ModMatrix":
        return cls(np.eye(n, dtype=np.int64), modulus, symmetric=True)

    @classmethod
    def diagonal(cls, values, modulus: int | None = None) -> "ModMatrix":
        return cls.reduced(np.diag(np.array(values, dtype=object)), modulus, symmetric=True)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def reduce_mod(self, modulus: int) -> "ModMatrix":
        """Reduction to Z/modulus; modulus must divide the current one when modular."""
        if self.modulus is not None and self.modulus % modulus:
            raise ValueError(f"Cannot reduce a matrix mod {self.modulus} to mod {modulus}")
        return ModMatrix.reduced(self.entries, modulus, self.symmetric)

    def rows(self) -> list[list[int]]:
        return [[int(x) for x in row] for row in self.entries]

    @classmethod
    def from_text(cls, text: str) -> "ModMatrix":
        """Parses 'n modulus' followed by n whitespace-separated rows ('0' or 'Z' means integers)."""
        lines = [line.split() for line in text.strip().splitlines() if line.strip()]
        if not lines or len(lines[0]) != 2:
            raise ValueError("Matrix text must start with a line 'n modulus'")
        n = int(lines[0][0])
        token = lines[0][1].lower()
        modulus = None if token in INTEGER_MODULUS_TOKENS else int(token)
        rows = [[int(x) for x in line] for line in lines[1:]]
        if len(rows) != n or any(len(row) != n for row in rows):
            raise ValueError(f"Expected {n} rows of {n} entries")
        array = np.array(rows, dtype=object)
        if modulus is not None:
            array = array % modulus
        return cls(array, modulus, symmetric=bool(np.array_equal(array, array.T)))

    def to_text(self) -> str:
        header = f"{self.n} {self.modulus if self.modulus is not None else 'Z'}"
        return "\n".join([header] + [" ".join(str(x) for x in row) for row in self.rows()]) + "\n"


@dataclass(frozen=True)
class SNFResult:
    """Diagonal of a Smith form: invariant factors over Z, p-valuations over Z/p^e."""

    diagonal: tuple[int, ...]
    modulus: int | None = None
    prime: int | None = None
    exponent: int | None = None

    @property
    def rank(self) -> int:
        """Number of diagonal entries that are units-times-powers strictly below the modulus."""
        if self.modulus is None:
            return sum(1 for d in self.diagonal if d != 0)
        return sum(1 for v in self.diagonal if v < self.exponent)

    @property
    def corank(self) -> int:
        return len(self.diagonal) - self.rank


class CokernelType(NamedTuple):
    partition: Partition
    saturated: bool
    exponent: int


def _prime_power(modulus: int) -> tuple[int, int]:
    factors = factorint(modulus)
    if len(factors) != 1:
        raise ValueError(f"Modulus {modulus} is not a prime power")
    ((p, e),) = factors.items()
    return p, e


def p_valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def snf_integer(M: ModMatrix) -> SNFResult:
    """Invariant factors d_1 | d_2 | ... over Z, zeros trailing."""
    if M.modulus is not None:
        raise ValueError("snf_integer needs a matrix over Z; use snf_mod_prime_power for residues")
    rows, cols = M.shape
    dm = DomainMatrix([[ZZ(int(x)) for x in row] for row in M.entries], (rows, cols), ZZ)
    invs = [abs(int(x)) for x in invariant_factors(dm)]
    nonzero = [d for d in invs if d != 0]
    diagonal = nonzero + [0] * (min(rows, cols) - len(nonzero))
    return SNFResult(tuple(diagonal))


def determinant(M: ModMatrix) -> int:
    """Fraction-free (Bareiss) determinant over Z."""
    rows, cols = M.shape
    if rows != cols:
        raise ValueError("determinant needs a square matrix")
    if rows == 0:
        return 1
    dm = DomainMatrix([[ZZ(int(x)) for x in row] for row in M.entries], (rows, cols), ZZ)
    return int(dm.det())


def _valuation_diagonal(entries: np.ndarray, p: int, e: int) -> list[int]:
    q = p ** e
    dtype = np.int64 if q * q < INT64_HEADROOM else object
    work = np.array(entries, dtype=object) % q
    work = work.astype(dtype)
    rows, cols = work.shape
    powers = [p ** t for t in range(e + 1)]
    steps = min(rows, cols)
    valuations = []
    for k in range(steps):
        sub = work[k:, k:]
        pivot = None
        for t in range(e):
            mask = np.asarray((sub % powers[t + 1]) != 0, dtype=bool)
            if mask.any():
                i, j = divmod(int(np.argmax(mask)), sub.shape[1])
                pivot = (k + i, k + j, t)
                break
        if pivot is None:
            valuations.extend([e] * (steps - k))
            break
        i, j, t = pivot
        if i != k:
            work[[k, i]] = work[[i, k]]
        if j != k:
            work[:, [k, j]] = work[:, [j, k]]
        unit = int(work[k, k]) // powers[t]
        work[k, k:] = (work[k, k:] * pow(unit, -1, q)) % q
        factors = work[k + 1:, k] // powers[t]
        if np.any(factors):
            work[k + 1:, k:] = (work[k + 1:, k:] - np.outer(factors, work[k, k:])) % q
        work[k, k + 1:] = 0
        valuations.append(t)
    # surplus rows of a tall relation matrix are free summands
    valuations.extend([e] * (rows - steps))
    return sorted(valuations)


def snf_mod_prime_power(M: ModMatrix) -> SNFResult:
    """p-valuations v_1 <= ... <= v_n of the Smith form over Z/p^eZ (a zero pivot counts as e)."""
    if M.modulus is None:
        raise ValueError("snf_mod_prime_power needs a matrix over Z/p^e")
    p, e = _prime_power(M.modulus)
    return SNFResult(tuple(_valuation_diagonal(M.entries, p, e)), M.modulus, p, e)


def cokernel_valuations(entries, p: int, e: int) -> list[int]:
    """Valuation profile of an integer relation matrix reduced mod p^e (any shape)."""
    return _valuation_diagonal(np.array(entries, dtype=object), p, e)


def cokernel_sylow_type(M: ModMatrix, p: int, e: int = 8, ceiling: int = 64) -> CokernelType:
    """Sylow p-type of cok(M), doubling the working exponent until no valuation reaches it."""
    cap = None
    if M.modulus is not None:
        cap = p_valuation(M.modulus, p) if M.modulus % p == 0 else 0
        if cap == 0:
            raise ValueError(f"Prime {p} does not divide the modulus {M.modulus}")
    exponent = min(e, cap) if cap else e
    while True:
        valuations = _valuation_diagonal(M.entries, p, exponent)
        partition = Partition.from_multiset(valuations)
        if not valuations or max(valuations) < exponent:
            return CokernelType(partition, True, exponent)
        if (cap is not None and exponent >= cap) or exponent >= ceiling:
            logger.debug(f"Cokernel valuation reached exponent {exponent} at p={p}; reporting truncated type")
            return CokernelType(partition, False, exponent)
        exponent = min(exponent * 2, ceiling, cap) if cap else min(exponent * 2, ceiling)


def rank_mod_p(M: ModMatrix, p: int) -> int:
    """Rank over F_p by Gaussian elimination."""
    if M.modulus is not None and M.modulus % p:
        raise ValueError(f"Cannot reduce a matrix mod {M.modulus} to F_{p}")
    dtype = np.int64 if p * p < INT64_HEADROOM else object
    work = (np.array(M.entries, dtype=object) % p).astype(dtype)
    rows, cols = work.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        candidates = np.nonzero(work[rank:, c])[0]
        if candidates.size == 0:
            continue
        r = rank + int(candidates[0])
        if r != rank:
            work[[rank, r]] = work[[r, rank]]
        work[rank] = (work[rank] * pow(int(work[rank, c]), -1, p)) % p
        below = work[rank + 1:, c].copy()
        if np.any(below):
            work[rank + 1:] = (work[rank + 1:] - np.outer(below, work[rank])) % p
        rank += 1
    return rank


def rank_of_vectors(vectors, p: int) -> int:
    """F_p rank of a handful of short integer vectors, without numpy overhead."""
    rows = [[x % p for x in v] for v in vectors]
    rank = 0
    width = len(rows[0]) if rows else 0
    for c in range(width):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][c]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = pow(rows[rank][c], -1, p)
        rows[rank] = [(x * inv) % p for x in rows[rank]]
        for r in range(rank + 1, len(rows)):
            f = rows[r][c]
            if f:
                rows[r] = [(x - f * y) % p for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank
