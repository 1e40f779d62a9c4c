"""Partitions and finite abelian groups in Sylow-type form.

A partition lambda = (lambda_1 >= lambda_2 >= ... >= 1) is the type of the abelian
p-group Z/p^lambda_1 + Z/p^lambda_2 + ...; a GroupSpec maps each prime to the
type of its Sylow subgroup.
"""

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

from sympy import factorint, isprime
from sympy.utilities.iterables import partitions as _sympy_partitions

PARTITION_PATTERN = re.compile(r"^\s*\[\s*((?:\d+\s*(?:,\s*\d+\s*)*)?)\]\s*$")
TRIVIAL_ENCODINGS = {"", "1", "trivial", "0"}


@dataclass(frozen=True, order=True)
class Partition:
    parts: tuple[int, ...] = ()

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if any(x < 1 for x in parts):
            raise ValueError(f"Partition parts must be positive, got {list(parts)}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"Partition parts must be weakly decreasing, got {list(parts)}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: int) -> "Partition":
        return cls(tuple(parts))

    @classmethod
    def from_multiset(cls, values: Iterable[int]) -> "Partition":
        """Builds a partition from unordered exponents, dropping zeros."""
        return cls(tuple(sorted((v for v in values if v > 0), reverse=True)))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        match = PARTITION_PATTERN.match(text)
        if not match:
            raise ValueError(f"Cannot parse partition {text!r}; expected e.g. '[3,1,1]'")
        body = match.group(1)
        if not body.strip():
            return cls()
        return cls(tuple(int(x) for x in body.split(",")))

    def __str__(self):
        return "[" + ",".join(str(x) for x in self.parts) + "]"

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __bool__(self):
        return bool(self.parts)

    @property
    def size(self) -> int:
        return sum(self.parts)

    @property
    def largest(self) -> int:
        return self.parts[0] if self.parts else 0

    def part(self, i: int) -> int:
        """1-indexed part with zero padding, lambda_i."""
        return self.parts[i - 1] if 1 <= i <= len(self.parts) else 0

    def transpose(self) -> "Partition":
        return transpose(self)

    def padded(self, length: int) -> tuple[int, ...]:
        if len(self.parts) > length:
            raise ValueError(f"Partition {self} has more than {length} parts")
        return self.parts + (0,) * (length - len(self.parts))

    def capped(self, cap: int) -> "Partition":
        """Type of G tensor Z/p^cap: every part truncated at cap."""
        return Partition(tuple(min(x, cap) for x in self.parts))

    def contains(self, other: "Partition") -> bool:
        """Young-diagram containment: other_i <= self_i for every i."""
        return len(other) <= len(self) and all(o <= s for o, s in zip(other, self))

    def multiplicities(self) -> list[int]:
        """m_i = lambda'_i - lambda'_{i+1} for i = 1..lambda_1."""
        t = transpose(self)
        return [t.part(i) - t.part(i + 1) for i in range(1, self.largest + 1)]


@lru_cache(maxsize=None)
def _transpose_parts(parts: tuple[int, ...]) -> tuple[int, ...]:
    if not parts:
        return ()
    return tuple(sum(1 for x in parts if x >= j) for j in range(1, parts[0] + 1))


def transpose(lam: Partition) -> Partition:
    """lambda'_j = #{i : lambda_i >= j}."""
    return Partition(_transpose_parts(lam.parts))


def partitions_of(n: int, max_parts: int | None = None, max_part: int | None = None) -> Iterator[Partition]:
    """All partitions of n, optionally bounded in length and in largest part."""
    if n == 0:
        yield Partition()
        return
    for counts in _sympy_partitions(n, m=max_parts, k=max_part):
        # sympy reuses the dict between iterations
        parts = []
        for value, mult in sorted(counts.items(), reverse=True):
            parts.extend([value] * mult)
        yield Partition(tuple(parts))


def partitions_up_to(max_size: int, max_parts: int | None = None, max_part: int | None = None) -> Iterator[Partition]:
    for n in range(max_size + 1):
        yield from partitions_of(n, max_parts=max_parts, max_part=max_part)


def partitions_in_box(max_parts: int, max_part: int) -> Iterator[Partition]:
    """Partitions fitting in a max_parts x max_part box, in order of size."""
    return partitions_up_to(max_parts * max_part, max_parts=max_parts, max_part=max_part)


def sub_partitions(lam: Partition) -> Iterator[Partition]:
    """Every partition mu whose diagram fits inside lambda's."""
    def extend(prefix, i):
        if i == len(lam):
            yield Partition.from_multiset(prefix)
            return
        upper = lam[i] if not prefix else min(lam[i], prefix[-1])
        for value in range(upper, -1, -1):
            if value == 0:
                yield Partition.from_multiset(prefix)
                return
            yield from extend(prefix + [value], i + 1)

    yield from extend([], 0)


@dataclass(frozen=True)
class GroupSpec:
    """Finite abelian group as prime -> type of its Sylow subgroup."""

    factors: tuple[tuple[int, Partition], ...] = field(default=())

    def __post_init__(self):
        items = tuple(sorted(self.factors))
        for p, lam in items:
            if not isprime(p):
                raise ValueError(f"GroupSpec key {p} is not prime")
            if not isinstance(lam, Partition) or not lam:
                raise ValueError(f"Sylow {p}-type must be a nonempty Partition, got {lam!r}")
        if len({p for p, _ in items}) != len(items):
            raise ValueError("GroupSpec primes must be distinct")
        object.__setattr__(self, "factors", items)

    @classmethod
    def of(cls, mapping: Mapping[int, Partition | Iterable[int]]) -> "GroupSpec":
        """Builds a GroupSpec, dropping trivial Sylow subgroups."""
        items = []
        for p, lam in mapping.items():
            lam = lam if isinstance(lam, Partition) else Partition(tuple(lam))
            if lam:
                items.append((int(p), lam))
        return cls(tuple(items))

    @classmethod
    def trivial(cls) -> "GroupSpec":
        return cls()

    @classmethod
    def sylow_only(cls, p: int, lam: Partition) -> "GroupSpec":
        return cls.of({p: lam})

    @classmethod
    def cyclic(cls, a: int) -> "GroupSpec":
        return cls.from_invariant_factors([a])

    @classmethod
    def from_invariant_factors(cls, factors: Iterable[int]) -> "GroupSpec":
        """Builds the group Z/a_1 + ... + Z/a_r with a_r | ... | a_1."""
        values = sorted((int(a) for a in factors), reverse=True)
        if any(a < 1 for a in values):
            raise ValueError(f"Invariant factors must be positive, got {values}")
        for larger, smaller in zip(values, values[1:]):
            if larger % smaller:
                raise ValueError(f"Invariant factors must form a divisibility chain, got {values}")
        exponents: dict[int, list[int]] = {}
        for a in values:
            for p, k in factorint(a).items():
                exponents.setdefault(p, []).append(k)
        return cls.of({p: Partition.from_multiset(ks) for p, ks in exponents.items()})

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parses the '2:[2,1];3:[1]' encoding ('1' is the trivial group)."""
        text = text.strip()
        if text.lower() in TRIVIAL_ENCODINGS:
            return cls()
        mapping = {}
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            prime, _, lam = chunk.partition(":")
            if not lam:
                raise ValueError(f"Cannot parse group factor {chunk!r}; expected 'p:[...]'")
            p = int(prime)
            if p in mapping:
                raise ValueError(f"Prime {p} appears twice in {text!r}")
            mapping[p] = Partition.parse(lam)
        return cls.of(mapping)

    def __str__(self):
        if not self.factors:
            return "1"
        return ";".join(f"{p}:{lam}" for p, lam in self.factors)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def sylow(self, p: int) -> Partition:
        for q, lam in self.factors:
            if q == p:
                return lam
        return Partition()

    def restrict(self, primes: Iterable[int]) -> "GroupSpec":
        keep = set(primes)
        return GroupSpec(tuple((p, lam) for p, lam in self.factors if p in keep))

    def capped(self, caps: Mapping[int, int | None]) -> "GroupSpec":
        return GroupSpec.of({p: lam.capped(caps[p]) if caps.get(p) else lam for p, lam in self.factors})

    @property
    def order(self) -> int:
        result = 1
        for p, lam in self.factors:
            result *= p ** lam.size
        return result

    @property
    def exponent(self) -> int:
        result = 1
        for p, lam in self.factors:
            result *= p ** lam.largest
        return result

    @property
    def rank(self) -> int:
        return max((len(lam) for _, lam in self.factors), default=0)

    def invariant_factors(self) -> list[int]:
        """a_1, ..., a_r with a_r | ... | a_1 (empty for the trivial group)."""
        result = []
        for i in range(1, self.rank + 1):
            a = 1
            for p, lam in self.factors:
                a *= p ** lam.part(i)
            result.append(a)
        return result

    def is_cyclic(self) -> bool:
        return self.rank <= 1

    def is_squarefree_order(self) -> bool:
        return all(lam.size <= 1 for _, lam in self.factors)
