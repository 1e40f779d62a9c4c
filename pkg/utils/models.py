"""Seeded random graphs and symmetric matrices, and their cokernel Sylow types."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Literal, NamedTuple

import networkx as nx
import numpy as np
import xxhash
from networkx.utils import UnionFind
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import BalanceCertificateError
from utils.linalg import ModMatrix, cokernel_sylow_type, p_valuation
from utils.partitions import Partition

logger = logging.getLogger(__name__)

PMF_TOLERANCE = 1e-12


# --- Streams ---

def stream(master_seed: int, index: int, tag: str) -> np.random.Generator:
    """Philox generator keyed by xxh128(master_seed, index, tag); independent of scheduling."""
    key = xxhash.xxh128_intdigest(f"{int(master_seed)}:{int(index)}:{tag}".encode())
    return np.random.Generator(np.random.Philox(key=key))


# --- Graphs ---

@dataclass(frozen=True, eq=False)
class GraphSample:
    n: int
    adjacency: np.ndarray
    q: float | None = None
    master_seed: int | None = None
    index: int | None = None

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=bool)
        if adjacency.shape != (self.n, self.n):
            raise ValueError(f"Adjacency must be {self.n}x{self.n}, got {adjacency.shape}")
        if adjacency.diagonal().any():
            raise ValueError("Graphs have no self-loops")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("Adjacency must be symmetric")
        adjacency.setflags(write=False)
        object.__setattr__(self, "adjacency", adjacency)

    @property
    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(u), int(v)) for u, v in zip(rows, cols)]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def to_edge_list(self) -> str:
        header = f"# n={self.n} q={self.q} seed={self.master_seed} index={self.index}"
        return "\n".join([header] + [f"{u} {v}" for u, v in self.edges]) + "\n"

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph


def sample_graph(n: int, q: float, seed: int, index: int = 0) -> GraphSample:
    """Erdos-Renyi G(n, q): each pair i < j present independently with probability q."""
    if n < 2:
        raise ValueError(f"Graph needs at least 2 vertices, got n={n}")
    if not 0 < q < 1:
        raise ValueError(f"Edge probability must lie in (0, 1), got q={q}")
    rng = stream(seed, index, "graph")
    upper = np.triu_indices(n, 1)
    adjacency = np.zeros((n, n), dtype=bool)
    adjacency[upper] = rng.random(len(upper[0])) < q
    return GraphSample(n, adjacency | adjacency.T, q, seed, index)


def graph_from_edges(n: int, edges) -> GraphSample:
    adjacency = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if u == v:
            raise ValueError(f"Self-loop at vertex {u}")
        adjacency[u, v] = adjacency[v, u] = True
    return GraphSample(n, adjacency)


def complete_graph(n: int) -> GraphSample:
    return GraphSample(n, ~np.eye(n, dtype=bool))


def random_tree(n: int, seed: int, index: int = 0) -> GraphSample:
    """Uniform labeled tree from a random Pruefer sequence."""
    if n < 2:
        raise ValueError(f"Tree needs at least 2 vertices, got n={n}")
    if n == 2:
        return graph_from_edges(2, [(0, 1)])
    sequence = stream(seed, index, "tree").integers(0, n, size=n - 2).tolist()
    return graph_from_edges(n, nx.from_prufer_sequence(sequence).edges())


def relabel(graph: GraphSample, permutation) -> GraphSample:
    """Graph with vertex permutation[i] renamed to i."""
    perm = np.asarray(permutation)
    if sorted(perm.tolist()) != list(range(graph.n)):
        raise ValueError("Relabeling must be a permutation of the vertices")
    return GraphSample(graph.n, graph.adjacency[np.ix_(perm, perm)], graph.q, graph.master_seed, graph.index)


def is_connected(graph: GraphSample) -> bool:
    components = UnionFind(range(graph.n))
    for u, v in graph.edges:
        components.union(u, v)
    return len(list(components.to_sets())) == 1


def reduced_laplacian(graph: GraphSample) -> ModMatrix:
    """A - diag(deg) with the highest-index vertex deleted."""
    if graph.n < 2:
        raise ValueError("Reduced Laplacian needs at least 2 vertices")
    laplacian = graph.adjacency.astype(np.int64) - np.diag(graph.degrees.astype(np.int64))
    return ModMatrix(laplacian[:-1, :-1], symmetric=True)


# --- Sylow types ---

class SylowStatus(str, Enum):
    SATURATED = "saturated"
    UNSATURATED = "unsaturated"
    DISCONNECTED = "disconnected"


class SylowResult(NamedTuple):
    partition: Partition | None
    status: SylowStatus
    exponent: int


def sandpile_sylow_type(graph: GraphSample, p: int, e: int = 8, ceiling: int = 64) -> SylowResult:
    """Type of the Sylow p-subgroup of the sandpile group, or DISCONNECTED."""
    if not is_connected(graph):
        return SylowResult(None, SylowStatus.DISCONNECTED, 0)
    return matrix_sylow_type(reduced_laplacian(graph), p, e, ceiling)


def matrix_sylow_type(M: ModMatrix, p: int, e: int = 8, ceiling: int = 64) -> SylowResult:
    """Sylow p-type of cok(M); over Z/a the type of cok(M) tensor Z/p^v_p(a) counts as exact."""
    result = cokernel_sylow_type(M, p, e=e, ceiling=ceiling)
    if M.modulus is not None:
        return SylowResult(result.partition, SylowStatus.SATURATED, result.exponent)
    status = SylowStatus.SATURATED if result.saturated else SylowStatus.UNSATURATED
    return SylowResult(result.partition, status, result.exponent)


# --- Symmetric matrices ---

class EntryDistribution(BaseModel):
    """Law of one matrix entry: uniform mod a, or an integer pmf."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform-mod", "pmf"]
    modulus: int | None = Field(default=None, ge=2)
    pmf: dict[int, float] | None = None
    alpha: float = Field(default=0.5, gt=0, lt=1)
    primes: tuple[int, ...] = (2,)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.kind == "uniform-mod" and self.modulus is None:
            raise ValueError("uniform-mod entries need a modulus")
        if self.kind == "pmf":
            if not self.pmf:
                raise ValueError("pmf entries need a nonempty pmf")
            if any(v < 0 for v in self.pmf.values()):
                raise ValueError("pmf probabilities must be nonnegative")
            if abs(sum(self.pmf.values()) - 1) > PMF_TOLERANCE:
                raise ValueError(f"pmf must sum to 1, got {sum(self.pmf.values())}")
        return self.certify()

    @classmethod
    def uniform_mod(cls, a: int, primes=(2,), alpha: float = 0.5) -> "EntryDistribution":
        return cls(kind="uniform-mod", modulus=a, primes=tuple(primes), alpha=alpha)

    @classmethod
    def from_pmf(cls, pmf: dict[int, float], primes=(2,), alpha: float = 0.5) -> "EntryDistribution":
        return cls(kind="pmf", pmf=dict(pmf), primes=tuple(primes), alpha=alpha)

    @classmethod
    def lazy_sign(cls, primes=(2,), alpha: float = 0.5) -> "EntryDistribution":
        """-1 and 1 with probability 1/4 each, 0 with probability 1/2."""
        return cls.from_pmf({-1: 0.25, 0: 0.5, 1: 0.25}, primes, alpha)

    def residue_probabilities(self, p: int) -> dict[int, float]:
        if self.kind == "uniform-mod":
            counts = np.bincount(np.arange(self.modulus) % p, minlength=p)
            return {r: counts[r] / self.modulus for r in range(p)}
        result = dict.fromkeys(range(p), 0.0)
        for value, prob in self.pmf.items():
            result[value % p] += prob
        return result

    def certify(self) -> "EntryDistribution":
        """Checks P(X = t mod p) <= 1 - alpha for every prime in scope."""
        for p in self.primes:
            if self.kind == "uniform-mod" and self.modulus % p:
                continue
            worst = max(self.residue_probabilities(p).values())
            if worst > 1 - self.alpha + PMF_TOLERANCE:
                raise BalanceCertificateError(
                    f"Entries are not {self.alpha}-balanced mod {p}: a residue class has probability {worst}"
                )
        return self

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform-mod":
            return rng.integers(0, self.modulus, size=size)
        values = sorted(self.pmf)
        return rng.choice(np.array(values, dtype=np.int64), size=size, p=[self.pmf[v] for v in values])

    def caps(self) -> dict[int, int | None]:
        """Exponent caps v_p(a) for uniform-mod entries; None means no cap."""
        if self.kind != "uniform-mod":
            return {p: None for p in self.primes}
        return {p: (p_valuation(self.modulus, p) if self.modulus % p == 0 else 0) for p in self.primes}


def sample_symmetric(n: int, dist: EntryDistribution, seed: int, index: int = 0) -> ModMatrix:
    """Entries on and above the diagonal iid from dist, mirrored below."""
    if n < 1:
        raise ValueError(f"Matrix dimension must be positive, got n={n}")
    rng = stream(seed, index, "matrix")
    upper = np.triu_indices(n)
    entries = np.zeros((n, n), dtype=np.int64)
    entries[upper] = dist.sample(rng, len(upper[0]))
    entries = entries + np.triu(entries, 1).T
    modulus = dist.modulus if dist.kind == "uniform-mod" else None
    return ModMatrix(entries, modulus, symmetric=True)
