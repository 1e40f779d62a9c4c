"""Monte Carlo campaigns over random graphs and symmetric matrices.

A campaign draws N samples, reduces each to the Sylow types of its cokernel at
the configured primes and merges the results into an ExperimentRecord. Records
are compared against the limiting distributions in utils.theory.
"""

import itertools
import logging
import time
from collections import Counter
from fractions import Fraction
from math import sqrt
from pathlib import Path
from typing import Literal

import numpy as np
import orjson
import scipy.stats
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from sympy import isprime
from tqdm import tqdm

from settings import get_settings
from utils.abelian import enumerate_subgroups, hom_count_group, moment_value, sur_count
from utils.linalg import p_valuation
from utils.models import (
    EntryDistribution,
    SylowStatus,
    is_connected,
    matrix_sylow_type,
    reduced_laplacian,
    sample_graph,
    sample_symmetric,
)
from utils.partitions import GroupSpec, Partition
from utils.recover import MomentCaps, MomentVector, index_to_group
from utils.theory import (
    DEFAULT_POLICY,
    TruncationPolicy,
    cyclic_sylow_prob,
    prank_prob,
    squarefree_sylow_prob,
    sylow_table,
    uniform_corank_distribution,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SHARDS_PER_WORKER = 4
MAX_REPORTED_RANK = 3


# --- Configuration ---

class ExperimentConfig(BaseModel):
    """One Monte Carlo campaign. workers, output and format never reach the record."""

    model_config = ConfigDict(frozen=True)

    model: Literal["graph", "matrix-uniform", "matrix-iid"]
    n: int = Field(ge=1)
    q: float | None = Field(default=None, gt=0, lt=1)
    mod_a: int | None = Field(default=None, ge=2)
    dist: dict[int, float] | None = None
    alpha: float = Field(default=0.5, gt=0, lt=1)
    primes: tuple[int, ...] = (2,)
    exponent: int = Field(default=8, ge=1)
    ceiling: int = Field(default=64, ge=1)
    samples: int = Field(ge=1)
    seed: int = 0
    test_groups: tuple[str, ...] = Field(default=(), validate_default=True)
    workers: int = Field(default=1, ge=1, exclude=True)
    output: Path | None = Field(default=None, exclude=True)
    format: Literal["json", "csv"] = Field(default="json", exclude=True)

    @field_validator("primes")
    @classmethod
    def _distinct_primes(cls, primes):
        if not primes:
            raise ValueError("At least one prime is required")
        if len(set(primes)) != len(primes):
            raise ValueError(f"Primes must be distinct, got {primes}")
        for p in primes:
            if not isprime(p):
                raise ValueError(f"{p} is not prime")
        return tuple(sorted(primes))

    @field_validator("test_groups")
    @classmethod
    def _groups_within_primes(cls, groups, info):
        primes = info.data.get("primes", ())
        groups = groups or default_test_groups(primes)
        parsed = [GroupSpec.parse(text) for text in groups]
        for G in parsed:
            extra = set(G.primes) - set(primes)
            if extra:
                raise ValueError(f"Test group {G} involves primes {sorted(extra)} outside {primes}")
        return tuple(str(G) for G in parsed)

    @model_validator(mode="after")
    def _check_model(self):
        if self.model == "graph":
            if self.q is None:
                raise ValueError("The graph model needs an edge probability q")
            if self.n < 2:
                raise ValueError(f"Graph needs at least 2 vertices, got n={self.n}")
        if self.model == "matrix-uniform" and self.mod_a is None:
            raise ValueError("The matrix-uniform model needs a modulus mod_a")
        if self.model == "matrix-iid" and not self.dist:
            raise ValueError("The matrix-iid model needs an entry distribution dist")
        if self.ceiling < self.exponent:
            raise ValueError(f"Exponent ceiling {self.ceiling} is below the working exponent {self.exponent}")
        return self

    def entry_distribution(self) -> EntryDistribution | None:
        """Entry law of the matrix models; raises BalanceCertificateError if not alpha-balanced."""
        if self.model == "matrix-uniform":
            return EntryDistribution.uniform_mod(self.mod_a, self.primes, self.alpha)
        if self.model == "matrix-iid":
            return EntryDistribution.from_pmf(self.dist, self.primes, self.alpha)
        return None

    def caps(self) -> dict[int, int | None]:
        """Exponent caps per prime: v_p(a) for uniform matrices mod a, None otherwise."""
        if self.model != "matrix-uniform":
            return {p: None for p in self.primes}
        return {p: (p_valuation(self.mod_a, p) if self.mod_a % p == 0 else 0) for p in self.primes}


def default_test_groups(primes) -> tuple[str, ...]:
    """Z/p, (Z/p)^2 and Z/p^2 at every prime."""
    return tuple(
        str(GroupSpec.sylow_only(p, Partition.of(*parts)))
        for p in primes
        for parts in ((1,), (1, 1), (2,))
    )


# --- Records ---

class ExperimentRecord(BaseModel):
    """Merged outcome of a campaign.

    counts holds exact types, unsaturated_counts the types truncated at the
    exponent ceiling; together with disconnected they account for every sample.
    """

    schema_version: int = SCHEMA_VERSION
    config: ExperimentConfig
    samples: int
    counts: dict[str, int] = Field(default_factory=dict)
    unsaturated_counts: dict[str, int] = Field(default_factory=dict)
    disconnected: int = 0
    caps: dict[str, int | None] = Field(default_factory=dict)
    moments: dict[str, float] = Field(default_factory=dict)
    lower_bound_only: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    timing: dict[str, float] = Field(default_factory=dict, exclude=True)

    @model_validator(mode="after")
    def _accounted(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"Unsupported record schema {self.schema_version}")
        total = sum(self.counts.values()) + sum(self.unsaturated_counts.values()) + self.disconnected
        if total != self.samples:
            raise ValueError(f"Record accounts for {total} samples, expected {self.samples}")
        return self

    @property
    def unsaturated(self) -> int:
        return sum(self.unsaturated_counts.values())

    @property
    def connected(self) -> int:
        return self.samples - self.disconnected

    @property
    def primes(self) -> tuple[int, ...]:
        return self.config.primes

    def cap(self, p: int) -> int | None:
        return self.caps.get(str(p))

    def to_json(self) -> bytes:
        return orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)

    @classmethod
    def from_json(cls, data: bytes | str) -> "ExperimentRecord":
        return cls.model_validate(orjson.loads(data))


# --- Sampling ---

def observe(cfg: ExperimentConfig, index: int, dist: EntryDistribution | None = None) -> tuple[SylowStatus, str]:
    """Status and joint Sylow type (GroupSpec encoding) of sample number index."""
    if cfg.model == "graph":
        graph = sample_graph(cfg.n, cfg.q, cfg.seed, index)
        if not is_connected(graph):
            return SylowStatus.DISCONNECTED, ""
        matrix = reduced_laplacian(graph)
    else:
        dist = dist or cfg.entry_distribution()
        matrix = sample_symmetric(cfg.n, dist, cfg.seed, index)
    caps = cfg.caps()
    status = SylowStatus.SATURATED
    sylow = {}
    for p in cfg.primes:
        if caps[p] == 0:
            continue
        result = matrix_sylow_type(matrix, p, e=cfg.exponent, ceiling=cfg.ceiling)
        if result.status == SylowStatus.UNSATURATED:
            status = SylowStatus.UNSATURATED
        sylow[p] = result.partition
    return status, str(GroupSpec.of(sylow))


def _run_shard(cfg: ExperimentConfig, start: int, stop: int) -> tuple[Counter, Counter, int]:
    dist = cfg.entry_distribution()
    counts, unsaturated, disconnected = Counter(), Counter(), 0
    for index in range(start, stop):
        status, key = observe(cfg, index, dist)
        if status == SylowStatus.DISCONNECTED:
            disconnected += 1
        elif status == SylowStatus.UNSATURATED:
            unsaturated[key] += 1
        else:
            counts[key] += 1
    return counts, unsaturated, disconnected


def merge_shards(shards) -> tuple[dict[str, int], dict[str, int], int]:
    counts, unsaturated, disconnected = Counter(), Counter(), 0
    for shard_counts, shard_unsaturated, shard_disconnected in shards:
        counts.update(shard_counts)
        unsaturated.update(shard_unsaturated)
        disconnected += shard_disconnected
    return dict(sorted(counts.items())), dict(sorted(unsaturated.items())), disconnected


def _shard_bounds(samples: int, workers: int) -> list[tuple[int, int]]:
    pieces = min(samples, workers * SHARDS_PER_WORKER)
    edges = np.linspace(0, samples, pieces + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentRecord:
    """Draws cfg.samples samples, sharded over cfg.workers processes.

    Sample i always uses the stream (seed, i), so the record does not depend on
    the worker count.
    """
    cfg.entry_distribution()
    shards = _shard_bounds(cfg.samples, cfg.workers)
    logger.info(f"Starting {cfg.model} campaign: n={cfg.n}, N={cfg.samples}, primes={cfg.primes}, workers={cfg.workers}")
    started = time.perf_counter()
    jobs = Parallel(n_jobs=cfg.workers, return_as="generator")(
        delayed(_run_shard)(cfg, start, stop) for start, stop in shards
    )
    results = list(tqdm(jobs, total=len(shards), desc="shards", disable=not progress))
    counts, unsaturated, disconnected = merge_shards(results)
    elapsed = time.perf_counter() - started

    record = ExperimentRecord(
        config=cfg,
        samples=cfg.samples,
        counts=counts,
        unsaturated_counts=unsaturated,
        disconnected=disconnected,
        caps={str(p): cap for p, cap in cfg.caps().items()},
        timing={"seconds": elapsed, "workers": cfg.workers},
    )
    warnings = []
    rate = record.unsaturated / cfg.samples
    threshold = get_settings().unsaturated_warning_rate
    if rate > threshold:
        warnings.append(f"unsaturated rate {rate:.4f} exceeds {threshold}")
        logger.warning(f"{record.unsaturated} of {cfg.samples} samples hit the exponent ceiling {cfg.ceiling}")
    if record.connected == 0:
        warnings.append("every sample was disconnected")
        logger.warning("Every sampled graph was disconnected; no moments to report")
        record = record.model_copy(update={"warnings": warnings})
    else:
        groups = [GroupSpec.parse(text) for text in cfg.test_groups]
        moments, flagged = empirical_moments(record, groups)
        record = record.model_copy(update={
            "moments": {str(g): float(v) for g, v in moments.items()},
            "lower_bound_only": sorted(str(g) for g in flagged),
            "warnings": warnings,
        })
    logger.info(
        f"Campaign finished in {elapsed:.1f}s: {len(counts)} types, "
        f"{disconnected} disconnected, {record.unsaturated} unsaturated"
    )
    return record


# --- Empirical statistics ---

def _connected_types(rec: ExperimentRecord) -> list[tuple[GroupSpec, int]]:
    merged = Counter(rec.counts)
    merged.update(rec.unsaturated_counts)
    return [(GroupSpec.parse(key), count) for key, count in sorted(merged.items())]


def _require_connected(rec: ExperimentRecord) -> int:
    if rec.connected == 0:
        raise ValueError("Record has no connected samples")
    return rec.connected


def empirical_moments(rec: ExperimentRecord, groups) -> tuple[dict[GroupSpec, Fraction], set[GroupSpec]]:
    """E#Sur(S, G) for every G, and the subset of G whose value is only a lower bound."""
    connected = _require_connected(rec)
    types = _connected_types(rec)
    moments, flagged = {}, set()
    for G in groups:
        total = sum(count * sur_count(H, G) for H, count in types)
        moments[G] = Fraction(total, connected)
        capped = any(rec.cap(p) is not None and lam.largest > rec.cap(p) for p, lam in G.factors)
        if capped or rec.unsaturated:
            flagged.add(G)
    if flagged:
        logger.warning(f"Moments are lower bounds only for {', '.join(sorted(str(g) for g in flagged))}")
    return moments, flagged


def empirical_hom_moment(rec: ExperimentRecord, G: GroupSpec, method: str = "direct") -> Fraction:
    """E#Hom(S, G), directly or as the sum of E#Sur(S, G_1) over subgroups G_1 <= G."""
    connected = _require_connected(rec)
    if method == "direct":
        total = sum(count * hom_count_group(H, G) for H, count in _connected_types(rec))
        return Fraction(total, connected)
    if method != "subgroups":
        raise ValueError(f"Unknown method {method!r}; use 'direct' or 'subgroups'")
    per_prime = [[(p, mu, k) for mu, k in enumerate_subgroups(p, lam)] for p, lam in G.factors]
    subgroups = []
    for combo in itertools.product(*per_prime):
        multiplicity = 1
        for _, _, k in combo:
            multiplicity *= k
        subgroups.append((GroupSpec.of({p: mu for p, mu, _ in combo}), multiplicity))
    moments, _ = empirical_moments(rec, [g for g, _ in subgroups])
    return sum((k * moments[g] for g, k in subgroups), start=Fraction(0))


def empirical_moment_vector(rec: ExperimentRecord, primes=None, caps: MomentCaps = MomentCaps()) -> MomentVector:
    """Empirical Hom-moments on the index box of caps, ready for recover_distribution."""
    primes = tuple(primes or rec.primes)
    missing = set(primes) - set(rec.primes)
    if missing:
        raise ValueError(f"Record does not track primes {sorted(missing)}")
    connected = _require_connected(rec)
    types = _connected_types(rec)
    values = {}
    for key in itertools.product(caps.index_set(), repeat=len(primes)):
        G = index_to_group(primes, key)
        values[key] = Fraction(sum(count * hom_count_group(H, G) for H, count in types), connected)
    return MomentVector(primes, caps, values)


def empirical_sylow_table(rec: ExperimentRecord, p: int, cap: int | None = None) -> dict[Partition, float]:
    """Frequencies of the Sylow p-types among connected samples, optionally truncated at p^cap."""
    connected = _require_connected(rec)
    table = Counter()
    for H, count in _connected_types(rec):
        lam = H.sylow(p)
        table[lam.capped(cap) if cap else lam] += count
    return {lam: count / connected for lam, count in sorted(table.items())}


def total_variation(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


# --- Comparison ---

class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigmas: float = Field(default=3.0, gt=0)
    band_floor: float = Field(default=0.02, ge=0)
    tv: float = Field(default=0.03, gt=0)
    moment_relative: float = Field(default=0.05, ge=0)
    theory_size: int = Field(default=16, ge=1)


DEFAULT_TOLERANCES = Tolerances()


class TypeRow(BaseModel):
    type: str
    count: int
    frequency: float
    theory: float
    z: float
    p_value: float


class BandRow(BaseModel):
    label: str
    observed: float
    expected: float
    band: float
    passed: bool


class MomentRow(BaseModel):
    group: str
    observed: float
    expected: float
    stderr: float
    band: float
    lower_bound_only: bool
    passed: bool


class PrimeReport(BaseModel):
    p: int
    cap: int | None
    tv_distance: float
    truncation_error: float
    beyond_table: float
    beyond_theory: float
    types: list[TypeRow]
    ranks: list[BandRow]


class ComparisonReport(BaseModel):
    samples: int
    connected: int
    primes: list[PrimeReport]
    moments: list[MomentRow]
    structure: list[BandRow]
    verdicts: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> bytes:
        return orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)


def _band(observed: float, expected: float, n: int, tol: Tolerances, label: str) -> BandRow:
    sigma = sqrt(max(expected * (1 - expected), 0.0) / n)
    band = max(tol.sigmas * sigma, tol.band_floor)
    return BandRow(label=label, observed=observed, expected=expected, band=band, passed=abs(observed - expected) <= band)


def _rank_reference(rec: ExperimentRecord, p: int, policy: TruncationPolicy) -> list[float]:
    cfg = rec.config
    if cfg.model == "matrix-uniform" and cfg.mod_a == p:
        exact = uniform_corank_distribution(p, cfg.n)
        return [float(exact[r]) if r < len(exact) else 0.0 for r in range(MAX_REPORTED_RANK + 1)]
    return [float(prank_prob(p, r, policy)) for r in range(MAX_REPORTED_RANK + 1)]


def _prime_report(rec: ExperimentRecord, p: int, policy: TruncationPolicy, tol: Tolerances) -> PrimeReport:
    """Types of size above tol.theory_size and unsaturated samples share one beyond-table bucket."""
    cap = rec.cap(p)
    connected = rec.connected
    raw, beyond = Counter(), rec.unsaturated
    for key, count in rec.counts.items():
        lam = GroupSpec.parse(key).sylow(p)
        lam = lam.capped(cap) if cap else lam
        if lam.size > tol.theory_size:
            beyond += count
        else:
            raw[lam] += count
    empirical = {lam: count / connected for lam, count in sorted(raw.items())}
    theory = sylow_table(p, tol.theory_size, cap=cap, policy=policy)
    expected = theory.as_dict()
    truncation = theory.deficit + sum(row.error for row in theory.rows)
    beyond_table = beyond / connected
    beyond_theory = max(theory.deficit, 0.0)
    tv = total_variation(empirical, expected) + 0.5 * abs(beyond_table - beyond_theory)

    rows = []
    for lam in sorted(set(empirical) | {k for k, v in expected.items() if v * connected >= 1}):
        f, pi = empirical.get(lam, 0.0), expected.get(lam, 0.0)
        sigma = sqrt(pi * (1 - pi) / connected) if 0 < pi < 1 else 0.0
        z = (f - pi) / sigma if sigma else 0.0
        rows.append(TypeRow(
            type=str(lam), count=raw[lam], frequency=f, theory=pi, z=z,
            p_value=float(2 * scipy.stats.norm.sf(abs(z))),
        ))

    # p-ranks are exact even for unsaturated samples
    by_rank = Counter()
    for H, count in _connected_types(rec):
        by_rank[len(H.sylow(p))] += count
    reference = _rank_reference(rec, p, policy)
    ranks = [_band(by_rank[r] / connected, pi, connected, tol, f"{p}-rank {r}") for r, pi in enumerate(reference)]
    logger.info(f"p={p}: TV distance {tv:.4f} against theory over {len(expected)} types, {beyond} samples beyond the table")
    return PrimeReport(
        p=p, cap=cap, tv_distance=tv, truncation_error=truncation, beyond_table=beyond_table,
        beyond_theory=beyond_theory, types=rows, ranks=ranks,
    )


def _moment_rows(rec: ExperimentRecord, tol: Tolerances) -> list[MomentRow]:
    connected = rec.connected
    groups = [GroupSpec.parse(text) for text in rec.config.test_groups]
    moments, flagged = empirical_moments(rec, groups)
    types = _connected_types(rec)
    rows = []
    for G in groups:
        mean = moments[G]
        second = Fraction(sum(count * sur_count(H, G) ** 2 for H, count in types), connected)
        stderr = sqrt(max(float(second - mean * mean), 0.0) / connected)
        expected = moment_value(G)
        band = max(tol.sigmas * stderr, tol.moment_relative * expected)
        lower = G in flagged
        deviation = float(mean) - expected
        passed = deviation <= band if lower else abs(deviation) <= band
        rows.append(MomentRow(
            group=str(G), observed=float(mean), expected=expected, stderr=stderr,
            band=band, lower_bound_only=lower, passed=passed,
        ))
    return rows


def _structure_rows(rec: ExperimentRecord, policy: TruncationPolicy, tol: Tolerances) -> list[BandRow]:
    connected = rec.connected
    types = _connected_types(rec)
    observed = [p for p in rec.primes if rec.cap(p) != 0]
    rows = []
    cyclic = sum(count for H, count in types if H.is_cyclic()) / connected
    expected = 1.0
    for p in observed:
        expected *= float(cyclic_sylow_prob(p, policy))
    rows.append(_band(cyclic, expected, connected, tol, "cyclic"))
    if all(rec.cap(p) is None or rec.cap(p) >= 2 for p in observed):
        squarefree = sum(count for H, count in types if H.is_squarefree_order()) / connected
        expected = 1.0
        for p in observed:
            expected *= float(squarefree_sylow_prob(p, policy))
        rows.append(_band(squarefree, expected, connected, tol, "squarefree"))
    return rows


def compare_to_theory(
    rec: ExperimentRecord,
    policy: TruncationPolicy = DEFAULT_POLICY,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ComparisonReport:
    """Per-type z-scores, TV distances, p-rank bands, moment deviations and verdicts."""
    _require_connected(rec)
    primes = [_prime_report(rec, p, policy, tolerances) for p in rec.primes if rec.cap(p) != 0]
    moments = _moment_rows(rec, tolerances)
    structure = _structure_rows(rec, policy, tolerances)
    verdicts = {}
    for report in primes:
        verdicts[f"tv:{report.p}"] = report.tv_distance <= tolerances.tv
        for row in report.ranks:
            verdicts[f"rank:{row.label}"] = row.passed
    for row in moments:
        verdicts[f"moment:{row.group}"] = row.passed
    for row in structure:
        verdicts[f"structure:{row.label}"] = row.passed
    failed = sorted(k for k, ok in verdicts.items() if not ok)
    if failed:
        logger.warning(f"Verdicts failed: {', '.join(failed)}")
    return ComparisonReport(
        samples=rec.samples, connected=rec.connected, primes=primes,
        moments=moments, structure=structure, verdicts=verdicts,
    )


def compare_records(a: ExperimentRecord, b: ExperimentRecord, p: int) -> float:
    """TV distance between the Sylow p-tables of two records, truncated at a common exponent."""
    caps = [c for c in (a.cap(p), b.cap(p)) if c is not None]
    cap = min(caps) if caps else None
    if cap == 0:
        raise ValueError(f"Prime {p} is not observed by both records")
    distance = total_variation(empirical_sylow_table(a, p, cap), empirical_sylow_table(b, p, cap))
    logger.info(f"TV distance between records at p={p} (cap {cap}): {distance:.4f}")
    return distance
