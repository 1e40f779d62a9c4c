"""Recovering a distribution on abelian groups from its Hom-moments.

Moments are indexed by tuples of partitions, one per prime, each the TRANSPOSE
of a Sylow type: lambda with at most m parts stands for the group of exponent
dividing p^m whose type is lambda'. In these coordinates
#Hom(G_mu', G_lambda') = p^(sum_i lambda_i mu_i), and the analytic functions
H_{m,p,b} lower-triangularize the moment system in lexicographic order.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod

import mpmath
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from sympy import isprime

from utils.abelian import boundmom_bound, sum_wedge2_over_subgroups
from utils.errors import IllConditionedStepError, InconsistentFormulaError
from utils.partitions import GroupSpec, Partition, partitions_in_box, transpose
from utils.theory import limit_hom_moment

logger = logging.getLogger(__name__)

SOLVE_DIGITS = 50
DEFAULT_PIVOT_THRESHOLD = 1e-30
NEGATIVITY_TOLERANCE = 1e-6
SCHEMA_VERSION = 1


class HactsSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    p: int
    b: tuple[int, ...]

    @field_validator("p")
    @classmethod
    def _prime(cls, p):
        if not isprime(p):
            raise ValueError(f"{p} is not prime")
        return p

    @model_validator(mode="after")
    def _shape(self):
        if len(self.b) != self.m:
            raise ValueError(f"b must have m = {self.m} entries, got {list(self.b)}")
        if any(x < 0 for x in self.b) or any(self.b[i] < self.b[i + 1] for i in range(self.m - 1)):
            raise ValueError(f"b must be weakly decreasing and nonnegative, got {list(self.b)}")
        return self

    @classmethod
    def of(cls, p: int, nu: Partition, m: int) -> "HactsSpec":
        return cls(m=m, p=p, b=nu.padded(m))

    def windows(self) -> list[tuple[int, int]]:
        """(first, last) exponent j of the factors (1 - z_i / p^j) in variable z_i, i = 2..m."""
        b = self.b
        return [(sum(b[:i]) + 1, sum(b[:i - 2]) + 2 * b[i - 2]) for i in range(2, self.m + 1)]


@dataclass(frozen=True)
class HactsTable:
    """Taylor coefficients a_d = c_{d_1} e_{d_2..d_m} of H_{m,p,b}, for d_1 <= degree_cap."""

    spec: HactsSpec
    c: tuple[Fraction, ...]
    polynomials: tuple[tuple[Fraction, ...], ...]

    @property
    def degree_cap(self) -> int:
        return len(self.c) - 1

    def coefficient(self, d) -> Fraction:
        d = tuple(d)
        if len(d) != self.spec.m:
            raise ValueError(f"Multi-index must have {self.spec.m} entries")
        if d[0] > self.degree_cap:
            raise ValueError(f"d_1 = {d[0]} is beyond the computed degree cap {self.degree_cap}")
        result = self.c[d[0]]
        for poly, di in zip(self.polynomials, d[1:]):
            if di >= len(poly):
                return Fraction(0)
            result *= poly[di]
        return result

    def nonzero(self):
        """(d, a_d) for every nonzero coefficient in the table."""
        tails = itertools.product(*[range(len(poly)) for poly in self.polynomials])
        for tail in tails:
            e = prod((poly[di] for poly, di in zip(self.polynomials, tail)), start=Fraction(1))
            if e == 0:
                continue
            for d1, c in enumerate(self.c):
                yield (d1,) + tail, c * e

    @property
    def constant(self) -> Fraction:
        """E with |a_d| <= E p^(-b_1 d_1 - d_1(d_1+1)/2) for every d_1 <= degree_cap."""
        p = self.spec.p
        largest = max((abs(prod((poly[di] for poly, di in zip(self.polynomials, tail)), start=Fraction(1)))
                       for tail in itertools.product(*[range(len(poly)) for poly in self.polynomials])),
                      default=Fraction(1))
        return largest / prod((1 - Fraction(1, p ** i) for i in range(1, max(self.degree_cap, 1) + 1)), start=Fraction(1))

    def bound(self, d1: int) -> Fraction:
        p, b1 = self.spec.p, self.spec.b[0]
        return self.constant * Fraction(1, p ** (b1 * d1 + d1 * (d1 + 1) // 2))


def hacts_coefficients(spec: HactsSpec, degree_cap: int) -> HactsTable:
    """c_n from c_n = -p^-b_1 c_{n-1} / (p^n - 1) and the finite polynomial H(z_2, ..., z_m)."""
    if degree_cap < 0:
        raise ValueError(f"Degree cap must be nonnegative, got {degree_cap}")
    p, b1 = spec.p, spec.b[0]
    c = [Fraction(1)]
    for n in range(1, degree_cap + 1):
        c.append(-c[-1] / (p ** b1 * (p ** n - 1)))
    polynomials = []
    for first, last in spec.windows():
        poly = [Fraction(1)]
        for j in range(first, last + 1):
            root = Fraction(1, p ** j)
            poly = [a - root * b for a, b in itertools.zip_longest(poly + [Fraction(0)], [Fraction(0)] + poly, fillvalue=Fraction(0))]
        polynomials.append(tuple(poly))
    return HactsTable(spec, tuple(c), tuple(polynomials))


def _lattice_point(spec: HactsSpec, f: Partition) -> list[int]:
    """Exponents s_i = f_1 + ... + f_i of z = (p^s_1, ..., p^s_m)."""
    return list(itertools.accumulate(f.padded(spec.m)))


@mpmath.workdps(SOLVE_DIGITS)
def hacts_value(spec: HactsSpec, f: Partition) -> mpmath.mpf:
    """H_{m,p,b}(p^f_1, p^(f_1+f_2), ...) from the product form; exactly 0 where a factor vanishes."""
    p, b1 = spec.p, spec.b[0]
    s = _lattice_point(spec, f)
    if s[0] >= b1 + 1:
        return mpmath.mpf(0)
    value = mpmath.qp(mpmath.power(p, s[0] - b1 - 1), mpmath.mpf(1) / p)
    finite = Fraction(1)
    for (first, last), si in zip(spec.windows(), s[1:]):
        for j in range(first, last + 1):
            finite *= 1 - Fraction(p ** si, p ** j) if si <= j else 1 - Fraction(p ** (si - j))
    if finite == 0:
        return mpmath.mpf(0)
    return value * mpmath.mpf(finite.numerator) / finite.denominator


@mpmath.workdps(SOLVE_DIGITS)
def hacts_series(table: HactsTable, f: Partition) -> tuple[mpmath.mpf, mpmath.mpf]:
    """(sum_d a_d z^d, sum_d |a_d z^d|) at z = (p^f_1, p^(f_1+f_2), ...), truncated at the degree cap."""
    s = _lattice_point(table.spec, f)
    p = table.spec.p
    total = mpmath.mpf(0)
    magnitude = mpmath.mpf(0)
    for d, a in table.nonzero():
        term = mpmath.mpf(a.numerator) / a.denominator * mpmath.power(p, sum(di * si for di, si in zip(d, s)))
        total += term
        magnitude += abs(term)
    return total, magnitude


# --- Moment vectors ---

class MomentCaps(BaseModel):
    """Truncation box of the moment system: per prime, transposed partitions with
    at most max_parts parts, lambda_1 <= size_cap and lambda_2 <= target_cap.
    Distributions are recovered for every nu with nu_1 <= target_cap.

    Beyond the box the leading difference d_1 = lambda_1 - lambda_2 keeps
    running until lambda_1 = tail_cap."""

    model_config = ConfigDict(frozen=True)

    max_parts: int = Field(default=3, ge=1)
    size_cap: int = Field(default=6, ge=0)
    target_cap: int = Field(default=2, ge=0)
    tail_cap: int = Field(default=12, ge=0)

    @model_validator(mode="after")
    def _nested(self):
        if self.target_cap > self.size_cap:
            raise ValueError("target_cap cannot exceed size_cap")
        return self

    @property
    def series_cap(self) -> int:
        """Largest lambda_1 (and d_1) in the index set."""
        return max(self.size_cap, self.tail_cap)

    def index_set(self) -> list[Partition]:
        """The box plus its d_1 tail."""
        return [
            lam for lam in partitions_in_box(self.max_parts, self.series_cap)
            if lam.part(2) <= self.target_cap
        ]

    def targets(self) -> list[Partition]:
        return sorted(partitions_in_box(self.max_parts, self.target_cap))


def encode_index(key: tuple[Partition, ...]) -> str:
    return "|".join(str(lam) for lam in key)


def decode_index(text: str) -> tuple[Partition, ...]:
    return tuple(Partition.parse(chunk) for chunk in text.split("|"))


def index_to_group(primes, key: tuple[Partition, ...]) -> GroupSpec:
    """The group whose Sylow p_j-type is the transpose of key[j]."""
    return GroupSpec.of({p: transpose(lam) for p, lam in zip(primes, key)})


@dataclass
class MomentVector:
    """C_lambda = E #Hom(X, G_lambda) on a truncated index set of transposed partitions."""

    primes: tuple[int, ...]
    caps: MomentCaps
    values: dict[tuple[Partition, ...], Fraction] = field(default_factory=dict)

    def __getitem__(self, key) -> Fraction:
        return self.values[key]

    def index(self) -> list[tuple[Partition, ...]]:
        return list(itertools.product(self.caps.index_set(), repeat=len(self.primes)))

    def perturbed(self, noise) -> "MomentVector":
        """Copy with noise(key) added to every value."""
        return MomentVector(self.primes, self.caps, {k: v + Fraction(noise(k)) for k, v in self.values.items()})

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "primes": list(self.primes),
            "caps": self.caps.model_dump(),
            "values": {encode_index(k): str(v) for k, v in sorted(self.values.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MomentVector":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported moment vector schema {data.get('schema_version')!r}")
        values = {decode_index(k): Fraction(v) for k, v in data["values"].items()}
        return cls(tuple(data["primes"]), MomentCaps(**data["caps"]), values)


def _exact(value: mpmath.mpf) -> Fraction:
    man, exp = value.man_exp
    return Fraction(int(man)) * Fraction(2) ** exp


def build_theoretical_moments(primes, caps: MomentCaps = MomentCaps(), method: str = "count") -> MomentVector:
    """C_lambda = sum over subgroups G_1 <= G_lambda' of |wedge^2 G_1|, prime by prime.

    Tail entries (lambda_1 > size_cap) are E #Hom(S_p, G_lambda') under the
    limiting law instead, stored as the exact value of their 40-digit sum."""
    primes = tuple(primes)
    per_prime = {}
    for p in primes:
        column = {}
        for lam in caps.index_set():
            group_type = transpose(lam)
            if lam.part(1) > caps.size_cap:
                column[lam] = _exact(limit_hom_moment(p, group_type).value)
                continue
            value = sum_wedge2_over_subgroups(p, group_type, method=method)
            if value > boundmom_bound(p, group_type):
                raise InconsistentFormulaError(f"Moment for p={p}, type {group_type} exceeds its growth envelope")
            column[lam] = value
        per_prime[p] = column
        tail = sum(1 for lam in column if lam.part(1) > caps.size_cap)
        logger.info(f"Built {len(column)} theoretical moments at p={p} ({tail} from the limiting law)")
    values = {
        key: Fraction(prod(per_prime[p][lam] for p, lam in zip(primes, key)))
        for key in itertools.product(caps.index_set(), repeat=len(primes))
    }
    return MomentVector(primes, caps, values)


# --- Triangular solve ---

@dataclass(frozen=True)
class Recovery:
    """Recovered masses; residuals[g] estimates |recovered - true| for each mass."""

    distribution: dict[GroupSpec, float]
    residuals: dict[GroupSpec, float]

    @property
    def total(self) -> float:
        return sum(self.distribution.values())

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _as_mpf(value) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def _last_step(partials: list) -> mpmath.mpf:
    return abs(partials[-1] - partials[-2]) if len(partials) > 1 else mpmath.mpf(0)


def _accelerated(partials: list) -> tuple[mpmath.mpf, mpmath.mpf]:
    """Shanks limit of the partial sums and the gap between its last two estimates."""
    if len(partials) < 4:
        return partials[-1], _last_step(partials)
    # odd positions of each row hold the estimates, even ones are auxiliary
    estimates = [row[-1] for row in mpmath.shanks(partials) if len(row) % 2 == 0]
    if len(estimates) < 2:
        return partials[-1], _last_step(partials)
    return estimates[-1], abs(estimates[-1] - estimates[-2])


def _moment_sum(values: dict, tables, accelerate: bool) -> tuple[mpmath.mpf, mpmath.mpf]:
    """(value, error estimate) of sum_lambda A_lambda C_lambda, summed as series in d_1 of the first prime.

    Only single-prime series are accelerated."""
    series: dict[tuple, dict[int, mpmath.mpf]] = {}
    for key, value in values.items():
        ds = [_differences(lam, t.spec.m) for t, lam in zip(tables, key)]
        a = prod((t.coefficient(d) for t, d in zip(tables, ds)), start=Fraction(1))
        if a:
            rest = (ds[0][1:],) + tuple(ds[1:])
            series.setdefault(rest, {})[ds[0][0]] = _as_mpf(a) * _as_mpf(value)
    total = mpmath.mpf(0)
    error = mpmath.mpf(0)
    for terms in series.values():
        partials = list(itertools.accumulate(terms.get(d1, mpmath.mpf(0)) for d1 in range(max(terms) + 1)))
        if accelerate and len(tables) == 1:
            value, gap = _accelerated(partials)
        else:
            value, gap = partials[-1], _last_step(partials)
        total += value
        error += gap
    return total, error


def _differences(lam: Partition, m: int) -> tuple[int, ...]:
    padded = lam.padded(m)
    return tuple(padded[i] - (padded[i + 1] if i + 1 < m else 0) for i in range(m))


@mpmath.workdps(SOLVE_DIGITS)
def recover_distribution(
    C: MomentVector,
    primes=None,
    caps: MomentCaps | None = None,
    accelerate: bool = True,
    pivot_threshold: float = DEFAULT_PIVOT_THRESHOLD,
) -> Recovery:
    """Solves sum_lambda A_lambda C_lambda = x_nu u + sum_{mu < nu} x_mu H_nu(mu) for each nu in lex order.

    The residual of x_nu is the series error estimate plus the residuals of
    the earlier x_mu carried through their weights, all divided by |u|."""
    primes = tuple(primes or C.primes)
    caps = caps or C.caps
    if primes != C.primes:
        raise ValueError(f"Moment vector is indexed by primes {C.primes}, not {primes}")
    box = list(itertools.product(caps.index_set(), repeat=len(primes)))
    missing = [k for k in box if k not in C.values]
    if missing:
        raise ValueError(f"Moment vector lacks {len(missing)} indices of the truncation box, e.g. {encode_index(missing[0])}")
    values = {k: C.values[k] for k in box}
    m = caps.max_parts
    targets = sorted(itertools.product(caps.targets(), repeat=len(primes)))
    solved: dict[tuple[Partition, ...], mpmath.mpf] = {}
    residuals: dict[tuple[Partition, ...], mpmath.mpf] = {}
    for nu in targets:
        specs = [HactsSpec.of(p, part, m) for p, part in zip(primes, nu)]
        tables = [hacts_coefficients(spec, caps.series_cap) for spec in specs]
        total, error = _moment_sum(values, tables, accelerate)
        known = mpmath.mpf(0)
        for mu, x in solved.items():
            weight = prod((hacts_value(spec, part) for spec, part in zip(specs, mu)), start=mpmath.mpf(1))
            known += x * weight
            error += residuals[mu] * abs(weight)
        u = prod((hacts_value(spec, part) for spec, part in zip(specs, nu)), start=mpmath.mpf(1))
        if abs(u) < pivot_threshold:
            raise IllConditionedStepError(encode_index(nu), float(u))
        solved[nu] = (total - known) / u
        residuals[nu] = error / abs(u)
    distribution = {index_to_group(primes, k): float(v) for k, v in solved.items()}
    residual_map = {index_to_group(primes, k): float(v) for k, v in residuals.items()}
    result = Recovery(distribution, residual_map)
    negative = {g: x for g, x in distribution.items() if x < -NEGATIVITY_TOLERANCE}
    if negative:
        logger.warning(f"Recovered negative masses beyond tolerance: {', '.join(f'{g}: {x:.3e}' for g, x in negative.items())}")
    if result.total > 1 + NEGATIVITY_TOLERANCE:
        logger.warning(f"Recovered masses sum to {result.total:.6f} > 1")
    logger.info(f"Recovered {len(distribution)} masses; largest truncation residual {result.max_residual:.3e}")
    return result
