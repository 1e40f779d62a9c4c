import argparse
import logging
from collections import Counter
from math import prod
from pathlib import Path

from record_store import (
    load_moment_vector,
    load_record,
    moment_table_path,
    save_moment_vector,
    save_record,
    save_recovery,
    save_report,
)
from settings import get_settings
from utils.abelian import (
    aut_order,
    enumerate_subgroups,
    hom_count,
    moment_value,
    pairing_count,
    subgroup_table,
    sur_count,
)
from utils.errors import OracleBoundExceeded
from utils.harness import (
    ExperimentConfig,
    compare_records,
    compare_to_theory,
    empirical_hom_moment,
    empirical_moment_vector,
    empirical_moments,
    run_experiment,
)
from utils.oracles import (
    aut_order_bruteforce,
    hom_count_bruteforce,
    pairing_count_bruteforce,
    sur_count_bruteforce,
    symmetric_rank_counts,
)
from utils.partitions import GroupSpec, partitions_up_to
from utils.recover import MomentCaps, build_theoretical_moments, recover_distribution
from utils.theory import (
    cyclic_upper_bound,
    even_spanning_tree_limit,
    macwilliams_rank_count,
    normalizing_constant,
    prank_prob,
    squarefree_upper_bound,
    sylow_table,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISMATCH = 2

NAMED_DISTRIBUTIONS = {
    "lazy-sign": {-1: 0.25, 0: 0.5, 1: 0.25},
    "sign": {-1: 0.5, 1: 0.5},
}

# (Z/2)^7 already has 29212 subgroups; beyond this rank the enumeration is skipped
SUBGROUP_RANK_LIMIT = 6
CAPPED_TABLE_SIZE = 20


def parse_distribution(text: str) -> dict[int, float]:
    """'lazy-sign', 'sign' or explicit 'value:probability' pairs separated by commas."""
    if text in NAMED_DISTRIBUTIONS:
        return dict(NAMED_DISTRIBUTIONS[text])
    pmf = {}
    for chunk in text.split(","):
        value, sep, prob = chunk.partition(":")
        if not sep:
            raise ValueError(f"Cannot parse distribution entry {chunk!r}; expected 'value:probability'")
        pmf[int(value)] = float(prob)
    return pmf


# --- theory ---

def theory(args) -> int:
    """Prints limiting Sylow tables and the headline constants."""
    for p in args.prime:
        table = sylow_table(p, args.max_size, cap=args.cap)
        print(f"# p = {p}, |lambda| <= {args.max_size}" + (f", truncated at p^{args.cap}" if args.cap else ""))
        for row in table.rows:
            print(f"{str(row.partition):<16} {row.probability:.12f}  +/- {row.error:.1e}")
        print(f"# mass outside the table: {table.deficit:.3e}")
        for r in range(args.max_rank + 1):
            print(f"P({p}-rank = {r}) = {float(prank_prob(p, r)):.12f}")
        print(f"normalizing constant at {p}: {float(normalizing_constant(p).value):.12f}")
    if args.constants:
        print(f"P(even number of spanning trees) -> {float(even_spanning_tree_limit().value):.10f}")
        print(f"P(sandpile group cyclic) <= {float(cyclic_upper_bound().value):.10f}")
        print(f"P(|sandpile group| square-free) <= {float(squarefree_upper_bound().value):.10f}")
    return EXIT_OK


# --- simulate ---

def simulate(args) -> int:
    """Runs a campaign and writes its record; with --check the verdicts decide the exit code."""
    settings = get_settings()
    cfg = ExperimentConfig(
        model=args.model,
        n=args.n,
        q=args.q,
        mod_a=args.mod_a,
        dist=parse_distribution(args.dist) if args.dist else None,
        alpha=args.alpha,
        primes=tuple(args.prime),
        exponent=args.exponent or settings.working_exponent,
        ceiling=args.ceiling or settings.exponent_ceiling,
        samples=args.samples,
        seed=args.seed,
        test_groups=tuple(args.test_group or ()),
        workers=args.workers or settings.workers,
        output=args.out,
        format=args.format,
    )
    record = run_experiment(cfg, progress=not args.quiet)
    save_record(record, cfg.output, cfg.format)
    for group, value in record.moments.items():
        flag = " (lower bound)" if group in record.lower_bound_only else ""
        print(f"E#Sur(S, {group}) = {value:.6f}{flag}")
    for warning in record.warnings:
        print(f"warning: {warning}")
    if not args.check:
        return EXIT_OK
    report = compare_to_theory(record)
    _print_verdicts(report.verdicts)
    return EXIT_OK if report.passed else EXIT_MISMATCH


# --- compare ---

def _print_verdicts(verdicts: dict[str, bool]):
    for name, ok in sorted(verdicts.items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")


def compare(args) -> int:
    """Record against theory, or against a second record (universality)."""
    record = load_record(args.record)
    if args.against:
        other = load_record(args.against)
        verdicts = {}
        for p in sorted(set(record.primes) & set(other.primes)):
            distance = compare_records(record, other, p)
            print(f"TV distance at p={p}: {distance:.5f}")
            verdicts[f"tv:{p}"] = distance <= args.tv
        if not verdicts:
            raise ValueError("The two records share no prime")
        _print_verdicts(verdicts)
        return EXIT_OK if all(verdicts.values()) else EXIT_MISMATCH

    report = compare_to_theory(record)
    for prime in report.primes:
        print(f"p={prime.p}: TV distance {prime.tv_distance:.5f} (truncation {prime.truncation_error:.1e})")
        for row in prime.types:
            print(f"  {row.type:<16} observed {row.frequency:.5f}  theory {row.theory:.5f}  z {row.z:+.2f}")
    for row in report.moments:
        print(f"E#Sur(S, {row.group}) = {row.observed:.5f}, limit {row.expected} +/- {row.band:.4f}")
    for row in report.structure:
        print(f"P({row.label}) = {row.observed:.5f}, limit {row.expected:.5f} +/- {row.band:.4f}")
    _print_verdicts(report.verdicts)
    if args.report:
        save_report(report, args.report)
    return EXIT_OK if report.passed else EXIT_MISMATCH


# --- moments ---

def moments(args) -> int:
    record = load_record(args.record)
    groups = [GroupSpec.parse(text) for text in (args.group or record.config.test_groups)]
    values, flagged = empirical_moments(record, groups)
    for G in groups:
        flag = " (lower bound)" if G in flagged else ""
        print(f"E#Sur(S, {G}) = {float(values[G]):.6f}  limit {moment_value(G)}{flag}")
        if args.hom:
            print(f"E#Hom(S, {G}) = {float(empirical_hom_moment(record, G)):.6f}")
    return EXIT_OK


# --- recover ---

def recover(args) -> int:
    """Inverts a moment vector: empirical from a record, or the theoretical table."""
    caps = MomentCaps(
        max_parts=args.max_parts, size_cap=args.size_cap, target_cap=args.target_cap, tail_cap=args.tail_cap,
    )
    primes = tuple(args.prime)
    if args.record:
        vector = empirical_moment_vector(load_record(args.record), primes, caps)
    else:
        path = args.table or moment_table_path(primes, caps)
        if args.table or Path(path).exists():
            vector = load_moment_vector(path)
        else:
            logger.info(f"No moment table at '{path}'; building it now")
            vector = build_theoretical_moments(primes, caps)
            save_moment_vector(vector, path)
    result = recover_distribution(vector, primes, caps, accelerate=not args.raw)
    # recovered masses are those of S tensor Z/p^max_parts
    limits = {p: sylow_table(p, CAPPED_TABLE_SIZE, cap=caps.max_parts).as_dict() for p in primes}
    worst = 0.0
    for group, mass in sorted(result.distribution.items(), key=lambda item: str(item[0])):
        limit = prod(limits[p].get(group.sylow(p), 0.0) for p in primes)
        worst = max(worst, abs(mass - limit))
        print(f"{str(group):<24} recovered {mass:.8f}  limit {limit:.8f}  residual {result.residuals[group]:.1e}")
    print(f"total recovered mass {result.total:.6f}; largest deviation from the limit {worst:.2e}")
    if args.out:
        save_recovery(result, args.out)
    if args.record or args.tolerance is None:
        return EXIT_OK
    return EXIT_OK if worst <= args.tolerance else EXIT_MISMATCH


# --- oracle ---

class OracleTally:
    def __init__(self):
        self.checked, self.skipped, self.failures = Counter(), Counter(), Counter()

    def check(self, name: str, key, formula, brute_force):
        """Runs brute_force(); a computation beyond the oracle bound counts as skipped."""
        try:
            actual = brute_force()
        except OracleBoundExceeded:
            self.skipped[name] += 1
            return
        self.checked[name] += 1
        expected = formula()
        if expected != actual:
            self.failures[name] += 1
            logger.error(f"{name} mismatch at {key}: formula {expected}, brute force {actual}")


def oracle(args) -> int:
    """Compares every closed-form count against exhaustive enumeration on small groups."""
    bound = args.bound or get_settings().oracle_bound
    tally = OracleTally()
    for p in args.prime:
        types = [lam for lam in partitions_up_to(args.max_order.bit_length()) if p ** lam.size <= args.max_order]
        for lam in types:
            G = GroupSpec.sylow_only(p, lam)
            tally.check("aut_order", (p, lam), lambda: aut_order(p, lam), lambda: aut_order_bruteforce(p, lam, bound))
            tally.check("pairing_count", (p, lam), lambda: pairing_count(p, lam),
                        lambda: pairing_count_bruteforce(p, lam, bound))
            if len(lam) <= SUBGROUP_RANK_LIMIT:
                tally.check("enumerate_subgroups", (p, lam), lambda: subgroup_table(p, lam),
                            lambda: enumerate_subgroups(p, lam, bound))
            for mu in types:
                tally.check("hom_count", (p, mu, lam), lambda: hom_count(p, mu, lam),
                            lambda: hom_count_bruteforce(p, mu, lam, bound))
                tally.check("sur_count", (p, mu, lam), lambda: sur_count(GroupSpec.sylow_only(p, mu), G),
                            lambda: sur_count_bruteforce(p, mu, lam, bound))
    for p, n in ((2, 3), (3, 2)):
        for size in range(n + 1):
            counts = symmetric_rank_counts(p, size)
            for r in range(size + 1):
                tally.check("macwilliams_rank_count", (p, size, r),
                            lambda: macwilliams_rank_count(p, size, size - r), lambda: counts[r])
    for name in sorted(tally.checked | tally.skipped):
        note = f", {tally.skipped[name]} beyond the oracle bound" if tally.skipped[name] else ""
        status = "FAIL" if tally.failures[name] else "PASS"
        print(f"{status}  {name}: {tally.checked[name]} checked, {tally.failures[name]} mismatches{note}")
    return EXIT_MISMATCH if tally.failures else EXIT_OK


# --- Registration ---

HANDLERS = {
    "theory": theory,
    "simulate": simulate,
    "compare": compare,
    "moments": moments,
    "recover": recover,
    "oracle": oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sandpile", description="Sandpile group statistics and their limits")
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("theory", help="print limiting Sylow tables and constants")
    cmd.add_argument("--prime", type=int, action="append", default=None)
    cmd.add_argument("--max-size", type=int, default=6)
    cmd.add_argument("--max-rank", type=int, default=3)
    cmd.add_argument("--cap", type=int, default=None)
    cmd.add_argument("--constants", action="store_true")

    cmd = commands.add_parser("simulate", help="run a Monte Carlo campaign")
    cmd.add_argument("--model", choices=["graph", "matrix-uniform", "matrix-iid"], required=True)
    cmd.add_argument("--n", type=int, required=True)
    cmd.add_argument("--q", type=float, default=None)
    cmd.add_argument("--mod-a", type=int, default=None)
    cmd.add_argument("--dist", default=None, help="lazy-sign, sign, or value:prob pairs")
    cmd.add_argument("--alpha", type=float, default=0.5)
    cmd.add_argument("--prime", type=int, action="append", default=None)
    cmd.add_argument("--exponent", type=int, default=None)
    cmd.add_argument("--ceiling", type=int, default=None)
    cmd.add_argument("--samples", type=int, required=True)
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--workers", type=int, default=None)
    cmd.add_argument("--test-group", action="append", default=None)
    cmd.add_argument("--out", type=Path, default=None)
    cmd.add_argument("--format", choices=["json", "csv"], default="json")
    cmd.add_argument("--check", action="store_true", help="compare against theory and set the exit code")
    cmd.add_argument("--quiet", action="store_true")

    cmd = commands.add_parser("compare", help="compare a record against theory or another record")
    cmd.add_argument("record", type=Path)
    cmd.add_argument("--against", type=Path, default=None)
    cmd.add_argument("--tv", type=float, default=0.03)
    cmd.add_argument("--report", type=Path, default=None)

    cmd = commands.add_parser("moments", help="empirical Sur-moments of a record")
    cmd.add_argument("record", type=Path)
    cmd.add_argument("--group", action="append", default=None)
    cmd.add_argument("--hom", action="store_true")

    cmd = commands.add_parser("recover", help="recover a distribution from its moments")
    cmd.add_argument("--prime", type=int, action="append", default=None)
    cmd.add_argument("--record", type=Path, default=None)
    cmd.add_argument("--table", type=Path, default=None)
    cmd.add_argument("--max-parts", type=int, default=3)
    cmd.add_argument("--size-cap", type=int, default=6)
    cmd.add_argument("--target-cap", type=int, default=2)
    cmd.add_argument("--tail-cap", type=int, default=12, help="largest lambda_1 along the leading series")
    cmd.add_argument("--raw", action="store_true", help="skip series acceleration")
    cmd.add_argument("--tolerance", type=float, default=None)
    cmd.add_argument("--out", type=Path, default=None, help="write the recovered masses as JSON")

    cmd = commands.add_parser("oracle", help="check counting formulas by brute force")
    cmd.add_argument("--prime", type=int, action="append", default=None)
    cmd.add_argument("--max-order", type=int, default=64)
    cmd.add_argument("--bound", type=int, default=None)

    return parser


def normalize_args(args):
    if hasattr(args, "prime") and args.prime is None:
        args.prime = [2, 3] if args.command == "oracle" else [2]
    return args


def dispatch(args) -> int:
    """Runs the handler for args.command and maps failures to exit code 1."""
    handler = HANDLERS[args.command]
    try:
        return handler(normalize_args(args))
    except Exception as e:
        logger.error(f"Command '{args.command}' failed: {e}", exc_info=True)
        return EXIT_ERROR
