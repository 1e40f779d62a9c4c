import csv
import io
import logging
from pathlib import Path

import orjson

from settings import get_settings
from utils.harness import ComparisonReport, ExperimentRecord
from utils.recover import MomentCaps, MomentVector, Recovery

# ------------------------------------------------------------------
# LOGGING
# ------------------------------------------------------------------

logger = logging.getLogger(__name__)

# ------------------------------------------------------------------
# CONSTANTS
# ------------------------------------------------------------------

CSV_COLUMNS = ["type", "status", "count", "frequency"]
JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2

# ------------------------------------------------------------------
# PATHS
# ------------------------------------------------------------------

def default_record_path(record: ExperimentRecord, fmt: str = "json") -> Path:
    cfg = record.config
    name = f"{cfg.model}-n{cfg.n}-N{cfg.samples}-seed{cfg.seed}.{fmt}"
    return get_settings().output_dir / name


def moment_table_path(primes, caps: MomentCaps) -> Path:
    tag = "-".join(str(p) for p in primes)
    name = f"moments-p{tag}-m{caps.max_parts}-s{caps.size_cap}-t{caps.target_cap}-d{caps.series_cap}.json"
    return get_settings().moment_tables_dir / name

# ------------------------------------------------------------------
# EXPERIMENT RECORDS
# ------------------------------------------------------------------

def record_to_csv(record: ExperimentRecord) -> str:
    """One row per observed type, unsaturated type and the disconnected bucket."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for status, table in (("saturated", record.counts), ("unsaturated", record.unsaturated_counts)):
        for key, count in sorted(table.items()):
            writer.writerow([key, status, count, f"{count / record.samples:.8f}"])
    if record.disconnected:
        writer.writerow(["", "disconnected", record.disconnected, f"{record.disconnected / record.samples:.8f}"])
    return buffer.getvalue()


def save_record(record: ExperimentRecord, path: Path | None = None, fmt: str = "json") -> Path:
    path = Path(path) if path else default_record_path(record, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_bytes(record.to_json())
    elif fmt == "csv":
        path.write_text(record_to_csv(record))
    else:
        raise ValueError(f"Unknown record format {fmt!r}; use 'json' or 'csv'")
    logger.info(f"Record written to '{path}'")
    return path


def load_record(path) -> ExperimentRecord:
    """Load a JSON ExperimentRecord from disk."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Experiment record not found at '{path}'. "
            "Please run 'main.py simulate' first."
        )
    if path.suffix == ".csv":
        raise ValueError(f"'{path}' is a CSV export; only JSON records can be loaded back")
    record = ExperimentRecord.from_json(path.read_bytes())
    logger.info(f"Loaded record '{path}': {record.samples} samples of the {record.config.model} model")
    return record

# ------------------------------------------------------------------
# MOMENT TABLES
# ------------------------------------------------------------------

def save_moment_vector(vector: MomentVector, path: Path | None = None) -> Path:
    path = Path(path) if path else moment_table_path(vector.primes, vector.caps)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(vector.to_dict(), option=JSON_OPTIONS))
    logger.info(f"Moment table with {len(vector.values)} entries written to '{path}'")
    return path


def load_moment_vector(path) -> MomentVector:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Moment table not found at '{path}'. "
            "Please run 'create_moment_tables.py' first."
        )
    return MomentVector.from_dict(orjson.loads(path.read_bytes()))

# ------------------------------------------------------------------
# REPORTS
# ------------------------------------------------------------------

def save_report(report: ComparisonReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(report.to_json())
    logger.info(f"Comparison report written to '{path}'")
    return path


def save_recovery(result: Recovery, path) -> Path:
    """Recovered masses with their truncation residuals, keyed by GroupSpec encoding."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "distribution": {str(g): x for g, x in result.distribution.items()},
        "residuals": {str(g): r for g, r in result.residuals.items()},
        "total": result.total,
    }
    path.write_bytes(orjson.dumps(payload, option=JSON_OPTIONS))
    logger.info(f"Recovered distribution written to '{path}'")
    return path
