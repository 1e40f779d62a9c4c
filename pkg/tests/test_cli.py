import orjson
import pytest

from command_handlers import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, parse_distribution
from main import main


@pytest.fixture
def record_path(tmp_path):
    path = tmp_path / "graph.json"
    code = main([
        "simulate", "--model", "graph", "--n", "6", "--q", "0.5",
        "--samples", "30", "--seed", "4", "--out", str(path), "--quiet",
    ])
    assert code == EXIT_OK
    return path


def test_parse_distribution():
    assert parse_distribution("lazy-sign") == {-1: 0.25, 0: 0.5, 1: 0.25}
    assert parse_distribution("0:0.5, 1:0.5") == {0: 0.5, 1: 0.5}
    with pytest.raises(ValueError):
        parse_distribution("uniform")


def test_theory_constants(capsys):
    assert main(["theory", "--constants", "--max-size", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0.79352" in out
    assert "0.48240" in out
    assert "P(2-rank = 0)" in out


def test_oracle(capsys):
    assert main(["oracle", "--max-order", "16"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "PASS  sur_count" in out


def test_simulate_writes_record(record_path):
    payload = orjson.loads(record_path.read_bytes())
    assert payload["samples"] == 30
    assert payload["config"]["test_groups"] == ["2:[1]", "2:[1,1]", "2:[2]"]


def test_simulate_csv(tmp_path):
    path = tmp_path / "graph.csv"
    code = main([
        "simulate", "--model", "graph", "--n", "5", "--q", "0.5",
        "--samples", "10", "--out", str(path), "--format", "csv", "--quiet",
    ])
    assert code == EXIT_OK
    assert path.read_text().startswith("type,status,count,frequency\n")
    assert main(["moments", str(path)]) == EXIT_ERROR


def test_simulate_rejects_unbalanced_entries(tmp_path):
    code = main([
        "simulate", "--model", "matrix-iid", "--n", "4", "--dist", "sign",
        "--samples", "5", "--out", str(tmp_path / "sign.json"), "--quiet",
    ])
    assert code == EXIT_ERROR


def test_moments(record_path, capsys):
    capsys.readouterr()
    assert main(["moments", str(record_path), "--group", "2:[1]", "--hom"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "E#Sur(S, 2:[1])" in out
    assert "E#Hom(S, 2:[1])" in out


def test_compare(record_path, tmp_path):
    report = tmp_path / "report.json"
    assert main(["compare", str(record_path), "--report", str(report)]) in (EXIT_OK, EXIT_MISMATCH)
    assert "verdicts" in orjson.loads(report.read_bytes())
    assert main(["compare", str(record_path), "--against", str(record_path)]) == EXIT_OK


def test_recover(tmp_path, capsys):
    out = tmp_path / "recovered.json"
    args = ["recover", "--max-parts", "2", "--size-cap", "3", "--target-cap", "1", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert "total recovered mass" in capsys.readouterr().out
    assert "1" in orjson.loads(out.read_bytes())["distribution"]
    assert list((tmp_path / "moment_tables").glob("moments-p2-*.json"))
    assert main(args) == EXIT_OK


def test_recover_from_record(record_path):
    args = ["recover", "--record", str(record_path), "--max-parts", "2", "--size-cap", "3", "--target-cap", "1"]
    assert main(args) == EXIT_OK


def test_missing_record():
    assert main(["moments", "no-such-record.json"]) == EXIT_ERROR
