import os
from pathlib import Path

import orjson
import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def golden():
    """Compares a JSON payload against fixtures/<name>.

    SANDPILE_UPDATE_GOLDENS=1 rewrites the pinned copy instead.
    """
    def check(name: str, data: bytes):
        path = FIXTURES / name
        if os.environ.get("SANDPILE_UPDATE_GOLDENS") == "1":
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            return
        assert path.exists(), f"{name} is not pinned; run with SANDPILE_UPDATE_GOLDENS=1 to create it"
        assert orjson.loads(path.read_bytes()) == orjson.loads(data), f"{name} drifted from its pinned copy"
    return check


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setenv("SANDPILE_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SANDPILE_MOMENT_TABLES_DIR", str(tmp_path / "moment_tables"))
    return tmp_path
