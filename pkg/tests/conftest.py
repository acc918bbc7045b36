from __future__ import annotations

import json
from pathlib import Path

import pytest

from support import DATA_DIR


@pytest.fixture
def mini_dump_path() -> Path:
    return DATA_DIR / "mini_dump.jsonl"


@pytest.fixture
def mini_expected() -> list[dict]:
    return json.loads((DATA_DIR / "mini_expected.json").read_text())
