from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from model_server.app import create_app
from model_server.registry import Registry

CONTRACT_REGISTRY = {
    "timeout": 5.0,
    "tasks": {
        "hate": {"model": "constant", "classes": 2, "max_batch": 64, "label": 0},
        "kw": {"model": "keyword", "classes": 2, "max_batch": 64,
               "keywords": ["bad"], "threshold": 0.05},
        "three_way": {"model": "constant", "classes": 3, "max_batch": 32, "label": 2},
        "tiny": {"model": "constant", "classes": 2, "max_batch": 4, "label": 1},
    },
}


@pytest.fixture
def registry() -> Registry:
    return Registry.from_dict(CONTRACT_REGISTRY)


@pytest.fixture
def client(registry) -> TestClient:
    return TestClient(create_app(registry))
