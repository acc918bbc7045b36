from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from model_server.app import create_app
from model_server.registry import DEFAULT_PROMPT_TEMPLATES, Registry, RegistryError

GOLDEN = json.loads((Path(__file__).parent / "golden" / "classify_contract.json").read_text())


@pytest.mark.parametrize("case", GOLDEN, ids=[c["name"] for c in GOLDEN])
def test_golden_contract(client, case):
    response = client.post("/v1/classify", json=case["request"])
    assert response.status_code == case["status"], response.text
    body = response.json()
    if case["status"] == 200:
        assert body == case["response"]
        assert len(body["labels"]) == len(case["request"]["texts"])
        assert len(body["scores"]) == len(case["request"]["texts"])
    else:
        assert body["code"] == case["status"]
        assert "error" in body


def test_score_rows_are_distributions(client):
    response = client.post("/v1/classify",
                           json={"task": "kw", "texts": ["bad bad", "fine", ""]})
    assert response.status_code == 200
    for row in response.json()["scores"]:
        assert abs(sum(row) - 1.0) <= 1e-6
        assert all(0.0 <= s <= 1.0 for s in row)


def test_empty_text_classifies_negative(client):
    response = client.post("/v1/classify", json={"task": "kw", "texts": [""]})
    assert response.json()["labels"] == [0]


def test_malformed_request_is_json_error(client):
    response = client.post("/v1/classify", json={"task": "hate"})
    assert response.status_code == 400
    assert response.json()["code"] == 400


def test_health_ok_lists_tasks(client, registry):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["tasks"] == sorted(registry.entries)
    assert body["timeout"] == 5.0
    assert body["max_batch"]["tiny"] == 4


def test_health_empty_registry_ok():
    client = TestClient(create_app(Registry.from_dict({"tasks": {}})))
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["tasks"] == []


def test_failed_model_degrades_health_and_returns_503():
    registry = Registry.from_dict({
        "tasks": {
            "ok_task": {"model": "constant", "classes": 2, "label": 0},
            "broken": {"model": "keyword", "classes": 2, "keywords": []},
        }
    })
    client = TestClient(create_app(registry))
    health = client.get("/v1/health").json()
    assert health["status"] == "degraded"
    assert health["tasks"] == ["broken", "ok_task"]
    response = client.post("/v1/classify", json={"task": "broken", "texts": ["x"]})
    assert response.status_code == 503
    assert response.headers.get("retry-after") is not None
    ok = client.post("/v1/classify", json={"task": "ok_task", "texts": ["x"]})
    assert ok.status_code == 200


def test_main_entry_wires_registry(tmp_path, monkeypatch):
    import sys

    import uvicorn

    from model_server.__main__ import main

    registry_path = tmp_path / "registry.json"
    registry_path.write_text(json.dumps(
        {"tasks": {"hate": {"model": "constant", "classes": 2, "label": 0}}}
    ))
    captured = {}
    monkeypatch.setattr(uvicorn, "run",
                        lambda app, host, port: captured.update(host=host, port=port))
    monkeypatch.setattr(sys, "argv",
                        ["reaction-model-server", "--registry", str(registry_path),
                         "--port", "9321"])
    main()
    assert captured == {"host": "127.0.0.1", "port": 9321}


def test_registry_round_trips_through_file(tmp_path):
    path = tmp_path / "registry.json"
    path.write_text(json.dumps({"timeout": 3.0, "tasks": {
        "hate": {"model": "constant", "classes": 2, "label": 1, "max_batch": 8},
    }}))
    registry = Registry.from_file(path)
    assert registry.timeout == 3.0
    assert registry.entries["hate"].max_batch == 8
    assert registry.all_loaded


def test_registry_validates_entries():
    with pytest.raises(RegistryError):
        Registry.from_dict({"tasks": {"t": {"model": "constant", "classes": 5}}})
    with pytest.raises(RegistryError):
        Registry.from_dict({"tasks": {"t": {"model": "constant", "max_batch": 0}}})
    with pytest.raises(RegistryError):
        Registry.from_dict({"tasks": {"t": {"model": "quantum"}}})


def test_default_prompt_templates_attach_to_instruct_backends():
    registry = Registry.from_dict({"tasks": {
        "reentry": {"model": "hf", "classes": 2, "path": "missing/checkpoint"},
        "plain": {"model": "constant", "classes": 2, "label": 1},
    }})
    template = registry.entries["reentry"].prompt_template
    assert template == DEFAULT_PROMPT_TEMPLATES["reentry"][0]
    assert "{example}" in template
    assert registry.entries["plain"].prompt_template is None
    # the hf entry may fail to load here, but the template is registry data
    assert registry.entries["reentry"].load_error is not None or \
        registry.entries["reentry"].loaded


def test_prompt_template_is_applied_before_the_model():
    registry = Registry.from_dict({
        "tasks": {
            "templated": {
                "model": "keyword", "classes": 2, "keywords": ["cue"],
                "prompt_template": "cue words around {example}",
            }
        }
    })
    client = TestClient(create_app(registry))
    body = client.post("/v1/classify",
                       json={"task": "templated", "texts": ["plain"]}).json()
    assert body["labels"] == [1]  # the cue came from the template
