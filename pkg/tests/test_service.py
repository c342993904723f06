import pytest
from fastapi.testclient import TestClient

from flamesmith.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def horner_text(client, spec_text):
    response = client.post(
        "/derive",
        json={"spec": spec_text, "invariant_id": 5, "mode": "indexed",
              "seed": 42, "trials": 120},
    )
    assert response.status_code == 200
    return response.json()["worksheet"]


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_invariants_endpoint(client, spec_text):
    response = client.post("/invariants", json={"spec": spec_text, "mode": "indexed"})
    assert response.status_code == 200
    body = response.json()
    assert body["op"] == "polyeval"
    valid = [c for c in body["candidates"] if c["valid"]]
    assert len(valid) >= 5
    rejected = [c for c in body["candidates"] if not c["valid"]]
    assert any("non-vacuity" in c["reason"] for c in rejected)


def test_derive_endpoint(client, spec_text, horner_text):
    assert horner_text.startswith("flamesmith worksheet v1")
    assert "step-8: y := a[k - 1] + y * x" in horner_text


def test_derive_rejected_invariant_is_422(client, spec_text):
    response = client.post(
        "/derive", json={"spec": spec_text, "invariant_id": 7, "trials": 50}
    )
    assert response.status_code == 422
    assert response.json()["detail"]["kind"] == "derivation"


def test_bad_spec_is_400(client):
    response = client.post("/invariants", json={"spec": "op nope\n", "mode": "indexed"})
    assert response.status_code == 400


def test_verify_endpoint(client, horner_text):
    response = client.post(
        "/verify", json={"worksheet": horner_text, "seed": 42, "trials": 120}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    names = [o["name"] for o in body["obligations"]]
    assert names == ["initialization", "induction", "exit", "descent"]
    tiers = {o["name"]: o["tier"] for o in body["obligations"]}
    assert tiers["initialization"] == "syntactic"


def test_verify_falsified_is_ok_false(client, horner_text):
    mutant = horner_text.replace(
        "step-8: y := a[k - 1] + y * x", "step-8: y := a[k - 1] + y"
    )
    response = client.post(
        "/verify", json={"worksheet": mutant, "seed": 42, "trials": 500}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is False
    falsified = [o for o in body["obligations"] if o["verdict"] == "falsified"]
    assert falsified and falsified[0]["counterexample"]


def test_run_endpoint(client, horner_text):
    response = client.post(
        "/run",
        json={"worksheet": horner_text, "coeffs": ["1", "2", "3"], "x": "2",
              "check_invariants": True, "trace": True},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["result"] == "17"
    assert body["iterations"] == 3
    assert [snap["y"] for snap in body["trace"]] == ["3", "8", "17"]


def test_run_rational_inputs(client, horner_text):
    response = client.post(
        "/run", json={"worksheet": horner_text, "coeffs": ["1/2", "1/3"], "x": "1/5"}
    )
    assert response.status_code == 200
    assert response.json()["result"] == "17/30"


def test_cost_endpoint(client, horner_text):
    response = client.post(
        "/cost", json={"worksheet": horner_text, "max_n": 10, "seed": 42, "trials": 100}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["increment"] == 2
    assert body["closed_form"] == "2 * k"
    assert body["runtime_ok"] is True
    assert body["runtime_counts"][:3] == [[0, 0], [1, 2], [2, 4]]


def test_render_endpoint(client, horner_text):
    response = client.post(
        "/render", json={"worksheet": horner_text, "format": "latex"}
    )
    assert response.status_code == 200
    assert response.json()["rendered"].startswith("\\documentclass")


def test_derive_all_endpoint(client, spec_text):
    response = client.post(
        "/derive-all",
        json={"spec": spec_text, "mode": "both", "seed": 42, "trials": 60,
              "oracle_checks": 40},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    assert len(body["rows"]) == 12
    assert all(row["oracle_mismatches"] == 0 for row in body["rows"])
    horner_rows = [r for r in body["rows"] if r["invariant_id"] == 5]
    assert all(r["cost_closed_form"] == "2 * k" for r in horner_rows)


def test_responses_deterministic(client, spec_text):
    payload = {"spec": spec_text, "invariant_id": 5, "mode": "flame",
               "seed": 42, "trials": 100}
    first = client.post("/derive", json=payload)
    second = client.post("/derive", json=payload)
    assert first.json() == second.json()


def test_validation_error_is_422(client):
    response = client.post("/derive", json={"spec": "x", "mode": "bogus"})
    assert response.status_code == 422
