import math

import pytest
from fastapi.testclient import TestClient

from canardlab.service.app import app

client = TestClient(app)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_analyze_ii2():
    r = client.post("/analyze", json={
        "system": {"name": "ii2"}, "alpha": 0.1, "window": [0.5, 1.5]})
    assert r.status_code == 200
    body = r.json()
    got = {(t["side"], round(t["y"], 8), t["kind"]) for t in body["tangencies"]}
    assert ("plus", 1.1, "invisible-fold") in got
    assert ("minus", 1.0, "invisible-fold") in got
    assert len(body["sliding"]) == 1


def test_analyze_fold_fold_report():
    r = client.post("/analyze", json={
        "system": {"name": "ii2"}, "alpha": 0.0, "window": [0.5, 1.5]})
    ff = r.json()["fold_fold"]
    assert ff["visibility"] == "II"
    assert ff["subtype"] == "attracting-focus"
    assert ff["quadratic_coefficient"] < 0


def test_analyze_center_undetermined():
    r = client.post("/analyze", json={
        "system": {"name": "center"}, "alpha": 0.0, "window": [0.5, 1.5]})
    ff = r.json()["fold_fold"]
    assert ff["visibility"] == "II"
    assert ff["subtype"] == "undetermined"


def test_analyze_bad_system_name():
    r = client.post("/analyze", json={"system": {"name": "nonsense"}})
    assert r.status_code == 422
    assert r.json()["error_class"] == "input"


def test_build_phi_default():
    r = client.post("/build-phi", json={"k": 2, "delta": 0.01, "nu": 0.1})
    assert r.status_code == 200
    body = r.json()
    assert body["monotone"] is True
    assert body["min_derivative"] > 0
    assert body["endpoint_values"] == [-1.0, 1.0]
    assert body["origin"] == [0.0, 1.0]
    assert body["spec"]["zeros"] == [0.04, 0.06]


def test_build_phi_huge_delta_precondition():
    r = client.post("/build-phi", json={"k": 1, "zeros": [0.05], "delta": 1e6})
    assert r.status_code == 422
    assert r.json()["error_class"] == "precondition"


def test_check_assumptions_center():
    r = client.post("/check-assumptions", json={
        "system": {"name": "center"}, "phi": {"name": "psi"}})
    assert r.status_code == 200
    body = r.json()
    assert body["A1"]["ok"] is True
    assert body["M1"] > 0.9 and body["M2"] > 0.9
    assert body["hopf_at_origin"] is True
    assert body["slow_flow_at_origin"] < 0


def test_sdi_small_profile():
    r = client.post("/sdi", json={
        "system": {"name": "center"},
        "phi": {"name": "phi_k", "zeros": [0.05], "delta": 0.01, "nu": 0.1},
        "kind": "small", "window": [0.0005, 0.0099], "n": 80})
    assert r.status_code == 200
    body = r.json()
    assert all(v < 0 for v in body["columns"]["Ibar_plus"])
    assert len(body["zeros"]) == 1
    assert body["zeros"][0]["y"] == pytest.approx(0.0025, rel=0.1)


def test_zeros_endpoint_matches_sdi():
    req = {"system": {"name": "center"},
           "phi": {"name": "phi_k", "zeros": [0.05], "delta": 0.01, "nu": 0.1},
           "kind": "small", "window": [0.0005, 0.0099], "n": 60}
    z = client.post("/zeros", json=req).json()
    s = client.post("/sdi", json=req).json()
    assert z["zeros"] == s["zeros"]


def test_dodging_zero_via_service():
    r = client.post("/zeros", json={
        "system": {"name": "dodging"}, "phi": {"name": "psi"},
        "kind": "dodging", "n": 40})
    assert r.status_code == 200
    body = r.json()
    assert len(body["zeros"]) == 1
    assert 0.0185 < body["zeros"][0]["y"] < 0.0215


def test_cycles_fixed_alpha():
    # symmetric configuration at alpha=0: displacement never changes sign
    r = client.post("/cycles", json={
        "system": {"name": "center"}, "phi": {"name": "psi"},
        "eps": 0.05, "alpha_tilde": 0.5, "section_window": [1.2, 1.6],
        "scan_n": 8})
    assert r.status_code == 200
    assert r.json()["cycles"] == []


def test_pipeline_eps_floor_guard():
    r = client.post("/pipeline", json={"manifest": {
        "schema_version": 1,
        "system": {"name": "center"},
        "phi": {"zeros": [0.05], "delta": 0.01, "nu": 0.1},
        "eps_list": [0.001],
        "kind": "small",
    }})
    assert r.status_code == 422
    assert r.json()["error_class"] == "precondition"


def test_pipeline_rejects_bad_schema():
    r = client.post("/pipeline", json={"manifest": {"schema_version": 99,
                                                    "system": {"name": "center"}}})
    assert r.status_code == 422
    assert r.json()["error_class"] == "input"
