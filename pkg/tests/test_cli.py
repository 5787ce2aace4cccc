import json

import pytest

from canardlab.cli import main


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_analyze_to_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    rc = main(["analyze", "--system", "ii2", "--alpha", "0.2",
               "--window", "0.5", "1.5", "-o", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    # split tangency heights: no fold-fold singularity to classify
    assert data.get("fold_fold") is None
    lo, hi = data["sliding"][0]
    assert abs(lo - 1.0) < 1e-8 and abs(hi - 1.2) < 1e-8


def test_analyze_malformed_json_exit1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["analyze", "--system-json", str(bad)])
    assert rc == 1


def test_build_phi_csv(tmp_path, capsys):
    out = tmp_path / "phi.json"
    csv = tmp_path / "phi.csv"
    rc = main(["build-phi", "-k", "1", "--zeros", "0.05",
               "--samples", "50", "-o", str(out), "--csv", str(csv)])
    assert rc == 0
    data = json.loads(out.read_text())
    assert data["monotone"] is True
    lines = csv.read_text().strip().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 51
    cols = lines[1].split(",")
    assert len(cols) == 3


def test_build_phi_k0(capsys, tmp_path):
    out = tmp_path / "phi0.json"
    rc = main(["build-phi", "-k", "0", "-o", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["spec"]["zeros"] == []


def test_build_phi_huge_delta_exit2(capsys):
    rc = main(["build-phi", "-k", "1", "--zeros", "0.05", "--delta", "1e6"])
    assert rc == 2


def test_check_assumptions(capsys):
    rc = main(["check-assumptions", "--system", "center"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "A2/A3 validated window" in out
    assert "turning point at origin: pass" in out


def test_sdi_csv(tmp_path, capsys):
    csv = tmp_path / "sdi.csv"
    rc = main(["sdi", "--system", "center", "--phi-zeros", "0.05",
               "--kind", "small", "--window", "0.0005", "0.0099",
               "-n", "40", "--csv", str(csv)])
    assert rc == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0].startswith("# canardlab sdi v1")
    assert len(lines) == 41


def test_zeros_json(tmp_path, capsys):
    out = tmp_path / "zeros.json"
    rc = main(["zeros", "--system", "center", "--phi-zeros", "0.05",
               "--kind", "small", "--window", "0.0005", "0.0099",
               "-n", "60", "-o", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    assert len(data["zeros"]) == 1
    assert abs(data["zeros"][0]["y"] - 0.0025) < 0.0005


def test_cycles_no_cycles_far_alpha(tmp_path, capsys):
    out = tmp_path / "cycles.json"
    rc = main(["cycles", "--system", "center", "--eps", "0.05",
               "--alpha-tilde", "1.0", "--section", "1.2", "1.6",
               "--scan-n", "8", "-o", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["cycles"] == []


def test_sweep_csv(tmp_path, capsys):
    csv = tmp_path / "sweep.csv"
    rc = main(["sweep", "--system", "center", "--eps-list", "0.05",
               "--alpha-grid", "0.5", "1.0", "--section", "1.2", "1.6",
               "--scan-n", "6", "--csv", str(csv)])
    assert rc == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[1].startswith("eps,")
    assert lines[2].startswith("0.05,")


def test_pipeline_eps_floor_exit2(tmp_path, capsys):
    man = tmp_path / "man.json"
    man.write_text(json.dumps({
        "schema_version": 1,
        "system": {"name": "center"},
        "phi": {"zeros": [0.05], "delta": 0.01, "nu": 0.1},
        "eps_list": [0.001],
        "kind": "small",
    }))
    rc = main(["pipeline", str(man)])
    assert rc == 2


def test_pipeline_missing_manifest_exit1(capsys):
    rc = main(["pipeline", "/nonexistent/manifest.json"])
    assert rc == 1
