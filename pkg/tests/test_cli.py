import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from slowvec import __version__, operator_from_json
from slowvec.cli import main

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def write(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def summary(out_dir, stem):
    return json.loads((out_dir / f"{stem}-summary.json").read_text())


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "slowvec", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__


def test_identity_with_trivial_hull(tmp_path):
    doc = {
        "schema_version": 1,
        "name": "id",
        "operator": {"family": "identity", "dim": 3},
        "compactum": {"family": "basis", "scale": 3 ** 0.5},
        "parameters": {"alpha": 0.5},
        "analyses": ["asymptotic_report"],
    }
    assert main(["run", str(write(tmp_path, doc)), "--out-dir", str(tmp_path)]) == 0
    report = summary(tmp_path, "id")["analyses"][0]["result"]
    assert report["codim_x0"] == 3


def test_diag_fixture_matches_hand_computation(tmp_path):
    assert main(["run", str(SCENARIOS / "diag-fixture.json"), "--out-dir", str(tmp_path)]) == 0
    records = {r["analysis"]: r["result"] for r in summary(tmp_path, "diag-fixture")["analyses"]}
    P = np.array(records["ergodic_projection"]["P"]["re"]) + 1j * np.array(records["ergodic_projection"]["P"]["im"])
    report = records["asymptotic_report"]
    assert report["codim_x0"] == 1 and report["max_slow_dimension"] == 1
    assert report["stages"]["peripheral"][0]["flattening"]["passed"]
    assert records["greedy"]["decomposition"]["residual_norms"] == pytest.approx([1.0, 0.3, 0.15], abs=1e-8)
    assert records["net_bound"]["dim_ker"] == 1
    assert np.allclose(P, [[0, 0], [0, 1]], atol=1e-12)


def test_invalid_alpha_fails_before_compute(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "diag-fixture.json").read_text())
    doc["parameters"]["alpha"] = 1.5
    path = write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out-dir", str(out)]) == 1
    err = capsys.readouterr().err
    assert "invalid alpha" in err and "parameters.alpha" in err and "line" in err
    assert not out.exists()


def test_unknown_key_rejected(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "identity.json").read_text())
    doc["operator"]["colour"] = "blue"
    assert main(["run", str(write(tmp_path, doc)), "--out-dir", str(tmp_path)]) == 1
    assert "operator.colour" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  "name": "x",,\n}\n')
    assert main(["run", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 1


def test_inconclusive_exits_two(tmp_path):
    assert main(["run", str(SCENARIOS / "cyclic-small-hull.json"), "--out-dir", str(tmp_path)]) == 2
    assert summary(tmp_path, "cyclic-small-hull")["status"] == "inconclusive"


def test_nilpotent_scenario(tmp_path):
    assert main(["run", str(SCENARIOS / "left-shift.json"), "--out-dir", str(tmp_path)]) == 0
    records = {r["analysis"]: r["result"] for r in summary(tmp_path, "left-shift")["analyses"]}
    assert records["stable_split"]["codim"] == 0
    assert records["synthesize_slow"]["result"] == "no slow vectors"
    assert records["certify_slow"]["certified"] is False


def test_run_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(SCENARIOS / "split-rotation.json"), "--out-dir", str(out), "--workers", "2"]) == 0
    for suffix in ("summary.json", "details.csv"):
        assert (a / f"split-rotation-{suffix}").read_bytes() == (b / f"split-rotation-{suffix}").read_bytes()
    header = json.loads((a / "split-rotation-header.json").read_text())
    assert set(header) == {"generated_at", "command", "version"}


def test_details_csv_uses_crlf_rows(tmp_path):
    main(["run", str(SCENARIOS / "identity.json"), "--out-dir", str(tmp_path)])
    raw = (tmp_path / "identity-details.csv").read_bytes()
    assert raw.startswith(b"analysis,stage,status,field,value\r\n")


def test_suite_single_instance_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["suite", "--seed", "0", "--count", "1", "--out-dir", str(out)]) for out in (a, b)]
    assert codes[0] == codes[1] and codes[0] in (0, 1)
    for suffix in ("summary.json", "details.csv"):
        name = f"suite-seed0-count1-{suffix}"
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("count", ["0", "-3", "many"])
def test_suite_bad_count_is_usage_error(count, capsys):
    with pytest.raises(SystemExit) as info:
        main(["suite", "--count", count])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_verb_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_failed_suite_instances_dump_reproductions(tmp_path, monkeypatch):
    from slowvec import battery, cli

    real = battery.run_instance

    def sabotaged(index, params):
        res = real(index, params)
        res.add("forced failure", 1.0, 0.0)
        return res

    monkeypatch.setattr(battery, "run_instance", sabotaged)
    monkeypatch.setattr(cli, "run_suite", lambda seed, count, workers: [sabotaged(i, p) for i, p in enumerate(battery.instance_params(seed, count))])
    assert main(["suite", "--seed", "5", "--count", "2", "--out-dir", str(tmp_path)]) == 1
    repros = sorted((tmp_path / "repro").glob("*.json"))
    assert len(repros) == 2
    # the reproduction scenario is itself a valid scenario
    assert main(["run", str(repros[0]), "--out-dir", str(tmp_path / "rerun")]) in (0, 2)


def test_export_operator_round_trips(tmp_path, capsys):
    out = tmp_path / "op.json"
    assert main(["export-operator", str(SCENARIOS / "split-rotation.json"), "-o", str(out)]) == 0
    T = operator_from_json(json.loads(out.read_text()))
    assert T.dim == 5
    assert main(["export-operator", str(SCENARIOS / "diag-fixture.json")]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["re"] == [0.5, 0.0, 0.0, 1.0]
