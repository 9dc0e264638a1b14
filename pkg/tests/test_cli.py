import csv
import json

import pytest

from cipherflow.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Keys plus a compiled two-item cart, built once through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    keys = root / "keys"
    artifacts = root / "cart"
    assert main(["keygen", "--keys", str(keys), "--seed", "99"]) == 0
    assert main(["compile", "--keys", str(keys), "--app", "cart", "--items", "2", "--out", str(artifacts)]) == 0
    inputs = root / "inputs.json"
    inputs.write_text(json.dumps({"p1": "300", "p2": "300"}))
    return root, keys, artifacts, inputs


def test_keygen_writes_both_files(workspace):
    _, keys, _, _ = workspace
    assert (keys / "keys.ek").exists()
    assert (keys / "keys.sk").exists()


def test_compile_artifact_names(workspace):
    _, _, artifacts, _ = workspace
    assert (artifacts / "program.json").exists()
    assert (artifacts / "conversions.sk.json").exists()


def test_provision_attests(workspace, capsys):
    _, keys, artifacts, _ = workspace
    rc = main(["provision", "--keys", str(keys), "--artifacts", str(artifacts), "--nonce", "00ff"])
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["attested"] is True
    assert report["nonce"] == "00ff"


def test_run_outputs_discounted_total(workspace, capsys):
    _, keys, artifacts, inputs = workspace
    rc = main(["run", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs)])
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["faulted"] is False
    assert report["outputs"] == {"final": "540"}
    assert report["counters"]["verify"] == 1


def test_attack_builtin_binary_search(workspace, capsys):
    _, keys, artifacts, inputs = workspace
    rc = main(
        ["attack", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs), "--builtin", "binary-search"]
    )
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["faulted"] is True
    assert report["unintended_bits"] == 0


def test_attack_random_trials(workspace, capsys):
    _, keys, artifacts, inputs = workspace
    rc = main(
        ["attack", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs), "--trials", "5"]
    )
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["violations"] == []


def test_attack_script(workspace, capsys):
    root, keys, artifacts, inputs = workspace
    script = root / "script.json"
    script.write_text(json.dumps([{"kind": "inject-op", "params": ["p1"]}]))
    rc = main(
        ["attack", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs), "--script", str(script)]
    )
    (outcome,) = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert outcome["faulted"] is True


def test_bench_csv(workspace, capsys):
    root, keys, artifacts, inputs = workspace
    out = root / "bench.csv"
    rc = main(
        ["bench", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs), "--trials", "2", "--csv", str(out)]
    )
    capsys.readouterr()
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert rows[0]["run-id"] == "0"
    assert set(rows[0]) == {"run-id", "wall-ms", "untrusted-ops", "trusted-ops", "faulted"}
    assert rows[0]["faulted"] == "0"


def test_bench_refuses_secret_named_csv(workspace, capsys):
    root, keys, artifacts, inputs = workspace
    rc = main(
        ["bench", "--keys", str(keys), "--artifacts", str(artifacts), "--inputs", str(inputs), "--trials", "1", "--csv", str(root / "out.sk.csv")]
    )
    err = capsys.readouterr().err
    assert rc == 2
    assert "secret" in err
    assert not (root / "out.sk.csv").exists()


def test_generate_inputs(workspace, capsys):
    rc = main(["generate", "--app", "cart", "--items", "3", "--seed", "1"])
    values = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert set(values) == {"p1", "p2", "p3"}


def test_games_report(capsys):
    rc = main(["games", "--scheme", "mul", "--trials", "60"])
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["hase-mul"]["uf_cpa_tamper"]["forgeries"] <= 1
