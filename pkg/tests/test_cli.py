import json

import pytest

from urysohn_forge.cli import main
from urysohn_forge.eppa import EppaWitness, verify_witness
from urysohn_forge.globalization import Alphabet
from urysohn_forge.probes import NEpsTree, validate_tree
from urysohn_forge.spaces import path_space, save_space

from conftest import dihedral_action


@pytest.fixture
def p4_file(tmp_path):
    path = tmp_path / "p4.json"
    save_space(path_space(4), path)
    return str(path)


@pytest.fixture
def bad_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "name": "bad_triangle", "scale": 1, "labels": ["a", "b", "c"],
        "dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]],
        "value_set": {"kind": "integers", "bound": 3}}))
    return str(path)


def _artifact(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_validate_ok(p4_file, capsys):
    assert main(["validate", p4_file]) == 0
    out = capsys.readouterr().out
    assert "valid=yes" in out


def test_validate_invalid_exit_two(bad_file, capsys):
    assert main(["validate", bad_file]) == 2
    err = capsys.readouterr().err
    assert "triangle" in err


def test_unknown_subcommand_exit_64(capsys):
    assert main(["no-such-command"]) == 64


def test_enumerate_katetov_artifact(p4_file, tmp_path, capsys):
    out = tmp_path / "ek.json"
    assert main(["enumerate-katetov", p4_file, "--bound", "2",
                 "--out", str(out)]) == 0
    data = _artifact(out)
    assert data["command"] == "enumerate-katetov"
    assert len(data["result"]["functions"]) > 0


def test_eppa_search_writes_verifiable_witness(p4_file, tmp_path, capsys):
    out = tmp_path / "w.json"
    assert main(["eppa", "search", p4_file, "--max-omega", "16",
                 "--seed", "7", "--out", str(out)]) == 0
    line = capsys.readouterr().out
    assert "witness size=" in line and "provenance=quotient" in line
    witness = EppaWitness.from_json(_artifact(out)["result"])
    assert verify_witness(witness).ok


def test_eppa_search_deterministic_artifacts(p4_file, tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["eppa", "search", p4_file, "--seed", "9",
                 "--out", str(out1)]) == 0
    assert main(["eppa", "search", p4_file, "--seed", "9",
                 "--out", str(out2)]) == 0
    a, b = _artifact(out1), _artifact(out2)
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b


def test_eppa_verify_round_trip(p4_file, tmp_path):
    wout = tmp_path / "w.json"
    main(["eppa", "search", p4_file, "--seed", "7", "--out", str(wout)])
    cert = tmp_path / "cert.json"
    cert.write_text(json.dumps(_artifact(wout)["result"]))
    assert main(["eppa", "verify", str(cert)]) == 0


def test_eppa_verify_rejects_tampered_certificate(p4_file, tmp_path, capsys):
    wout = tmp_path / "w.json"
    main(["eppa", "search", p4_file, "--seed", "7", "--out", str(wout)])
    data = _artifact(wout)["result"]
    data["witness"]["dist"][0][1] = 2
    data["witness"]["dist"][1][0] = 2
    cert = tmp_path / "cert.json"
    cert.write_text(json.dumps(data))
    assert main(["eppa", "verify", str(cert)]) == 2


def test_eppa_oracle_budget_exhaustion(p4_file):
    assert main(["eppa", "oracle", p4_file, "--max-size", "4"]) == 3


def test_eppa_tower(p4_file, tmp_path, capsys):
    out = tmp_path / "tower.json"
    assert main(["eppa", "tower", p4_file, "--levels", "1", "--seed", "1",
                 "--out", str(out)]) == 0
    assert _artifact(out)["result"]["complete"]


def test_globalize_pipeline_on_fixture(tmp_path, capsys):
    p4 = path_space(4)
    space_path = tmp_path / "p4.json"
    save_space(p4, space_path)
    alphabet = Alphabet(p4)
    action = dihedral_action(p4, alphabet, 7)
    action_path = tmp_path / "action.json"
    action_path.write_text(json.dumps(action.to_json()))

    assert main(["globalize", "check", str(space_path), str(action_path)]) == 0
    gout = tmp_path / "graph.json"
    assert main(["globalize", "graph", str(space_path), str(action_path),
                 "--out", str(gout)]) == 0
    graph = _artifact(gout)["result"]
    assert len(graph["nodes"]) == 7 and graph["connected"]
    assert main(["globalize", "badconf", str(space_path),
                 str(action_path)]) == 0
    out = capsys.readouterr().out
    assert "found=no" in out


def test_globalize_check_rejects_trivial(tmp_path, capsys):
    from urysohn_forge.globalization import trivial_quotient
    p4 = path_space(4)
    space_path = tmp_path / "p4.json"
    save_space(p4, space_path)
    action_path = tmp_path / "trivial.json"
    action_path.write_text(json.dumps(trivial_quotient(p4).to_json()))
    assert main(["globalize", "check", str(space_path), str(action_path)]) == 2


def test_globalize_leftsys(tmp_path, capsys):
    p4 = path_space(4)
    space_path = tmp_path / "p4.json"
    save_space(p4, space_path)
    alphabet = Alphabet(p4)
    action = dihedral_action(p4, alphabet, 7)
    action_path = tmp_path / "action.json"
    action_path.write_text(json.dumps(action.to_json()))
    system_path = tmp_path / "system.json"
    keep = alphabet.singleton(0, 0) + 1
    system_path.write_text(json.dumps({
        "unknowns": ["x"],
        "equations": [{"lhs": "x", "index": 1, "word": [keep]}]}))
    assert main(["globalize", "leftsys", str(system_path), str(space_path),
                 str(action_path)]) == 0
    assert "solvable=yes" in capsys.readouterr().out


def test_sphere_witness_and_probe_tree(tmp_path, capsys):
    swout = tmp_path / "sw.json"
    assert main(["sphere-witness", "--m", "6", "--k", "2", "--n", "2",
                 "--realize", "--out", str(swout)]) == 0
    result = _artifact(swout)["result"]
    assert len(result["witness"]["f_eps"]) == 4
    assert len(result["witness_points"]) == 4

    tout = tmp_path / "tree.json"
    assert main(["probe", "tree", "--m", "6", "--k", "2", "--n", "2",
                 "--out", str(tout)]) == 0
    cert = _artifact(tout)["result"]
    tree = NEpsTree.from_json(cert["nodes"])
    assert validate_tree(tree).ok


def test_probe_delta_line(capsys):
    assert main(["probe", "delta", "--p", "2", "--eps", "1.0"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("probe-delta p=2 ")
    assert "delta(1)=0.133975" in out


def test_probe_rho_line(capsys):
    assert main(["probe", "rho", "--p", "2", "--tau", "1.0"]) == 0
    assert "rho(1)=0.414214" in capsys.readouterr().out


def test_grow_records_seed(p4_file, tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["grow", p4_file, "--steps", "1", "--seed", "3",
                 "--bound", "3", "--out", str(out)]) == 0
    assert _artifact(out)["seed"] == 3
    assert "seed=3" in capsys.readouterr().out


def test_grow_generates_seed_when_absent(p4_file, capsys):
    assert main(["grow", p4_file, "--steps", "0", "--bound", "3"]) == 0
    captured = capsys.readouterr()
    assert "seed generated:" in captured.err


def test_average_command(tmp_path, capsys):
    from urysohn_forge.spaces import build_space
    tri = build_space(("a", "b", "c"), [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
                      name="tri")
    payload = {
        "space": tri.to_json(),
        "phi": {"a": ["1", "7"], "b": ["2/3", "0"], "c": ["5", "1/2"]},
        "group": "iso",
    }
    inp = tmp_path / "avg.json"
    inp.write_text(json.dumps(payload))
    out = tmp_path / "avg_out.json"
    assert main(["average", str(inp), "--out", str(out)]) == 0
    result = _artifact(out)["result"]
    assert result["group_order"] == 6
    assert result["is_metric_transform"]


def test_eppa_search_budget_exhaustion_exit_three(p4_file):
    assert main(["eppa", "search", p4_file, "--max-omega", "3",
                 "--seed", "1"]) == 3


def test_verbose_prints_stats(p4_file, capsys):
    assert main(["--verbose", "eppa", "search", p4_file, "--seed", "7"]) == 0
    assert "stats:" in capsys.readouterr().err
