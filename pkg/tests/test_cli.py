import argparse
import csv
import json
import os

import pytest
import yaml

from stratsim.cli import main, parse_seeds


def _config(tmp_path, name="exp.yaml", **sections):
    data = {"instance": {"scenario": "s1"}, **sections}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_parse_seeds():
    assert parse_seeds("0-3,10") == [0, 1, 2, 3, 10]
    assert parse_seeds("5") == [5]
    assert parse_seeds("1, 2,") == [1, 2]
    for bad in ("a", "3-1", "1-x"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_seeds(bad)


def test_simulate_writes_outputs_and_is_deterministic(tmp_path):
    out = tmp_path / "out"
    config = _config(
        tmp_path,
        user={"mode": "naive"},
        engine={"seeds": [0, 1], "horizon": 300},
        outputs={"formats": ["json", "csv", "pdf"]},
    )
    assert main(["simulate", "--config", config, "--out", str(out)]) == 0
    files = [
        "simulate.json",
        "simulate_summary.csv",
        "trajetorias/seed_0.jsonl",
        "trajetorias/seed_1.jsonl",
        "crencas.pdf",
    ]
    first = {f: (out / f).read_bytes() for f in files}
    rows = _read_csv(out / "simulate_summary.csv")
    assert [r["seed"] for r in rows] == ["0", "1"]

    assert main(["simulate", "--config", config, "--out", str(out)]) == 0
    assert {f: (out / f).read_bytes() for f in files} == first
    assert b"/CreationDate (D:19700101000000)" in first["crencas.pdf"]

    bundle = json.loads(first["simulate.json"])
    assert bundle["metadata"]["command"] == "simulate"
    assert bundle["config"]["outputs"]["directory"] == str(out)


def test_seeds_flag_overrides_config(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, user={"mode": "naive"}, engine={"seeds": [0], "horizon": 100})
    assert main(["simulate", "--config", config, "--out", str(out), "--seeds", "3-4"]) == 0
    assert sorted(os.listdir(out / "trajetorias")) == ["seed_3.jsonl", "seed_4.jsonl"]


def test_config_errors_exit_2(tmp_path, capsys):
    empty = _config(tmp_path, "vazio.yaml", user={"mode": "naive"}, engine={"seeds": []})
    assert main(["simulate", "--config", empty, "--out", str(tmp_path / "o")]) == 2
    assert "[ERRO]" in capsys.readouterr().err

    path = tmp_path / "marte.yaml"
    path.write_text("instance:\n  scenario: marte\n", encoding="utf-8")
    assert main(["trust", "--config", str(path)]) == 2
    assert main(["trust", "--config", str(tmp_path / "nao_existe.yaml")]) == 2


def test_trust_report(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, engine={"kappa0": 0.5})
    assert main(["trust", "--config", config, "--out", str(out)]) == 0
    payload = json.loads((out / "trust.json").read_text(encoding="utf-8"))["payload"]
    assert payload["strategization_gap"] == pytest.approx(0.0875, abs=1e-9)
    assert payload["trustworthy"] is False
    assert (out / "trust.csv").exists()


def test_solve_and_stable_set(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path)
    assert main(["solve", "--config", config, "--out", str(out)]) == 0
    solution = json.loads((out / "solve.json").read_text(encoding="utf-8"))["payload"]["solution"]
    assert solution["label"] == "mask:{z0,z1,z2}"
    rows = _read_csv(out / "solve.csv")
    assert len(rows) == 32
    assert rows[0]["label"] == "q_br"

    assert main(["stable-set", "--config", config, "--out", str(out)]) == 0
    rounds = _read_csv(out / "stable_set.csv")
    assert rounds and all(r["eliminated"] != r["dominator"] for r in rounds)


def test_counterfactual_prop4(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "p4.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "instance": {"scenario": "prop4"},
                "counterfactual_algorithm": {"kind": "toxicity", "alpha": 0.01},
                "outputs": {"formats": ["json", "csv", "png"]},
            }
        ),
        encoding="utf-8",
    )
    assert main(["counterfactual", "--config", str(path), "--out", str(out)]) == 0
    payload = json.loads((out / "counterfactual.json").read_text(encoding="utf-8"))["payload"]
    assert payload["current_true"] == pytest.approx(0.7125, abs=1e-9)
    assert payload["predicted"] < payload["true_strategic"]
    assert (out / "payoffs_counterfactual.png").exists()


def test_reproduce_single_proposition(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "rep.yaml"
    path.write_text(yaml.safe_dump({"engine": {"props": [2]}}), encoding="utf-8")
    assert main(["reproduce", "--config", str(path), "--out", str(out)]) == 0
    rows = _read_csv(out / "reproduce_table.csv")
    assert [(r["prop_id"], r["pass"]) for r in rows] == [("2", "true")]
    assert (out / "reproduce.json").exists()


def test_charts_from_trajectories_and_reports(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, user={"mode": "naive"}, engine={"seeds": [0], "horizon": 200, "kappa0": 0.5})
    assert main(["simulate", "--config", config, "--out", str(out)]) == 0
    assert main(["charts", "--input", str(out / "trajetorias"), "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "crencas.pdf").read_bytes().startswith(b"%PDF")
    assert (tmp_path / "g" / "crencas.csv").exists()

    assert main(["trust", "--config", config, "--out", str(out)]) == 0
    assert main(["charts", "--input", str(out / "trust.json"), "--out", str(tmp_path / "g"), "--formats", "png"]) == 0
    assert (tmp_path / "g" / "payoffs_trust.png").exists()

    (tmp_path / "vazio").mkdir()
    assert main(["charts", "--input", str(tmp_path / "vazio"), "--out", str(tmp_path / "g")]) == 1
    assert main(["charts", "--input", str(tmp_path / "nada"), "--out", str(tmp_path / "g")]) == 2


def test_jobs_must_be_positive(tmp_path):
    with pytest.raises(SystemExit):
        main(["trust", "--config", _config(tmp_path), "--jobs", "0"])


def test_trust_pdf_charts_are_byte_identical(tmp_path):
    config = _config(tmp_path, engine={"kappa0": 0.5}, outputs={"formats": ["json", "pdf"]})
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["trust", "--config", config, "--out", str(out)]) == 0
        runs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out)) if f.endswith(".pdf")})
    assert runs[0] and runs[0] == runs[1]


def test_unexpected_os_error_exits_1(tmp_path, capsys, monkeypatch):
    from stratsim import cli

    def broken(config, jobs):
        raise PermissionError("sem permissão de escrita")

    monkeypatch.setitem(cli.COMMANDS, "trust", broken)
    assert main(["trust", "--config", _config(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "[ERRO] PermissionError: sem permissão de escrita" in err


def test_unexpected_value_error_exits_1(tmp_path, capsys, monkeypatch):
    from stratsim import cli

    def broken(config, jobs):
        raise ValueError("matriz singular")

    monkeypatch.setitem(cli.COMMANDS, "solve", broken)
    assert main(["solve", "--config", _config(tmp_path)]) == 1
    assert "[ERRO] ValueError: matriz singular" in capsys.readouterr().err
