import json

import pytest

from esaic.cli import main


def test_stagewise_commands(tmp_path, capsys):
    c, q, d = tmp_path / "c", tmp_path / "q", tmp_path / "d"
    assert main(["train-centralized", "--grid", "3", "--agents", "2", "--seed", "1", "--out", str(c)]) == 0
    assert (c / "values.csv").exists() and (c / "q_table.csv").exists()
    assert main(["design-quantizer", "--values", str(c / "values.csv"), "--budget", "2", "--out", str(q)]) == 0
    links = json.loads((q / "links.json").read_text())["links"]
    assert set(links) == {"0->1", "1->0"}
    assert main(["train-distributed", "--codebooks", str(q), "--grid", "3", "--agents", "2", "--seed", "1",
                 "--episodes", "2000", "--out", str(d)]) == 0
    assert (d / "q_agent1.csv").exists()
    out = capsys.readouterr().out.strip().splitlines()
    assert json.loads(out[-1])["normalized_return"] is not None


def test_budget_matrix_file(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("0,2,1\n3,0,1\n2,2,0\n")
    c = tmp_path / "c"
    main(["train-centralized", "--grid", "3", "--agents", "2", "--seed", "0", "--episodes", "500", "--out", str(c)])
    assert main(["design-quantizer", "--values", str(c / "values.csv"), "--budget-matrix", str(m),
                 "--out", str(tmp_path / "q")]) == 0
    links = json.loads((tmp_path / "q" / "links.json").read_text())
    assert links["budgets"] == [[0, 2, 1], [3, 0, 1], [2, 2, 0]]
    assert links["links"]["0->1"] != links["links"]["0->2"]


def test_run_writes_artifacts(tmp_path):
    args = ["run", "--grid", "3", "--agents", "2", "--pipeline", "saic", "--pipeline", "esaic", "--seed", "0",
            "--episodes", "1500", "--out", str(tmp_path)]
    assert main(args) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["esaic_seed0.json", "esaic_seed0_curve.csv", "saic_seed0.json", "saic_seed0_curve.csv",
                     "summary.csv", "summary.json"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "c1" in summary and "wall_clock" not in summary


def test_run_with_config_and_json(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: 2\nn_agents: 2\nseeds: [1]\ncentralized: {episodes: 200}\ndecentralized: {episodes: 200}\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--format", "json", "--timing", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["esaic_seed1.json", "summary.json"]
    assert "wall_clock" in json.loads((out / "summary.json").read_text())


def test_exit_codes(tmp_path):
    assert main(["run", "--grid", "3", "--agents", "5", "--pipeline", "saic", "--seed", "0",
                 "--out", str(tmp_path)]) == 2
    assert main(["run", "--grid", "3", "--out", str(tmp_path)]) == 1
    assert main(["train-centralized", "--grid", "0", "--out", str(tmp_path)]) == 1
    assert main(["design-quantizer", "--out", str(tmp_path)]) == 1
    assert main(["train-distributed", "--codebooks", str(tmp_path / "none"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        main(["run", "--format", "xml"])


def test_verify_and_bench(tmp_path):
    assert main(["verify", "--grid", "3", "--agents", "3", "--instances", "50", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["kmedian"]["match"] and rep["centralized_vs_oracle"]["match"]
    assert rep["value_relation"]["c1"]["equal"] is True
    assert main(["bench", "--grid", "2", "--agents", "3", "--episodes", "100", "--repeats", "1",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bench.csv").read_text().startswith("# schema=esaic.bench/1")
