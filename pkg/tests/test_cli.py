import json
import shutil
import subprocess

import pandas as pd
import pytest

from cohortcomfort.cli import main
from cohortcomfort.data import write_canonical

from test_data import CONFIG, write_raw
from test_eval import flat_score_population

SPEC = """
[population]
n_occupants = 10
rows_per_occupant = 30
seed = 4
"""

EVAL = """
[experiment]
data = "pop.csv"
iterations = 2
probe_m = 1
seed = 3

[[approaches]]
recipe = "dist-cross"
k_range = [2, 4]

[[approaches]]
recipe = "sensitive"
"""


@pytest.fixture
def pop(tmp_path):
    (tmp_path / "spec.toml").write_text(SPEC)
    assert main(["synth", "--spec", str(tmp_path / "spec.toml"), "--out", str(tmp_path / "pop.csv")]) == 0
    return tmp_path


def test_ingest(tmp_path, capsys):
    write_raw(tmp_path)
    (tmp_path / "toy.toml").write_text(CONFIG.format(n=4))
    assert main(["ingest", "--config", str(tmp_path / "toy.toml"), "--out", str(tmp_path / "out.csv")]) == 0
    out = capsys.readouterr().out
    assert "occupants kept: 3" in out and "rows dropped by filter [in office]: 3" in out
    assert len(pd.read_csv(tmp_path / "out.csv")) == 12


def test_ingest_missing_label_exit_2(tmp_path, capsys):
    write_raw(tmp_path, label_col="other")
    (tmp_path / "toy.toml").write_text(CONFIG.format(n=4))
    assert main(["ingest", "--config", str(tmp_path / "toy.toml"), "--out", str(tmp_path / "o.csv")]) == 2
    assert "'pref'" in capsys.readouterr().err


def test_synth_outputs(pop, tmp_path):
    truth = pd.read_csv(pop / "pop.types.csv")
    assert len(truth) == 10
    first = (pop / "pop.csv").read_bytes()
    assert main(["synth", "--spec", str(pop / "spec.toml"), "--out", str(pop / "again.csv")]) == 0
    assert (pop / "again.csv").read_bytes() == first
    (tmp_path / "bad.toml").write_text("[population]\nn_types = 1\n")
    assert main(["synth", "--spec", str(tmp_path / "bad.toml"), "--out", str(tmp_path / "x.csv")]) == 2


def test_cohorts(pop, capsys):
    rc = main(["cohorts", "--data", str(pop / "pop.csv"), "--recipe", "dist-cross", "--params", "alpha=0.5",
               "k_range=2,4", "--seed", "1", "--out", str(pop / "cs")])
    assert rc == 0
    manifest = json.loads((pop / "cs" / "manifest.json").read_text())
    assert manifest["recipe"]["start_type"] == "warm" and manifest["recipe"]["parameters"]["alpha"] == 0.5
    assert (pop / "cs" / "k_selection.csv").exists()
    assert main(["cohorts", "--data", str(pop / "pop.csv"), "--recipe", "sex", "--out", str(pop / "sex")]) == 0
    assert "2 cohorts" in capsys.readouterr().out


def test_cohorts_incompatible_exit_3(tmp_path):
    write_raw(tmp_path)
    (tmp_path / "toy.toml").write_text(CONFIG.format(n=4))
    main(["ingest", "--config", str(tmp_path / "toy.toml"), "--out", str(tmp_path / "d.csv")])
    assert main(["cohorts", "--data", str(tmp_path / "d.csv"), "--recipe", "sensitive", "--out",
                 str(tmp_path / "cs")]) == 3


def test_evaluate_worker_invariance(pop, capsys):
    (pop / "eval.toml").write_text(EVAL)
    assert main(["evaluate", "--config", str(pop / "eval.toml"), "--workers", "1", "--out", str(pop / "r1")]) == 0
    err = capsys.readouterr().err
    assert "iteration 2/2" in err
    assert main(["evaluate", "--config", str(pop / "eval.toml"), "--workers", "2", "--out", str(pop / "r2")]) == 0
    for name in ("results.csv", "summary.json", "assignments.csv", "percent_change.csv"):
        assert (pop / "r1" / name).read_bytes() == (pop / "r2" / name).read_bytes()
    m1 = json.loads((pop / "r1" / "manifest.json").read_text())
    m2 = json.loads((pop / "r2" / "manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"] and m1["seed"] == 3
    assert "pmv" in json.loads((pop / "r1" / "summary.json").read_text())["scores"]


def test_evaluate_failure_exit_4(tmp_path):
    write_canonical(flat_score_population(), tmp_path / "pop.csv")
    (tmp_path / "eval.toml").write_text(EVAL.replace('recipe = "dist-cross"\nk_range = [2, 4]\n\n[[approaches]]\n', ""))
    assert main(["evaluate", "--config", str(tmp_path / "eval.toml"), "--out", str(tmp_path / "r")]) == 4
    assert (tmp_path / "r" / "FAILED").exists()
    assert (tmp_path / "r" / "results.csv").exists()


@pytest.mark.skipif(shutil.which("cohort-comfort") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["cohort-comfort", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


@pytest.mark.parametrize("name", ["evaluate_synthetic.toml", "evaluate_alpha_sweep.toml"])
def test_shipped_experiment_configs_parse(name):
    from pathlib import Path

    from cohortcomfort.evaluation import load_experiment_config

    config, raw = load_experiment_config(Path(__file__).parents[1] / "configs" / name)
    assert config.approaches and raw["experiment"]["data"]


def test_shipped_dataset_template_parses():
    from pathlib import Path

    from cohortcomfort.data import load_dataset_spec
    from cohortcomfort.synth import load_population_spec

    root = Path(__file__).parents[1] / "configs"
    assert load_dataset_spec(root / "dataset.example.toml").truncation_n == 231
    assert load_population_spec(root / "synthetic.toml").n_occupants == 20
