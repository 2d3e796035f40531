import os
from pathlib import Path

import numpy as np
import pytest

from iclv.cli import main
from iclv.data import load_dataset, save_dataset
from iclv.model import parse_model_file, write_model_file, ModelFile, OptimizerOptions
from iclv.draws import DrawPlan

from helpers import random_dataset, small_spec


def small_model_file(tmp_path, with_latents=True, draws=16):
    spec = small_spec(with_latents)
    path = tmp_path / "model.spec"
    write_model_file(ModelFile(spec=spec, plan=DrawPlan(draws=draws, seed=1),
                               options=OptimizerOptions()), path)
    return spec, path


def write_small_data(tmp_path, spec, n_resp=60, seed=0):
    ds = random_dataset(spec, n_resp=n_resp, n_tasks=2, seed=seed)
    save_dataset(ds, tmp_path / "choices.csv", tmp_path / "respondents.csv")
    return ds


def test_design_subcommand(tmp_path, capsys):
    out = tmp_path / "design.csv"
    code = main(["design", "--runs", "32", "--seed", "3", "--block-size", "4",
                 "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0].startswith("scenario,block,weather")
    assert len(text.splitlines()) == 33
    diag = capsys.readouterr().out
    assert "Max |pairwise correlation|" in diag


def test_design_custom_attributes(tmp_path):
    out = tmp_path / "d.csv"
    code = main(["design", "--runs", "4", "--seed", "0", "--block-size", "2",
                 "--attribute", "speed:1,2", "--attribute", "price:0,5",
                 "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0] == "scenario,block,speed,price"


def test_design_rejects_infeasible(tmp_path):
    code = main(["design", "--runs", "2", "--block-size", "1",
                 "--attribute", "x:1,2,3", "--out", str(tmp_path / "d.csv")])
    assert code == 1


def test_simulate_estimate_report_pipeline(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--respondents", "120", "--tasks", "4",
                 "--seed", "5", "--draws", "8", "--no-latents",
                 "--out-dir", str(out)]) == 0
    for name in ("choices.csv", "respondents.csv", "truth.kv", "model.spec"):
        assert (out / name).exists()

    fit = tmp_path / "fit"
    code = main(["estimate", "--choices", str(out / "choices.csv"),
                 "--respondents", str(out / "respondents.csv"),
                 "--spec", str(out / "model.spec"),
                 "--out", str(fit)])
    assert code in (0, 2)
    kv = Path(f"{fit}.kv").read_text()
    assert "param.asc.walk" in kv
    txt = Path(f"{fit}.txt").read_text()
    assert "Adj.Rho-squared" in txt and "BIC" in txt

    capsys.readouterr()
    assert main(["report", "--results", f"{fit}.kv"]) == 0
    shown = capsys.readouterr().out
    assert "Model summary:" in shown and "Rho-squared" in shown

    assert main(["summarize", "--choices", str(out / "choices.csv"),
                 "--respondents", str(out / "respondents.csv"),
                 "--spec", str(out / "model.spec")]) == 0
    summary = capsys.readouterr().out
    assert "Choice tasks: 480" in summary

    eff = tmp_path / "eff"
    assert main(["effects", "--choices", str(out / "choices.csv"),
                 "--respondents", str(out / "respondents.csv"),
                 "--spec", str(out / "model.spec"),
                 "--params", f"{fit}.kv", "--out", str(eff)]) == 0
    csv = Path(f"{eff}.csv").read_text()
    assert csv.splitlines()[0] == \
        "attribute,alternative,marginal_effect,elasticity,method,averaging"
    assert "cost,pickup_on_way" in csv


def test_estimate_deterministic_outputs(tmp_path):
    spec, model_path = small_model_file(tmp_path, with_latents=True, draws=12)
    write_small_data(tmp_path, spec, n_resp=40)
    args = ["estimate", "--choices", str(tmp_path / "choices.csv"),
            "--respondents", str(tmp_path / "respondents.csv"),
            "--spec", str(model_path), "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) in (0, 2)
    assert main(args + ["--out", str(tmp_path / "b")]) in (0, 2)
    assert (tmp_path / "a.kv").read_bytes() == (tmp_path / "b.kv").read_bytes()
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_threads_flag_does_not_change_results(tmp_path):
    spec, model_path = small_model_file(tmp_path, with_latents=False)
    write_small_data(tmp_path, spec, n_resp=50)
    base = ["--choices", str(tmp_path / "choices.csv"),
            "--respondents", str(tmp_path / "respondents.csv"),
            "--spec", str(model_path)]
    assert main(["--threads", "1", "estimate"] + base +
                ["--out", str(tmp_path / "t1")]) in (0, 2)
    assert main(["--threads", "2", "estimate"] + base +
                ["--out", str(tmp_path / "t2")]) in (0, 2)
    assert (tmp_path / "t1.kv").read_bytes() == (tmp_path / "t2.kv").read_bytes()


def test_psych_subcommand(tmp_path, capsys):
    spec, model_path = small_model_file(tmp_path, with_latents=True)
    write_small_data(tmp_path, spec, n_resp=80)
    code = main(["psych", "--choices", str(tmp_path / "choices.csv"),
                 "--respondents", str(tmp_path / "respondents.csv"),
                 "--spec", str(model_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "Cronbach alpha" in out and "Overall KMO" in out


def test_non_convergence_exit_code_still_writes_results(tmp_path):
    spec = small_spec(with_latents=False)
    path = tmp_path / "model.spec"
    write_model_file(ModelFile(spec=spec, plan=DrawPlan(draws=1),
                               options=OptimizerOptions(max_iterations=1)),
                     path)
    write_small_data(tmp_path, spec, n_resp=50, seed=4)
    code = main(["estimate", "--choices", str(tmp_path / "choices.csv"),
                 "--respondents", str(tmp_path / "respondents.csv"),
                 "--spec", str(path), "--out", str(tmp_path / "capped")])
    assert code == 2
    kv = (tmp_path / "capped.kv").read_text()
    assert "converged = false" in kv


def test_validation_error_exit_code(tmp_path):
    spec, model_path = small_model_file(tmp_path, with_latents=False)
    (tmp_path / "choices.csv").write_text("respondent_id,task_id\n")
    (tmp_path / "respondents.csv").write_text("respondent_id\n1\n")
    code = main(["estimate", "--choices", str(tmp_path / "choices.csv"),
                 "--respondents", str(tmp_path / "respondents.csv"),
                 "--spec", str(model_path), "--out", str(tmp_path / "x")])
    assert code == 1


def test_unknown_flag_is_an_error():
    with pytest.raises(SystemExit):
        main(["estimate", "--nope"])


def test_inputs_not_mutated(tmp_path):
    spec, model_path = small_model_file(tmp_path, with_latents=False)
    write_small_data(tmp_path, spec, n_resp=30)
    before = ((tmp_path / "choices.csv").read_bytes(),
              (tmp_path / "respondents.csv").read_bytes(),
              model_path.read_bytes())
    main(["estimate", "--choices", str(tmp_path / "choices.csv"),
          "--respondents", str(tmp_path / "respondents.csv"),
          "--spec", str(model_path), "--out", str(tmp_path / "y")])
    after = ((tmp_path / "choices.csv").read_bytes(),
             (tmp_path / "respondents.csv").read_bytes(),
             model_path.read_bytes())
    assert before == after
