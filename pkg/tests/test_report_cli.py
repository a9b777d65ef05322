import csv

import pytest

from detective.datagen import read_dataset
from detective.runner.cli import main
from detective.runner.config import ExperimentConfig, dump_config, load_config, parse_config
from detective.errors import ConfigError
from detective.runner.loop import run_active_loop
from detective.runner.report import emit_report, read_rounds, render_from_csv

TINY = {
    "samples_per_domain": 60,
    "backbone_hidden": (8,),
    "embed_dim": 4,
    "generator_hidden": 6,
    "epochs_per_round": 2,
    "learning_rate": 0.005,
    "budget_fraction": 0.1,
}
TINY_SET = [
    "--set", "samples_per_domain=60", "--set", "backbone_hidden=8", "--set", "embed_dim=4",
    "--set", "generator_hidden=6", "--set", "epochs_per_round=2", "--set", "learning_rate=0.005",
    "--set", "budget_fraction=0.1",
]


@pytest.fixture(scope="module")
def result():
    return run_active_loop(ExperimentConfig(**TINY, seed=1))


def test_emit_is_byte_identical(result, tmp_path):
    emit_report([result], tmp_path / "a")
    emit_report([result], tmp_path / "b")
    for name in ("rounds.csv", "selection_log.csv", "report.md", "accuracy.png", "selection.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_rounds_csv_has_rounds_plus_summary(result, tmp_path):
    emit_report([result], tmp_path, figures=False)
    with open(tmp_path / "rounds.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["round"] for r in rows] == ["1", "2", "3", "4", "5", "final"]
    assert rows[-1]["n_labeled"] == "6"
    assert {"acc_source0", "acc_source1", "acc_source2", "acc_target", "acc_mean"} <= set(rows[0])


def test_selection_log_marks_selected(result, tmp_path):
    emit_report([result], tmp_path, figures=False)
    with open(tmp_path / "selection_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    chosen = {int(r["id"]) for r in rows if r["selected"] == "1"}
    assert chosen == {i for rep in result.reports for i in rep.selected}


def test_ablation_labels(tmp_path):
    res = run_active_loop(ExperimentConfig(**TINY, disable_cdc=True))
    assert res.label == "-CDC"
    emit_report([res], tmp_path, figures=False)
    runs, _ = read_rounds(tmp_path / "rounds.csv")
    assert list(runs) == ["-CDC"]
    assert "| -CDC |" in (tmp_path / "report.md").read_text()
    assert ExperimentConfig(disable_udn=True, disable_ius=True).run_label == "-UDN-IUS"
    assert ExperimentConfig(selection="entropy").run_label == "Entropy"


def test_render_from_csv(result, tmp_path):
    emit_report([result], tmp_path / "run", figures=False)
    runs = render_from_csv([tmp_path / "run"], tmp_path / "again")
    assert list(runs) == ["Detective"]
    assert (tmp_path / "again" / "accuracy.png").exists()
    assert "## Detective: per round" in (tmp_path / "again" / "report.md").read_text()


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(**TINY, rotations=(0, 10, 20, 30), seed=4)
    path = tmp_path / "exp.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_config_errors():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config("bogus = 1\n")
    with pytest.raises(ConfigError, match="budget_fraction"):
        parse_config("budget_fraction = 2  # too much\n")


def test_cli_gen(tmp_path, capsys):
    assert main(["gen", "--preset", "blobs3", "--seed", "3", "--out", str(tmp_path)]) == 0
    ds = read_dataset(tmp_path / "blobs3.csv")
    assert (tmp_path / "blobs3.meta").exists()
    assert len(ds) == 2000 and ds.seed == 3


def test_cli_run_twice_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--seed", "7", "--out", str(out)] + TINY_SET) == 0
        outs.append(out)
    for f in ("rounds.csv", "selection_log.csv", "model.ckpt", "config.cfg"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    cfg = load_config(outs[0] / "config.cfg")
    assert cfg.seed == 7 and cfg.samples_per_domain == 60


def test_cli_run_from_config_file(tmp_path):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text("\n".join(f"{k} = {','.join(map(str, v)) if isinstance(v, tuple) else v}" for k, v in TINY.items()))
    assert main(["run", "--config", str(cfg_path), "--seed", "2", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "report.md").exists()


def test_cli_ablate_uncertainty(tmp_path, capsys):
    assert main(["ablate", "--axis", "uncertainty", "--out", str(tmp_path)] + TINY_SET) == 0
    runs, _ = read_rounds(tmp_path / "rounds.csv")
    assert list(runs) == ["U_pre only", "U_dom only", "Detective"]
    for sub in ("u_pre_only", "u_dom_only", "detective"):
        assert (tmp_path / sub / "selection_log.csv").exists()


def test_cli_report(tmp_path):
    assert main(["run", "--out", str(tmp_path / "r")] + TINY_SET) == 0
    assert main(["report", str(tmp_path / "r" / "rounds.csv"), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.md").exists()


def test_cli_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--bogus"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_config_violation_exits_1(tmp_path, capsys):
    code = main(["run", "--out", str(tmp_path), "--set", "budget_fraction=3"])
    assert code == 1
    assert "budget_fraction" in capsys.readouterr().err


def test_cli_missing_input_exits_1(tmp_path, capsys):
    assert main(["report", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 1
