"""CLI subcommands driven in-process through main(argv)."""

import json

import pytest

from robustamc.cli import main
from robustamc.config import dump_config, load_config


@pytest.fixture(scope="module")
def cfg_file(mini_cfg, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "mini.yaml"
    dump_config(mini_cfg, path)
    return str(path)


def test_version_flag_exits_cleanly():
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_show_config_prints_digest_and_json(cfg_file, mini_cfg, capsys):
    assert main(["show-config", "--config", cfg_file]) == 0
    out, err = capsys.readouterr()
    assert json.loads(out)["schema_version"] == 1
    assert mini_cfg.digest() in err


def test_show_config_writes_resolved_yaml(cfg_file, mini_cfg, tmp_path):
    target = tmp_path / "resolved.yaml"
    assert main(["show-config", "--config", cfg_file, "--out", str(target)]) == 0
    assert load_config(target).digest() == mini_cfg.digest()


def test_gen_data_writes_every_role(cfg_file, tmp_path, capsys):
    out = tmp_path / "exp"
    assert main(["gen-data", "--config", cfg_file, "--out", str(out), "--seed", "0"]) == 0
    names = sorted(p.name for p in (out / "data" / "seed0").glob("*.amcf"))
    assert names == [
        "source_test.amcf", "source_train.amcf", "target_pilot.amcf",
        "target_test.amcf", "target_unlabeled.amcf",
    ]


def test_run_grid_resumes_from_cache_and_reports(cfg_file, mini_grid, capsys):
    cfg, out, _, _ = mini_grid
    assert main(["run-grid", "--config", cfg_file, "--out", str(out), "--resume"]) == 0
    stdout = capsys.readouterr().out
    assert "grid complete" in stdout
    assert (out / "report" / "report.csv").exists()


def test_efficiency_command_prints_crossings(cfg_file, mini_grid, capsys):
    cfg, out, _, _ = mini_grid
    assert main(["efficiency", "--config", cfg_file, "--out", str(out), "--resume"]) == 0
    stdout = capsys.readouterr().out
    assert ("reached" in stdout) or ("DID NOT REACH" in stdout)


def test_report_command_reemits_from_cells(cfg_file, mini_grid, capsys):
    cfg, out, _, _ = mini_grid
    assert main(["report", "--config", cfg_file, "--out", str(out)]) == 0
    assert "report.csv" in capsys.readouterr().out


def test_adapt_online_scores_one_cell(cfg_file, mini_grid, capsys):
    cfg, out, _, _ = mini_grid
    rc = main([
        "adapt-online", "--config", cfg_file, "--out", str(out), "--seed", "0",
        "--offline", "clean", "--online", "finetune", "--shots", "1",
    ])
    assert rc == 0
    assert "attacked SER" in capsys.readouterr().out


def test_report_without_cells_fails_cleanly(cfg_file, tmp_path, capsys):
    assert main(["report", "--config", cfg_file, "--out", str(tmp_path)]) == 2
    assert "run-grid" in capsys.readouterr().err


def test_adapt_online_missing_artifact_fails_cleanly(cfg_file, mini_grid, tmp_path, capsys):
    cfg, out, _, _ = mini_grid
    # data exists but artifacts do not: point at a copy holding only datasets
    alt = tmp_path / "exp"
    (alt / "data").mkdir(parents=True)
    for p in (out / "data").iterdir():
        (alt / "data" / p.name).symlink_to(p)
    rc = main([
        "adapt-online", "--config", cfg_file, "--out", str(alt), "--seed", "0",
        "--offline", "clean", "--online", "finetune", "--shots", "1",
    ])
    assert rc == 2
    assert "train-offline" in capsys.readouterr().err


def test_config_errors_surface_as_exit_code_one(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: 1\noffline:\n  arch: resnet50\n")
    assert main(["show-config", "--config", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err
