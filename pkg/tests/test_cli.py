"""CLI verbs, exit codes, and output plumbing via click's test runner."""

import numpy as np
import pytest
from click.testing import CliRunner

from spikecl import cli


@pytest.fixture(scope="module")
def data_root(tmp_path_factory):
    return str(tmp_path_factory.mktemp("cli_data"))


def _args(data_root, out_dir, name, extra=()):
    sets = [
        "dataset.name=synthetic",
        f"dataset.root={data_root}",
        "dataset.synthetic_train_per_class=6",
        "dataset.synthetic_test_per_class=3",
        "tasks.pairs=[[0, 1], [2, 3]]",
        "tasks.samples_per_task=8",
        "tasks.test_samples_per_task=4",
        "model.hidden=[12]",
        "encoder.sample_duration=30",
        f"output_dir={out_dir}",
        f"run_name={name}",
    ]
    args = []
    for s in sets:
        args += ["--set", s]
    return args + list(extra)


def test_help_lists_verbs():
    result = CliRunner().invoke(cli.main, ["--help"])
    assert result.exit_code == 0
    for verb in ("train", "sweep", "eval", "report", "show-config"):
        assert verb in result.output


class TestTrain:
    def test_train_completes(self, data_root, tmp_path):
        result = CliRunner().invoke(cli.main, ["train"] + _args(data_root, tmp_path, "t1"))
        assert result.exit_code == 0, result.output
        assert "run complete" in result.output
        assert "mean_accuracy=" in result.output
        assert (tmp_path / "t1" / "metrics.json").exists()

    def test_train_resume_flag(self, data_root, tmp_path):
        args = _args(data_root, tmp_path, "t2")
        assert CliRunner().invoke(cli.main, ["train"] + args).exit_code == 0
        # rerunning without --resume refuses; with it, the run is a no-op
        again = CliRunner().invoke(cli.main, ["train"] + args)
        assert again.exit_code == 2
        resumed = CliRunner().invoke(cli.main, ["train"] + args + ["--resume"])
        assert resumed.exit_code == 0

    def test_mode_and_seed_shortcuts(self, data_root, tmp_path):
        result = CliRunner().invoke(cli.main, ["train"] + _args(
            data_root, tmp_path, "t3", ["--mode", "baseline", "--seed", "5"]))
        assert result.exit_code == 0, result.output
        cfg_text = (tmp_path / "t3" / "config.yaml").read_text()
        assert "mode: baseline" in cfg_text
        assert "seed: 5" in cfg_text

    def test_config_error_exit_code(self):
        result = CliRunner().invoke(cli.main, ["train", "--set", "mode=bogus"])
        assert result.exit_code == 2
        assert "configuration error" in result.output

    def test_data_error_exit_code(self, tmp_path):
        result = CliRunner().invoke(cli.main, [
            "train", "--set", "dataset.name=idx", "--set", f"dataset.root={tmp_path}"])
        assert result.exit_code == 3
        assert "data error" in result.output

    def test_runtime_error_exit_code(self, data_root, tmp_path, monkeypatch):
        from spikecl import experiment

        def boom(cfg, resume=False):
            raise RuntimeError("induced failure")

        monkeypatch.setattr(experiment, "run_experiment", boom)
        result = CliRunner().invoke(cli.main, ["train"] + _args(data_root, tmp_path, "t4"))
        assert result.exit_code == 4
        assert "runtime error" in result.output


class TestEval:
    def test_eval_checkpoint(self, data_root, tmp_path):
        args = _args(data_root, tmp_path, "e1")
        assert CliRunner().invoke(cli.main, ["train"] + args).exit_code == 0
        ckpt = tmp_path / "e1" / "checkpoints" / "task_2.npz"
        result = CliRunner().invoke(cli.main, ["eval", str(ckpt)] + _args(data_root, tmp_path, "e1"))
        assert result.exit_code == 0, result.output
        assert "task 1 (0, 1): accuracy" in result.output
        assert "mean:" in result.output

    def test_eval_accuracies_match_run(self, data_root, tmp_path):
        args = _args(data_root, tmp_path, "e2")
        assert CliRunner().invoke(cli.main, ["train"] + args).exit_code == 0
        from spikecl.experiment import load_run_record
        rec = load_run_record(tmp_path / "e2")
        ckpt = tmp_path / "e2" / "checkpoints" / "task_2.npz"
        result = CliRunner().invoke(cli.main, ["eval", str(ckpt)] + args)
        assert result.exit_code == 0
        for t in range(2):
            assert f"accuracy {rec.matrix.r[t, 1]:.4f}" in result.output

    def test_eval_missing_checkpoint(self, tmp_path):
        result = CliRunner().invoke(cli.main, ["eval", str(tmp_path / "none.npz")])
        assert result.exit_code == 2  # click validates the path itself

    def test_eval_corrupt_checkpoint(self, data_root, tmp_path):
        bad = tmp_path / "bad.npz"
        bad.write_bytes(b"not a checkpoint")
        result = CliRunner().invoke(cli.main, ["eval", str(bad)] + _args(data_root, tmp_path, "x"))
        assert result.exit_code == 3
        assert "data error" in result.output


class TestSweepAndReport:
    def test_sweep_and_report(self, data_root, tmp_path):
        args = []
        for s in ["dataset.name=synthetic", f"dataset.root={data_root}",
                  "dataset.synthetic_train_per_class=6", "dataset.synthetic_test_per_class=3",
                  "tasks.pairs=[[0, 1], [2, 3]]", "tasks.samples_per_task=8",
                  "tasks.test_samples_per_task=4", "model.hidden=[12]",
                  "encoder.sample_duration=30", f"output_dir={tmp_path / 'grid'}"]:
            args += ["--set", s]
        result = CliRunner().invoke(cli.main, ["sweep"] + args + ["--seeds", "1,2"])
        assert result.exit_code == 0, result.output
        assert "2 runs" in result.output
        assert (tmp_path / "grid" / "sweep_summary.csv").exists()

        run_dirs = [str(p) for p in sorted((tmp_path / "grid").iterdir()) if p.is_dir()]
        report = CliRunner().invoke(
            cli.main, ["report"] + run_dirs + ["--output", str(tmp_path / "rep")])
        assert report.exit_code == 0, report.output
        assert (tmp_path / "rep" / "sweep_aggregate.csv").exists()

    def test_report_requires_output(self, tmp_path):
        result = CliRunner().invoke(cli.main, ["report", str(tmp_path)])
        assert result.exit_code != 0

    def test_report_rejects_non_run_dir(self, tmp_path):
        (tmp_path / "notarun").mkdir()
        result = CliRunner().invoke(cli.main, [
            "report", str(tmp_path / "notarun"), "--output", str(tmp_path / "rep")])
        assert result.exit_code == 3


class TestShowConfig:
    def test_round_trips_overrides(self):
        result = CliRunner().invoke(cli.main, [
            "show-config", "--set", "learning.m_max=5", "--set", "mode=baseline"])
        assert result.exit_code == 0
        assert "m_max: 5" in result.output
        assert "mode: baseline" in result.output

    def test_reads_yaml_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("seed: 123\n")
        result = CliRunner().invoke(cli.main, ["show-config", "--config", str(p)])
        assert result.exit_code == 0
        assert "seed: 123" in result.output

    def test_bad_override_exit_code(self):
        result = CliRunner().invoke(cli.main, ["show-config", "--set", "nonsense=1"])
        assert result.exit_code == 2
