import numpy as np
import pytest

from predprey.cli import main
from predprey.configio import (
    EvalConfig,
    parse_eval_config,
    parse_scenario_config,
    write_resolved,
)
from predprey.errors import ConfigError
from predprey.stats import read_run_records
from predprey.trajectory import TrajectoryTable, replay_export


class TestParseConfig:
    def test_scenario_one_pins_max_steps(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("scenario_id = 1\n")
        cfg, provenance = parse_scenario_config(path)
        assert cfg.hyperparams.max_steps == 580_000
        assert cfg.predator_in_training is True
        assert provenance["scenario_id"] == "file"
        assert provenance["max_steps"] == "default"

    def test_empty_file_with_scenario_flag_three(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        cfg, provenance = parse_scenario_config(path, {"scenario_id": 3})
        assert cfg.predator_in_training is False
        assert cfg.hyperparams.max_steps == 1_000_000
        assert provenance["scenario_id"] == "flag"

    def test_unknown_key_is_named(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("epsilonn = 0.2\n")
        with pytest.raises(ConfigError, match="epsilonn"):
            parse_scenario_config(path)

    def test_bad_value_is_reported(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("epsilon = banana\n")
        with pytest.raises(ConfigError, match="epsilon"):
            parse_scenario_config(path)

    def test_scientific_max_steps(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("max_steps = 1.0e6\n")
        cfg, _ = parse_scenario_config(path)
        assert cfg.hyperparams.max_steps == 1_000_000

    def test_explicit_override_beats_scenario_table(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("scenario_id = 1\nmax_steps = 1234\npredator_in_training = false\n")
        cfg, _ = parse_scenario_config(path)
        assert cfg.hyperparams.max_steps == 1234
        assert cfg.predator_in_training is False

    def test_barrier_layout_parsing(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("barrier_layout = -1.0,-1.0,-0.5,1.0 ; 0.5,-1.0,1.0,1.0\n")
        cfg, _ = parse_scenario_config(path)
        assert cfg.world.barrier_layout == ((-1.0, -1.0, -0.5, 1.0), (0.5, -1.0, 1.0, 1.0))
        path.write_text("barrier_layout = none\n")
        cfg, _ = parse_scenario_config(path)
        assert cfg.world.barrier_layout == ()

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_scenario_config(path)

    def test_comments_and_inline_comments(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# header\nseed = 7  # inline\n\n")
        cfg, _ = parse_scenario_config(path)
        assert cfg.seed == 7

    def test_scenario_roundtrip(self, tmp_path):
        src = tmp_path / "cfg.txt"
        src.write_text(
            "scenario_id = 2\nseed = 42\nepsilon = 0.25\nn_prey = 3\n"
            "learning_rate = 2.5e-4\npredator_view_angle = 90.0\n"
        )
        cfg, prov = parse_scenario_config(src)
        out = tmp_path / "resolved.txt"
        write_resolved(cfg, out, prov)
        cfg2, _ = parse_scenario_config(out)
        assert cfg2 == cfg

    def test_eval_roundtrip(self, tmp_path):
        src = tmp_path / "eval.txt"
        src.write_text(
            "checkpoint = model.ckpt\nn_runs = 7\nduration = 123\ngreedy = true\n"
            "predator_present = false\ncondition_id = trial\n"
        )
        cfg, prov = parse_eval_config(src)
        assert isinstance(cfg, EvalConfig)
        assert cfg.n_runs == 7 and cfg.greedy and not cfg.world.predator_present
        out = tmp_path / "resolved.txt"
        write_resolved(cfg, out, prov)
        cfg2, _ = parse_eval_config(out)
        assert cfg2 == cfg


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Train a tiny model once and reuse it for the downstream subcommands."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "train.txt"
    cfg.write_text(
        "\n".join(
            [
                "scenario_id = 3",
                "seed = 3",
                "n_prey = 2",
                "n_positive_points = 4",
                "n_negative_points = 4",
                "batch_size = 64",
                "buffer_size = 256",
                "time_horizon = 16",
                "max_steps = 512",
                "summary_freq = 256",
                "hidden_units = 16",
                "num_layers = 1",
                "checkpoint_interval = 512",
            ]
        )
        + "\n"
    )
    train_dir = root / "train"
    assert main(["train", "-c", str(cfg), "-o", str(train_dir)]) == 0

    eval_cfg = root / "eval.txt"
    eval_cfg.write_text(
        "\n".join(
            [
                "n_prey = 2",
                "n_positive_points = 4",
                "n_negative_points = 4",
                "n_runs = 3",
                "duration = 25",
                "seed = 5",
                "condition_id = demo",
            ]
        )
        + "\n"
    )
    eval_dir = root / "eval"
    rc = main(
        [
            "eval",
            "-c",
            str(eval_cfg),
            "--checkpoint",
            str(train_dir / "checkpoint_final.ckpt"),
            "-o",
            str(eval_dir),
        ]
    )
    assert rc == 0
    return root, train_dir, eval_dir


class TestCliPipeline:
    def test_train_artifacts(self, pipeline):
        _, train_dir, _ = pipeline
        for name in ("resolved_config.txt", "build.txt", "metrics.csv", "checkpoint_final.ckpt"):
            assert (train_dir / name).exists(), name
        build = (train_dir / "build.txt").read_text()
        assert "predprey" in build and "checkpoint=1" in build

    def test_eval_artifacts(self, pipeline):
        _, _, eval_dir = pipeline
        for name in ("resolved_config.txt", "run_records.csv", "summary.csv", "trajectory.csv"):
            assert (eval_dir / name).exists(), name
        records = read_run_records(eval_dir / "run_records.csv")
        assert len(records) == 3

    def test_stats_subcommand(self, pipeline, tmp_path):
        root, _, eval_dir = pipeline
        rec = str(eval_dir / "run_records.csv")
        out = tmp_path / "stats"
        rc = main(["stats", f"a={rec}", f"b={rec}", "-o", str(out)])
        assert rc == 0
        assert (out / "summary.csv").exists() and (out / "stats.csv").exists()
        stats_text = (out / "stats.csv").read_text()
        assert "a_vs_b:task_efficiency" in stats_text

    def test_heatmap_subcommand(self, pipeline, tmp_path):
        _, _, eval_dir = pipeline
        out = tmp_path / "hm"
        rc = main(
            [
                "heatmap",
                "--trajectory",
                str(eval_dir / "trajectory.csv"),
                "--entity-kind",
                "prey",
                "--grid",
                "16",
                "16",
                "-o",
                str(out),
            ]
        )
        assert rc == 0
        assert (out / "occupancy.txt").exists() and (out / "occupancy.pgm").exists()

    def test_replay_export_subcommand(self, pipeline, tmp_path):
        _, _, eval_dir = pipeline
        out = tmp_path / "replay"
        rc = main(
            [
                "replay-export",
                "--trajectory",
                str(eval_dir / "trajectory.csv"),
                "--run",
                "0",
                "--ticks",
                "0",
                "4",
                "-o",
                str(out),
            ]
        )
        assert rc == 0
        text = (out / "replay_run0_0_4.txt").read_text()
        assert text.count("tick ") == 5

    def test_eval_without_checkpoint_is_config_error(self, tmp_path):
        assert main(["eval", "-o", str(tmp_path / "x")]) == 2

    def test_unknown_config_key_exit_code(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("epsilonn = 0.2\n")
        assert main(["train", "-c", str(bad), "-o", str(tmp_path / "out")]) == 2

    def test_missing_trajectory_is_io_error(self, tmp_path):
        rc = main(
            ["heatmap", "--trajectory", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "o")]
        )
        assert rc == 4

    def test_output_root_env_var(self, pipeline, tmp_path, monkeypatch):
        _, _, eval_dir = pipeline
        monkeypatch.setenv("PREDPREY_OUTPUT_ROOT", str(tmp_path / "root"))
        monkeypatch.chdir(tmp_path)
        rc = main(
            [
                "replay-export",
                "--trajectory",
                str(eval_dir / "trajectory.csv"),
                "--run",
                "1",
                "--ticks",
                "2",
                "2",
            ]
        )
        assert rc == 0
        assert (tmp_path / "root" / "replay" / "replay_run1_2_2.txt").exists()


class TestReplayExport:
    def make_table(self, tmp_path, n_ticks=6):
        from predprey.trajectory import TrajectoryWriter
        from predprey.world import WorldConfig, reset, step

        cfg = WorldConfig(n_prey=2, n_positive_points=4, n_negative_points=4)
        state = reset(cfg, 0)
        path = tmp_path / "t.csv"
        with open(path, "w", newline="") as fh:
            writer = TrajectoryWriter(fh)
            rng = np.random.default_rng(0)
            for tick in range(n_ticks):
                state, _, _, events = step(state, rng.integers(0, 6, size=2))
                writer.record(0, tick, state, events)
        return TrajectoryTable.from_csv(path)

    def test_single_tick_range_single_frame(self, tmp_path):
        table = self.make_table(tmp_path)
        text = replay_export(table, 0, (0, 0))
        assert text.count("tick ") == 1

    def test_frame_count_matches_range(self, tmp_path):
        table = self.make_table(tmp_path)
        for lo, hi in ((0, 5), (2, 4), (1, 1)):
            text = replay_export(table, 0, (lo, hi))
            assert text.count("tick ") == hi - lo + 1

    def test_out_of_range_rejected(self, tmp_path):
        table = self.make_table(tmp_path)
        from predprey.errors import InputError

        with pytest.raises(InputError):
            replay_export(table, 0, (0, 99))
        with pytest.raises(InputError):
            replay_export(table, 7, (0, 1))

    def test_caught_event_appears_with_prey_id(self, tmp_path):
        from predprey.trajectory import TrajectoryWriter
        from predprey.world import WorldConfig, reset, step
        from tests_support import make_contact_state

        cfg, state = make_contact_state()
        path = tmp_path / "t.csv"
        with open(path, "w", newline="") as fh:
            writer = TrajectoryWriter(fh)
            state, _, _, events = step(state, [0])
            assert any(e.kind == "prey_caught" for e in events)
            writer.record(0, 0, state, events)
        table = TrajectoryTable.from_csv(path)
        text = replay_export(table, 0, (0, 0))
        assert "event prey_caught prey=0" in text
