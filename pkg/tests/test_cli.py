import numpy as np
import pytest
from click.testing import CliRunner

from agqd.cli import main
from agqd.core import AttentionField, PointCloud
from agqd.fileio import read_ply, write_detections, write_ply
from agqd.synthgen import SceneSpec, generate


@pytest.fixture
def runner():
    return CliRunner()


def write_line_cloud(path, with_attn=False):
    pts = np.zeros((5, 3))
    pts[:, 0] = np.arange(5)
    attn = AttentionField(np.full(5, 0.5)) if with_attn else None
    write_ply(path, PointCloud(pts), attn)
    return path


class TestSample:
    def test_fps_on_line_matches_hand_trace(self, runner, tmp_path):
        cloud = write_line_cloud(tmp_path / "line.ply")
        out = tmp_path / "run"
        result = runner.invoke(main, [
            "sample", str(cloud), "--method", "fps", "--k", "3",
            "-o", str(out), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "run.indices.txt").read_text() == "0\n4\n2\n"

    def test_constant_attention_ag_equals_fps(self, runner, tmp_path):
        cloud = write_line_cloud(tmp_path / "line.ply", with_attn=True)
        for method, prefix in (("ag", "ag"), ("fps", "fps")):
            result = runner.invoke(main, [
                "sample", str(cloud), "--method", method, "--k", "3",
                "-o", str(tmp_path / prefix), "--no-plot",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "ag.indices.txt").read_bytes() == \
            (tmp_path / "fps.indices.txt").read_bytes()

    def test_fast_and_oracle_outputs_byte_identical(self, runner, tmp_path):
        scene = generate(SceneSpec(points=300, seed=21))
        cloud_path = tmp_path / "scene.ply"
        write_ply(cloud_path, scene.cloud, scene.attention)
        for method, prefix in (("ag", "fast"), ("ag-oracle", "oracle")):
            result = runner.invoke(main, [
                "sample", str(cloud_path), "--method", method, "--k", "32",
                "-o", str(tmp_path / prefix), "--no-plot",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "fast.indices.txt").read_bytes() == \
            (tmp_path / "oracle.indices.txt").read_bytes()
        assert (tmp_path / "fast.ply").read_bytes() == (tmp_path / "oracle.ply").read_bytes()

    def test_missing_attention_is_a_validation_error(self, runner, tmp_path):
        cloud = write_line_cloud(tmp_path / "line.ply")
        result = runner.invoke(main, [
            "sample", str(cloud), "--method", "ag", "--k", "2",
            "-o", str(tmp_path / "x"), "--no-plot",
        ])
        assert result.exit_code == 2

    def test_lambda_sweep_writes_outputs_per_value(self, runner, tmp_path):
        scene = generate(SceneSpec(points=400, seed=22))
        cloud_path = tmp_path / "scene.ply"
        write_ply(cloud_path, scene.cloud, scene.attention)
        write_detections(tmp_path / "gt.json", scene.gt)
        result = runner.invoke(main, [
            "sample", str(cloud_path), "--k", "24",
            "--lambda", "0.5", "--lambda", "0.8", "--lambda", "0.9",
            "--gt", str(tmp_path / "gt.json"),
            "-o", str(tmp_path / "sweep"),
        ])
        assert result.exit_code == 0, result.output
        for lam in ("0.5", "0.8", "0.9"):
            assert (tmp_path / f"sweep_lambda{lam}.indices.txt").exists()
            assert (tmp_path / f"sweep_lambda{lam}.ply").exists()
            assert (tmp_path / f"sweep_lambda{lam}.png").exists()
        sweep = (tmp_path / "sweep_sweep.csv").read_text().splitlines()
        assert sweep[0] == "lambda,method,k,concentration"
        assert len(sweep) == 4
        assert (tmp_path / "sweep_sweep.png").exists()

    def test_parse_error_exit_code(self, runner, tmp_path):
        bad = tmp_path / "bad.ply"
        bad.write_text("not a ply\n")
        result = runner.invoke(main, [
            "sample", str(bad), "--method", "fps", "-o", str(tmp_path / "x"),
        ])
        assert result.exit_code == 3


class TestSynthPerturb:
    def test_synth_is_reproducible_and_complete(self, runner, tmp_path):
        for name in ("a", "b"):
            result = runner.invoke(main, [
                "synth", "--seed", "7", "-o", str(tmp_path / name), "--no-plot",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a/scene.ply").read_bytes() == (tmp_path / "b/scene.ply").read_bytes()
        assert (tmp_path / "a/gt.json").read_bytes() == (tmp_path / "b/gt.json").read_bytes()

    def test_synth_plot_renders(self, runner, tmp_path):
        result = runner.invoke(main, [
            "synth", "--seed", "3", "--points", "200", "-o", str(tmp_path / "s"),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "s/scene.png").stat().st_size > 0

    def test_perturb_zero_level_is_identity(self, runner, tmp_path):
        runner.invoke(main, ["synth", "--seed", "5", "-o", str(tmp_path / "s"), "--no-plot"])
        result = runner.invoke(main, [
            "perturb", str(tmp_path / "s/scene.ply"), "--noise-level", "0",
            "-o", str(tmp_path / "out.ply"),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out.ply").read_bytes() == (tmp_path / "s/scene.ply").read_bytes()

    def test_perturb_deterministic_and_scaled(self, runner, tmp_path):
        runner.invoke(main, ["synth", "--seed", "6", "-o", str(tmp_path / "s"), "--no-plot"])
        for name in ("n1.ply", "n2.ply"):
            result = runner.invoke(main, [
                "perturb", str(tmp_path / "s/scene.ply"), "--noise-level", "0.01",
                "--seed", "9", "-o", str(tmp_path / name),
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "n1.ply").read_bytes() == (tmp_path / "n2.ply").read_bytes()
        original, _ = read_ply(tmp_path / "s/scene.ply")
        noisy, _ = read_ply(tmp_path / "n1.ply")
        assert not np.array_equal(original.points, noisy.points)


class TestEval:
    def write_fixture(self, tmp_path):
        gt = [
            {"label": 0, "score": 1.0, "center": [0, 0, 0], "size": [1, 1, 1], "yaw": 0.0},
            {"label": 0, "score": 1.0, "center": [4, 0, 0], "size": [1, 1, 1], "yaw": 0.0},
        ]
        preds = [
            {"label": 0, "score": 0.9, "center": [0.01, 0, 0], "size": [1, 1, 1], "yaw": 0.0},
            {"label": 0, "score": 0.8, "center": [10, 0, 0], "size": [1, 1, 1], "yaw": 0.0},
            {"label": 0, "score": 0.7, "center": [4.01, 0, 0], "size": [1, 1, 1], "yaw": 0.0},
        ]
        import json
        (tmp_path / "gt.json").write_text(json.dumps(gt))
        (tmp_path / "preds.json").write_text(json.dumps(preds))

    def test_hand_fixture_map(self, runner, tmp_path):
        self.write_fixture(tmp_path)
        result = runner.invoke(main, [
            "eval", str(tmp_path / "preds.json"), str(tmp_path / "gt.json"),
            "-o", str(tmp_path / "out"),
        ])
        assert result.exit_code == 0, result.output
        assert "mAP@0.25: 0.8333" in result.output
        csv_text = (tmp_path / "out/ap.csv").read_text()
        assert csv_text.startswith("class,ap\nclass0,0.8333333333333333")
        assert (tmp_path / "out/ap.png").exists()

    def test_directory_mode_pairs_scenes(self, runner, tmp_path):
        import json
        preds_dir = tmp_path / "preds"
        gt_dir = tmp_path / "gt"
        preds_dir.mkdir()
        gt_dir.mkdir()
        det = {"label": 0, "score": 1.0, "center": [0, 0, 0], "size": [1, 1, 1], "yaw": 0.0}
        for scene in ("s1.json", "s2.json"):
            (gt_dir / scene).write_text(json.dumps([det]))
            (preds_dir / scene).write_text(json.dumps([dict(det, score=0.9)]))
        result = runner.invoke(main, [
            "eval", str(preds_dir), str(gt_dir), "-o", str(tmp_path / "out"), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        assert "mAP@0.25: 1.0000" in result.output

    def test_zero_predictions_score_zero(self, runner, tmp_path):
        import json
        gt = [{"label": 0, "score": 1.0, "center": [0, 0, 0], "size": [1, 1, 1], "yaw": 0.0}]
        (tmp_path / "gt.json").write_text(json.dumps(gt))
        (tmp_path / "preds.json").write_text("[]")
        result = runner.invoke(main, [
            "eval", str(tmp_path / "preds.json"), str(tmp_path / "gt.json"),
            "-o", str(tmp_path / "out"), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        assert "mAP@0.25: 0.0000" in result.output

    def test_schema_violation_exits_three(self, runner, tmp_path):
        import json
        (tmp_path / "gt.json").write_text(json.dumps([]))
        (tmp_path / "preds.json").write_text(json.dumps([{"label": -1}]))
        result = runner.invoke(main, [
            "eval", str(tmp_path / "preds.json"), str(tmp_path / "gt.json"),
            "-o", str(tmp_path / "out"), "--no-plot",
        ])
        assert result.exit_code == 3


class TestAgdemo:
    @pytest.mark.parametrize("strategy", ["qd", "last-layer", "sequential-4"])
    def test_strategies_produce_detections(self, runner, tmp_path, strategy):
        result = runner.invoke(main, [
            "agdemo", "--seed", "5", "--strategy", strategy, "--k", "8",
            "--dim", "12", "--tokens", "32", "-o", str(tmp_path / strategy), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / strategy / "detections.json").exists()
        assert (tmp_path / strategy / "params.json").exists()

    def test_qd_writes_weight_trace(self, runner, tmp_path):
        result = runner.invoke(main, [
            "agdemo", "--seed", "5", "--strategy", "qd", "--k", "8",
            "--dim", "12", "--tokens", "32", "-o", str(tmp_path / "d"),
        ])
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "d/weights.csv").read_text().splitlines()
        assert lines[0] == "layer,level4,level11,level17,level23"
        assert len(lines) == 5  # 4 decoder layers
        assert (tmp_path / "d/weights.png").exists()

    def test_deterministic_given_seed(self, runner, tmp_path):
        for name in ("r1", "r2"):
            result = runner.invoke(main, [
                "agdemo", "--seed", "11", "--k", "8", "--dim", "12",
                "--tokens", "32", "-o", str(tmp_path / name), "--no-plot",
            ])
            assert result.exit_code == 0, result.output
        assert (tmp_path / "r1/detections.json").read_bytes() == \
            (tmp_path / "r2/detections.json").read_bytes()


class TestBench:
    def test_small_grid_produces_csv_and_figure(self, runner, tmp_path):
        result = runner.invoke(main, [
            "bench", "--sizes", "500,1000", "--ks", "16", "-o", str(tmp_path / "b"),
        ])
        assert result.exit_code == 0, result.output
        assert "oracle spot check passed" in result.output
        lines = (tmp_path / "b/bench.csv").read_text().splitlines()
        assert lines[0] == "method,n,k,seconds"
        # two sizes x (fps, ag, ag-oracle at n <= 2000)
        assert len(lines) == 7
        assert (tmp_path / "b/bench.png").exists()
