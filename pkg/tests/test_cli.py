"""End-to-end command-line runs on tiny problems, plus exit-code mapping."""

import numpy as np
import pytest

from toposdf.cli import cli_main
from toposdf.fileio import (
    load_checkpoint,
    load_config,
    load_diagram,
    load_history,
    load_report,
    parse_config,
    render_config,
    save_checkpoint,
    save_xyz,
)
from toposdf.mlp import Architecture, init_geometric
from toposdf.shapes import ShapeSpec, generate

TINY_CFG = """\
# tiny smoke-run settings
layer_count = 3
hidden_width = 16
skip_layer = 1
iterations = 40
warmup_iters = 5
batch_points = 200
batch_queries = 100
sigma_k = 8
topo_resolution = 6
curriculum_start_iter = 30
mesh_resolution = 24
metric_samples = 500
"""


@pytest.fixture(scope="module")
def sphere_cloud(tmp_path_factory):
    path = tmp_path_factory.mktemp("cloud") / "sphere.xyz"
    points, _ = generate(ShapeSpec("sphere", count=400, seed=0))
    save_xyz(points, path)
    return path


class TestVerifyCommand:
    def test_theorem2_reports_zero(self, capsys):
        code = cli_main(
            ["verify", "--theorem", "2", "--m", "5", "--k", "3",
             "--trials", "100", "--seed", "1"]
        )
        assert code == 0
        assert "0 counterexamples" in capsys.readouterr().out

    def test_theorem3_reports_counts(self, capsys):
        code = cli_main(
            ["verify", "--theorem", "3", "--m", "8", "--k", "2",
             "--trials", "50", "--seed", "0", "--eps", "3.0", "--eps-relative"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "verified 50" in out
        assert "violated 0" in out

    def test_theorem3_needs_eps(self, capsys):
        code = cli_main(["verify", "--theorem", "3", "--m", "6", "--k", "2"])
        assert code == 1
        assert "--eps" in capsys.readouterr().err

    def test_out_of_range_m(self, capsys):
        code = cli_main(["verify", "--theorem", "2", "--m", "9", "--k", "2"])
        assert code == 1


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        code = cli_main(["mesh", "--model", "x", "--out", "y", "--frobnicate"])
        assert code == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self, capsys):
        assert cli_main([]) == 1

    def test_unknown_subcommand(self, capsys):
        assert cli_main(["transmogrify"]) == 1


class TestExitCodes:
    def test_missing_input_is_io_error(self, tmp_path, capsys):
        code = cli_main(
            ["reconstruct", "--input", str(tmp_path / "absent.xyz"),
             "--out", str(tmp_path / "out")]
        )
        assert code == 2
        assert not (tmp_path / "out").exists()

    def test_bad_config_is_validation_error(self, tmp_path, sphere_cloud, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not_a_key = 1\n")
        code = cli_main(
            ["reconstruct", "--input", str(sphere_cloud),
             "--config", str(cfg), "--out", str(tmp_path / "out")]
        )
        assert code == 1
        assert "not_a_key" in capsys.readouterr().err

    def test_empty_mesh_is_validation_error(self, tmp_path, capsys):
        # a field that stays positive on the whole domain has no level set
        model = init_geometric(Architecture(3, 8, 1), radius=-0.5, seed=0)
        ckpt = tmp_path / "m.ckpt"
        save_checkpoint(model, ckpt)
        code = cli_main(
            ["mesh", "--model", str(ckpt), "--resolution", "16",
             "--out", str(tmp_path / "m.obj")]
        )
        assert code == 1
        assert "iso" in capsys.readouterr().err


class TestPipeline:
    def test_reconstruct_mesh_eval_diagram(self, tmp_path, sphere_cloud, capsys):
        out = tmp_path / "run"
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CFG)

        assert cli_main(
            ["reconstruct", "--input", str(sphere_cloud),
             "--config", str(cfg), "--out", str(out)]
        ) == 0
        assert (out / "model.ckpt").exists()
        history = load_history(out / "history.csv")
        assert len(history) == 40

        echoed = load_config(out / "config.cfg")
        assert echoed.input == str(sphere_cloud)
        assert echoed.iterations == 40
        assert render_config(parse_config(render_config(echoed))) == render_config(
            echoed
        )

        obj = tmp_path / "run.obj"
        assert cli_main(
            ["mesh", "--model", str(out / "model.ckpt"),
             "--resolution", "24", "--out", str(obj)]
        ) == 0
        assert obj.read_text().startswith("v ")

        report_path = tmp_path / "report.json"
        assert cli_main(
            ["eval", "--mesh", str(obj), "--gt", str(sphere_cloud),
             "--model", str(out / "model.ckpt"),
             "--report", str(report_path), "--samples", "500"]
        ) == 0
        report = load_report(report_path)
        assert report.component_count >= 1
        assert report.samples_per_side == min(500, 400)
        assert report.significant_feature_loss is not None
        assert np.isfinite(report.cd_two_sided)

        csv = tmp_path / "d.csv"
        assert cli_main(
            ["diagram", "--model", str(out / "model.ckpt"),
             "--resolution", "8", "--out", str(csv)]
        ) == 0
        diagram = load_diagram(csv, grid_resolution=(8, 8, 8))
        assert any(p.essential for p in diagram.pairs)

        ckpt = load_checkpoint(out / "model.ckpt")
        assert ckpt.arch == Architecture(3, 16, 1)
