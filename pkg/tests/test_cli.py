import json

import numpy as np
import pytest

from pion import cli
from pion import linalg


@pytest.fixture
def run_config(tmp_path):
    doc = {
        "problem": {
            "name": "least_squares",
            "params": {"d_out": 6, "d_in": 9, "n_samples": 8},
            "seed": 401,
        },
        "optimizer": {"kind": "pion", "lr": 1e-3},
        "steps": 30,
        "record_every": 10,
        "seed": 1,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


class TestRunCommand:
    def test_success_writes_csv(self, run_config, tmp_path, capsys):
        out = tmp_path / "metrics.csv"
        assert cli.main(["run", "--config", str(run_config), "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) >= 3
        assert lines[0].startswith("step,loss,")

    def test_divergence_exit_code_and_partial_csv(self, run_config, tmp_path, capsys):
        out = tmp_path / "metrics.csv"
        code = cli.main(
            ["run", "--config", str(run_config), "--out", str(out), "--set", "lr=1e9"]
        )
        assert code == 2
        assert out.exists()
        assert len(out.read_text().strip().split("\n")) >= 2

    def test_missing_config_is_config_error(self, tmp_path, capsys):
        code = cli.main(
            ["run", "--config", str(tmp_path / "nope.json"), "--out", "x.csv"]
        )
        assert code == 1

    def test_override_beats_file_value(self, run_config, tmp_path, capsys):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert cli.main(["run", "--config", str(run_config), "--out", str(out1)]) == 0
        assert (
            cli.main(
                [
                    "run",
                    "--config",
                    str(run_config),
                    "--out",
                    str(out2),
                    "--set",
                    "lr=2e-3",
                ]
            )
            == 0
        )
        assert out1.read_text() != out2.read_text()

    def test_unknown_override_rejected(self, run_config, tmp_path, capsys):
        code = cli.main(
            [
                "run",
                "--config",
                str(run_config),
                "--out",
                str(tmp_path / "x.csv"),
                "--set",
                "warp=9",
            ]
        )
        assert code == 1

    def test_dotted_override(self, run_config, tmp_path, capsys):
        out = tmp_path / "c.csv"
        code = cli.main(
            [
                "run",
                "--config",
                str(run_config),
                "--out",
                str(out),
                "--set",
                "optimizer.exp_scheme=cayley",
                "--set",
                "problem.seed=7",
            ]
        )
        assert code == 0

    def test_usage_error_is_exit_one(self, capsys):
        assert cli.main(["run"]) == 1
        assert cli.main(["frobnicate"]) == 1


class TestCompareCommand:
    def test_identical_configs_identical_columns(self, run_config, tmp_path, capsys):
        out = tmp_path / "summary.csv"
        code = cli.main(
            [
                "compare",
                "--config",
                str(run_config),
                "--config",
                str(run_config),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("config_id,width,lr,")
        a = lines[1].split(",")[3:]
        b = lines[2].split(",")[3:]
        assert a == b


class TestSweepCommand:
    def test_grid_rows(self, run_config, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = cli.main(
            [
                "sweep",
                "--config",
                str(run_config),
                "--out",
                str(out),
                "--widths",
                "64,128",
                "--lrs",
                "1e-3,2e-3",
                "--set",
                "steps=5",
            ]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 5  # header + 4 cells

    def test_empty_grid_flag(self, run_config, tmp_path, capsys):
        code = cli.main(
            [
                "sweep",
                "--config",
                str(run_config),
                "--out",
                str(tmp_path / "s.csv"),
                "--widths",
                "",
                "--lrs",
                "1e-3",
            ]
        )
        assert code == 1


class TestInspectCommand:
    def _write_matrix(self, tmp_path, a):
        rows, cols = a.shape
        lines = [f"{rows},{cols}"]
        for row in a:
            lines.append(",".join(repr(v) for v in row))
        path = tmp_path / "m.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_identity(self, tmp_path, capsys):
        path = self._write_matrix(tmp_path, np.eye(3))
        assert cli.main(["inspect", str(path)]) == 0
        out = capsys.readouterr().out
        assert "singular_values: 1,1,1" in out

    def test_diag_descending(self, tmp_path, capsys):
        path = self._write_matrix(tmp_path, np.diag([3.0, 4.0]))
        assert cli.main(["inspect", str(path)]) == 0
        assert "singular_values: 4,3" in capsys.readouterr().out

    def test_rectangular(self, tmp_path, capsys):
        path = self._write_matrix(tmp_path, np.arange(6, dtype=float).reshape(2, 3))
        assert cli.main(["inspect", str(path)]) == 0
        out = capsys.readouterr().out
        assert len(out.split("singular_values: ")[1].split("\n")[0].split(",")) == 2

    def test_malformed(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("2,2\n1.0,2.0\n")
        assert cli.main(["inspect", str(path)]) == 1


class TestSelftestCommand:
    def test_fast_suites_pass_and_list_once(self, capsys):
        code = cli.main(
            ["selftest", "--suite", "linalg", "--suite", "manifold", "--suite", "problems"]
        )
        out = capsys.readouterr().out
        assert code == 0
        for name in ("linalg", "manifold", "problems"):
            assert out.count(f"{name}:") == 1

    def test_corrupted_kernel_fails(self, capsys, monkeypatch):
        def corrupted(a, eta_alpha):
            return np.eye(a.shape[0]) + eta_alpha * a  # quadratic term dropped

        monkeypatch.setattr(linalg, "exp_e2", corrupted)
        assert cli.main(["selftest", "--suite", "linalg"]) == 3


class TestFlopsCommand:
    def test_breakdown_printed(self, capsys):
        assert cli.main(["flops", "--d-out", "4", "--d-in", "4"]) == 0
        out = capsys.readouterr().out
        assert "lie_gradient: 512" in out
        assert "total:" in out

    def test_alternating_flag(self, capsys):
        assert cli.main(["flops", "--d-out", "8", "--d-in", "2", "--alternating"]) == 0
        out = capsys.readouterr().out
        # cross terms 320 and cubic 520, both halved under alternation
        assert "update_side_dominant: 580" in out
