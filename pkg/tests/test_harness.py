import math
from dataclasses import replace

import numpy as np
import pytest

from pion import harness as hn
from pion import optim as op
from pion import problems as pb
from pion.errors import ConfigError, DivergenceError, ParseError


def lsq_spec(**params):
    base = {"d_out": 6, "d_in": 9, "n_samples": 8}
    base.update(params)
    return hn.ProblemSpec(name="least_squares", params=base, seed=401)


def small_cfg(**overrides):
    base = dict(
        problem=lsq_spec(),
        optimizer=op.PionConfig(lr=1e-3),
        steps=40,
        record_every=10,
    )
    base.update(overrides)
    return hn.RunConfig(**base)


class TestRun:
    def test_single_step_gives_two_rows(self):
        rec = hn.run(small_cfg(steps=1))
        assert [r.step for r in rec.rows] == [0, 1]

    def test_rows_sorted_and_finite(self):
        rec = hn.run(small_cfg())
        steps = [r.step for r in rec.rows]
        assert steps == sorted(steps)
        assert steps[0] == 0 and steps[-1] == 40
        for r in rec.rows:
            for v in (r.loss, r.update_fro_over_eta, r.spectrum_drift, r.stationarity):
                assert math.isfinite(v)

    def test_zero_gradient_problem_keeps_loss_constant(self):
        prob = pb.procrustes(5, seed=3)
        at_optimum = replace(prob, initial_params=[prob.metadata["target"].copy()])
        cfg = hn.RunConfig(
            problem=hn.ProblemSpec(name="procrustes", params={"d": 5}, seed=3),
            optimizer=op.PionConfig(lr=1e-3),
            steps=10,
            record_every=2,
        )
        rec = hn.run(cfg, _problem=at_optimum)
        losses = {r.loss for r in rec.rows}
        assert losses == {0.0}

    def test_determinism_bit_identical(self, tmp_path):
        cfg = small_cfg()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        hn.csv_write(hn.run(cfg), str(p1))
        hn.csv_write(hn.run(cfg), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_divergence_keeps_partial_record(self):
        cfg = small_cfg(optimizer=op.PionConfig(lr=1e9), steps=50, record_every=5)
        with pytest.raises(DivergenceError) as info:
            hn.run(cfg)
        rec = info.value.record
        assert rec is not None and rec.summary.diverged
        assert [r.step for r in rec.rows] == [0]

    def test_injected_nan_is_divergence(self):
        prob = pb.least_squares(6, 9, 8, seed=402)
        calls = {"n": 0}

        def poisoned(params):
            calls["n"] += 1
            return float("nan") if calls["n"] > 8 else prob.loss(params)

        cfg = small_cfg(steps=100, record_every=2)
        with pytest.raises(DivergenceError) as info:
            hn.run(cfg, _problem=replace(prob, loss=poisoned))
        assert len(info.value.record.rows) >= 2

    def test_multi_parameter_problem(self):
        cfg = hn.RunConfig(
            problem=hn.ProblemSpec(
                name="mlp",
                params={"widths": [5, 6, 4], "depth": 2, "n_samples": 8},
                seed=9,
            ),
            optimizer=op.PionConfig(lr=1e-3),
            steps=6,
            record_every=3,
        )
        rec = hn.run(cfg)
        assert {r.param_id for r in rec.rows} == {0, 1}
        assert rec.rows[-1].loss < rec.rows[0].loss

    def test_baseline_optimizer_runs(self):
        cfg = small_cfg(optimizer=op.BaselineConfig(kind="adamw", lr=1e-2))
        rec = hn.run(cfg)
        assert rec.summary.final_loss < rec.rows[0].loss
        assert all(r.alpha == 0.0 for r in rec.rows)


class TestSchedule:
    def test_constant(self):
        s = hn.Schedule()
        assert s.lr_at(0.5, 1, 100) == 0.5
        assert s.lr_at(0.5, 100, 100) == 0.5

    def test_cosine_endpoints(self):
        s = hn.Schedule(kind="cosine", floor_fraction=0.01)
        assert s.lr_at(1.0, 1, 200) == pytest.approx(1.0)
        assert s.lr_at(1.0, 200, 200) == pytest.approx(0.01)

    def test_cosine_midpoint(self):
        s = hn.Schedule(kind="cosine", floor_fraction=0.0 + 1.0)
        assert s.lr_at(2.0, 50, 100) == pytest.approx(2.0)  # floor 1.0 is constant

    def test_floor_validated(self):
        with pytest.raises(ConfigError):
            hn.Schedule(kind="cosine", floor_fraction=0.0)

    def test_schedule_scales_applied_updates(self):
        steps = 30
        const = hn.run(small_cfg(steps=steps, record_every=steps))
        cosine = hn.run(
            small_cfg(
                steps=steps,
                record_every=steps,
                lr_schedule=hn.Schedule(kind="cosine", floor_fraction=0.01),
            )
        )
        # The cosine run takes smaller late steps, so it makes less progress.
        assert cosine.summary.final_loss > const.summary.final_loss


class TestCompare:
    def test_single_config_degenerates_to_run(self, tmp_path):
        cfg = small_cfg()
        table = hn.compare([cfg])
        rec = hn.run(cfg)
        by_step = {r.step: r.loss for r in rec.rows}
        assert table.losses[0] == [by_step[s] for s in table.steps]

    def test_mismatched_problems_rejected(self):
        with pytest.raises(ConfigError):
            hn.compare([small_cfg(), small_cfg(problem=lsq_spec(d_out=7))])

    def test_two_optimizers_aligned(self):
        a = small_cfg()
        b = small_cfg(optimizer=op.BaselineConfig(kind="adamw", lr=1e-2))
        table = hn.compare([a, b])
        assert len(table.losses) == 2
        assert len(table.losses[0]) == len(table.steps)
        assert table.losses[0][0] == table.losses[1][0]  # shared step-0 loss


class TestSweep:
    def test_singleton_grid_matches_run(self):
        base = small_cfg(steps=10, record_every=5)
        grid = hn.lr_sweep([9], [1e-3], base)
        direct = hn.run(
            replace(base, problem=hn._scale_problem(base.problem, 9))
        ).summary.final_loss
        assert grid.final_losses == [[direct]]
        assert grid.argmin_lr == [1e-3]

    def test_grid_shape_and_ids(self):
        base = small_cfg(steps=5, record_every=5)
        grid = hn.lr_sweep([4, 8], [1e-3, 2e-3], base)
        assert len(grid.final_losses) == 2
        assert len(grid.final_losses[0]) == 2
        assert grid.config_ids[0][0] == "w4_lr0.001"

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            hn.lr_sweep([], [1e-3], small_cfg())

    def test_thread_cap_respected(self, monkeypatch):
        monkeypatch.setenv("PION_THREADS", "1")
        base = small_cfg(steps=5, record_every=5)
        grid = hn.lr_sweep([4], [1e-3, 2e-3], base)
        assert len(grid.final_losses[0]) == 2


class TestSerialization:
    def test_metrics_header_exact(self, tmp_path):
        path = tmp_path / "m.csv"
        hn.csv_write(hn.run(small_cfg(steps=2, record_every=1)), str(path))
        lines = path.read_text().split("\n")
        assert lines[0] == (
            "step,loss,param_id,update_fro_over_eta,spectrum_drift,"
            "stationarity,weight_fro,alpha"
        )
        assert path.read_text().endswith("\n")
        assert "\r" not in path.read_text()

    def test_summary_header_exact(self, tmp_path):
        path = tmp_path / "s.csv"
        rec = hn.run(small_cfg(steps=2, record_every=1))
        hn.summary_csv_write(["c0"], [9], [1e-3], [rec.summary], str(path))
        lines = path.read_text().split("\n")
        assert lines[0] == (
            "config_id,width,lr,final_loss,min_stationarity,max_drift,diverged"
        )
        assert lines[1].startswith("c0,9,0.001,")
        assert lines[1].endswith(",false")

    def test_seventeen_significant_digits(self, tmp_path):
        path = tmp_path / "m.csv"
        rec = hn.run(small_cfg(steps=1))
        hn.csv_write(rec, str(path))
        loss_field = path.read_text().split("\n")[1].split(",")[1]
        assert float(loss_field) == rec.rows[0].loss

    def test_config_roundtrip(self):
        cfg = small_cfg(
            lr_schedule=hn.Schedule(kind="cosine", floor_fraction=0.05), seed=99
        )
        assert hn.config_parse(hn.config_serialize(cfg)) == cfg

    def test_baseline_config_roundtrip(self):
        cfg = small_cfg(optimizer=op.BaselineConfig(kind="muon", lr=2e-2, ns_iters=3))
        assert hn.config_parse(hn.config_serialize(cfg)) == cfg

    def test_unknown_top_level_field(self):
        with pytest.raises(ParseError, match="bogus"):
            hn.config_parse(
                '{"problem": {"name": "least_squares", "params": {"d_out": 2, '
                '"d_in": 2, "n_samples": 2}, "seed": 1}, '
                '"optimizer": {"kind": "pion"}, "steps": 1, "bogus": true}'
            )

    def test_unknown_optimizer_field(self):
        with pytest.raises(ParseError, match="warmup"):
            hn.config_parse(
                '{"problem": {"name": "least_squares", "params": {"d_out": 2, '
                '"d_in": 2, "n_samples": 2}, "seed": 1}, '
                '"optimizer": {"kind": "pion", "warmup": 5}, "steps": 1}'
            )

    def test_unknown_problem(self):
        with pytest.raises(ConfigError):
            hn.config_parse(
                '{"problem": {"name": "maze", "params": {}, "seed": 1}, '
                '"optimizer": {"kind": "pion"}, "steps": 1}'
            )

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            hn.config_parse("{not json")
