"""Experiment harness: metrics, comparisons, ablation, oracle checks."""

import dataclasses

import numpy as np
import pytest

from linecfm import bench, flow, net, sampler, tasks


def quick_cfg(**overrides):
    params = dict(mode="lp", sigma=0.05, epochs=4, batch_size=32,
                  batches_per_epoch=2, learning_rate=1e-3, optimizer="adam", seed=0)
    params.update(overrides)
    return flow.TrainConfig(**params)


class TestPathLengthStats:
    def test_straight_single_step(self):
        x0 = np.zeros(3)
        x1 = np.array([3.0, 4.0, 0.0])
        mean, std = bench.path_length_stats(np.stack([x0, x1]))
        assert mean == pytest.approx(5.0)
        assert std == pytest.approx(0.0)

    def test_zero_field_zero_length(self):
        traj = np.zeros((7, 4, 2))
        mean, std = bench.path_length_stats(traj)
        assert mean == 0.0 and std == 0.0

    def test_list_of_trajectories(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])  # length 2
        b = np.array([[0.0, 0.0], [0.0, 4.0], [0.0, 4.0]])  # length 4
        mean, std = bench.path_length_stats([a, b])
        assert mean == pytest.approx(3.0)
        assert std == pytest.approx(1.0)

    def test_piecewise_sum(self):
        rng = np.random.default_rng(0)
        traj = rng.standard_normal((5, 3, 2))
        mean, _ = bench.path_length_stats(traj)
        manual = np.mean([
            sum(np.linalg.norm(traj[k + 1, i] - traj[k, i]) for k in range(4))
            for i in range(3)
        ])
        assert mean == pytest.approx(manual)


class TestRunSampler:
    def test_deterministic(self):
        task = tasks.task_2d_line()
        model = net.init_model(task.dim, task.cond_dim, (8,), 1, rng=0)
        a = bench.run_sampler(model, task, n_samples=16, steps=3, seed=11)
        b = bench.run_sampler(model, task, n_samples=16, steps=3, seed=11)
        assert np.array_equal(a.endpoints, b.endpoints)
        assert np.array_equal(a.trajectories, b.trajectories)

    def test_vcs_keeps_step_norms(self):
        task = tasks.task_2d_line()
        model = net.init_model(task.dim, task.cond_dim, (8,), 1, rng=0)
        plain = bench.run_sampler(model, task, n_samples=32, steps=1, seed=3)
        calibrated = bench.run_sampler(model, task, n_samples=32, steps=1, seed=3,
                                       vcs=True)
        step_plain = plain.trajectories[1] - plain.trajectories[0]
        step_cal = calibrated.trajectories[1] - calibrated.trajectories[0]
        assert np.allclose(np.linalg.norm(step_plain, axis=1),
                           np.linalg.norm(step_cal, axis=1), rtol=1e-10)
        # calibrated steps are orthogonal to the drawn directions
        dots = np.abs(np.sum(step_cal * calibrated.task_batch.directions, axis=1))
        assert np.max(dots) < 1e-10 * np.linalg.norm(step_cal, axis=1).max()

    def test_matches_shared_line_euler(self):
        # with a constant direction, row-wise calibration equals the
        # single-line sampler on the same field
        task = tasks.task_spectrogram_patch(frames=2)
        rng = np.random.default_rng(4)
        model = net.init_model(task.dim, task.cond_dim, (8,), 1, rng=1)
        run = bench.run_sampler(model, task, n_samples=4, steps=2, seed=5, vcs=True)
        batch, x0 = run.task_batch, run.x0
        lines = [
            sampler.VariantLine(batch.directions[0, s:e], batch.offsets[0, s:e])
            for (s, e) in task.block_layout
        ]
        cfg = sampler.SamplerConfig(steps=2, vcs_enabled=True, lines=lines,
                                    block_layout=task.block_layout)
        ref = sampler.euler_sample(model, x0, cfg, cond=batch.cond)
        assert np.allclose(run.endpoints, ref.endpoint, rtol=1e-12, atol=1e-12)


class TestEvaluate:
    def test_metrics_fields_finite(self):
        task = tasks.task_2d_line()
        model = net.init_model(task.dim, task.cond_dim, (8,), 1, rng=0)
        metrics = bench.evaluate_model(model, task, steps=2, n_samples=64)
        for key in ("mean_distance", "endpoint_mse", "path_length_mean",
                    "path_length_std"):
            assert np.isfinite(metrics[key])

    def test_endpoint_mse_is_scaled_squared_distance(self):
        task = tasks.task_2d_line()
        model = net.init_model(task.dim, task.cond_dim, (8,), 1, rng=0)
        run = bench.run_sampler(model, task, n_samples=128, steps=2, seed=7)
        metrics = bench.evaluate_run(run, task)
        dist = tasks.batch_distance_to_lines(run.endpoints, run.task_batch,
                                             task.block_layout)
        assert metrics["endpoint_mse"] == pytest.approx(
            float(np.mean(dist**2)) / task.dim
        )


class TestOracles:
    def test_transport_gap_strictly_positive(self):
        task = tasks.task_2d_line()
        stats = bench.oracle_transport_stats(task, 0.05, n_draws=10_000, seed=0)
        assert stats["lp_mean_length"] <= stats["ot_mean_length"]
        assert stats["gap_mean"] > 3.0 * stats["gap_se"]

    def test_transport_gap_multi_block(self):
        task = tasks.task_spectrogram_patch(frames=2)
        stats = bench.oracle_transport_stats(task, 1e-4, n_draws=2000, seed=1)
        assert stats["gap_mean"] > 0.0

    def test_oracle_field_single_step_hits_width_floor(self):
        task = tasks.task_2d_line()
        sigma = 0.05
        metrics = bench.oracle_field_metrics(task, sigma, mode="lp", steps=1,
                                             n_samples=20_000, seed=2)
        # endpoint residual is sigma * |orthogonal part of x0|: mean sigma*sqrt(2/pi)
        expected = sigma * np.sqrt(2.0 / np.pi)
        assert metrics["mean_distance"] == pytest.approx(expected, rel=0.05)

    def test_oracle_field_budget_invariant(self):
        # the conditional velocity is constant, so any budget lands identically
        task = tasks.task_2d_line()
        one = bench.oracle_field_metrics(task, 0.05, steps=1, n_samples=512, seed=3)
        six = bench.oracle_field_metrics(task, 0.05, steps=6, n_samples=512, seed=3)
        assert one["mean_distance"] == pytest.approx(six["mean_distance"], rel=1e-10)


class TestCompare:
    def test_rows_and_determinism(self, tmp_path):
        task = tasks.task_2d_line()
        cfg_lp = quick_cfg()
        cfg_ot = quick_cfg(mode="ot")
        rows_a = bench.compare(task, [0, 1], cfg_lp, cfg_ot, [1, 2], n_eval=64,
                               out_dir=tmp_path / "a")
        rows_b = bench.compare(task, [0, 1], cfg_lp, cfg_ot, [1, 2], n_eval=64,
                               out_dir=tmp_path / "b")
        assert len(rows_a) == 8  # 2 modes x 2 seeds x 2 budgets
        csv_a = (tmp_path / "a" / "compare.csv").read_bytes()
        csv_b = (tmp_path / "b" / "compare.csv").read_bytes()
        assert csv_a == csv_b
        assert (tmp_path / "a" / "compare_distance.svg").exists()

    def test_identical_configs_give_identical_columns(self):
        task = tasks.task_2d_line()
        cfg = quick_cfg()
        rows = bench.compare(task, [0], cfg, dataclasses.replace(cfg), [1], n_eval=32)
        assert rows[0]["mean_distance"] == rows[1]["mean_distance"]
        assert rows[0]["path_length_mean"] == rows[1]["path_length_mean"]

    def test_divergence_marks_failed_cells(self, tmp_path):
        task = tasks.task_2d_line()
        cfg_lp = quick_cfg(optimizer="sgd", learning_rate=1e12, epochs=30,
                           batches_per_epoch=8)
        cfg_ot = quick_cfg(mode="ot")
        rows = bench.compare(task, [0], cfg_lp, cfg_ot, [1], n_eval=32,
                             out_dir=tmp_path)
        lp_row = next(r for r in rows if r["mode"] == "lp")
        ot_row = next(r for r in rows if r["mode"] == "ot")
        assert lp_row["status"] == "failed"
        assert np.isnan(lp_row["mean_distance"])
        assert ot_row["status"] == "ok"
        text = (tmp_path / "compare.csv").read_text()
        assert "failed" in text


class TestVcsAblation:
    def test_four_rows_and_csv(self, tmp_path):
        task = tasks.task_2d_line()
        rows = bench.vcs_ablation(task, quick_cfg(), steps=2, n_eval=64,
                                  out_dir=tmp_path)
        assert len(rows) == 4
        combos = {(r["mode"], r["vcs"]) for r in rows}
        assert combos == {("lp", False), ("lp", True), ("ot", False), ("ot", True)}
        lines = (tmp_path / "vcs_ablation.csv").read_text().splitlines()
        assert lines[0].startswith("task,mode,vcs,status")
        assert len(lines) == 5

    def test_vcs_off_reduces_to_compare_metrics(self):
        task = tasks.task_2d_line()
        cfg = quick_cfg()
        rows = bench.vcs_ablation(task, cfg, steps=2, n_eval=64)
        compare_rows = bench.compare(task, [cfg.seed], cfg,
                                     dataclasses.replace(cfg, mode="ot"), [2],
                                     n_eval=64)
        for mode in ("lp", "ot"):
            off = next(r for r in rows if r["mode"] == mode and not r["vcs"])
            ref = next(r for r in compare_rows if r["mode"] == mode)
            assert off["mean_distance"] == pytest.approx(ref["mean_distance"])
