"""Scikit-learn estimator surface: params, fitting, sampling, scoring."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from linecfm import net, sampler, tasks
from linecfm.estimator import FlowMatchingSampler


def tiny_estimator(**overrides):
    params = dict(mode="lp", sigma=0.05, hidden_width=8, hidden_depth=1,
                  time_embedding_width=1, epochs=3, batch_size=32,
                  batches_per_epoch=2, random_state=0)
    params.update(overrides)
    return FlowMatchingSampler(**params)


class TestParams:
    def test_get_set_round_trip(self):
        est = tiny_estimator()
        params = est.get_params()
        assert params["mode"] == "lp"
        assert params["epochs"] == 3
        est.set_params(epochs=7, mode="ot")
        assert est.epochs == 7
        assert est.mode == "ot"

    def test_clone(self):
        est = tiny_estimator().fit(tasks.task_2d_line())
        fresh = clone(est)
        assert fresh.get_params() == est.get_params()
        assert not hasattr(fresh, "model_")

    def test_sigma_none_uses_task_default(self):
        task = tasks.task_2d_line()
        est = tiny_estimator(sigma=None)
        assert est.train_config(task).sigma == task.default_sigma


class TestFit:
    def test_fit_returns_self_and_sets_state(self):
        task = tasks.task_2d_line()
        est = tiny_estimator()
        assert est.fit(task) is est
        assert est.n_features_in_ == task.dim
        assert est.model_.output_width == task.dim
        assert len(est.report_.loss_curve) == 3

    def test_fit_rejects_non_task(self):
        with pytest.raises(TypeError):
            tiny_estimator().fit(np.zeros((10, 2)))

    def test_fit_deterministic(self):
        task = tasks.task_2d_line()
        a = tiny_estimator().fit(task)
        b = tiny_estimator().fit(task)
        assert a.report_.loss_curve == b.report_.loss_curve
        for wa, wb in zip(a.model_.weights, b.model_.weights):
            assert np.array_equal(wa, wb)


class TestSample:
    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            tiny_estimator().sample(4)

    def test_shapes(self):
        task = tasks.task_2d_line()
        est = tiny_estimator().fit(task)
        out = est.sample(n_samples=17, steps=4)
        assert out.endpoints.shape == (17, 2)
        assert out.trajectories.shape == (5, 17, 2)
        assert out.x0.shape == (17, 2)
        assert out.task_batch.size == 17

    def test_deterministic_given_state(self):
        est = tiny_estimator().fit(tasks.task_2d_line())
        a = est.sample(8, random_state=5)
        b = est.sample(8, random_state=5)
        assert np.array_equal(a.endpoints, b.endpoints)

    def test_vcs_changes_endpoints(self):
        est = tiny_estimator().fit(tasks.task_2d_line())
        plain = est.sample(32, random_state=1, vcs=False)
        calibrated = est.sample(32, random_state=1, vcs=True)
        assert not np.allclose(plain.endpoints, calibrated.endpoints)

    def test_transport_matches_euler(self):
        est = tiny_estimator().fit(tasks.task_2d_line())
        x0 = np.array([0.3, -0.8])
        cond = np.array([0.5, 0.1, -0.2])
        mine = est.transport(x0, cond=cond, steps=3)
        ref = sampler.euler_sample(est.model_, x0, sampler.SamplerConfig(steps=3),
                                   cond=cond)
        assert np.array_equal(mine.endpoint, ref.endpoint)

    def test_score_is_negative_distance(self):
        est = tiny_estimator().fit(tasks.task_2d_line())
        score = est.score(n_samples=64)
        assert np.isfinite(score)
        assert score <= 0.0


class TestCheckpointInterop:
    def test_fitted_model_round_trips(self, tmp_path):
        est = tiny_estimator().fit(tasks.task_2d_line())
        path = tmp_path / "m.ckpt"
        net.save_checkpoint(est.model_, path)
        loaded = net.load_checkpoint(path)
        x = np.array([0.1, 0.2])
        cond = np.zeros(3)
        assert np.array_equal(
            net.forward(loaded, x, 0.5, cond), net.forward(est.model_, x, 0.5, cond)
        )
