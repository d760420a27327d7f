"""Scikit-learn style estimator wrapping training and sampling.

The estimator is generative: ``fit`` consumes a :class:`~linecfm.tasks.ToyTask`
(a target generator, not an (X, y) pair) and ``sample`` integrates the learned
field from fresh noise, in the spirit of ``GaussianMixture.fit`` /
``.sample``.  Parameters follow the scikit-learn contract, so ``get_params``,
``set_params``, and ``clone`` work as usual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import flow, net, sampler, tasks

__all__ = ["GeneratedBatch", "FlowMatchingSampler"]


@dataclass
class GeneratedBatch:
    """Output of :meth:`FlowMatchingSampler.sample`, ready for scoring."""

    endpoints: np.ndarray
    trajectories: np.ndarray
    task_batch: tasks.TaskBatch
    x0: np.ndarray


class FlowMatchingSampler(BaseEstimator):
    """Trainable flow-matching sampler with line-valued or point targets.

    Parameters
    ----------
    mode : {"lp", "ot"}
        Target geometry: line-aligned elongated Gaussians ("lp") or isotropic
        Gaussians around the drawn data point ("ot").
    sigma : float or None
        Orthogonal width of the target ("lp") or its isotropic width ("ot").
        ``None`` uses the task's default.
    hidden_width, hidden_depth : int
        Width and count of the tanh hidden layers.
    time_embedding_width : int
        Width of the sinusoidal time features (1 keeps the raw time).
    epochs, batch_size, batches_per_epoch : int
        Training schedule; fresh samples are drawn every step.
    learning_rate, lr_decay : float
        Initial step size and its per-epoch exponential decay.
    optimizer : {"adam", "sgd"}
        Adaptive updates with betas (0.9, 0.99), or plain gradient descent.
    random_state : int
        Seeds initialization and all training draws; runs are reproducible.
    """

    def __init__(
        self,
        mode: str = "lp",
        sigma: float | None = None,
        hidden_width: int = 64,
        hidden_depth: int = 2,
        time_embedding_width: int = 8,
        epochs: int = 200,
        batch_size: int = 128,
        batches_per_epoch: int = 8,
        learning_rate: float = 5e-4,
        lr_decay: float = 0.99,
        optimizer: str = "adam",
        random_state: int = 0,
    ):
        self.mode = mode
        self.sigma = sigma
        self.hidden_width = hidden_width
        self.hidden_depth = hidden_depth
        self.time_embedding_width = time_embedding_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.batches_per_epoch = batches_per_epoch
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.optimizer = optimizer
        self.random_state = random_state

    def train_config(self, task: tasks.ToyTask) -> flow.TrainConfig:
        """The training configuration this estimator would use on ``task``."""
        sigma = task.default_sigma if self.sigma is None else float(self.sigma)
        return flow.TrainConfig(
            mode=self.mode,
            sigma=sigma,
            epochs=self.epochs,
            batch_size=self.batch_size,
            batches_per_epoch=self.batches_per_epoch,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            optimizer=self.optimizer,
            seed=self.random_state,
        )

    def fit(self, task: tasks.ToyTask, y=None) -> "FlowMatchingSampler":
        """Train the vector field on a task; returns self."""
        if not isinstance(task, tasks.ToyTask):
            raise TypeError(f"fit expects a ToyTask, got {type(task).__name__}")
        cfg = self.train_config(task)
        model = net.init_model(
            flow_dim=task.dim,
            cond_dim=task.cond_dim,
            hidden=(self.hidden_width,) * self.hidden_depth,
            time_embedding_width=self.time_embedding_width,
            rng=np.random.default_rng(cfg.seed),
        )
        report = flow.train(model, task, cfg)
        self.model_ = model
        self.report_ = report
        self.task_ = task
        self.n_features_in_ = task.dim
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError("this FlowMatchingSampler has not been fitted yet")

    def sample(
        self,
        n_samples: int = 256,
        steps: int = 6,
        vcs: bool = False,
        random_state: int | None = None,
    ) -> GeneratedBatch:
        """Draw conditions and noise from the task and integrate the field.

        Calibration (``vcs=True``) uses the per-sample line directions drawn
        with the batch, block by block.
        """
        self._check_fitted()
        from . import bench  # deferred: bench uses this estimator as its engine

        seed = self.random_state + 1 if random_state is None else random_state
        run = bench.run_sampler(
            self.model_, self.task_, n_samples=n_samples, steps=steps,
            seed=seed, vcs=vcs,
        )
        return GeneratedBatch(
            endpoints=run.endpoints,
            trajectories=run.trajectories,
            task_batch=run.task_batch,
            x0=run.x0,
        )

    def transport(self, x0, cond=None, steps: int = 6) -> sampler.SampleResult:
        """Integrate the learned field from caller-provided noise."""
        self._check_fitted()
        return sampler.euler_sample(
            self.model_, x0, sampler.SamplerConfig(steps=steps), cond=cond
        )

    def score(self, X=None, y=None, n_samples: int = 1024, steps: int = 6,
              random_state: int = 0) -> float:
        """Negative mean distance-to-line of sampled endpoints (greater is better)."""
        self._check_fitted()
        out = self.sample(n_samples=n_samples, steps=steps, random_state=random_state)
        distances = tasks.batch_distance_to_lines(
            out.endpoints, out.task_batch, self.task_.block_layout
        )
        return -float(distances.mean())
