"""Conditional-path sampling and the flow-matching regression objective.

Training never simulates the flow: each step draws a source point, a time,
and a target endpoint, interpolates between them, and regresses the model
output at the interpolated point onto the (time-invariant) path velocity.
The loss is the per-coordinate mean squared error, averaged over the batch,
so reported numbers are comparable across dimensions.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import geometry, net
from .geometry import DegenerateLineError, PathParams, VariantLine
from .report import RunReport
from .validation import as_float_array

if TYPE_CHECKING:
    from .tasks import ToyTask

__all__ = [
    "PathSample",
    "PathBatch",
    "TrainConfig",
    "TrainingDivergedError",
    "draw_path_sample",
    "draw_training_batch",
    "block_endpoints",
    "cfm_loss",
    "cfm_loss_grad",
    "train",
]


@dataclass(frozen=True)
class PathSample:
    """One training triple from a conditional path."""

    x_t: np.ndarray
    u_t: np.ndarray
    t: float
    condition: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")


@dataclass(frozen=True)
class PathBatch:
    """A batch of path samples: (n, d) states and velocities, (n,) times."""

    x_t: np.ndarray
    u_t: np.ndarray
    t: np.ndarray
    cond: np.ndarray | None = None


@dataclass
class TrainConfig:
    """Training settings for the toy harness.

    ``sigma`` plays the orthogonal shrink factor in "lp" mode and the residual
    width of the point target in "ot" mode.  Identical configs and seeds give
    bitwise-identical loss trajectories on one machine.  Plain gradient
    descent is the module default; the experiment harness uses the adaptive
    ("adam") variant.
    """

    mode: str = "lp"
    sigma: float = 0.05
    epochs: int = 200
    batch_size: int = 128
    batches_per_epoch: int = 8
    learning_rate: float = 5e-4
    lr_decay: float = 0.99
    optimizer: str = "sgd"
    seed: int = 0

    def __post_init__(self):
        self.mode = str(self.mode).lower()
        PathParams(mode=self.mode, sigma=self.sigma)  # validates mode/sigma
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size <= 0 or self.batches_per_epoch <= 0:
            raise ValueError("batch_size and batches_per_epoch must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")

    def path_params(self) -> PathParams:
        return PathParams(mode=self.mode, sigma=self.sigma)


class TrainingDivergedError(RuntimeError):
    """The loss went non-finite; carries the step index and parameter norms."""


def draw_path_sample(line_or_x1, params: PathParams, rng, *,
                     t: float | None = None, x0=None) -> PathSample:
    """Draw ``x0 ~ N(0, I)`` and ``t ~ U[0, 1]`` and return ``(x_t, u_t, t)``.

    In "lp" mode the first argument must be a non-degenerate VariantLine; in
    "ot" mode it is the target point itself (a degenerate line's offset is
    also accepted).  ``t`` and ``x0`` may be forced explicitly, e.g. to pin a
    path endpoint.
    """
    rng = np.random.default_rng(rng)
    if params.mode == "lp":
        if not isinstance(line_or_x1, VariantLine) or line_or_x1.is_degenerate:
            raise DegenerateLineError("lp mode needs a VariantLine with nonzero direction")
        line = line_or_x1
        x0 = rng.standard_normal(line.dim) if x0 is None else as_float_array(x0, "x0")
        t = float(rng.uniform()) if t is None else float(t)
        endpoint = geometry.sample_target(line, params.sigma, x0)
    else:
        if isinstance(line_or_x1, VariantLine):
            if not line_or_x1.is_degenerate:
                raise ValueError("ot mode expects a point target (or a degenerate line)")
            x1 = line_or_x1.offset
        else:
            x1 = as_float_array(line_or_x1, "x1")
        x0 = rng.standard_normal(x1.size) if x0 is None else as_float_array(x0, "x0")
        t = float(rng.uniform()) if t is None else float(t)
        endpoint, _ = geometry.ot_target_and_velocity(x1, params.sigma, x0)
    # the path velocity is time-invariant and equals endpoint - x0 exactly
    return PathSample(
        x_t=geometry.path_point(x0, endpoint, t), u_t=endpoint - x0, t=t
    )


def block_endpoints(
    directions: np.ndarray,
    offsets: np.ndarray,
    layout: list[tuple[int, int]],
    params: PathParams,
    x0: np.ndarray,
) -> np.ndarray:
    """Vectorized target endpoints for a batch of per-sample, per-block lines.

    Applies the line-aligned construction independently to each block slice
    ("lp") or the isotropic point construction ("ot").  Agrees with the
    per-sample geometry operations.
    """
    out = np.empty_like(x0)
    for start, stop in layout:
        b = offsets[:, start:stop]
        z = x0[:, start:stop]
        if params.mode == "ot":
            out[:, start:stop] = b + params.sigma * z
            continue
        a = directions[:, start:stop]
        norms_sq = np.sum(a * a, axis=1)
        if np.any(norms_sq == 0.0):
            raise DegenerateLineError("lp mode met a zero direction in the batch")
        proj_z = (np.sum(a * z, axis=1) / norms_sq)[:, np.newaxis] * a
        proj_b = (np.sum(a * b, axis=1) / norms_sq)[:, np.newaxis] * a
        out[:, start:stop] = (b - proj_b) + params.sigma * z + (1.0 - params.sigma) * proj_z
    return out


def draw_training_batch(
    task: "ToyTask", params: PathParams, rng: np.random.Generator, batch_size: int
) -> PathBatch:
    """Draw a fresh training batch from a task: lines, noise, times, targets."""
    batch = task.draw(rng, batch_size)
    x0 = rng.standard_normal((batch_size, task.dim))
    t = rng.uniform(size=batch_size)
    endpoints = block_endpoints(
        batch.directions, batch.offsets, task.block_layout, params, x0
    )
    u = endpoints - x0
    x_t = (1.0 - t)[:, np.newaxis] * x0 + t[:, np.newaxis] * endpoints
    return PathBatch(x_t=x_t, u_t=u, t=t, cond=batch.cond)


def cfm_loss(predicted, target_u) -> float:
    """Mean squared error per coordinate, averaged over the batch."""
    predicted = as_float_array(predicted, "predicted")
    target_u = as_float_array(target_u, "target_u")
    if predicted.shape != target_u.shape:
        raise ValueError(
            f"shape mismatch: predicted {predicted.shape} vs target {target_u.shape}"
        )
    diff = predicted - target_u
    return float(np.mean(diff * diff))


def cfm_loss_grad(predicted, target_u) -> np.ndarray:
    """Gradient of :func:`cfm_loss` with respect to ``predicted``."""
    predicted = as_float_array(predicted, "predicted")
    target_u = as_float_array(target_u, "target_u")
    if predicted.shape != target_u.shape:
        raise ValueError(
            f"shape mismatch: predicted {predicted.shape} vs target {target_u.shape}"
        )
    return 2.0 * (predicted - target_u) / predicted.size


def train(model: net.VectorFieldModel, task: "ToyTask", cfg: TrainConfig) -> RunReport:
    """Run the flow-matching training loop; the model is updated in place.

    Every step draws a fresh batch (new lines, noise, and times).  The
    returned report carries the per-epoch mean loss curve; with zero epochs
    the model is untouched and the curve is empty.
    """
    if model.output_width != task.dim or model.cond_width != task.cond_dim:
        raise ValueError(
            f"model widths (out={model.output_width}, cond={model.cond_width}) do not "
            f"match task (dim={task.dim}, cond={task.cond_dim})"
        )
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    params = cfg.path_params()
    adam_state = net.AdamState.for_model(model) if cfg.optimizer == "adam" else None
    lr = cfg.learning_rate
    loss_curve: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        epoch_losses = np.empty(cfg.batches_per_epoch)
        for i in range(cfg.batches_per_epoch):
            batch = draw_training_batch(task, params, rng, cfg.batch_size)
            with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught below
                predicted = net.forward(model, batch.x_t, batch.t, batch.cond)
                loss = cfm_loss(predicted, batch.u_t)
            step += 1
            if not np.isfinite(loss):
                norms = [float(np.linalg.norm(w)) for w in model.weights]
                raise TrainingDivergedError(
                    f"non-finite loss at step {step}; weight norms {norms}"
                )
            grads = net.backward(
                model, batch.x_t, batch.t, batch.cond,
                cfm_loss_grad(predicted, batch.u_t),
            )
            if adam_state is not None:
                net.adam_step(model, grads, adam_state, step, lr)
            else:
                net.sgd_step(model, grads, lr)
            epoch_losses[i] = loss
        loss_curve.append(float(epoch_losses.mean()))
        lr *= cfg.lr_decay
    return RunReport(
        config=asdict(cfg),
        loss_curve=loss_curve,
        seed=cfg.seed,
        metrics={"final_loss": loss_curve[-1] if loss_curve else float("nan")},
        wall_clock_s=time.perf_counter() - started,
    )
