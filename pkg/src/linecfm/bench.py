"""Experiment harness: mode comparisons, calibration ablation, oracle checks.

All comparative claims here are directional (which mode is better), evaluated
on synthetic tasks whose equivalence lines are known exactly.  The quality
metric is the distance from a sampled endpoint to its drawn line, the
quantity the line-aligned construction is built to minimize; the mean squared
error to the nearest variant is reported alongside.  Runs are deterministic
given their seeds and emit byte-stable CSVs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import flow, net, sampler, tasks
from .estimator import FlowMatchingSampler
from .geometry import PathParams
from .report import plot_budget_curves, write_rows_csv

__all__ = [
    "SamplerRun",
    "run_sampler",
    "evaluate_run",
    "evaluate_model",
    "path_length_stats",
    "fit_estimator",
    "compare",
    "vcs_ablation",
    "oracle_transport_stats",
    "oracle_field_metrics",
    "COMPARE_FIELDS",
    "ABLATION_FIELDS",
]

DEFAULT_EVAL_SEED = 20_240_601


@dataclass
class SamplerRun:
    """A batch of sampled endpoints with everything needed to score them."""

    endpoints: np.ndarray
    trajectories: np.ndarray
    task_batch: tasks.TaskBatch
    x0: np.ndarray
    degenerate_steps: list[int] = field(default_factory=list)


def run_sampler(
    model: net.VectorFieldModel,
    task: tasks.ToyTask,
    *,
    n_samples: int,
    steps: int,
    seed: int = DEFAULT_EVAL_SEED,
    vcs: bool = False,
    vcs_epsilon: float = sampler.DEFAULT_VCS_EPSILON,
) -> SamplerRun:
    """Draw task conditions and noise, then Euler-integrate the model field.

    Calibration (``vcs=True``) is applied block-wise against each sample's own
    drawn line directions, which covers both per-sample lines (the planar
    task) and constant ones (the spectrogram task).
    """
    rng = np.random.default_rng(seed)
    batch = task.draw(rng, n_samples)
    x0 = rng.standard_normal((n_samples, task.dim))
    x = x0.copy()
    trajectory = [x.copy()]
    degenerate_steps: list[int] = []
    dt = 1.0 / steps
    for k in range(steps):
        v = net.forward(model, x, k / steps, batch.cond)
        if vcs:
            fired = False
            for start, stop in task.block_layout:
                block, degenerate = sampler._calibrate_core(
                    v[:, start:stop], batch.directions[:, start:stop], vcs_epsilon
                )
                v[:, start:stop] = block
                fired = fired or bool(np.any(degenerate))
            if fired:
                degenerate_steps.append(k)
        x = x + dt * v
        trajectory.append(x.copy())
    return SamplerRun(
        endpoints=x,
        trajectories=np.stack(trajectory),
        task_batch=batch,
        x0=x0,
        degenerate_steps=degenerate_steps,
    )


def path_length_stats(trajectories) -> tuple[float, float]:
    """Mean and std of the summed Euclidean step lengths per trajectory.

    Accepts a (steps+1, d) single trajectory, a (steps+1, n, d) batch, or a
    list of single trajectories.
    """
    if isinstance(trajectories, (list, tuple)):
        lengths = np.array(
            [np.linalg.norm(np.diff(np.asarray(t, dtype=float), axis=0), axis=-1).sum()
             for t in trajectories]
        )
    else:
        arr = np.asarray(trajectories, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, np.newaxis, :]
        steps_len = np.linalg.norm(np.diff(arr, axis=0), axis=-1)
        lengths = steps_len.sum(axis=0)
    return float(lengths.mean()), float(lengths.std())


def evaluate_run(run: SamplerRun, task: tasks.ToyTask) -> dict:
    """Score one sampler run: distance to line, endpoint MSE, path lengths."""
    distances = tasks.batch_distance_to_lines(
        run.endpoints, run.task_batch, task.block_layout
    )
    nearest = tasks.batch_nearest_variant(run.endpoints, run.task_batch, task.block_layout)
    mse = float(np.mean((run.endpoints - nearest) ** 2))
    length_mean, length_std = path_length_stats(run.trajectories)
    return {
        "mean_distance": float(distances.mean()),
        "endpoint_mse": mse,
        "path_length_mean": length_mean,
        "path_length_std": length_std,
    }


def evaluate_model(
    model: net.VectorFieldModel,
    task: tasks.ToyTask,
    *,
    steps: int,
    n_samples: int = 4096,
    seed: int = DEFAULT_EVAL_SEED,
    vcs: bool = False,
) -> dict:
    run = run_sampler(model, task, n_samples=n_samples, steps=steps, seed=seed, vcs=vcs)
    return evaluate_run(run, task)


def fit_estimator(
    task: tasks.ToyTask,
    cfg: flow.TrainConfig,
    hidden_width: int = 64,
    hidden_depth: int = 2,
    time_embedding_width: int = 1,
) -> FlowMatchingSampler:
    """Train one estimator from a TrainConfig (the harness' training engine).

    The harness default keeps the raw time channel: the sinusoidal features
    use integer frequencies, which make t=0 and t=1 indistinguishable, and
    the toy fields differ sharply between the two ends.
    """
    est = FlowMatchingSampler(
        mode=cfg.mode,
        sigma=cfg.sigma,
        hidden_width=hidden_width,
        hidden_depth=hidden_depth,
        time_embedding_width=time_embedding_width,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        batches_per_epoch=cfg.batches_per_epoch,
        learning_rate=cfg.learning_rate,
        lr_decay=cfg.lr_decay,
        optimizer=cfg.optimizer,
        random_state=cfg.seed,
    )
    return est.fit(task)


COMPARE_FIELDS = [
    "task", "mode", "seed", "budget", "status",
    "mean_distance", "endpoint_mse", "path_length_mean", "path_length_std",
]

_FAILED_METRICS = {
    "mean_distance": float("nan"),
    "endpoint_mse": float("nan"),
    "path_length_mean": float("nan"),
    "path_length_std": float("nan"),
}


def compare(
    task: tasks.ToyTask,
    seeds: list[int],
    cfg_lp: flow.TrainConfig,
    cfg_ot: flow.TrainConfig,
    step_budgets: list[int],
    *,
    n_eval: int = 4096,
    eval_seed: int = DEFAULT_EVAL_SEED,
    out_dir=None,
    verbose: bool = False,
) -> list[dict]:
    """Train both modes across seeds and score them at each step budget.

    The configs must differ only in mode (and its width parameter); the seed
    field is overridden per run.  A diverged training marks its cells as
    failed and the sweep continues.  With ``out_dir`` set, writes
    ``compare.csv`` and ``compare_distance.svg``.
    """
    rows: list[dict] = []
    for cfg in (cfg_lp, cfg_ot):
        mode = cfg.mode
        for seed in seeds:
            run_cfg = replace(cfg, seed=int(seed))
            started = time.perf_counter()
            try:
                est = fit_estimator(task, run_cfg)
            except flow.TrainingDivergedError:
                est = None
            for budget in step_budgets:
                row = {"task": task.name, "mode": mode, "seed": int(seed),
                       "budget": int(budget)}
                if est is None:
                    row["status"] = "failed"
                    row.update(_FAILED_METRICS)
                else:
                    run = run_sampler(
                        est.model_, task, n_samples=n_eval, steps=int(budget),
                        seed=eval_seed,
                    )
                    row["status"] = "ok"
                    row.update(evaluate_run(run, task))
                rows.append(row)
            if verbose:
                status = "failed" if est is None else "ok"
                print(f"compare: mode={mode} seed={seed} {status} "
                      f"({time.perf_counter() - started:.1f}s)")
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_rows_csv(out_dir / "compare.csv", COMPARE_FIELDS, rows)
        plot_budget_curves(rows, out_dir / "compare_distance.svg",
                           metric="mean_distance")
    return rows


ABLATION_FIELDS = [
    "task", "mode", "vcs", "status",
    "mean_distance", "endpoint_mse", "path_length_mean", "path_length_std",
]


def vcs_ablation(
    task: tasks.ToyTask,
    cfg: flow.TrainConfig,
    *,
    steps: int = 6,
    n_eval: int = 4096,
    eval_seed: int = DEFAULT_EVAL_SEED,
    out_dir=None,
) -> list[dict]:
    """Evaluate {lp, ot} x {calibration on, off} with identical settings.

    Trains one model per mode from ``cfg`` (mode overridden) and scores the
    four cells.  With ``out_dir`` set, writes ``vcs_ablation.csv``.
    """
    rows: list[dict] = []
    for mode in ("lp", "ot"):
        run_cfg = replace(cfg, mode=mode)
        try:
            est = fit_estimator(task, run_cfg)
        except flow.TrainingDivergedError:
            est = None
        for vcs in (False, True):
            row = {"task": task.name, "mode": mode, "vcs": vcs}
            if est is None:
                row["status"] = "failed"
                row.update(_FAILED_METRICS)
            else:
                run = run_sampler(
                    est.model_, task, n_samples=n_eval, steps=steps,
                    seed=eval_seed, vcs=vcs,
                )
                row["status"] = "ok"
                row.update(evaluate_run(run, task))
            rows.append(row)
    if out_dir is not None:
        write_rows_csv(Path(out_dir) / "vcs_ablation.csv", ABLATION_FIELDS, rows)
    return rows


def oracle_transport_stats(
    task: tasks.ToyTask, sigma: float, *, n_draws: int = 10_000, seed: int = 0
) -> dict:
    """Transport lengths of the exact conditional velocities, both modes.

    For matched draws (same lines, offsets, and noise) the line-aligned
    velocity is the block-wise rejection of the point-target velocity, so its
    length can never exceed the point-target length; this measures the gap and
    its Monte Carlo standard error.
    """
    rng = np.random.default_rng(seed)
    batch = task.draw(rng, n_draws)
    x0 = rng.standard_normal((n_draws, task.dim))
    lp_end = flow.block_endpoints(
        batch.directions, batch.offsets, task.block_layout, PathParams("lp", sigma), x0
    )
    ot_end = flow.block_endpoints(
        batch.directions, batch.offsets, task.block_layout, PathParams("ot", sigma), x0
    )
    lp_lengths = np.linalg.norm(lp_end - x0, axis=1)
    ot_lengths = np.linalg.norm(ot_end - x0, axis=1)
    gap = ot_lengths - lp_lengths
    return {
        "lp_mean_length": float(lp_lengths.mean()),
        "ot_mean_length": float(ot_lengths.mean()),
        "gap_mean": float(gap.mean()),
        "gap_se": float(gap.std(ddof=1) / np.sqrt(n_draws)),
        "n_draws": n_draws,
    }


def oracle_field_metrics(
    task: tasks.ToyTask,
    sigma: float,
    *,
    mode: str = "lp",
    steps: int = 1,
    n_samples: int = 4096,
    seed: int = DEFAULT_EVAL_SEED,
) -> dict:
    """Metrics of the exact (non-learned) conditional field at a step budget.

    Each sample's velocity is its true conditional velocity, which is constant
    in time and state, so any Euler budget lands exactly on the drawn target
    endpoint; the residual distance to the line is purely the target width.
    """
    rng = np.random.default_rng(seed)
    batch = task.draw(rng, n_samples)
    x0 = rng.standard_normal((n_samples, task.dim))
    endpoints = flow.block_endpoints(
        batch.directions, batch.offsets, task.block_layout, PathParams(mode, sigma), x0
    )
    velocity = endpoints - x0

    result = sampler.euler_sample(
        lambda x, t: velocity, x0, sampler.SamplerConfig(steps=steps)
    )
    run = SamplerRun(
        endpoints=result.endpoint,
        trajectories=result.trajectory,
        task_batch=batch,
        x0=x0,
    )
    return evaluate_run(run, task)
