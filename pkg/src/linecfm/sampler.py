"""First-order Euler integration of a velocity field, with vector calibration.

The learned velocity should be orthogonal to the target line; prediction
error leaks a parallel component.  Calibration removes that component and
rescales the remainder back to the original magnitude.  When the rejection is
numerically negligible (below ``epsilon`` times the vector norm) the vector
passes through unchanged and the step is flagged, rather than emitting zero.

Calibration is positively homogeneous, so applying it to the raw model output
or to the Euler increment is equivalent; it is applied to the raw output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import net
from .geometry import VariantLine
from .report import write_rows_csv
from .validation import as_float_array

__all__ = [
    "SamplerConfig",
    "SampleResult",
    "SamplerDivergedError",
    "vcs_calibrate",
    "calibrate_rows",
    "calibrate_blocks",
    "euler_sample",
    "trajectory_to_csv",
]

DEFAULT_VCS_EPSILON = 1e-6


class SamplerDivergedError(RuntimeError):
    """The integration state went non-finite; carries the step index."""


@dataclass
class SamplerConfig:
    """Euler step count plus optional per-block calibration lines.

    ``lines`` holds one VariantLine per block of ``block_layout`` (``None``
    entries pass through uncalibrated); with no layout a single line covers
    the whole vector.
    """

    steps: int = 6
    vcs_enabled: bool = False
    vcs_epsilon: float = DEFAULT_VCS_EPSILON
    lines: list[VariantLine | None] | None = None
    block_layout: list[tuple[int, int]] | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.vcs_epsilon <= 0:
            raise ValueError("vcs_epsilon must be positive")
        if self.vcs_enabled:
            if not self.lines:
                raise ValueError("calibration is enabled but no lines were given")
            for line in self.lines:
                if line is not None and line.is_degenerate:
                    raise ValueError("calibration lines must have nonzero directions")
            if self.block_layout is not None and len(self.block_layout) != len(self.lines):
                raise ValueError("need exactly one line (or None) per block")


def _calibrate_core(v: np.ndarray, directions: np.ndarray, epsilon: float):
    a = np.broadcast_to(directions, v.shape)
    coeff = np.sum(a * v, axis=-1) / np.sum(a * a, axis=-1)
    rejection = v - coeff[..., np.newaxis] * a
    v_norm = np.linalg.norm(v, axis=-1)
    r_norm = np.linalg.norm(rejection, axis=-1)
    degenerate = (r_norm < epsilon * v_norm) | (v_norm == 0.0)
    scale = np.where(degenerate, 1.0, v_norm / np.where(r_norm == 0.0, 1.0, r_norm))
    calibrated = np.where(
        degenerate[..., np.newaxis], v, rejection * scale[..., np.newaxis]
    )
    return calibrated, degenerate


def calibrate_rows(v, directions, epsilon: float = DEFAULT_VCS_EPSILON) -> np.ndarray:
    """Calibrate vectors against per-row directions (vectorized core).

    ``v`` is (..., d) and ``directions`` broadcasts against it.  Each row's
    component along its direction is removed and the rejection is rescaled to
    the row's original norm; rows whose rejection norm falls below
    ``epsilon * |v|`` (including zero rows) are returned unchanged.
    """
    v = as_float_array(v, "v")
    directions = as_float_array(directions, "directions")
    calibrated, _ = _calibrate_core(v, directions, epsilon)
    return calibrated


def vcs_calibrate(v, line: VariantLine, epsilon: float = DEFAULT_VCS_EPSILON) -> np.ndarray:
    """Remove the line-parallel component of ``v``, preserving its magnitude.

    Accepts a single vector or a stack of vectors.  The result is orthogonal
    to the line direction with the same 2-norm as the input; near-parallel
    vectors trip the degenerate guard and pass through unchanged.
    """
    if line.is_degenerate:
        raise ValueError("calibration needs a line with a nonzero direction")
    v = as_float_array(v, "v")
    if v.shape[-1] != line.dim:
        raise ValueError(f"v must have width {line.dim}, got shape {v.shape}")
    calibrated, _ = _calibrate_core(v, line.direction, epsilon)
    return calibrated


def calibrate_blocks(
    v,
    lines: Sequence[VariantLine | None],
    block_layout: Sequence[tuple[int, int]],
    epsilon: float = DEFAULT_VCS_EPSILON,
) -> np.ndarray:
    """Apply :func:`vcs_calibrate` independently per feature block.

    Blocks paired with ``None`` pass through untouched.  The layout must
    partition the last axis of ``v``.
    """
    calibrated, _ = _calibrate_blocks(v, lines, block_layout, epsilon)
    return calibrated


def _calibrate_blocks(v, lines, block_layout, epsilon):
    v = np.array(as_float_array(v, "v"), copy=True)
    if len(lines) != len(block_layout):
        raise ValueError("need exactly one line (or None) per block")
    any_degenerate = False
    covered = 0
    for (start, stop), line in zip(block_layout, lines):
        if start != covered:
            raise ValueError("block layout must partition the vector in order")
        covered = stop
        if line is None:
            continue
        if line.is_degenerate:
            raise ValueError("calibration lines must have nonzero directions")
        if stop - start != line.dim:
            raise ValueError(
                f"block {start}:{stop} has width {stop - start} but line has dim {line.dim}"
            )
        block, degenerate = _calibrate_core(v[..., start:stop], line.direction, epsilon)
        v[..., start:stop] = block
        any_degenerate = any_degenerate or bool(np.any(degenerate))
    if covered != v.shape[-1]:
        raise ValueError(f"block layout covers 0..{covered}, vector has width {v.shape[-1]}")
    return v, any_degenerate


@dataclass
class SampleResult:
    """Endpoint, full trajectory (initial state included), and guard events."""

    endpoint: np.ndarray
    trajectory: np.ndarray
    degenerate_steps: list[int] = field(default_factory=list)


def euler_sample(
    model: net.VectorFieldModel | Callable[[np.ndarray, float], np.ndarray],
    x0,
    cfg: SamplerConfig,
    cond=None,
) -> SampleResult:
    """Integrate ``x' = v(x, t)`` from t=0 to 1 on the left-endpoint Euler grid.

    ``model`` is either a VectorFieldModel or any callable ``(x, t) -> v``
    (oracle fields close over their own conditioning).  ``x0`` may be a single
    vector or an (n, d) batch; the trajectory stacks all steps+1 states along
    its first axis.
    """
    is_model = isinstance(model, net.VectorFieldModel)
    x = np.array(as_float_array(x0, "x0"), copy=True)
    dt = 1.0 / cfg.steps
    trajectory = [x.copy()]
    degenerate_steps: list[int] = []
    for k in range(cfg.steps):
        t = k / cfg.steps
        v = net.forward(model, x, t, cond) if is_model else model(x, t)
        v = as_float_array(v, "field output")
        if v.shape != x.shape:
            raise ValueError(f"field returned shape {v.shape}, expected {x.shape}")
        if cfg.vcs_enabled:
            layout = cfg.block_layout or [(0, x.shape[-1])]
            v, guard_fired = _calibrate_blocks(v, cfg.lines, layout, cfg.vcs_epsilon)
            if guard_fired:
                degenerate_steps.append(k)
        x = x + dt * v
        if not np.all(np.isfinite(x)):
            raise SamplerDivergedError(f"non-finite state after step {k}")
        trajectory.append(x.copy())
    return SampleResult(
        endpoint=x, trajectory=np.stack(trajectory), degenerate_steps=degenerate_steps
    )


def trajectory_to_csv(trajectory: np.ndarray, path) -> Path:
    """Serialize trajectories as ``sample,step,x0..x{d-1}`` rows.

    Accepts a (steps+1, d) single trajectory or a (steps+1, n, d) batch.
    """
    trajectory = as_float_array(trajectory, "trajectory")
    if trajectory.ndim == 2:
        trajectory = trajectory[:, np.newaxis, :]
    if trajectory.ndim != 3:
        raise ValueError(f"trajectory must be 2-D or 3-D, got shape {trajectory.shape}")
    n_steps, n_samples, dim = trajectory.shape
    names = ["sample", "step"] + [f"x{i}" for i in range(dim)]
    rows = []
    for s in range(n_samples):
        for k in range(n_steps):
            row = {"sample": s, "step": k}
            row.update({f"x{i}": float(trajectory[k, s, i]) for i in range(dim)})
            rows.append(row)
    return write_rows_csv(path, names, rows)
