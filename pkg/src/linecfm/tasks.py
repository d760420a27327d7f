"""Synthetic tasks with known equivalence lines, for training and evaluation.

A task draws batches of (line, representative, condition) triples.  The
representative is the concrete point a dataset would have recorded: an
arbitrary spot along its equivalence line, offset from the line's canonical
anchor by a nuisance the condition does not reveal (a recording's gain or
alignment is arbitrary).  Point-target ("ot") training chases that
representative; line-target ("lp") training sees the same line regardless of
where the representative sits.

Lines are stored flat: ``directions`` and ``offsets`` are (n, d) with each
feature block's line written into its own column slice, so a task with
several independent blocks (e.g. log-magnitude and phase) is still two plain
arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import spectral
from .validation import as_float_array

__all__ = [
    "TaskBatch",
    "ToyTask",
    "task_2d_line",
    "task_spectrogram_patch",
    "get_task",
    "TASK_NAMES",
    "batch_project_residual",
    "batch_distance_to_lines",
    "batch_nearest_variant",
]


@dataclass
class TaskBatch:
    """One drawn batch: per-sample line directions, representatives, conditions.

    ``offsets`` holds the representative points; each line passes through its
    representative, so the pair (direction, offset) is the sample's line and
    the offset doubles as the point target of the "ot" mode.
    """

    directions: np.ndarray
    offsets: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        if self.directions.shape != self.offsets.shape:
            raise ValueError("directions and offsets must have matching shapes")
        if self.cond.shape[0] != self.directions.shape[0]:
            raise ValueError("cond batch size must match directions")

    @property
    def size(self) -> int:
        return self.directions.shape[0]


@dataclass
class ToyTask:
    """A named target generator over lines in ``dim`` dimensions."""

    name: str
    dim: int
    cond_dim: int
    block_layout: list[tuple[int, int]]
    draw: Callable[[np.random.Generator, int], TaskBatch]
    default_sigma: float = 0.05

    def __post_init__(self):
        stops = 0
        for start, stop in self.block_layout:
            if start != stops:
                raise ValueError(f"block layout must partition 0..{self.dim} in order")
            stops = stop
        if stops != self.dim:
            raise ValueError(f"block layout covers 0..{stops}, expected 0..{self.dim}")


def task_2d_line(variant_spread: float = 1.0, direction_seed: int = 0) -> ToyTask:
    """Planar task: random lines with a shared direction, anchors in the condition.

    The invariance direction is a global property of the task, as it is for
    the speech lines: one unit vector at angle phi ~ U[0, pi), drawn once from
    ``direction_seed``.  Each sample's line runs through a fresh anchor
    b ~ 2 * N(0, I), and the condition (phi, b) determines the line.  The
    recorded representative sits ``variant_spread * N(0, 1)`` along the line
    away from b: an equally valid variant the condition does not reveal.
    """
    phi = float(np.random.default_rng(direction_seed).uniform(0.0, np.pi))
    direction = np.array([np.cos(phi), np.sin(phi)])

    def draw(rng: np.random.Generator, n: int) -> TaskBatch:
        directions = np.tile(direction, (n, 1))
        anchors = 2.0 * rng.standard_normal((n, 2))
        along = variant_spread * rng.standard_normal(n)
        offsets = anchors + along[:, np.newaxis] * directions
        cond = np.column_stack([np.full(n, phi), anchors])
        return TaskBatch(directions=directions, offsets=offsets, cond=cond)

    return ToyTask(
        name="2d",
        dim=2,
        cond_dim=3,
        block_layout=[(0, 2)],
        draw=draw,
        default_sigma=1e-4,
    )


def task_spectrogram_patch(
    n_fft: int = 16,
    hop: int = 4,
    frames: int = 4,
    noise: float = 0.02,
    gain_spread: float = 0.4,
    shift_spread: float = 1.0,
) -> ToyTask:
    """Tiny spectrogram patches of synthetic tones, one line per block.

    The state is the flattened patch, log-magnitude block then phase block
    (``d = 2 * frames * bins``).  The magnitude block carries the all-ones
    scaling line, the phase block the negated-ramp shifting line, and the
    condition is the clean patch.  The recorded representative is the clean
    patch moved along both lines: a random log-gain (``gain_spread``) and a
    random fractional-sample alignment (``shift_spread``), neither visible in
    the condition.
    """
    config = spectral.StftConfig(n_fft=n_fft, hop=hop, window="hann", center=False)
    n_samples = n_fft + (frames - 1) * hop
    bins = config.bins
    block = frames * bins
    ramp_tiled = np.tile(spectral.phase_ramp(n_fft), frames)
    times = np.arange(n_samples, dtype=np.float64)

    def draw(rng: np.random.Generator, n: int) -> TaskBatch:
        directions = np.empty((n, 2 * block))
        offsets = np.empty((n, 2 * block))
        directions[:, :block] = 1.0
        directions[:, block:] = -ramp_tiled
        freq = rng.uniform(0.5, n_fft / 2 - 0.5, size=n)
        amp = rng.uniform(0.3, 1.0, size=n)
        start_phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
        clean = np.empty((n, 2 * block))
        for i in range(n):
            tone = amp[i] * np.sin(2.0 * np.pi * freq[i] * times / n_fft + start_phase[i])
            tone = tone + noise * rng.standard_normal(n_samples)
            spec = spectral.stft(tone, config)
            clean[i, :block] = spec.log_mag.ravel()
            clean[i, block:] = spec.phase.ravel()
        log_gain = gain_spread * rng.standard_normal(n)
        align = shift_spread * rng.standard_normal(n)
        offsets[:, :block] = clean[:, :block] + log_gain[:, np.newaxis]
        offsets[:, block:] = clean[:, block:] - align[:, np.newaxis] * ramp_tiled
        return TaskBatch(directions=directions, offsets=offsets, cond=clean)

    return ToyTask(
        name="spec",
        dim=2 * block,
        cond_dim=2 * block,
        block_layout=[(0, block), (block, 2 * block)],
        draw=draw,
        default_sigma=1e-4,
    )


TASK_NAMES = ("2d", "spec")


def get_task(name: str) -> ToyTask:
    """Look a task up by its CLI name."""
    if name == "2d":
        return task_2d_line()
    if name == "spec":
        return task_spectrogram_patch()
    raise ValueError(f"unknown task {name!r}; expected one of {TASK_NAMES}")


def batch_project_residual(
    x: np.ndarray, batch: TaskBatch, layout: list[tuple[int, int]]
) -> np.ndarray:
    """Orthogonal residual of ``x`` relative to each sample's lines, block-wise."""
    x = as_float_array(x, "x")
    residual = np.empty_like(x)
    for start, stop in layout:
        a = batch.directions[:, start:stop]
        r = x[:, start:stop] - batch.offsets[:, start:stop]
        coeff = np.sum(a * r, axis=1) / np.sum(a * a, axis=1)
        residual[:, start:stop] = r - coeff[:, np.newaxis] * a
    return residual


def batch_distance_to_lines(
    x: np.ndarray, batch: TaskBatch, layout: list[tuple[int, int]]
) -> np.ndarray:
    """Per-sample distance to the drawn equivalence lines (all blocks jointly)."""
    return np.linalg.norm(batch_project_residual(x, batch, layout), axis=1)


def batch_nearest_variant(
    x: np.ndarray, batch: TaskBatch, layout: list[tuple[int, int]]
) -> np.ndarray:
    """Per-sample closest point on the drawn lines."""
    return x - batch_project_residual(x, batch, layout)
