"""Matrix-free geometry for line-valued targets.

Every target point comes with a line ``direction * n + offset`` of equally
valid variants.  The operators here, rank-1 projection, orthogonal shrinkage,
and the conditional paths and velocities built from them, all act through two
dot products per vector; the d x d projector is never materialized.  Direction
vectors may be unnormalized: each formula divides by ``a . a`` explicitly, so
rescaling a direction never changes a result.

All math is done in 64-bit floats.  Operations accept a single vector of
length d or any stack of vectors with d along the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_array, as_vector, check_last_axis

__all__ = [
    "DegenerateLineError",
    "VariantLine",
    "PathParams",
    "ConditionalDraw",
    "project",
    "reject",
    "scale_orthogonal",
    "target_mean",
    "sample_target",
    "path_point",
    "conditional_velocity",
    "conditional_draw",
    "ot_target_and_velocity",
    "distance_to_line",
    "nearest_variant",
]

MODES = ("lp", "ot")


class DegenerateLineError(ValueError):
    """An operation needed a line direction but the direction is zero."""


@dataclass(frozen=True)
class VariantLine:
    """A line ``direction * n + offset`` of equivalent target variants.

    A zero direction is allowed only as the explicit degenerate marker used by
    the point-target ("ot") mode; the geometry operations below reject it.
    """

    direction: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        direction = as_vector(self.direction, "direction")
        offset = as_vector(self.offset, "offset", length=direction.size)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "offset", offset)

    @property
    def dim(self) -> int:
        return self.direction.size

    @property
    def is_degenerate(self) -> bool:
        return not self.direction.any()


@dataclass(frozen=True)
class PathParams:
    """Conditional-path settings: which target geometry, and how wide.

    ``sigma`` is the shrink factor applied orthogonally to the line in "lp"
    mode, and the residual width of the isotropic point target in "ot" mode.
    The two roles coincide when the modes are compared under matched settings.
    """

    mode: str
    sigma: float = 1e-4

    def __post_init__(self):
        mode = str(self.mode).lower()
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        sigma = float(self.sigma)
        if mode == "lp" and not 0.0 < sigma <= 1.0:
            raise ValueError(f"lp mode needs sigma in (0, 1], got {sigma}")
        if mode == "ot" and sigma < 0.0:
            raise ValueError(f"ot mode needs sigma >= 0, got {sigma}")
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class ConditionalDraw:
    """One conditional draw: source point, target endpoint, and their velocity.

    The velocity of the straight path is time-invariant and equals
    ``x1_prime - x0`` exactly; when the line is non-degenerate it is orthogonal
    to the line direction.
    """

    x0: np.ndarray
    x1_prime: np.ndarray
    velocity: np.ndarray
    line: VariantLine

    def __post_init__(self):
        x0 = as_vector(self.x0, "x0", length=self.line.dim)
        x1 = as_vector(self.x1_prime, "x1_prime", length=self.line.dim)
        vel = as_vector(self.velocity, "velocity", length=self.line.dim)
        if not np.array_equal(vel, x1 - x0):
            raise ValueError("velocity must equal x1_prime - x0 exactly")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1_prime", x1)
        object.__setattr__(self, "velocity", vel)


def _direction(line: VariantLine) -> tuple[np.ndarray, float]:
    if line.is_degenerate:
        raise DegenerateLineError(
            "line direction is zero; use the point-target (ot) mode instead"
        )
    a = line.direction
    return a, float(a @ a)


def project(line: VariantLine, v) -> np.ndarray:
    """Component of ``v`` along the line direction.

    Computed as ``a * (a.v) / (a.a)``: two dot products and a scale, no
    matrix.  The result lies in the span of the direction.
    """
    a, aa = _direction(line)
    v = check_last_axis(as_float_array(v, "v"), line.dim, "v")
    coeff = v @ a / aa
    return np.multiply.outer(coeff, a)


def reject(line: VariantLine, v) -> np.ndarray:
    """Component of ``v`` orthogonal to the line direction: ``v - project(v)``."""
    v = check_last_axis(as_float_array(v, "v"), line.dim, "v")
    return v - project(line, v)


def scale_orthogonal(line: VariantLine, ortho_scale: float, v) -> np.ndarray:
    """Keep the line-parallel part of ``v``, scale the orthogonal part.

    ``ortho_scale`` must lie in (0, 1]; at 1 this is the identity.
    """
    ortho_scale = float(ortho_scale)
    if not 0.0 < ortho_scale <= 1.0:
        raise ValueError(f"ortho_scale must be in (0, 1], got {ortho_scale}")
    v = check_last_axis(as_float_array(v, "v"), line.dim, "v")
    return ortho_scale * v + (1.0 - ortho_scale) * project(line, v)


def target_mean(line: VariantLine) -> np.ndarray:
    """Mean of the line-aligned target distribution for a standard-normal source.

    Equals the rejection of the offset, i.e. the point of the line closest to
    the origin.
    """
    return reject(line, line.offset)


def sample_target(line: VariantLine, ortho_scale: float, x0) -> np.ndarray:
    """Map a source draw ``x0`` to its endpoint in the line-aligned target.

    For ``x0 ~ N(0, I)`` the endpoints are Gaussian with mean ``target_mean``,
    unit variance along the line, and standard deviation ``ortho_scale``
    orthogonal to it.
    """
    return target_mean(line) + scale_orthogonal(line, ortho_scale, x0)


def path_point(x0, x1_prime, t) -> np.ndarray:
    """Linear interpolation ``(1 - t) * x0 + t * x1_prime`` for t in [0, 1]."""
    x0 = as_float_array(x0, "x0")
    x1 = as_float_array(x1_prime, "x1_prime")
    if x0.shape != x1.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs x1_prime {x1.shape}")
    t = as_float_array(t, "t")
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")
    tt = t[..., np.newaxis] if t.ndim else t
    return (1.0 - tt) * x0 + tt * x1

def conditional_velocity(line: VariantLine, ortho_scale: float, x0) -> np.ndarray:
    """Velocity of the straight path from ``x0`` to its target endpoint.

    The path velocity is time-invariant, ``sample_target(...) - x0``, and is
    always orthogonal to the line direction (it also equals the rejection of
    ``offset - (1 - ortho_scale) * x0``).
    """
    x0 = check_last_axis(as_float_array(x0, "x0"), line.dim, "x0")
    return sample_target(line, ortho_scale, x0) - x0


def conditional_draw(line: VariantLine, ortho_scale: float, x0) -> ConditionalDraw:
    """Bundle ``x0`` with its endpoint and velocity as a ConditionalDraw."""
    x0 = as_vector(x0, "x0", length=line.dim)
    endpoint = sample_target(line, ortho_scale, x0)
    return ConditionalDraw(x0=x0, x1_prime=endpoint, velocity=endpoint - x0, line=line)


def ot_target_and_velocity(x1, sigma_min: float, x0) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint and velocity of the straight path to an isotropic point target.

    Returns ``(x1 + sigma_min * x0, x1 - (1 - sigma_min) * x0)``.  This is the
    degenerate-line special case of the machinery above: with a zero projector
    and the offset at ``x1``, the line-aligned formulas reduce to exactly these
    expressions with ``ortho_scale = sigma_min``.
    """
    x1 = as_float_array(x1, "x1")
    x0 = as_float_array(x0, "x0")
    if x1.shape != x0.shape:
        raise ValueError(f"shape mismatch: x1 {x1.shape} vs x0 {x0.shape}")
    endpoint = x1 + float(sigma_min) * x0
    return endpoint, endpoint - x0


def distance_to_line(line: VariantLine, x) -> np.ndarray | float:
    """Euclidean distance from ``x`` to the line (norm of the orthogonal residual)."""
    x = check_last_axis(as_float_array(x, "x"), line.dim, "x")
    residual = reject(line, x - line.offset)
    dist = np.linalg.norm(residual, axis=-1)
    return float(dist) if dist.ndim == 0 else dist


def nearest_variant(line: VariantLine, x) -> np.ndarray:
    """Closest point on the line to ``x``: offset plus the projected residual."""
    x = check_last_axis(as_float_array(x, "x"), line.dim, "x")
    return line.offset + project(line, x - line.offset)
