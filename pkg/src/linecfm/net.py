"""A small feed-forward vector-field network with hand-written gradients.

The model maps ``(x_t, t, cond)`` to a velocity prediction of the same width
as ``x_t``.  Time enters through a sinusoidal embedding concatenated to the
input.  Hidden layers use tanh, the output layer is linear, and reverse-mode
gradients are computed analytically; no ML framework is involved.  Weight
matrices are stored ``(fan_in, fan_out)`` so a batch forward is plain
``x @ W + b``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import as_float_array, check_finite

__all__ = [
    "VectorFieldModel",
    "GradientSet",
    "AdamState",
    "init_model",
    "embed_time",
    "forward",
    "backward",
    "adam_step",
    "sgd_step",
    "save_checkpoint",
    "load_checkpoint",
]

# activation -> (function, derivative expressed in terms of the OUTPUT value)
_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    # identity is a test hook: it makes multi-layer models exactly linear
    "identity": (lambda z: z, lambda a: np.ones_like(a)),
}

CHECKPOINT_MAGIC = b"VFIELD01"
_ACTIVATION_CODES = {"tanh": 0, "identity": 1}
_ACTIVATION_NAMES = {code: name for name, code in _ACTIVATION_CODES.items()}


@dataclass
class VectorFieldModel:
    """Layer sizes plus one weight matrix and bias vector per layer."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    time_embedding_width: int = 8
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer size")
        if any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError("one weight matrix and bias vector required per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            fan_in, fan_out = self.layer_sizes[i], self.layer_sizes[i + 1]
            if w.shape != (fan_in, fan_out):
                raise ValueError(f"layer {i} weights must be {(fan_in, fan_out)}, got {w.shape}")
            if b.shape != (fan_out,):
                raise ValueError(f"layer {i} bias must be ({fan_out},), got {b.shape}")
            check_finite(w, f"layer {i} weights")
            check_finite(b, f"layer {i} bias")

    @property
    def input_width(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_width(self) -> int:
        return self.layer_sizes[-1]

    @property
    def cond_width(self) -> int:
        """Width of the conditioning block implied by the layer sizes."""
        return self.input_width - self.output_width - self.time_embedding_width

    def copy(self) -> "VectorFieldModel":
        return VectorFieldModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            time_embedding_width=self.time_embedding_width,
            activation=self.activation,
        )


@dataclass
class GradientSet:
    """Gradients with the same shapes as the model parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: VectorFieldModel) -> "GradientSet":
        return cls(
            weights=[np.zeros_like(w) for w in model.weights],
            biases=[np.zeros_like(b) for b in model.biases],
        )


def init_model(
    flow_dim: int,
    cond_dim: int = 0,
    hidden: tuple[int, ...] = (64, 64),
    time_embedding_width: int = 8,
    rng=None,
    activation: str = "tanh",
) -> VectorFieldModel:
    """Build a model with uniform Glorot initialization, seeded by ``rng``."""
    _check_embedding_width(time_embedding_width)
    rng = np.random.default_rng(rng)
    sizes = [flow_dim + time_embedding_width + cond_dim, *hidden, flow_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return VectorFieldModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        time_embedding_width=time_embedding_width,
        activation=activation,
    )


def _check_embedding_width(width: int) -> None:
    if width == 1:
        return
    if width < 2 or width % 2 != 0:
        raise ValueError(f"time embedding width must be 1 or an even number >= 2, got {width}")


def embed_time(t, width: int) -> np.ndarray:
    """Sinusoidal features ``[sin(2 pi k t)..., cos(2 pi k t)...]`` for k = 1..width/2.

    ``width == 1`` returns the raw ``[t]``.  Accepts a scalar or a batch of
    times; the feature axis is appended last.
    """
    _check_embedding_width(width)
    t = as_float_array(t, "t")
    if width == 1:
        return t[..., np.newaxis]
    k = np.arange(1, width // 2 + 1, dtype=np.float64)
    angles = 2.0 * np.pi * np.multiply.outer(t, k)
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def _assemble_input(model: VectorFieldModel, x_t, t, cond) -> tuple[np.ndarray, bool]:
    x = as_float_array(x_t, "x_t")
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != model.output_width:
        raise ValueError(
            f"x_t must have width {model.output_width}, got shape {np.shape(x_t)}"
        )
    n = x2.shape[0]
    temb = embed_time(t, model.time_embedding_width)
    if temb.ndim == 1:
        temb = np.broadcast_to(temb, (n, temb.size))
    elif temb.shape[0] != n:
        raise ValueError(f"t has batch {temb.shape[0]} but x_t has batch {n}")
    parts = [x2, temb]
    expected_cond = model.cond_width
    if expected_cond > 0:
        if cond is None:
            raise ValueError(f"model expects a condition of width {expected_cond}")
        c = np.atleast_2d(as_float_array(cond, "cond"))
        if c.shape[1] != expected_cond:
            raise ValueError(f"cond must have width {expected_cond}, got {c.shape[1]}")
        if c.shape[0] == 1 and n > 1:
            c = np.broadcast_to(c, (n, expected_cond))
        elif c.shape[0] != n:
            raise ValueError(f"cond has batch {c.shape[0]} but x_t has batch {n}")
        parts.append(c)
    elif cond is not None and np.size(cond) > 0:
        raise ValueError("model was built without a conditioning block")
    return np.concatenate(parts, axis=1), single


def _forward_cached(model: VectorFieldModel, inp: np.ndarray):
    act, _ = _ACTIVATIONS[model.activation]
    activations = [inp]
    h = inp
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = act(h)
            activations.append(h)
    return h, activations


def forward(model: VectorFieldModel, x_t, t, cond=None) -> np.ndarray:
    """Evaluate the velocity prediction for one input or a batch."""
    inp, single = _assemble_input(model, x_t, t, cond)
    out, _ = _forward_cached(model, inp)
    return out[0] if single else out


def backward(model: VectorFieldModel, x_t, t, cond, loss_grad) -> GradientSet:
    """Gradients of a scalar loss w.r.t. every parameter.

    ``loss_grad`` is the loss gradient at the model output, either a single
    vector or a batch matching ``x_t``.  Batch contributions are summed.
    """
    inp, _ = _assemble_input(model, x_t, t, cond)
    _, deriv = _ACTIVATIONS[model.activation]
    _, activations = _forward_cached(model, inp)
    g = np.atleast_2d(as_float_array(loss_grad, "loss_grad"))
    if g.shape != (inp.shape[0], model.output_width):
        raise ValueError(
            f"loss_grad must have shape {(inp.shape[0], model.output_width)}, got {g.shape}"
        )
    n_layers = len(model.weights)
    grad_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = g
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * deriv(activations[i])
    return GradientSet(weights=grad_w, biases=grad_b)


@dataclass
class AdamState:
    """First and second moment accumulators for adam_step."""

    m: GradientSet
    v: GradientSet

    @classmethod
    def for_model(cls, model: VectorFieldModel) -> "AdamState":
        return cls(m=GradientSet.zeros_like(model), v=GradientSet.zeros_like(model))


def _check_grads_finite(grads: GradientSet) -> None:
    for g in (*grads.weights, *grads.biases):
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; aborting the update")


def adam_step(
    model: VectorFieldModel,
    grads: GradientSet,
    state: AdamState,
    step_index: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.99,
    eps: float = 1e-8,
) -> VectorFieldModel:
    """Bias-corrected adaptive update, applied in place.  ``step_index`` starts at 1."""
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    _check_grads_finite(grads)
    corr1 = 1.0 - beta1**step_index
    corr2 = 1.0 - beta2**step_index
    params = (*zip(model.weights, grads.weights, state.m.weights, state.v.weights),
              *zip(model.biases, grads.biases, state.m.biases, state.v.biases))
    for p, g, m, v in params:
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return model


def sgd_step(model: VectorFieldModel, grads: GradientSet, lr: float) -> VectorFieldModel:
    """Plain momentum-free gradient descent, applied in place."""
    _check_grads_finite(grads)
    for p, g in (*zip(model.weights, grads.weights), *zip(model.biases, grads.biases)):
        p -= lr * g
    return model


def save_checkpoint(model: VectorFieldModel, path) -> None:
    """Write the model in the versioned binary checkpoint format.

    Layout (little-endian): 8-byte magic ``VFIELD01``; uint32 activation code
    (0 tanh, 1 identity); uint32 time embedding width; uint32 layer-size count
    followed by the sizes; then per layer the ``(fan_in, fan_out)`` weight
    matrix row-major as float64 followed by the bias vector.
    """
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<III", _ACTIVATION_CODES[model.activation],
                             model.time_embedding_width, len(model.layer_sizes)))
        fh.write(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> VectorFieldModel:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a model checkpoint (bad magic {raw[:8]!r})")
    act_code, temb_width, n_sizes = struct.unpack_from("<III", raw, 8)
    if act_code not in _ACTIVATION_NAMES:
        raise ValueError(f"unknown activation code {act_code}")
    offset = 8 + 12
    sizes = list(struct.unpack_from(f"<{n_sizes}I", raw, offset))
    offset += 4 * n_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        n = fan_in * fan_out
        w = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(fan_in, fan_out)
        offset += 8 * n
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(raw):
        raise ValueError(f"checkpoint has {len(raw) - offset} trailing bytes")
    return VectorFieldModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        time_embedding_width=temb_width,
        activation=_ACTIVATION_NAMES[act_code],
    )
