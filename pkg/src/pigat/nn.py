"""Dense numeric kernels with hand-written backward passes.

Everything runs in float64. Each forward that participates in training
returns a cache consumed by its matching backward; the test suite checks
every backward against the central finite-difference oracle implemented
at the bottom of this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError, UsageError

Array = np.ndarray


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> Array:
    """Sample a (out_dim, in_dim) matrix uniform in +-sqrt(6 / (in + out))."""
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def affine_forward(w: Array, x: Array, b: Array) -> Array:
    """Apply x -> w @ x + b along the last axis of x.

    x may carry leading batch axes; w is (out, in), b is (out,).
    """
    if w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"affine expects matrix and vector, got w {w.shape}, b {b.shape}")
    if x.shape[-1] != w.shape[1] or b.shape[0] != w.shape[0]:
        raise ShapeError(f"affine shapes do not chain: w {w.shape}, x {x.shape}, b {b.shape}")
    return x @ w.T + b


def leaky_relu(x: Array, slope: float = 0.01) -> Array:
    """Elementwise max(x, slope * x); slope must sit in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise DomainError(f"leaky-relu slope must be in (0, 1), got {slope}")
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_slope_at(x: Array, slope: float = 0.01) -> Array:
    # Negative pre-activations propagate the reduced slope.
    return np.where(x >= 0.0, 1.0, slope)


def softmax(z: Array) -> Array:
    """Shift-invariant softmax over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] == 0:
        raise DomainError("softmax over an empty vector is undefined")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def masked_softmax(z: Array, mask: Array) -> Array:
    """Softmax restricted to live positions; dead positions come out 0.

    A row with no live positions yields the all-zero row rather than an
    error, which is how cold-start neighbor windows are represented.
    """
    z = np.asarray(z, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if z.shape != mask.shape:
        raise ShapeError(f"logits {z.shape} and mask {mask.shape} must match")
    if z.shape[-1] == 0:
        raise DomainError("masked softmax over an empty vector is undefined")
    any_live = mask.any(axis=-1, keepdims=True)
    zmax = np.max(np.where(mask, z, -np.inf), axis=-1, keepdims=True)
    zmax = np.where(any_live, zmax, 0.0)
    e = np.where(mask, np.exp(np.where(mask, z - zmax, 0.0)), 0.0)
    total = e.sum(axis=-1, keepdims=True)
    return np.where(any_live, e / np.where(total == 0.0, 1.0, total), 0.0)


def masked_softmax_backward(weights: Array, d_weights: Array) -> Array:
    """Gradient of masked_softmax given its output and the upstream grad.

    Dead positions have weight 0 and therefore receive logit gradient 0.
    """
    inner = np.sum(weights * d_weights, axis=-1, keepdims=True)
    return weights * (d_weights - inner)


def sigmoid(x: Array | float) -> Array | float:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return float(out) if out.ndim == 0 else out


def dropout_mask(n: int, ratio: float, rng: np.random.Generator) -> Array:
    """Inverted-dropout scaling vector: kept units scale by 1/(1-ratio)."""
    if not 0.0 <= ratio < 1.0:
        raise DomainError(f"dropout ratio must be in [0, 1), got {ratio}")
    if ratio == 0.0:
        return np.ones(n)
    keep = rng.random(n) >= ratio
    return keep / (1.0 - ratio)


@dataclass
class FfnParams:
    """A stack of affine layers with leaky-relu between them.

    The final layer is linear; hidden layers apply leaky-relu with the
    given slope. weights[i] has shape (dims[i + 1], dims[i]).
    """

    weights: list[Array]
    biases: list[Array]
    slope: float = 0.01

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]


def ffn_init(rng: np.random.Generator, dims: list[int], slope: float = 0.01) -> FfnParams:
    """Build an FFN with the given layer widths, glorot weights, zero biases."""
    if len(dims) < 2:
        raise DomainError("an FFN needs at least an input and an output width")
    weights = [glorot_uniform(rng, dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return FfnParams(weights, biases, slope)


@dataclass
class FfnCache:
    inputs: list[Array]
    pre_acts: list[Array]


def ffn_forward(params: FfnParams, x: Array) -> tuple[Array, FfnCache]:
    """Run the FFN on (..., in_dim) input, returning output and cache."""
    inputs: list[Array] = []
    pre_acts: list[Array] = []
    h = np.asarray(x, dtype=np.float64)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        pre = affine_forward(w, h, b)
        pre_acts.append(pre)
        h = pre if i == last else leaky_relu(pre, params.slope)
    return h, FfnCache(inputs, pre_acts)


def ffn_backward(
    params: FfnParams, cache: FfnCache, d_out: Array
) -> tuple[Array, list[Array], list[Array]]:
    """Backprop through the FFN.

    Returns (d_input, d_weights, d_biases). Leading batch axes of d_out
    are flattened into the accumulation, matching ffn_forward.
    """
    n_layers = len(params.weights)
    if len(cache.inputs) != n_layers or len(cache.pre_acts) != n_layers:
        raise UsageError("forward cache does not match the FFN it came from")
    d_weights: list[Array] = [np.empty(0)] * n_layers
    d_biases: list[Array] = [np.empty(0)] * n_layers
    g = np.asarray(d_out, dtype=np.float64)
    for i in range(n_layers - 1, -1, -1):
        w, x_in, pre = params.weights[i], cache.inputs[i], cache.pre_acts[i]
        if g.shape != pre.shape:
            raise UsageError(
                f"stale cache: upstream grad {g.shape} does not match pre-activation {pre.shape}"
            )
        if i != n_layers - 1:
            g = g * leaky_relu_slope_at(pre, params.slope)
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x_in.reshape(-1, x_in.shape[-1])
        d_weights[i] = g2.T @ x2
        d_biases[i] = g2.sum(axis=0)
        g = g @ w
    return g, d_weights, d_biases


@dataclass
class AdamState:
    """Adam accumulators plus the schedule knobs the trainer mutates."""

    learning_rate: float
    l2: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, Array] | None = None
    v: dict[str, Array] | None = None

    def __post_init__(self) -> None:
        if self.m is None:
            self.m = {}
        if self.v is None:
            self.v = {}


def adam_step(state: AdamState, params: dict[str, Array], grads: dict[str, Array]) -> None:
    """One bias-corrected Adam update, in place, over named arrays.

    L2 enters as coupled weight decay: the effective gradient is
    grad + l2 * param. The step counter increments exactly once per call.
    """
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name}")
        if state.l2 != 0.0:
            g = g + state.l2 * p
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def finite_difference_gradient(f, x: Array, h: float = 1e-5) -> Array:
    """Central finite differences of a scalar function, coordinate by coordinate.

    This is the independent oracle the analytic backward passes are judged
    against. It is only meaningful in double precision; x is copied, never
    mutated.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    for i in range(x.size):
        flat[i] = fd_coordinate(f, x, i, h)
    return grad


def fd_coordinate(f, x: Array, i: int, h: float = 1e-5) -> float:
    """Central difference of f along a single flattened coordinate of x."""
    xp = x.copy()
    xm = x.copy()
    xp.ravel()[i] += h
    xm.ravel()[i] -= h
    return (f(xp) - f(xm)) / (2.0 * h)
