"""Dense numeric kernel: forward ops with hand-derived gradients, an Adam
optimizer, and a central-difference gradient checker.

Arrays are float64 and row-major; rows index samples unless noted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GUMBEL_EPS = 1e-12
TINY = 1e-300


def check_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array or raise ValueError."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def affine(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Row-convention affine map: out[i, j] = sum_k x[i, k] * weight[k, j] + bias[j]."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"affine: x has shape {x.shape}, weight has shape {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ValueError(f"affine: bias has shape {bias.shape}, expected ({weight.shape[1]},)")
    return x @ weight + bias


def affine_backward(x, weight, d_out):
    """Gradients of affine w.r.t. (x, weight, bias) given upstream d_out."""
    if d_out.shape != (x.shape[0], weight.shape[1]):
        raise ValueError(
            f"affine_backward: d_out has shape {d_out.shape}, "
            f"expected ({x.shape[0]}, {weight.shape[1]})"
        )
    return d_out @ weight.T, x.T @ d_out, d_out.sum(axis=0)


def tanh(x):
    return np.tanh(x)


def tanh_grad(out):
    """Derivative of tanh expressed through its output: 1 - tanh(x)^2."""
    return 1.0 - out * out


def logistic(x):
    """Numerically stable sigmoid."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x):
    """ln(1 + e^x), stable for large |x|; always strictly positive."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus_grad(x):
    """Derivative of softplus is the logistic function."""
    return logistic(x)


def activation(x, kind: str):
    if kind == "tanh":
        return tanh(x)
    if kind == "softplus":
        return softplus(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def sample_standard_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard Gumbel noise via inverse transform: -ln(-ln(u)), u ~ U(0,1).

    Uniform draws are clamped away from {0, 1} so the double log is finite.
    """
    u = rng.random(shape)
    u = np.clip(u, GUMBEL_EPS, 1.0 - GUMBEL_EPS)
    return -np.log(-np.log(u))


def tau_softmax(logits, tau: float) -> np.ndarray:
    """Temperature softmax over the last axis, computed with max-subtraction.

    As tau -> 0 the output approaches a one-hot argmax indicator; entries of
    -inf in `logits` receive exactly zero probability.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.asarray(logits, dtype=np.float64) / tau
    x = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


def tau_softmax_backward(probs, d_probs, tau: float) -> np.ndarray:
    """Gradient of tau_softmax w.r.t. its logits."""
    inner = (d_probs * probs).sum(axis=-1, keepdims=True)
    return probs * (d_probs - inner) / tau


def mse_loss(a, b) -> float:
    """Mean over rows of the squared Euclidean row distance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"mse_loss: shapes differ, {a.shape} vs {b.shape}")
    return float(((a - b) ** 2).sum() / a.shape[0])


def mse_grad(a, b) -> np.ndarray:
    """Gradient of mse_loss w.r.t. its first argument: 2(a - b) / rows."""
    if a.shape != b.shape:
        raise ValueError(f"mse_grad: shapes differ, {a.shape} vs {b.shape}")
    return 2.0 * (a - b) / a.shape[0]


@dataclass
class AdamState:
    """Per-parameter moment estimates for the adaptive-moment optimizer."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: np.ndarray | None = field(default=None, repr=False)
    second_moment: np.ndarray | None = field(default=None, repr=False)


def adam_update(param: np.ndarray, grad: np.ndarray, state: AdamState) -> None:
    """One bias-corrected adaptive-moment step, applied to `param` in place."""
    if param.shape != grad.shape:
        raise ValueError(f"adam_update: param shape {param.shape} vs grad shape {grad.shape}")
    if state.first_moment is None:
        state.first_moment = np.zeros_like(param)
        state.second_moment = np.zeros_like(param)
    elif state.first_moment.shape != param.shape:
        raise ValueError(
            f"adam_update: moment shape {state.first_moment.shape} vs param shape {param.shape}"
        )
    state.step_count += 1
    m, v = state.first_moment, state.second_moment
    m += (1.0 - state.beta1) * (grad - m)
    v += (1.0 - state.beta2) * (grad * grad - v)
    m_hat = m / (1.0 - state.beta1 ** state.step_count)
    v_hat = v / (1.0 - state.beta2 ** state.step_count)
    param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def grad_check(f, analytic_grad, point, h: float = 1e-5) -> float:
    """Max relative disagreement between `analytic_grad` and central differences of `f`.

    The error at each coordinate is |analytic - numeric| / max(1, |analytic|);
    the maximum over coordinates is returned. `f` must be finite near `point`.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    point = np.array(point, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ValueError(f"grad_check: grad shape {analytic.shape} vs point shape {point.shape}")
    flat = point.ravel()
    gflat = analytic.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(point))
        flat[i] = orig - h
        down = float(f(point))
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise ValueError(f"grad_check: non-finite objective near coordinate {i}")
        numeric = (up - down) / (2.0 * h)
        err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
        worst = max(worst, err)
    return worst


def pack_arrays(arrays) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Flatten a list of arrays into one vector, remembering shapes."""
    shapes = [a.shape for a in arrays]
    if not arrays:
        return np.zeros(0), shapes
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays]), shapes


def unpack_arrays(vec: np.ndarray, shapes) -> list[np.ndarray]:
    """Inverse of pack_arrays; returns views into `vec` where possible."""
    out = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        out.append(vec[offset : offset + size].reshape(shape))
        offset += size
    if offset != vec.size:
        raise ValueError(f"unpack_arrays: vector has {vec.size} entries, shapes need {offset}")
    return out


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out)); keeps tanh pre-activations small."""
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def layer_widths(d_in: int, d_out: int, n_layers: int, hidden: int | None = None) -> list[int]:
    """Per-layer output widths for an n-layer stack ending at width d_out.

    Two layers use the explicit hidden width; deeper stacks interpolate
    geometrically between d_in and d_out.
    """
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    if n_layers == 1:
        return [d_out]
    if n_layers == 2:
        return [int(hidden) if hidden else d_out, d_out]
    widths = []
    for k in range(1, n_layers):
        w = round(d_in ** (1.0 - k / n_layers) * d_out ** (k / n_layers))
        widths.append(max(1, int(w)))
    return widths + [d_out]
