"""Dense layers with hand-written backward passes, Adam, and a gradient checker.

Layers follow a forward/backward pair convention: ``op(...)`` returns the
output and a cache, ``op_backward(dout, cache)`` returns the input gradient
and accumulates into any ``ParamTensor.grad`` it touches. Gradients always
accumulate (``+=``) so a tensor shared by several branches sums their
contributions; callers zero them through the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError, TrainingError


@dataclass(eq=False)
class ParamTensor:
    """A trainable array plus its gradient and Adam moment buffers."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    adam_m: np.ndarray = field(init=False)
    adam_v: np.ndarray = field(init=False)
    step_count: int = 0

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def copy(self) -> ParamTensor:
        p = ParamTensor(self.name, self.value.copy(), step_count=self.step_count)
        p.grad = self.grad.copy()
        p.adam_m = self.adam_m.copy()
        p.adam_v = self.adam_v.copy()
        return p


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows; handles +-inf exactly
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


# -- linear -------------------------------------------------------------------

def linear(X: np.ndarray, W: ParamTensor):
    if X.ndim != 2 or W.value.ndim != 2 or X.shape[1] != W.shape[0]:
        raise InputError(f"linear: cannot multiply {X.shape} by {W.shape}")
    return X @ W.value, (X, W)


def linear_backward(dout: np.ndarray, cache) -> np.ndarray:
    X, W = cache
    W.grad += X.T @ dout
    return dout @ W.value.T


# -- relu ---------------------------------------------------------------------

def relu(H: np.ndarray):
    gate = H > 0
    return np.where(gate, H, 0.0), gate


def relu_backward(dout: np.ndarray, gate: np.ndarray) -> np.ndarray:
    return np.where(gate, dout, 0.0)


# -- dropout ------------------------------------------------------------------

@dataclass
class DropoutPlan:
    """Inverted dropout: kept entries are scaled by 1 / (1 - rate) in training."""

    rate: float
    rng: np.random.Generator | None = None
    train_mode: bool = True

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.rate}")

    @property
    def active(self) -> bool:
        return self.train_mode and self.rate > 0.0


def dropout(H: np.ndarray, plan: DropoutPlan):
    if not plan.active:
        return H, None
    if plan.rng is None:
        raise ConfigError("training-mode dropout needs a random generator")
    scale = 1.0 / (1.0 - plan.rate)
    keep = plan.rng.random(H.shape) >= plan.rate
    mult = keep * scale
    return H * mult, mult


def dropout_backward(dout: np.ndarray, mult: np.ndarray | None) -> np.ndarray:
    return dout if mult is None else dout * mult


# -- scalar mix ---------------------------------------------------------------

def scalar_mix(H2: np.ndarray, Hx: np.ndarray, mix_logit: ParamTensor):
    """alpha * H2 + (1 - alpha) * Hx with alpha = sigmoid(mix_logit)."""
    if H2.shape != Hx.shape:
        raise InputError(f"scalar_mix: shapes {H2.shape} and {Hx.shape} differ")
    alpha = float(sigmoid(mix_logit.value))
    return alpha * H2 + (1.0 - alpha) * Hx, (H2, Hx, mix_logit, alpha)


def scalar_mix_backward(dout: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray]:
    H2, Hx, mix_logit, alpha = cache
    dalpha = float(np.sum(dout * (H2 - Hx)))
    mix_logit.grad += dalpha * alpha * (1.0 - alpha)
    return alpha * dout, (1.0 - alpha) * dout


# -- softmax cross-entropy ----------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels: np.ndarray, loss_nodes: Sequence[int] | np.ndarray,
                 reduction: str = "mean"):
    """Cross-entropy over ``loss_nodes``; returns (loss, B, dlogits).

    ``B`` is the softmax of every row, ``dlogits`` is zero outside the loss rows.
    """
    idx = np.asarray(loss_nodes, dtype=np.int64)
    if idx.size == 0:
        raise ConfigError("loss needs at least one node")
    if reduction not in ("mean", "sum"):
        raise ConfigError(f"reduction must be 'mean' or 'sum', got {reduction!r}")
    n, C = logits.shape
    if idx.min() < 0 or idx.max() >= n:
        raise InputError("loss node index out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logB = z - logsum
    B = np.exp(logB)
    y = np.asarray(labels, dtype=np.int64)[idx]
    loss = -float(np.sum(logB[idx, y]))
    dlogits = np.zeros_like(logits)
    dlogits[idx] = B[idx]
    dlogits[idx, y] -= 1.0
    if reduction == "mean":
        loss /= idx.size
        dlogits /= idx.size
    return loss, B, dlogits


# -- optimizer ----------------------------------------------------------------

def adam_step(params: Sequence[ParamTensor], lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One Adam update with L2 weight decay folded into the gradient; zeroes grads."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {p.name}")
    for p in params:
        g = p.grad + weight_decay * p.value if weight_decay else p.grad
        p.step_count += 1
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - beta1 ** p.step_count)
        v_hat = p.adam_v / (1.0 - beta2 ** p.step_count)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()


# -- gradient check -----------------------------------------------------------

def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float]
    worst: tuple[str, tuple[int, ...], float, float] | None = None
    # coordinates whose +-h stencil changed the activation pattern
    skipped_kinks: int = 0
    checked: int = 0

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def _split(out):
    if isinstance(out, tuple):
        return float(out[0]), np.asarray(out[1])
    return float(out), None


def finite_diff_check(loss_fn: Callable[[], object], params: Sequence[ParamTensor],
                      h: float = 1e-4, samples_per_tensor: int = 20,
                      rng: np.random.Generator | None = None) -> GradCheckResult:
    """Compare analytic gradients against central differences on sampled coordinates.

    ``loss_fn`` recomputes the loss from the current parameter values with
    dropout off. It may return ``(loss, pattern)`` where ``pattern`` is the
    boolean activation pattern of the network; a coordinate whose stencil
    changes the pattern straddles a ReLU kink, so it is skipped and another
    coordinate of the same tensor is drawn. Analytic gradients are read from
    ``p.grad`` as populated by the caller.
    """
    rng = rng or np.random.default_rng(0)
    _, base_pattern = _split(loss_fn())
    per_tensor: dict[str, float] = {}
    worst = None
    worst_err = -1.0
    skipped = checked = 0
    for p in params:
        flat = p.value.reshape(-1)
        analytic = p.grad.reshape(-1).copy()
        err_max = 0.0
        taken = 0
        for c in rng.permutation(flat.size):
            if taken == samples_per_tensor:
                break
            orig = flat[c]
            flat[c] = orig + h
            f_plus, pat_plus = _split(loss_fn())
            flat[c] = orig - h
            f_minus, pat_minus = _split(loss_fn())
            flat[c] = orig
            if base_pattern is not None and not (
                    np.array_equal(pat_plus, base_pattern) and np.array_equal(pat_minus, base_pattern)):
                skipped += 1
                continue
            taken += 1
            numeric = (f_plus - f_minus) / (2 * h)
            err = relative_error(analytic[c], numeric)
            err_max = max(err_max, err)
            if err > worst_err:
                worst_err = err
                worst = (p.name, tuple(int(i) for i in np.unravel_index(c, p.shape)),
                         float(analytic[c]), numeric)
        checked += taken
        per_tensor[p.name] = err_max
    return GradCheckResult(max(per_tensor.values(), default=0.0), per_tensor, worst, skipped, checked)
