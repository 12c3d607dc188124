"""Two-channel masked GCN, its ablations, and plain GCN / MLP references.

Each node belongs to exactly one channel (low or high confusion). A channel
runs a two-layer GCN over a masked copy of the normalized adjacency: layer 1
only writes rows of its own nodes (target masking), layer 2 additionally
only reads from its own nodes (source masking). The deep output is blended
with a shared linear map of the raw features through a per-channel learned
scalar, row-masked to the channel, summed, and read out by a shared matrix.

Variants:

``full``
    as above.
``no_separation``
    one channel over the whole graph: a learned blend of GCN output and raw
    features.
``no_message_separation``
    per-channel layer 1, but layer 2 reads the pooled hidden state of both
    channels through the target-masked adjacency.
``nh_separation``
    same computation as ``full``; the trainer derives masks from homophily.

Concurrency: the two channels only share read-only inputs. The only
cross-channel writes are the Wx / Wo gradient accumulations, which always
happen in the fixed order low, then high.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    DropoutPlan,
    ParamTensor,
    dropout,
    dropout_backward,
    glorot,
    linear,
    linear_backward,
    relu,
    relu_backward,
    scalar_mix,
    scalar_mix_backward,
    softmax,
    softmax_xent,
)
from .errors import ConfigError, InputError, InternalError
from .graph import CsrMatrix, apply_mask, check_partition, spmm

VARIANTS = ("full", "no_separation", "no_message_separation", "nh_separation")
CHANNELS = ("low", "high")


@dataclass
class ChannelParams:
    W1: ParamTensor
    W2: ParamTensor
    mix_logit: ParamTensor
    dropout_rate: float = 0.0

    def parameters(self) -> list[ParamTensor]:
        return [self.W1, self.W2, self.mix_logit]


@dataclass
class ModelParams:
    channel_low: ChannelParams
    channel_high: ChannelParams
    Wx: ParamTensor
    Wo: ParamTensor
    variant: str = "full"
    dropout_raw: float = 0.0
    # False restores the unmasked blend, where Hx reaches every node from both channels
    mask_output: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def dims(self) -> tuple[int, int, int]:
        f, hidden = self.Wx.shape
        return f, hidden, self.Wo.shape[1]

    def channel(self, s: str) -> ChannelParams:
        return self.channel_low if s == "low" else self.channel_high

    def parameters(self) -> list[ParamTensor]:
        """Trainable tensors for this variant, in a fixed order."""
        if self.variant == "no_separation":
            chans = self.channel_low.parameters()
        else:
            chans = self.channel_low.parameters() + self.channel_high.parameters()
        return chans + [self.Wx, self.Wo]

    def state(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.all_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for p in self.all_parameters():
            p.value[...] = state[p.name]

    def all_parameters(self) -> list[ParamTensor]:
        return self.channel_low.parameters() + self.channel_high.parameters() + [self.Wx, self.Wo]

    def zero_grad(self) -> None:
        for p in self.all_parameters():
            p.zero_grad()


def init_params(f: int, hidden: int, C: int, rng: np.random.Generator, variant: str = "full",
                dropout_low: float = 0.0, dropout_high: float = 0.0,
                dropout_raw: float = 0.0, mask_output: bool = True) -> ModelParams:
    """Glorot-uniform weights drawn in a fixed order; mixing logits start at 0."""

    def channel(s: str, rate: float) -> ChannelParams:
        return ChannelParams(
            ParamTensor(f"{s}.W1", glorot(rng, f, hidden)),
            ParamTensor(f"{s}.W2", glorot(rng, hidden, hidden)),
            ParamTensor(f"{s}.mix_logit", np.array(0.0)),
            rate,
        )

    low = channel("low", dropout_low)
    high = channel("high", dropout_high)
    Wx = ParamTensor("Wx", glorot(rng, f, hidden))
    Wo = ParamTensor("Wo", glorot(rng, hidden, C))
    return ModelParams(low, high, Wx, Wo, variant, dropout_raw, mask_output)


@dataclass(eq=False)
class PropagationSet:
    """Masked copies of the normalized adjacency for one mask assignment.

    ``P1[s]`` is target-masked, ``P2[s]`` is target- and source-masked.
    Transposes are kept for the backward pass.
    """

    S: CsrMatrix
    mask_low: np.ndarray
    mask_high: np.ndarray
    P1: dict[str, CsrMatrix]
    P2: dict[str, CsrMatrix]
    P1_T: dict[str, CsrMatrix] = field(default_factory=dict)
    P2_T: dict[str, CsrMatrix] = field(default_factory=dict)
    S_T: CsrMatrix | None = None
    version: int = 0

    def mask(self, s: str) -> np.ndarray:
        return self.mask_low if s == "low" else self.mask_high


def build_propagation(S: CsrMatrix, masks: tuple[np.ndarray, np.ndarray],
                      version: int = 0) -> PropagationSet:
    low, high = (np.asarray(m, dtype=bool) for m in masks)
    if low.shape != (S.n_rows,) or not check_partition(low, high):
        raise InternalError("channel masks must partition the node set")
    P1, P2 = {}, {}
    for s, m in (("low", low), ("high", high)):
        P1[s] = apply_mask(S, m, "rows")
        P2[s] = apply_mask(P1[s], m, "cols")
    return PropagationSet(
        S, low, high, P1, P2,
        P1_T={s: P1[s].transpose() for s in CHANNELS},
        P2_T={s: P2[s].transpose() for s in CHANNELS},
        S_T=S.transpose(),
        version=version,
    )


def _row_mask(H: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return H * mask[:, None]


@dataclass
class ForwardCache:
    """Intermediate values kept for backward and for invariant checks."""

    B: np.ndarray
    logits: np.ndarray
    H1: dict[str, np.ndarray] = field(default_factory=dict)
    H2: dict[str, np.ndarray] = field(default_factory=dict)
    Hx: np.ndarray | None = None
    steps: dict = field(default_factory=dict)


def _plans(params: ModelParams, train_mode: bool, rng) -> dict[str, DropoutPlan]:
    return {
        "low": DropoutPlan(params.channel_low.dropout_rate, rng, train_mode),
        "high": DropoutPlan(params.channel_high.dropout_rate, rng, train_mode),
        "raw": DropoutPlan(params.dropout_raw, rng, train_mode),
    }


def _propagate_layer(P: CsrMatrix, H: np.ndarray, W: ParamTensor, plan: DropoutPlan):
    Hd, dmask = dropout(H, plan)
    HW, lin = linear(Hd, W)
    Z = spmm(P, HW)
    out, gate = relu(Z)
    return out, (dmask, lin, gate)


def _propagate_layer_backward(dout: np.ndarray, P_T: CsrMatrix, cache) -> np.ndarray:
    dmask, lin, gate = cache
    dZ = relu_backward(dout, gate)
    dHW = spmm(P_T, dZ)
    dHd = linear_backward(dHW, lin)
    return dropout_backward(dHd, dmask)


def forward(params: ModelParams, prop: PropagationSet, X: np.ndarray, train_mode: bool = False,
            rng: np.random.Generator | None = None, mask_version: int | None = None) -> ForwardCache:
    """Soft assignments B (n x C) and the cache needed by ``backward``.

    ``rng`` drives dropout; draws happen in a fixed order (layer 1 of both
    channels, layer 2 of both channels, raw branch) so a seeded generator
    reproduces the pass exactly.
    """
    if mask_version is not None and mask_version != prop.version:
        raise InternalError(f"propagation set built for mask version {prop.version}, "
                            f"current masks are version {mask_version}")
    X = np.asarray(X, dtype=np.float64)
    f, _, _ = params.dims
    if X.shape != (prop.S.n_rows, f):
        raise InputError(f"features have shape {X.shape}, expected {(prop.S.n_rows, f)}")
    plans = _plans(params, train_mode, rng)
    cache = ForwardCache(B=np.empty(0), logits=np.empty(0))
    st = cache.steps
    variant = params.variant

    if variant == "no_separation":
        ch = params.channel_low
        H1, st["l1"] = _propagate_layer(prop.S, X, ch.W1, plans["low"])
        H2, st["l2"] = _propagate_layer(prop.S, H1, ch.W2, plans["low"])
        Xr, st["raw_drop"] = dropout(X, plans["raw"])
        Hx, st["raw_lin"] = linear(Xr, params.Wx)
        Ho, st["mix"] = scalar_mix(H2, Hx, ch.mix_logit)
        cache.H1["low"], cache.H2["low"], cache.Hx = H1, H2, Hx
    else:
        for s in CHANNELS:
            cache.H1[s], st[("l1", s)] = _propagate_layer(
                prop.P1[s], X, params.channel(s).W1, plans[s])
        if variant == "no_message_separation":
            pooled = cache.H1["low"] + cache.H1["high"]
            for s in CHANNELS:
                cache.H2[s], st[("l2", s)] = _propagate_layer(
                    prop.P1[s], pooled, params.channel(s).W2, plans[s])
        else:
            for s in CHANNELS:
                cache.H2[s], st[("l2", s)] = _propagate_layer(
                    prop.P2[s], cache.H1[s], params.channel(s).W2, plans[s])
        Xr, st["raw_drop"] = dropout(X, plans["raw"])
        Hx, st["raw_lin"] = linear(Xr, params.Wx)
        cache.Hx = Hx
        Ho = np.zeros_like(Hx)
        for s in CHANNELS:
            mixed, st[("mix", s)] = scalar_mix(cache.H2[s], Hx, params.channel(s).mix_logit)
            Ho += _row_mask(mixed, prop.mask(s)) if params.mask_output else mixed

    logits, st["out"] = linear(Ho, params.Wo)
    cache.logits = logits
    cache.B = softmax(logits)
    return cache


def backward(params: ModelParams, prop: PropagationSet, cache: ForwardCache,
             dlogits: np.ndarray) -> None:
    """Accumulate parameter gradients given dL/dlogits."""
    st = cache.steps
    dHo = linear_backward(dlogits, st["out"])

    if params.variant == "no_separation":
        dH2, dHx = scalar_mix_backward(dHo, st["mix"])
        dH1 = _propagate_layer_backward(dH2, prop.S_T, st["l2"])
        _propagate_layer_backward(dH1, prop.S_T, st["l1"])
        linear_backward(dHx, st["raw_lin"])
        return

    dHx = np.zeros_like(cache.Hx)
    dH2 = {}
    for s in CHANNELS:
        dmixed = _row_mask(dHo, prop.mask(s)) if params.mask_output else dHo
        dH2[s], dHx_s = scalar_mix_backward(dmixed, st[("mix", s)])
        dHx += dHx_s
    linear_backward(dHx, st["raw_lin"])

    if params.variant == "no_message_separation":
        dpooled = np.zeros_like(cache.H1["low"])
        for s in CHANNELS:
            dpooled += _propagate_layer_backward(dH2[s], prop.P1_T[s], st[("l2", s)])
        for s in CHANNELS:
            _propagate_layer_backward(dpooled, prop.P1_T[s], st[("l1", s)])
    else:
        for s in CHANNELS:
            dH1 = _propagate_layer_backward(dH2[s], prop.P2_T[s], st[("l2", s)])
            _propagate_layer_backward(dH1, prop.P1_T[s], st[("l1", s)])


def predict(B: np.ndarray) -> np.ndarray:
    """Argmax class per row; np.argmax already breaks ties toward the smallest id."""
    return np.argmax(B, axis=1)


def loss_and_grads(params: ModelParams, prop: PropagationSet, X: np.ndarray, labels: np.ndarray,
                   train_idx, reduction: str = "mean", rng: np.random.Generator | None = None,
                   train_mode: bool = True, mask_version: int | None = None):
    """Forward, loss on ``train_idx``, backward. Returns (loss, pseudo labels, cache)."""
    cache = forward(params, prop, X, train_mode=train_mode, rng=rng, mask_version=mask_version)
    loss, _, dlogits = softmax_xent(cache.logits, labels, train_idx, reduction)
    backward(params, prop, cache, dlogits)
    return loss, predict(cache.B), cache


# -- references ---------------------------------------------------------------

def gcn_reference(S: CsrMatrix, X: np.ndarray, W1: np.ndarray, W2: np.ndarray,
                  Wo: np.ndarray | None = None, return_hidden: bool = False):
    """Two-layer GCN soft assignments, evaluated without dropout.

    With ``Wo`` omitted this is softmax(S relu(S X W1) W2). Passing ``Wo``
    appends a ReLU and a linear readout, which is the shape the two-channel
    model collapses to when one channel holds every node and alpha = 1.
    ``return_hidden`` also returns the first-layer activations.
    """
    Sd = S.to_dense()
    H1 = np.maximum(Sd @ (X @ W1), 0.0)
    Z = Sd @ (H1 @ W2)
    if Wo is not None:
        Z = np.maximum(Z, 0.0) @ Wo
    return (softmax(Z), H1) if return_hidden else softmax(Z)


def mlp_reference(X: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    return softmax(np.maximum(X @ W1, 0.0) @ W2)


def activation_pattern(cache: ForwardCache) -> np.ndarray:
    """Concatenated ReLU gates of every propagation layer in the pass."""
    gates = [step[2].ravel() for key, step in sorted(cache.steps.items(), key=lambda kv: str(kv[0]))
             if (key[0] if isinstance(key, tuple) else key) in ("l1", "l2")]
    return np.concatenate(gates) if gates else np.zeros(0, dtype=bool)
