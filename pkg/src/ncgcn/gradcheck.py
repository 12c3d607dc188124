"""Finite-difference validation of the model's backward pass on small random graphs."""

from __future__ import annotations

import numpy as np

from .autodiff import GradCheckResult, finite_diff_check, softmax_xent
from .graph import build_csr, symmetric_normalize
from .model import (VARIANTS, activation_pattern, build_propagation, forward, init_params,
                    loss_and_grads)


def random_instance(rng: np.random.Generator, n: int = 12, f: int = 6, C: int = 3,
                    edge_prob: float = 0.3, add_self_loop: bool = True):
    """Random graph, features, labels and a random two-group split."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < edge_prob
    A = build_csr(np.stack([iu[keep], ju[keep]], axis=1), n)
    S = symmetric_normalize(A, add_self_loop)
    X = rng.normal(size=(n, f))
    labels = rng.integers(0, C, n)
    low = rng.random(n) < 0.6
    return S, X, labels, (low, ~low)


def check_variant(variant: str, seed: int, n: int = 12, f: int = 6, hidden: int = 5, C: int = 3,
                  mask_output: bool = True, reduction: str = "mean", h: float = 1e-4,
                  samples_per_tensor: int = 20) -> GradCheckResult:
    """Gradient check of every trainable tensor of ``variant`` on one random instance.

    Mixing logits are drawn away from 0 so their gradient is not trivially symmetric.
    """
    rng = np.random.default_rng(seed)
    S, X, labels, masks = random_instance(rng, n, f, C)
    prop = build_propagation(S, masks)
    params = init_params(f, hidden, C, rng, variant, mask_output=mask_output)
    for ch in (params.channel_low, params.channel_high):
        ch.mix_logit.value[...] = rng.normal()
    train_idx = np.sort(rng.choice(n, size=max(1, (2 * n) // 3), replace=False))

    params.zero_grad()
    loss_and_grads(params, prop, X, labels, train_idx, reduction, train_mode=False)

    def loss_fn():
        cache = forward(params, prop, X)
        loss = softmax_xent(cache.logits, labels, train_idx, reduction)[0]
        return loss, activation_pattern(cache)

    return finite_diff_check(loss_fn, params.parameters(), h=h,
                             samples_per_tensor=samples_per_tensor, rng=rng)


def check_all(seed: int = 0, n_graphs: int = 5, tol: float = 1e-4) -> dict[str, float]:
    """Worst relative error per variant over ``n_graphs`` random instances."""
    worst = {}
    for v in VARIANTS:
        worst[v] = max(check_variant(v, seed * 1000 + g).max_rel_error for g in range(n_graphs))
    return worst
