"""Differentiable building blocks of the neural chain.

All functions are batched over a leading particle axis where it matters:
embeddings are (K, n, d) tensors, one slice per particle, sharing parameters.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError
from .params import ParamStore
from .tensor import (
    Tensor,
    concat,
    gather_rows,
    log_softmax,
    matmul,
    neighbor_sum,
    pick_rows,
    relu,
    reshape,
    rms_norm,
    scale_rows,
    softplus,
    tensor_sum,
)


def mlp(store: ParamStore, prefix: str, x: Tensor) -> Tensor:
    """Two-layer MLP: relu hidden, linear output."""
    h = relu(matmul(x, store[f"{prefix}.w1"]) + store[f"{prefix}.b1"])
    return matmul(h, store[f"{prefix}.w2"]) + store[f"{prefix}.b2"]


def gin_layer(store: ParamStore, prefix: str, h: Tensor, adj: np.ndarray) -> Tensor:
    """h' = MLP((1 + eps) * h + sum over neighbors of h), eps learned."""
    mixed = (1.0 + store[f"{prefix}.eps"]) * h + neighbor_sum(h, adj)
    return mlp(store, f"{prefix}.mlp", mixed)


def policy_scores(
    store: ParamStore, h: Tensor, adj: np.ndarray, arch: str = "mlp"
) -> Tensor:
    """Per-vertex selection log-probabilities, shape (K, n)."""
    x = h
    if arch == "gnn":
        x = gin_layer(store, "policy.gnn", x, adj)
    elif arch != "mlp":
        raise ValueError(f"unknown policy architecture {arch!r}")
    scores = mlp(store, "policy", x)
    k, n = scores.data.shape[0], scores.data.shape[1]
    return log_softmax(reshape(scores, (k, n)))


def sample_vertices(
    log_probs: Tensor, streams
) -> tuple[np.ndarray, Tensor]:
    """Draw one vertex per particle from its log-prob row using that
    particle's stream; returns (choices, per-particle log-prob tensor)."""
    probs = np.exp(log_probs.data)
    choices = np.empty(probs.shape[0], dtype=np.intp)
    for k in range(probs.shape[0]):
        row = probs[k]
        if not np.all(np.isfinite(row)) or row.sum() <= 0:
            raise NumericalError("policy produced invalid probabilities", particle=k)
        cum = np.cumsum(row)
        u = streams[k].random() * cum[-1]
        choices[k] = int(np.searchsorted(cum, u, side="right"))
    choices = np.minimum(choices, probs.shape[1] - 1)
    return choices, pick_rows(log_probs, choices)


def individualize_embed(
    store: ParamStore, h: Tensor, choices: np.ndarray
) -> Tensor:
    """Multiply the chosen row of each particle elementwise by a learned
    transform of itself; every other row passes through unchanged."""
    chosen = gather_rows(h, choices)
    masks = mlp(store, "trans", chosen)
    return scale_rows(h, choices, masks)


def observe(store: ParamStore, h: Tensor) -> Tensor:
    """Per-particle positive observation value: sum-pool over vertices, MLP,
    softplus. An all-zero MLP yields ln 2 for every particle."""
    pooled = tensor_sum(h, axis=1)
    raw = mlp(store, "obs", pooled)
    k = raw.data.shape[0]
    return softplus(reshape(raw, (k,)))


def readout(store: ParamStore, mean_states: list[Tensor]) -> Tensor:
    """Concatenate sum-pooled per-step mean states and map to class logits."""
    if not mean_states:
        raise ValueError("readout needs at least one mean state")
    widths = {m.data.shape[-1] for m in mean_states}
    if len(widths) != 1:
        raise ValueError(f"mean states disagree on embedding width: {sorted(widths)}")
    pooled = [tensor_sum(m, axis=0) for m in mean_states]
    stacked = pooled[0] if len(pooled) == 1 else concat(pooled)
    return mlp(store, "rho", stacked)
