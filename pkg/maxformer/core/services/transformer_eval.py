"""
Forward evaluation of Transformer networks with hardmax or scaled-softmax attention.

Residual streams are handled as batches Z of shape (B, d, C) where C = T
(+1 with the auxiliary token). Heads of a block are stacked and evaluated
together; all arithmetic is float64.
"""

import logging
from typing import Callable, Optional

import numpy as np

from maxformer.core.models import (
    AttentionKind,
    AttentionMode,
    FeedForward,
    TransformerBlock,
    TransformerNet,
)
from maxformer.core.validation import NonFiniteActivationError, ShapeMismatchError

logger = logging.getLogger(__name__)

# Relative width of the hardmax tie set
TIE_TOLERANCE = 1e-9


def attn_activation(logits: np.ndarray, mode: AttentionMode, axis: int = 0) -> np.ndarray:
    """
    Column-stochastic activation along ``axis``.

    Hardmax spreads mass equally over every index within
    1e-9 * max(1, |max|) of the maximum; softmax subtracts the maximum
    before exponentiating.
    """
    logits = np.asarray(logits, dtype=np.float64)
    top = np.max(logits, axis=axis, keepdims=True)
    if mode.tag is AttentionKind.HARDMAX:
        tie = TIE_TOLERANCE * np.maximum(1.0, np.abs(top))
        winners = (logits >= top - tie).astype(np.float64)
        return winners / np.sum(winners, axis=axis, keepdims=True)
    assert mode.lam is not None
    weights = np.exp(mode.lam * (logits - top))
    return weights / np.sum(weights, axis=axis, keepdims=True)


def _check_stream(Z: np.ndarray, d: int, where: str) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim not in (2, 3) or Z.shape[-2] != d:
        raise ShapeMismatchError(f"(d={d}, C) or (B, d={d}, C)", Z.shape, where)
    return Z


def attention_forward(block: TransformerBlock, Z: np.ndarray, mode: AttentionMode) -> np.ndarray:
    """
    Z + sum_h W_O^h W_V^h Z sigma[(W_K^h Z)^T W_Q^h Z], column-wise activation.

    Accepts a single stream (d, C) or a batch (B, d, C).
    """
    Z = _check_stream(Z, block.ff.dim, "attention_forward")
    if not block.heads:
        return Z.copy()
    single = Z.ndim == 2
    batch = Z[None] if single else Z
    w_k = np.stack([h.w_k for h in block.heads])
    w_q = np.stack([h.w_q for h in block.heads])
    w_v = np.stack([h.w_v for h in block.heads])
    w_o = np.stack([h.w_o for h in block.heads])
    keys = np.einsum("hkd,bdc->bhkc", w_k, batch)
    queries = np.einsum("hkd,bdc->bhkc", w_q, batch)
    values = np.einsum("hkd,bdc->bhkc", w_v, batch)
    # logits[b, h, s, c]: key column s against query column c
    logits = np.einsum("bhks,bhkc->bhsc", keys, queries)
    weights = attn_activation(logits, mode, axis=2)
    mixed = np.einsum("bhks,bhsc->bhkc", values, weights)
    out = batch + np.einsum("hdk,bhkc->bdc", w_o, mixed)
    return out[0] if single else out


def ff_forward(ff: FeedForward, Z: np.ndarray) -> np.ndarray:
    """Z + W2 ReLU(W1 Z + b1) + b2, the same parameters on every column"""
    Z = _check_stream(Z, ff.dim, "ff_forward")
    hidden = np.maximum(np.einsum("rd,...dc->...rc", ff.w1, Z) + ff.b1[:, None], 0.0)
    return Z + np.einsum("dr,...rc->...dc", ff.w2, hidden) + ff.b2[:, None]


def block_forward(block: TransformerBlock, Z: np.ndarray, mode: AttentionMode) -> np.ndarray:
    return ff_forward(block.ff, attention_forward(block, Z, mode))


def embed(net: TransformerNet, X: np.ndarray) -> np.ndarray:
    """E(X) = A X + B on a batch (B, n, T), appending the auxiliary column when flagged"""
    if X.ndim != 3 or X.shape[1:] != (net.n, net.seq_len):
        raise ShapeMismatchError((net.n, net.seq_len), X.shape[1:], "transformer input")
    if net.uses_aux_token:
        X = np.concatenate([X, np.zeros((X.shape[0], net.n, 1))], axis=2)
    return np.einsum("dn,bnc->bdc", net.embed_a, X) + net.embed_b[None]


def transformer_forward_batch(
    net: TransformerNet,
    X: np.ndarray,
    mode: AttentionMode,
    trace: Optional[list[np.ndarray]] = None,
) -> np.ndarray:
    """
    Evaluate C o f^L o ... o f^1 o E on a batch.

    Args:
        net: Compiled network
        X: Inputs of shape (B, n, T)
        mode: Attention activation
        trace: If given, receives the residual stream after the embedding
            and after every block

    Returns:
        Outputs of shape (B, m, T); the auxiliary column is dropped

    Raises:
        ShapeMismatchError: If X is not (B, n, T)
        NonFiniteActivationError: If a block produces inf or nan
    """
    Z = embed(net, np.asarray(X, dtype=np.float64))
    if trace is not None:
        trace.append(Z)
    for idx, block in enumerate(net.blocks):
        Z = block_forward(block, Z, mode)
        if not np.all(np.isfinite(Z)):
            logger.warning("non-finite residual stream after block %d", idx)
            raise NonFiniteActivationError(idx)
        if trace is not None:
            trace.append(Z)
    out = np.einsum("md,bdc->bmc", net.readout, Z)
    return out[:, :, : net.seq_len]


def transformer_forward(net: TransformerNet, X: np.ndarray, mode: AttentionMode) -> np.ndarray:
    """Evaluate one sequence X of shape (n, T); returns (m, T)"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatchError((net.n, net.seq_len), X.shape, "transformer input")
    return transformer_forward_batch(net, X[None], mode)[0]


def net_evaluator(net: TransformerNet, mode: AttentionMode) -> Callable[[np.ndarray], np.ndarray]:
    """Bind a net and mode into a batch evaluator"""

    def evaluate(X: np.ndarray) -> np.ndarray:
        return transformer_forward_batch(net, X, mode)

    return evaluate
