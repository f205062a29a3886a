"""
Reference evaluators for maxout, deep maxout, ReLU and CPWL-pair specs.

Every evaluator accepts one vector (n_in,) or a batch (B, n_in). Affine maps
accumulate left to right over input coordinates with elementwise ops, so the
same weights give bit-identical results regardless of batch layout; this is
what makes the ReLU-as-maxout and rank-decomposition equalities exact.
"""

from typing import Callable

import numpy as np

from maxformer.core.models import (
    CpwlPairSpec,
    DeepMaxoutSpec,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
)
from maxformer.core.validation import ShapeMismatchError


def vectorize(X: np.ndarray) -> np.ndarray:
    """Stack the columns of an n x T matrix (or a (B, n, T) batch) into length-nT vectors"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        return X.reshape(-1, order="F")
    if X.ndim == 3:
        return X.transpose(0, 2, 1).reshape(X.shape[0], -1)
    raise ShapeMismatchError("(n, T) or (B, n, T)", X.shape, "vectorize")


def devectorize(v: np.ndarray, n: int, seq_len: int) -> np.ndarray:
    """Inverse of vectorize: token t is entries t*n .. (t+1)*n - 1"""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != n * seq_len:
        raise ShapeMismatchError(n * seq_len, v.shape[-1], "devectorize")
    if v.ndim == 1:
        return v.reshape((seq_len, n)).T.copy()
    return v.reshape(v.shape[0], seq_len, n).transpose(0, 2, 1).copy()


def affine(weight: np.ndarray, bias: np.ndarray, V: np.ndarray) -> np.ndarray:
    """
    weight @ v + bias for every row v of V, accumulated left to right.

    Args:
        weight: Shape (..., n)
        bias: Shape weight.shape[:-1]
        V: Shape (B, n)

    Returns:
        Shape (B, *weight.shape[:-1])
    """
    n = weight.shape[-1]
    if V.shape[-1] != n:
        raise ShapeMismatchError(n, V.shape[-1], "affine input")
    expand = (slice(None),) + (None,) * (weight.ndim - 1)
    acc = weight[..., 0][None] * V[:, 0][expand]
    for j in range(1, n):
        acc = acc + weight[..., j][None] * V[:, j][expand]
    return acc + bias[None]


def _as_batch(v: np.ndarray, n_in: int, where: str) -> tuple[np.ndarray, bool]:
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    batch = v[None] if single else v
    if batch.ndim != 2 or batch.shape[1] != n_in:
        raise ShapeMismatchError(n_in, v.shape, where)
    return batch, single


def maxout_pieces(spec: MaxoutLayerSpec, v: np.ndarray) -> np.ndarray:
    """All piece values, shape (B, m_out, p) (or (m_out, p) for one vector)"""
    batch, single = _as_batch(v, spec.n_in, "eval_maxout_layer")
    pieces = affine(spec.weights(), spec.biases(), batch)
    return pieces[0] if single else pieces


def eval_maxout_layer(spec: MaxoutLayerSpec, v: np.ndarray) -> np.ndarray:
    """output[i] = max_j (W[i] v + b[i])[j]"""
    return np.max(maxout_pieces(spec, v), axis=-1)


def eval_deep_maxout(spec: DeepMaxoutSpec, v: np.ndarray) -> np.ndarray:
    out = np.asarray(v, dtype=np.float64)
    for layer in spec.layers:
        out = eval_maxout_layer(layer, out)
    return out


def eval_relu_net(spec: ReluNetSpec, v: np.ndarray) -> np.ndarray:
    """Alternate affine maps with max{0, .}, then the affine readout"""
    batch, single = _as_batch(v, spec.n_in, "eval_relu_net")
    out = batch
    for weight, bias in spec.layer_arrays():
        out = np.maximum(affine(weight, bias, out), 0.0)
    weight, bias = spec.readout_arrays()
    out = affine(weight, bias, out)
    return out[0] if single else out


def eval_cpwl_pair(spec: CpwlPairSpec, v: np.ndarray) -> np.ndarray:
    return eval_maxout_layer(spec.g, v) - eval_maxout_layer(spec.h, v)


def relu_as_maxout(spec: ReluNetSpec) -> DeepMaxoutSpec:
    """
    The same function as a deep maxout net.

    Hidden layers become rank-2 units {Wx + b, 0}; the readout becomes a
    rank-1 layer.
    """
    layers = []
    for weight, bias in spec.layer_arrays():
        pieces = np.stack([weight, np.zeros_like(weight)], axis=1)
        biases = np.stack([bias, np.zeros_like(bias)], axis=1)
        layers.append(MaxoutLayerSpec.from_arrays(pieces, biases))
    weight, bias = spec.readout_arrays()
    layers.append(MaxoutLayerSpec.from_arrays(weight[:, None, :], bias[:, None]))
    return DeepMaxoutSpec(layers=tuple(layers))


def evaluate_spec(spec: NetSpec, v: np.ndarray) -> np.ndarray:
    """Dispatch to the evaluator matching the spec type"""
    if isinstance(spec, MaxoutLayerSpec):
        return eval_maxout_layer(spec, v)
    if isinstance(spec, DeepMaxoutSpec):
        return eval_deep_maxout(spec, v)
    if isinstance(spec, ReluNetSpec):
        return eval_relu_net(spec, v)
    if isinstance(spec, CpwlPairSpec):
        return eval_cpwl_pair(spec, v)
    raise TypeError(f"not a network spec: {type(spec).__name__}")


SequenceOracle = Callable[[np.ndarray], np.ndarray]


def sequence_oracle(spec: NetSpec, n: int, seq_len: int) -> SequenceOracle:
    """
    Wrap a spec as Vec^{-1} o f o Vec on batches of shape (B, n, T).

    Raises:
        ShapeMismatchError: If the spec does not map R^{nT} to R^{mT}
    """
    if spec.n_in != n * seq_len:
        raise ShapeMismatchError(n * seq_len, spec.n_in, "oracle input dimension")
    if spec.m_out % seq_len:
        raise ShapeMismatchError(f"multiple of T={seq_len}", spec.m_out, "oracle output dimension")
    m = spec.m_out // seq_len

    def oracle(X: np.ndarray) -> np.ndarray:
        return devectorize(evaluate_spec(spec, vectorize(X)), m, seq_len)

    return oracle
