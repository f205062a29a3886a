"""
Network and domain specifications.

All specs are frozen pydantic models holding plain tuples of floats, so
equality is exact and JSON round trips are lossless. Array views are built
on demand with ``weights()`` / ``biases()``.
"""

from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from maxformer.core.validation import validate_delta

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
Vector = tuple[FiniteFloat, ...]
Matrix = tuple[Vector, ...]


def to_tuples(array: Any) -> Any:
    """Convert a (nested) array-like into nested tuples of Python floats"""
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr)
    return tuple(to_tuples(sub) for sub in arr)


def _matrix_shape(rows: Matrix, where: str) -> tuple[int, int]:
    if not rows:
        raise ValueError(f"{where} must have at least one row")
    width = len(rows[0])
    if width == 0:
        raise ValueError(f"{where} must have at least one column")
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{where} row {r} has length {len(row)}, expected {width}")
    return len(rows), width


class DomainBox(BaseModel):
    """The compact input domain [a, b]^{n x T} plus the token separation margin."""

    model_config = {"frozen": True, "populate_by_name": True}

    kind: Literal["domain_box"] = "domain_box"
    a: FiniteFloat
    b: FiniteFloat
    n: int = Field(ge=1)
    seq_len: int = Field(ge=1, alias="T")
    delta: FiniteFloat

    @model_validator(mode="before")
    @classmethod
    def default_delta(cls, data: Any) -> Any:
        # Midpoint of the admissible interval (0, (b-a)/(T+1))
        if isinstance(data, dict) and data.get("delta") is None:
            a, b = data.get("a"), data.get("b")
            tokens = data.get("T", data.get("seq_len"))
            if all(isinstance(v, (int, float)) for v in (a, b, tokens)):
                data = {**data, "delta": (b - a) / (2 * (tokens + 1))}
        return data

    @model_validator(mode="after")
    def check_geometry(self) -> "DomainBox":
        if not self.b > self.a:
            raise ValueError(f"box needs b > a, got a={self.a}, b={self.b}")
        if not validate_delta(self.delta, self.b - self.a, self.seq_len):
            raise ValueError(
                f"delta={self.delta} outside (0, (b-a)/(T+1)) = "
                f"(0, {(self.b - self.a) / (self.seq_len + 1)})"
            )
        return self

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def dim(self) -> int:
        """Flattened input dimension n*T"""
        return self.n * self.seq_len

    @property
    def m1(self) -> float:
        """Sup-norm bound of the box"""
        return max(abs(self.a), abs(self.b))

    def token_offset(self, t: int) -> float:
        """Shift (t-1)(b-a) + t*delta applied to token t (1-based)"""
        return (t - 1) * self.width + t * self.delta

    def token_interval(self, t: int) -> tuple[float, float]:
        """Per-coordinate interval I_t occupied by embedded token t"""
        off = self.token_offset(t)
        return self.a + off, self.b + off


class MaxoutLayerSpec(BaseModel):
    """
    A rank-p maxout layer on R^{n_in}.

    Unit i outputs max_j (W[i][j] . x + b[i][j]).
    """

    model_config = {"frozen": True}

    kind: Literal["maxout_layer"] = "maxout_layer"
    n_in: int = Field(ge=1)
    p: int = Field(ge=1)
    m_out: int = Field(ge=1)
    W: tuple[Matrix, ...]
    b: tuple[Vector, ...]

    @model_validator(mode="before")
    @classmethod
    def zero_fill_biases(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("b") is None:
            m_out, p = data.get("m_out"), data.get("p")
            if isinstance(m_out, int) and isinstance(p, int):
                data = {**data, "b": [[0.0] * p for _ in range(m_out)]}
        return data

    @model_validator(mode="after")
    def check_shapes(self) -> "MaxoutLayerSpec":
        if len(self.W) != self.m_out:
            raise ValueError(f"W has {len(self.W)} units, expected m_out={self.m_out}")
        if len(self.b) != self.m_out:
            raise ValueError(f"b has {len(self.b)} units, expected m_out={self.m_out}")
        for i, unit in enumerate(self.W):
            shape = _matrix_shape(unit, f"W[{i}]")
            if shape != (self.p, self.n_in):
                raise ValueError(f"W[{i}] has shape {shape}, expected ({self.p}, {self.n_in})")
        for i, bias in enumerate(self.b):
            if len(bias) != self.p:
                raise ValueError(f"b[{i}] has length {len(bias)}, expected p={self.p}")
        return self

    @classmethod
    def from_arrays(cls, W: np.ndarray, b: Optional[np.ndarray] = None) -> "MaxoutLayerSpec":
        """Build from a (m_out, p, n_in) weight array and a (m_out, p) bias array"""
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 3:
            raise ValueError(f"weights must be 3-dimensional, got shape {W.shape}")
        m_out, p, n_in = W.shape
        bias = np.zeros((m_out, p)) if b is None else np.asarray(b, dtype=np.float64)
        return cls(n_in=n_in, p=p, m_out=m_out, W=to_tuples(W), b=to_tuples(bias))

    def weights(self) -> np.ndarray:
        return np.array(self.W, dtype=np.float64).reshape(self.m_out, self.p, self.n_in)

    def biases(self) -> np.ndarray:
        return np.array(self.b, dtype=np.float64).reshape(self.m_out, self.p)

    @property
    def m2(self) -> float:
        """max over pieces of max(||row||_1, |bias|)"""
        rows = np.abs(self.weights()).sum(axis=2)
        return float(max(rows.max(), np.abs(self.biases()).max()))


class DeepMaxoutSpec(BaseModel):
    """Composition T^(D) o ... o T^(1) of maxout layers."""

    model_config = {"frozen": True}

    kind: Literal["deep_maxout"] = "deep_maxout"
    layers: tuple[MaxoutLayerSpec, ...]

    @model_validator(mode="after")
    def check_chain(self) -> "DeepMaxoutSpec":
        if not self.layers:
            raise ValueError("a deep maxout network needs at least one layer")
        for idx in range(1, len(self.layers)):
            prev, cur = self.layers[idx - 1], self.layers[idx]
            if cur.n_in != prev.m_out:
                raise ValueError(
                    f"layer {idx} has n_in={cur.n_in} but layer {idx - 1} outputs {prev.m_out}"
                )
        return self

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def m_out(self) -> int:
        return self.layers[-1].m_out

    @property
    def depth(self) -> int:
        return len(self.layers)


class AffineMap(BaseModel):
    """x -> weight @ x + bias"""

    model_config = {"frozen": True}

    weight: Matrix
    bias: Vector

    @model_validator(mode="after")
    def check_shapes(self) -> "AffineMap":
        rows, _ = _matrix_shape(self.weight, "weight")
        if len(self.bias) != rows:
            raise ValueError(f"bias has length {len(self.bias)}, expected {rows}")
        return self

    @property
    def n_in(self) -> int:
        return len(self.weight[0])

    @property
    def n_out(self) -> int:
        return len(self.weight)


class ReluNetSpec(BaseModel):
    """Stacked ReLU layers followed by an affine readout."""

    model_config = {"frozen": True}

    kind: Literal["relu_net"] = "relu_net"
    weights: tuple[Matrix, ...] = ()
    biases: tuple[Vector, ...] = ()
    readout: AffineMap

    @model_validator(mode="after")
    def check_chain(self) -> "ReluNetSpec":
        if len(self.weights) != len(self.biases):
            raise ValueError(
                f"{len(self.weights)} weight matrices but {len(self.biases)} bias vectors"
            )
        width: Optional[int] = None
        for idx, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            rows, cols = _matrix_shape(weight, f"weights[{idx}]")
            if width is not None and cols != width:
                raise ValueError(f"weights[{idx}] expects {cols} inputs, previous layer has {width}")
            if len(bias) != rows:
                raise ValueError(f"biases[{idx}] has length {len(bias)}, expected {rows}")
            width = rows
        if width is not None and self.readout.n_in != width:
            raise ValueError(f"readout expects {self.readout.n_in} inputs, last layer has {width}")
        return self

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def n_in(self) -> int:
        return len(self.weights[0][0]) if self.weights else self.readout.n_in

    @property
    def m_out(self) -> int:
        return self.readout.n_out

    def layer_arrays(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (np.array(w, dtype=np.float64), np.array(b, dtype=np.float64))
            for w, b in zip(self.weights, self.biases)
        ]

    def readout_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array(self.readout.weight, dtype=np.float64),
            np.array(self.readout.bias, dtype=np.float64),
        )


class CpwlPairSpec(BaseModel):
    """A CPWL function given as the difference g - h of two max-affine layers."""

    model_config = {"frozen": True}

    kind: Literal["cpwl_pair"] = "cpwl_pair"
    g: MaxoutLayerSpec
    h: MaxoutLayerSpec

    @model_validator(mode="after")
    def check_dims(self) -> "CpwlPairSpec":
        if (self.g.n_in, self.g.m_out) != (self.h.n_in, self.h.m_out):
            raise ValueError(
                f"g maps {self.g.n_in}->{self.g.m_out} but h maps {self.h.n_in}->{self.h.m_out}"
            )
        return self

    @property
    def n_in(self) -> int:
        return self.g.n_in

    @property
    def m_out(self) -> int:
        return self.g.m_out


class SpecDims(BaseModel):
    """Dimensions used by the random spec generator"""

    model_config = {"frozen": True, "populate_by_name": True}

    n: int = Field(default=1, ge=1)
    seq_len: int = Field(default=2, ge=1, alias="T")
    p: int = Field(default=2, ge=1)
    m: int = Field(default=1, ge=1)
    depth: int = Field(default=1, ge=1, alias="D")


SpecKind = Literal["maxout_layer", "deep_maxout", "relu_net", "cpwl_pair", "domain_box"]
NetSpec = Union[MaxoutLayerSpec, DeepMaxoutSpec, ReluNetSpec, CpwlPairSpec]
AnySpec = Annotated[
    Union[MaxoutLayerSpec, DeepMaxoutSpec, ReluNetSpec, CpwlPairSpec, DomainBox],
    Field(discriminator="kind"),
]
