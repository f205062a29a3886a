"""
Parsing, canonical serialization and random generation of spec documents.

Documents are JSON objects with a top-level ``kind``. Reals are written
with Python's shortest round-trip repr and read back with a correctly
rounded parser, so parse(serialize(s)) == s bit for bit.
"""

import json
import logging
from typing import Any

import numpy as np
from pydantic import TypeAdapter, ValidationError

from maxformer.core.models import (
    AffineMap,
    AnySpec,
    CpwlPairSpec,
    DeepMaxoutSpec,
    DomainBox,
    MaxoutLayerSpec,
    ReluNetSpec,
    SpecDims,
    SpecKind,
    Slice,
)
from maxformer.core.models.netspec import to_tuples
from maxformer.core.rng import stream
from maxformer.core.validation import PreconditionError, SpecParseError, SpecValidationError, validate_finite

logger = logging.getLogger(__name__)

_SPEC_ADAPTER: TypeAdapter[AnySpec] = TypeAdapter(AnySpec)

KINDS: tuple[str, ...] = ("maxout_layer", "deep_maxout", "relu_net", "cpwl_pair", "domain_box")


def _location(loc: tuple[Any, ...], kind: str) -> str:
    # Discriminated unions prefix the location with the tag
    parts = list(loc[1:] if loc and loc[0] == kind else loc)
    return ".".join(str(p) for p in parts) or "<document>"


def _domain_error(exc: ValidationError, kind: str) -> Exception:
    errors = exc.errors()
    if all(err["type"] == "value_error" for err in errors):
        return SpecValidationError("; ".join(str(err["msg"]).removeprefix("Value error, ") for err in errors))
    first = next(err for err in errors if err["type"] != "value_error")
    return SpecParseError(_location(first["loc"], kind), first["msg"])


def spec_from_data(data: Any) -> AnySpec:
    """
    Validate an already-decoded document.

    Raises:
        SpecParseError: If the document does not follow the schema
        SpecValidationError: If a type invariant is violated
    """
    if not isinstance(data, dict):
        raise SpecParseError("<document>", "top level must be a JSON object")
    kind = data.get("kind")
    if kind is None:
        raise SpecParseError("kind", "missing")
    if kind not in KINDS:
        raise SpecParseError("kind", f"unknown kind {kind!r}, expected one of {list(KINDS)}")
    try:
        return _SPEC_ADAPTER.validate_python(data)
    except ValidationError as exc:
        raise _domain_error(exc, kind) from exc


def parse_spec(text: str) -> AnySpec:
    """
    Parse a UTF-8 JSON spec document.

    Args:
        text: Document text

    Returns:
        The validated spec or domain box

    Raises:
        SpecParseError: If the text is not JSON or violates the schema
        SpecValidationError: If a type invariant is violated
    """
    return spec_from_data(_load_json(text))


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError("<document>", f"not valid JSON: {exc.msg} (line {exc.lineno})") from exc


def parse_slice(text: str) -> Slice:
    """
    Parse a slice document (kind "slice").

    Raises:
        SpecParseError: If the text is not JSON or violates the schema
        SpecValidationError: If the directions are dependent or the extents empty
    """
    data = _load_json(text)
    if not isinstance(data, dict) or data.get("kind", "slice") != "slice":
        raise SpecParseError("kind", "expected a slice document")
    try:
        return Slice.model_validate(data)
    except ValidationError as exc:
        raise _domain_error(exc, "slice") from exc


def serialize_spec(spec: AnySpec) -> str:
    """Canonical JSON text for a spec"""
    data = spec.model_dump(mode="python", by_alias=True)
    return json.dumps(data, allow_nan=False) + "\n"


def _uniform(rng: np.random.Generator, bound: float, shape: tuple[int, ...]) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


def random_maxout_layer(
    rng: np.random.Generator, n_in: int, p: int, m_out: int, bound: float
) -> MaxoutLayerSpec:
    return MaxoutLayerSpec.from_arrays(
        _uniform(rng, bound, (m_out, p, n_in)), _uniform(rng, bound, (m_out, p))
    )


def random_spec(kind: SpecKind, dims: SpecDims, weight_bound: float, seed: int) -> AnySpec:
    """
    Draw a random valid spec with all entries in [-weight_bound, weight_bound].

    Sequence maps act on R^{nT} -> R^{mT}; hidden widths are m*T.

    Args:
        kind: Which spec type to generate
        dims: n, T, p, m and depth D
        weight_bound: Entry bound M2 > 0
        seed: Seed; the result is a pure function of all arguments

    Raises:
        PreconditionError: If weight_bound is not positive and finite
    """
    if not (validate_finite([weight_bound]) and weight_bound > 0.0):
        raise PreconditionError(f"weight bound must be positive and finite, got {weight_bound}")
    rng = stream(seed, f"random_spec.{kind}")
    n_in = dims.n * dims.seq_len
    width = dims.m * dims.seq_len

    if kind == "maxout_layer":
        return random_maxout_layer(rng, n_in, dims.p, width, weight_bound)
    if kind == "deep_maxout":
        layers = [random_maxout_layer(rng, n_in, dims.p, width, weight_bound)]
        for _ in range(dims.depth - 1):
            layers.append(random_maxout_layer(rng, width, dims.p, width, weight_bound))
        return DeepMaxoutSpec(layers=tuple(layers))
    if kind == "relu_net":
        weights, biases = [], []
        prev = n_in
        for _ in range(dims.depth):
            weights.append(to_tuples(_uniform(rng, weight_bound, (width, prev))))
            biases.append(to_tuples(_uniform(rng, weight_bound, (width,))))
            prev = width
        readout = AffineMap(
            weight=to_tuples(_uniform(rng, weight_bound, (width, prev))),
            bias=to_tuples(_uniform(rng, weight_bound, (width,))),
        )
        return ReluNetSpec(weights=tuple(weights), biases=tuple(biases), readout=readout)
    if kind == "cpwl_pair":
        g = random_maxout_layer(rng, n_in, dims.p, width, weight_bound)
        h = random_maxout_layer(rng, n_in, dims.p, width, weight_bound)
        return CpwlPairSpec(g=g, h=h)
    if kind == "domain_box":
        return DomainBox(a=-weight_bound, b=weight_bound, n=dims.n, T=dims.seq_len)
    raise PreconditionError(f"unknown spec kind {kind!r}")
