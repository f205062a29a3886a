"""
Weight files for compiled networks.

A weight file is one JSON object holding every matrix as nested lists plus
the compile provenance. Floats are written with their shortest round-trip
repr, so a saved net loads back bit for bit.
"""

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from maxformer.core.models import AttentionHead, CompileInfo, FeedForward, TransformerBlock, TransformerNet
from maxformer.core.validation import RepositoryError, SpecParseError

logger = logging.getLogger(__name__)

WEIGHTS_FORMAT = "maxformer.transformer/1"


def net_to_dict(net: TransformerNet) -> dict[str, Any]:
    return {
        "format": WEIGHTS_FORMAT,
        "n": net.n,
        "m": net.m,
        "T": net.seq_len,
        "uses_aux_token": net.uses_aux_token,
        "embed_a": net.embed_a.tolist(),
        "embed_b": net.embed_b.tolist(),
        "blocks": [
            {
                "heads": [
                    {name: getattr(head, name).tolist() for name in ("w_k", "w_q", "w_v", "w_o")}
                    for head in block.heads
                ],
                "ff": {name: getattr(block.ff, name).tolist() for name in ("w1", "b1", "w2", "b2")},
            }
            for block in net.blocks
        ],
        "readout": net.readout.tolist(),
        "info": net.info.model_dump(mode="json"),
    }


def _array(data: Any, field: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SpecParseError(field, f"not a numeric array: {exc}") from exc
    if arr.ndim != ndim:
        # Empty matrices decode as 1-D
        if arr.size == 0 and ndim == 2:
            return arr.reshape(0, 0)
        raise SpecParseError(field, f"expected {ndim}-D array, got {arr.ndim}-D")
    return arr


def net_from_dict(data: Any) -> TransformerNet:
    """
    Rebuild a net from its weight-file object.

    Raises:
        SpecParseError: If a field is missing or malformed
        ShapeMismatchError: If matrix shapes are inconsistent
    """
    if not isinstance(data, dict):
        raise SpecParseError("<document>", "weight file must be a JSON object")
    if data.get("format") != WEIGHTS_FORMAT:
        raise SpecParseError("format", f"expected {WEIGHTS_FORMAT!r}, got {data.get('format')!r}")
    try:
        d = len(data["embed_a"])
        blocks = []
        for b_idx, block in enumerate(data["blocks"]):
            heads = tuple(
                AttentionHead(
                    w_k=_array(h["w_k"], f"blocks.{b_idx}.w_k", 2),
                    w_q=_array(h["w_q"], f"blocks.{b_idx}.w_q", 2),
                    w_v=_array(h["w_v"], f"blocks.{b_idx}.w_v", 2),
                    w_o=_array(h["w_o"], f"blocks.{b_idx}.w_o", 2),
                )
                for h in block["heads"]
            )
            ff = block["ff"]
            w1 = _array(ff["w1"], f"blocks.{b_idx}.ff.w1", 2)
            w2 = _array(ff["w2"], f"blocks.{b_idx}.ff.w2", 2)
            blocks.append(
                TransformerBlock(
                    heads=heads,
                    ff=FeedForward(
                        w1=w1.reshape(-1, d),
                        b1=_array(ff["b1"], f"blocks.{b_idx}.ff.b1", 1),
                        w2=w2.reshape(d, -1),
                        b2=_array(ff["b2"], f"blocks.{b_idx}.ff.b2", 1),
                    ),
                )
            )
        return TransformerNet(
            embed_a=_array(data["embed_a"], "embed_a", 2),
            embed_b=_array(data["embed_b"], "embed_b", 2),
            blocks=tuple(blocks),
            readout=_array(data["readout"], "readout", 2),
            n=int(data["n"]),
            m=int(data["m"]),
            seq_len=int(data["T"]),
            uses_aux_token=bool(data.get("uses_aux_token", True)),
            info=CompileInfo.model_validate(data.get("info", {})),
        )
    except KeyError as exc:
        raise SpecParseError(str(exc.args[0]), "missing") from exc


class NetRepository:
    """Compiled networks stored as JSON weight files"""

    def load(self, path: Path) -> TransformerNet:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise RepositoryError(str(path), f"cannot read weights: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecParseError("<document>", f"not valid JSON: {exc.msg} (line {exc.lineno})") from exc
        logger.debug("loaded weights from %s", path)
        return net_from_dict(data)

    def save(self, net: TransformerNet, path: Path) -> None:
        try:
            Path(path).write_text(json.dumps(net_to_dict(net), allow_nan=False) + "\n", encoding="utf-8")
        except OSError as exc:
            raise RepositoryError(str(path), f"cannot write weights: {exc}") from exc
        logger.debug("wrote weights to %s", path)
