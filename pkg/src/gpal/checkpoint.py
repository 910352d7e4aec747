"""Versioned binary model checkpoints shared by both classifiers.

Layout (all little-endian):
  bytes 0..8    magic b"GPALCK01"
  byte  8       model kind: 1 = gp classifier, 2 = softmax head
  bytes 9..17   u64 JSON header length H
  bytes 17..17+H UTF-8 JSON header: array shapes/dtypes in order, class
                names, kernel log-parameters or none, creating config echo
  remainder     the arrays' raw float64 bytes, in header order, row-major

Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataFormatError
from .kernels import KernelParams
from .softmax import SoftmaxModel
from .svgp import SvgpModel

MAGIC = b"GPALCK01"
KIND_SVGP = 1
KIND_SOFTMAX = 2

Model = Union[SvgpModel, SoftmaxModel]


def _array_block(names_arrays: list[tuple[str, np.ndarray]]) -> tuple[list[dict], bytes]:
    entries = []
    payload = b""
    for name, arr in names_arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape)})
        payload += arr.tobytes()
    return entries, payload


def save_model(model: Model, path: Path | str, config_echo: dict | None = None) -> None:
    path = Path(path)
    if isinstance(model, SvgpModel):
        kind = KIND_SVGP
        arrays = [("inducing", model.inducing), ("q_mean", model.q_mean), ("q_root", model.q_root)]
        kernel = {
            "log_lengthscale": model.kernel.log_lengthscale,
            "log_variance": model.kernel.log_variance,
        }
        extra = {"mc_samples": model.mc_samples}
    elif isinstance(model, SoftmaxModel):
        kind = KIND_SOFTMAX
        arrays = [("weights", model.weights), ("bias", model.bias)]
        kernel = None
        extra = {}
    else:
        raise DataFormatError(f"cannot checkpoint a {type(model).__name__}")
    entries, payload = _array_block(arrays)
    header = {
        "arrays": entries,
        "class_names": list(model.class_names),
        "kernel": kernel,
        "config": config_echo or {},
        **extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", kind))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_model(path: Path | str) -> Model:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 9 or raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path} is not a model checkpoint")
    kind = raw[len(MAGIC)]
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC) + 1)
    start = len(MAGIC) + 9
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path} has a corrupt checkpoint header: {exc}") from exc
    offset = start + header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if end > len(raw):
            raise DataFormatError(f"{path} is truncated inside array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise DataFormatError(f"{path} has {len(raw) - offset} trailing bytes")

    if kind == KIND_SVGP:
        kernel = header["kernel"]
        return SvgpModel(
            inducing=arrays["inducing"],
            q_mean=arrays["q_mean"],
            q_root=arrays["q_root"],
            kernel=KernelParams(
                log_lengthscale=kernel["log_lengthscale"],
                log_variance=kernel["log_variance"],
            ),
            class_names=list(header["class_names"]),
            mc_samples=int(header.get("mc_samples", 256)),
        )
    if kind == KIND_SOFTMAX:
        return SoftmaxModel(
            weights=arrays["weights"],
            bias=arrays["bias"],
            class_names=list(header["class_names"]),
        )
    raise DataFormatError(f"{path} has unknown model kind {kind}")
