"""Checkpoint container.

Layout (ASCII header, then raw little-endian float32 payload)::

    ALAMP-CKPT
    version 1
    digest <16 hex chars of the model config hash>
    config <compact JSON: model config, stage, extra metadata>
    tensor <name> <dim0>x<dim1>... <nbytes>      (one line per tensor)
    end
    <payload: tensors concatenated in header order>

Momentum buffers are stored as tensors named ``velocity/<name>``.
"""

from __future__ import annotations

import json
import os

import numpy as np

from alamp.errors import DigestMismatch, IOFailure, NotFound, ParseError, VersionMismatch
from alamp.net.model import ModelConfig, ModelParams

MAGIC = "ALAMP-CKPT"
VERSION = 1
_DTYPE = np.dtype("<f4")


def _shape_str(shape) -> str:
    return "x".join(str(d) for d in shape) if shape else "scalar"


def _parse_shape(s: str) -> tuple[int, ...]:
    return () if s == "scalar" else tuple(int(d) for d in s.split("x"))


def encode(params: ModelParams, extra: dict | None = None) -> bytes:
    meta = {"model": params.config.to_dict(), "stage": params.stage, "extra": extra or {}}
    items = [(n, params.tensors[n]) for n in params.names()]
    items += [(f"velocity/{n}", params.velocity[n]) for n in params.names()]
    lines = [
        MAGIC,
        f"version {VERSION}",
        f"digest {params.config.digest()}",
        "config " + json.dumps(meta, sort_keys=True, separators=(",", ":")),
    ]
    payload = []
    for name, arr in items:
        raw = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        lines.append(f"tensor {name} {_shape_str(arr.shape)} {len(raw)}")
        payload.append(raw)
    lines.append("end")
    return ("\n".join(lines) + "\n").encode("ascii") + b"".join(payload)


def decode(data: bytes, expect: ModelConfig | None = None) -> tuple[ModelParams, dict]:
    """Parse checkpoint bytes; returns ``(params, extra metadata)``."""
    pos = 0

    def next_line() -> str:
        nonlocal pos
        end = data.find(b"\n", pos)
        if end < 0:
            raise ParseError("checkpoint header is truncated")
        line = data[pos:end]
        pos = end + 1
        try:
            return line.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("checkpoint header is not ASCII") from exc

    if next_line() != MAGIC:
        raise ParseError("not a checkpoint file (bad magic)")
    version = next_line()
    if version != f"version {VERSION}":
        raise VersionMismatch(f"unsupported checkpoint {version!r}; expected version {VERSION}")
    digest_line = next_line()
    if not digest_line.startswith("digest "):
        raise ParseError("missing digest line")
    digest = digest_line[len("digest "):]
    config_line = next_line()
    if not config_line.startswith("config "):
        raise ParseError("missing config line")
    try:
        meta = json.loads(config_line[len("config "):])
        config = ModelConfig.from_dict(meta["model"])
        stage = meta["stage"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed checkpoint config: {exc}") from exc
    if config.digest() != digest:
        raise DigestMismatch("stored digest does not match the stored config")
    if expect is not None and expect.digest() != digest:
        raise DigestMismatch(f"checkpoint config {digest} differs from expected {expect.digest()}")

    entries = []
    while True:
        line = next_line()
        if line == "end":
            break
        parts = line.split(" ")
        if len(parts) != 4 or parts[0] != "tensor":
            raise ParseError(f"bad tensor line {line!r}")
        try:
            entries.append((parts[1], _parse_shape(parts[2]), int(parts[3])))
        except ValueError as exc:
            raise ParseError(f"bad tensor line {line!r}") from exc

    tensors, velocity = {}, {}
    for name, shape, nbytes in entries:
        if nbytes != int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize:
            raise ParseError(f"{name}: byte count does not match shape")
        if pos + nbytes > len(data):
            raise ParseError(f"{name}: payload is truncated")
        arr = np.frombuffer(data, dtype=_DTYPE, count=nbytes // _DTYPE.itemsize, offset=pos)
        pos += nbytes
        arr = arr.reshape(shape).astype(np.float64)
        if name.startswith("velocity/"):
            velocity[name[len("velocity/"):]] = arr
        else:
            tensors[name] = arr
    if pos != len(data):
        raise ParseError("trailing bytes after checkpoint payload")
    try:
        params = ModelParams(config, tensors, velocity, stage)
    except Exception as exc:
        raise ParseError(f"checkpoint tensors do not match config: {exc}") from exc
    return params, meta.get("extra", {})


def save(params: ModelParams, path: str | os.PathLike, extra: dict | None = None) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode(params, extra))
    except OSError as exc:
        raise IOFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load(path: str | os.PathLike, expect: ModelConfig | None = None) -> tuple[ModelParams, dict]:
    if not os.path.isfile(path):
        raise NotFound(f"no such checkpoint: {path}")
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read checkpoint {path}: {exc}") from exc
    return decode(data, expect)


def checkpoint_roundtrip(params: ModelParams, path: str | os.PathLike) -> ModelParams:
    save(params, path)
    return load(path, expect=params.config)[0]
