"""Binary checkpoint container.

Layout (all integers little-endian)::

    magic        8 bytes   b"ALNKCKPT"
    version      uint32    currently 1
    meta_len     uint64
    meta         meta_len bytes of UTF-8 JSON (model config, optimizer config,
                 vocabulary, step counter, seed, free-form extras)
    n_tensors    uint32
    n_tensors x:
        name_len uint16, name (UTF-8)
        ndim     uint8, dims uint32 x ndim
        data     float32 x prod(dims), C order

Tensor names are ``param/<module path>`` for parameters and
``adam/exp_avg/<path>``, ``adam/exp_avg_sq/<path>`` for optimizer moments.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import DataError

MAGIC = b"ALNKCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    meta: dict
    tensors: dict = field(default_factory=dict)  # name -> float32 ndarray


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = json.dumps(ckpt.meta, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(meta)), meta]
    chunks.append(struct.pack("<I", len(ckpt.tensors)))
    for name, array in ckpt.tensors.items():
        array = np.ascontiguousarray(array, dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(b"".join(chunks))


def read_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such checkpoint: {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise DataError(f"{path} is not an alignkit checkpoint")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<Q", data, 12)
    pos = 20
    meta = json.loads(data[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape).copy()
        pos += 4 * size
    return Checkpoint(meta=meta, tensors=tensors)


def model_tensors(model: torch.nn.Module, optimizer=None) -> dict:
    tensors = {f"param/{k}": v.detach().cpu().float().numpy() for k, v in model.state_dict().items()}
    if optimizer is not None:
        names = {id(p): k for k, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p)
                if not state:
                    continue
                for moment in ("exp_avg", "exp_avg_sq"):
                    tensors[f"adam/{moment}/{names[id(p)]}"] = state[moment].detach().cpu().float().numpy()
    return tensors


def load_model_tensors(model: torch.nn.Module, tensors: dict, optimizer=None, step: int = 0) -> None:
    params = {k[len("param/") :]: torch.from_numpy(v) for k, v in tensors.items() if k.startswith("param/")}
    model.load_state_dict(params)
    if optimizer is None:
        return
    for name, p in model.named_parameters():
        key = f"adam/exp_avg/{name}"
        if key in tensors:
            optimizer.state[p] = {
                "step": torch.tensor(float(step)),
                "exp_avg": torch.from_numpy(tensors[key]).to(p.dtype),
                "exp_avg_sq": torch.from_numpy(tensors[f"adam/exp_avg_sq/{name}"]).to(p.dtype),
            }
