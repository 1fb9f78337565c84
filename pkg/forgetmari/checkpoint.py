"""
Checkpoint file format.

    8 bytes   magic b"MARICKPT"
    8 bytes   little-endian u64 header length n
    n bytes   UTF-8 JSON header {arch, rng_seed, step, vocab}
    rest      params as little-endian float64, declaration order

Round-trips are bit-exact.
"""

import json
import logging
import os
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .const import CHECKPOINT_MAGIC, PARTIAL_SUFFIX
from .exceptions import CheckpointFormatError
from .langmodel import ModelArch, ModelCheckpoint
from .vocab import Vocabulary

_LOGGER = logging.getLogger(__name__)

_LEN = struct.Struct("<Q")


def checkpoint_to_bytes(ckpt: ModelCheckpoint) -> bytes:
    header = {
        "arch": ckpt.arch.to_dict(),
        "rng_seed": ckpt.rng_seed,
        "step": ckpt.step,
        "vocab": ckpt.vocab.to_dict() if ckpt.vocab is not None else None,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()
    body = ckpt.params.astype("<f8").tobytes()
    return CHECKPOINT_MAGIC + _LEN.pack(len(head)) + head + body


def checkpoint_from_bytes(data: bytes) -> ModelCheckpoint:
    magic_len = len(CHECKPOINT_MAGIC)
    if data[:magic_len] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("not a forgetmari checkpoint (bad magic)")
    if len(data) < magic_len + _LEN.size:
        raise CheckpointFormatError("truncated checkpoint header")
    (n,) = _LEN.unpack_from(data, magic_len)
    start = magic_len + _LEN.size
    try:
        header = json.loads(data[start : start + n].decode("utf-8"))
        arch = ModelArch.from_dict(header["arch"])
    except (UnicodeDecodeError, ValueError, KeyError) as e:
        raise CheckpointFormatError(f"unreadable checkpoint header: {e}")
    body = data[start + n :]
    if len(body) != 8 * arch.n_params:
        raise CheckpointFormatError(
            f"expected {arch.n_params} float64 parameters, found {len(body)} bytes"
        )
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    vocab = Vocabulary.from_dict(header["vocab"]) if header.get("vocab") else None
    return ModelCheckpoint(
        arch=arch,
        params=params,
        rng_seed=int(header["rng_seed"]),
        step=int(header["step"]),
        vocab=vocab,
    )


def save_checkpoint(ckpt: ModelCheckpoint, path: Union[str, Path]) -> Path:
    """Write atomically: ``<path>.partial`` first, renamed once complete."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + PARTIAL_SUFFIX)
    partial.write_bytes(checkpoint_to_bytes(ckpt))
    os.replace(partial, path)
    _LOGGER.debug(f"Wrote checkpoint {path} (step {ckpt.step})")
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelCheckpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())
