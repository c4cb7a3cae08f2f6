"""Checkpoint serialization: a single versioned, endian-fixed container.

Layout, byte-exact:

    bytes 0..7    magic b"SPIKEAT1"
    bytes 8..15   header length H, unsigned 64-bit little-endian
    bytes 16..16+H-1  UTF-8 JSON header
    remainder     tensor payloads, 32-bit IEEE-754 little-endian, row-major

The JSON header carries {"version", "network", "train", "meta", "tensors"}
where "tensors" is a manifest of {"name", "shape", "offset", "nbytes"} with
offsets relative to the start of the payload region. Optimizer moments are
stored as ordinary tensors so a resumed run is bit-deterministic.
"""

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError
from .layers import NetworkConfig
from .training import TrainConfig

MAGIC = b"SPIKEAT1"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    net_cfg: NetworkConfig
    train_cfg: TrainConfig
    tensors: dict  # name -> np.ndarray
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def save(checkpoint: Checkpoint, path):
    """Write the container; tensors are cast to float32 little-endian."""
    manifest = []
    payload = bytearray()
    for name, arr in checkpoint.tensors.items():
        data = np.ascontiguousarray(arr, dtype=PAYLOAD_DTYPE).tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(np.asarray(arr).shape),
                "offset": len(payload),
                "nbytes": len(data),
            }
        )
        payload.extend(data)
    header = {
        "version": checkpoint.version,
        "network": dataclasses.asdict(checkpoint.net_cfg),
        "train": dataclasses.asdict(checkpoint.train_cfg),
        "meta": checkpoint.meta,
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(len(header_bytes).to_bytes(8, "little"))
            fh.write(header_bytes)
            fh.write(bytes(payload))
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load(path) -> Checkpoint:
    """Read and validate a container written by save()."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 8:
        raise CheckpointError(f"{path}: truncated before the header length")
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:len(MAGIC)]!r}")
    header_len = int.from_bytes(blob[len(MAGIC) : len(MAGIC) + 8], "little")
    header_start = len(MAGIC) + 8
    if len(blob) < header_start + header_len:
        raise CheckpointError(f"{path}: truncated inside the header")
    try:
        header = json.loads(blob[header_start : header_start + header_len])
    except ValueError as exc:
        raise CheckpointError(f"{path}: header is not valid JSON: {exc}") from exc
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version!r} (expected {FORMAT_VERSION})"
        )
    payload = blob[header_start + header_len :]
    tensors = {}
    for entry in header["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        offset, nbytes = entry["offset"], entry["nbytes"]
        expected = int(np.prod(shape, dtype=np.int64)) * PAYLOAD_DTYPE.itemsize
        if nbytes != expected:
            raise CheckpointError(
                f"{path}: tensor {name} declares shape {shape} but {nbytes} bytes"
            )
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: truncated inside the payload at {name}")
        tensors[name] = (
            np.frombuffer(payload[offset : offset + nbytes], dtype=PAYLOAD_DTYPE)
            .reshape(shape)
            .copy()
        )
    return Checkpoint(
        net_cfg=NetworkConfig(**header["network"]),
        train_cfg=TrainConfig(**header["train"]),
        tensors=tensors,
        meta=header.get("meta", {}),
        version=version,
    )


def checkpoint_from_training(net, net_cfg, train_cfg, opt_state=None, meta=None):
    """Bundle parameters (and adam moments, when given) into a Checkpoint."""
    from .training import named_parameters

    tensors = dict(named_parameters(net))
    meta = dict(meta or {})
    if opt_state is not None:
        meta["optimizer_step"] = opt_state.step
        for name, m in opt_state.m.items():
            tensors[f"adam_m.{name}"] = m
        for name, v in opt_state.v.items():
            tensors[f"adam_v.{name}"] = v
    return Checkpoint(net_cfg=net_cfg, train_cfg=train_cfg, tensors=tensors, meta=meta)


def restore_network(checkpoint: Checkpoint):
    """Rebuild (net, opt_state) from a loaded checkpoint."""
    from .layers import init_network
    from .training import OptimizerState, named_parameters

    rng = np.random.default_rng(0)  # shapes only; values overwritten below
    net = init_network(checkpoint.net_cfg, rng, dtype=np.float32)
    params = named_parameters(net)
    for name, p in params.items():
        if name not in checkpoint.tensors:
            raise CheckpointError(f"checkpoint is missing tensor {name}")
        stored = checkpoint.tensors[name]
        if stored.shape != p.shape:
            raise CheckpointError(
                f"tensor {name} shape {stored.shape} != expected {p.shape}"
            )
        p[...] = stored
    opt_state = OptimizerState.for_network(net)
    opt_state.step = int(checkpoint.meta.get("optimizer_step", 0))
    for name in params:
        if f"adam_m.{name}" in checkpoint.tensors:
            opt_state.m[name][...] = checkpoint.tensors[f"adam_m.{name}"]
            opt_state.v[name][...] = checkpoint.tensors[f"adam_v.{name}"]
    return net, opt_state
