"""Versioned binary model checkpoints.

Layout: 8-byte magic, little-endian uint32 version, uint64 manifest length,
UTF-8 JSON manifest, then the raw little-endian array payloads in manifest
order.  The manifest carries layer names, shapes, dtypes, freeze flags,
batchnorm running statistics and optimizer state entries; all numeric
payloads live outside the JSON so files are byte-stable across platforms.
"""

import json
import struct

import numpy as np

from ..errors import DatasetFormatError
from .models import build_model
from .optim import Adam

MAGIC = b"CHADCKPT"
VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def _entries(model, optimizer):
    entries = []
    for p in model.parameters():
        entries.append(("param", p.name, p))
    for bn in model.batchnorms():
        for bname, arr in bn.buffers().items():
            entries.append(("buffer", f"{bn.tag}.{bname}", arr))
    if optimizer is not None:
        for p in model.parameters():
            if p.name in optimizer.m:
                entries.append(("opt_m", f"m.{p.name}", optimizer.m[p.name]))
                entries.append(("opt_v", f"v.{p.name}", optimizer.v[p.name]))
    return entries


def save_checkpoint(path, model, *, optimizer=None, meta=None):
    """Write the model (and optionally optimizer state) to ``path``."""
    precision = "float32" if model.dtype == np.float32 else "float64"
    manifest = {
        "model_kind": model.kind,
        "precision": precision,
        "meta": meta or {},
        "optimizer_step": optimizer.step_count if optimizer is not None else None,
        "arrays": [],
    }
    blobs = []
    for role, name, obj in _entries(model, optimizer):
        arr = obj.value if role == "param" else obj
        dt = "float32" if arr.dtype == np.float32 else "float64"
        payload = np.ascontiguousarray(arr).astype(_DTYPES[dt]).tobytes()
        rec = {"role": role, "name": name, "shape": list(arr.shape),
               "dtype": dt, "nbytes": len(payload)}
        if role == "param":
            rec["trainable"] = bool(obj.trainable)
            rec["layer_tag"] = obj.layer_tag
        manifest["arrays"].append(rec)
        blobs.append(payload)
    doc = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(doc)))
        fh.write(doc)
        for blob in blobs:
            fh.write(blob)


def _read_manifest(fh):
    magic = fh.read(8)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad checkpoint magic {magic!r}")
    version, doc_len = struct.unpack("<IQ", fh.read(12))
    if version != VERSION:
        raise DatasetFormatError(f"unsupported checkpoint version {version}")
    return json.loads(fh.read(doc_len).decode("utf-8"))


def load_checkpoint(path, *, with_optimizer=False, optimizer_factory=None):
    """Rebuild the model (and optionally an Adam optimizer) from ``path``.

    Returns (model, meta) or (model, optimizer, meta).
    """
    with open(path, "rb") as fh:
        manifest = _read_manifest(fh)
        dtype = np.float32 if manifest["precision"] == "float32" else np.float64
        model = build_model(manifest["model_kind"], seed=0, dtype=dtype)
        params = {p.name: p for p in model.parameters()}
        bns = {bn.tag: bn for bn in model.batchnorms()}
        opt = None
        if with_optimizer:
            opt = (optimizer_factory(model.parameters()) if optimizer_factory
                   else Adam(model.parameters()))
            if manifest["optimizer_step"] is not None:
                opt.step_count = int(manifest["optimizer_step"])
        for rec in manifest["arrays"]:
            raw = fh.read(rec["nbytes"])
            arr = np.frombuffer(raw, dtype=_DTYPES[rec["dtype"]]).reshape(rec["shape"])
            arr = arr.astype(dtype)
            role, name = rec["role"], rec["name"]
            if role == "param":
                if name not in params:
                    raise DatasetFormatError(f"unknown parameter {name!r}")
                if tuple(params[name].value.shape) != tuple(rec["shape"]):
                    raise DatasetFormatError(f"shape mismatch for {name!r}")
                params[name].value[...] = arr
                params[name].trainable = bool(rec.get("trainable", True))
            elif role == "buffer":
                tag, bname = name.rsplit(".", 1)
                if tag not in bns:
                    raise DatasetFormatError(f"unknown batchnorm tag {tag!r}")
                setattr(bns[tag], bname, arr.copy())
            elif role in ("opt_m", "opt_v") and opt is not None:
                pname = name.split(".", 1)[1]
                target = opt.m if role == "opt_m" else opt.v
                if pname in target:
                    target[pname][...] = arr
    if with_optimizer:
        return model, opt, manifest.get("meta", {})
    return model, manifest.get("meta", {})


def read_meta(path):
    with open(path, "rb") as fh:
        manifest = _read_manifest(fh)
    return manifest.get("meta", {})
