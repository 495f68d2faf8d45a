"""Checkpoint format: ``manifest.json`` plus one raw little-endian file per array.

The manifest lists arrays in a fixed order with name, shape, dtype and file
name; everything non-array (hyperparameters, vocabularies) goes under the
manifest's ``config`` key.  Model weights use ``<f4``; classical models may
store ``<f8``/``<i8`` arrays so that thresholds reload bit-exactly.
"""

from __future__ import annotations

import json
import re
from collections import OrderedDict
from pathlib import Path

import numpy as np

from revsent.errors import DataError

FORMAT_VERSION = 1
_ALLOWED = {"<f4", "<f8", "<i8"}


def _file_name(index: int, name: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", name)
    return f"{index:04d}_{safe}.bin"


def save_checkpoint(directory, arrays, config: dict | None = None, default_dtype: str = "<f4") -> Path:
    if default_dtype not in ("<f4", "<f8"):
        raise ValueError(f"float payload dtype must be <f4 or <f8, got {default_dtype}")
    directory = Path(directory)
    payload_dir = directory / "params"
    payload_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (name, value) in enumerate(arrays.items()):
        value = np.asarray(value)
        if value.dtype.kind == "f":
            dtype = default_dtype
        elif value.dtype.kind in "iub":
            dtype = "<i8"
        else:
            raise TypeError(f"cannot checkpoint {name} with dtype {value.dtype}")
        fname = _file_name(i, name)
        (payload_dir / fname).write_bytes(np.ascontiguousarray(value, dtype=dtype).tobytes())
        entries.append({"name": name, "shape": list(value.shape), "dtype": dtype, "file": fname})
    manifest = {"format_version": FORMAT_VERSION, "parameters": entries, "config": config or {}}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_checkpoint(directory) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError:
        raise DataError(f"no manifest.json in checkpoint directory {directory}") from None
    arrays: OrderedDict[str, np.ndarray] = OrderedDict()
    for entry in manifest["parameters"]:
        if entry["dtype"] not in _ALLOWED:
            raise DataError(f"{entry['name']}: unsupported payload dtype {entry['dtype']}")
        raw = (directory / "params" / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype=entry["dtype"])
        expected = int(np.prod(entry["shape"], dtype=np.int64))
        if arr.size != expected:
            raise DataError(f"{entry['name']}: payload has {arr.size} values, manifest shape {entry['shape']}")
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return arrays, manifest.get("config", {})
