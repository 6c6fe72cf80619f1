"""Versioned JSON checkpoint container shared by all models.

Layout (stable across runs; floats use shortest round-trip repr):

    {
      "format": "loadcast-checkpoint",
      "version": 1,
      "kind": "<model kind>",
      "config": { ... model configuration ... },
      "params": [
        {"name": "<block name>", "shape": [..], "data": [flat row-major floats]},
        ...
      ]
    }

Parameter blocks appear in the model's declared order, so a container
round-trips to a bit-identical model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT = "loadcast-checkpoint"
VERSION = 1


def save_container(
    path: str | Path, kind: str, config: dict, names: list[str], arrays: list[np.ndarray]
) -> None:
    params = [
        {
            "name": name,
            "shape": list(arr.shape),
            "data": [float(v) for v in np.asarray(arr, dtype=np.float64).ravel()],
        }
        for name, arr in zip(names, arrays)
    ]
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "config": config,
        "params": params,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_container(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such checkpoint: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid checkpoint: {exc}") from None
    if doc.get("format") != FORMAT:
        raise DataError(f"{path}: unknown container format {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise DataError(f"{path}: unsupported container version {doc.get('version')!r}")
    arrays = {}
    for block in doc["params"]:
        arr = np.asarray(block["data"], dtype=np.float64).reshape(block["shape"])
        arrays[block["name"]] = arr
    return doc["kind"], doc["config"], arrays
