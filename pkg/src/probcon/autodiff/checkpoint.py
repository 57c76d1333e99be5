"""
Parameter Checkpoints

A checkpoint is a ``.npz`` archive mapping names to float arrays plus a JSON
header stored under ``__header__``. Arrays round-trip bit-exactly.
"""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

CHECKPOINT_VERSION = 1
HEADER_KEY = "__header__"


def save_checkpoint(
    path: Union[str, Path], tensors: Mapping[str, np.ndarray], header: Mapping[str, Any]
) -> Path:
    """Write a versioned checkpoint.

    Args:
        path: Target file (``.npz`` appended by numpy when missing)
        tensors: Name to array map
        header: JSON-serializable metadata

    Returns:
        Path of the written file
    """
    if HEADER_KEY in tensors:
        raise ValueError(f"tensor name {HEADER_KEY!r} is reserved")
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_name(path.name + ".npz")
    path.parent.mkdir(parents=True, exist_ok=True)

    document = {"version": CHECKPOINT_VERSION, **header}
    encoded = np.frombuffer(json.dumps(document, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    arrays = {name: np.asarray(value) for name, value in tensors.items()}
    with open(path, "wb") as f:
        np.savez(f, **{HEADER_KEY: encoded}, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read a checkpoint written by ``save_checkpoint``.

    Returns:
        ``(tensors, header)``

    Raises:
        ValueError: If the header is missing or the version is unsupported
    """
    with np.load(Path(path), allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise ValueError(f"{path} is not a probcon checkpoint (no header)")
        header = json.loads(archive[HEADER_KEY].tobytes().decode("utf-8"))
        tensors = {name: archive[name] for name in archive.files if name != HEADER_KEY}
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')!r}")
    return tensors, header
