"""Self-describing binary container for caches and checkpoints.

Layout::

    b"VMDG1\n"
    <8-byte little-endian header length>
    <UTF-8 JSON header>
    <one .npy record per array, in header["arrays"] order>

The header always carries ``kind`` and ``fingerprint``. Writes go to a
temporary file that is renamed into place, and the output is a pure function
of the inputs (no timestamps) so identical content gives identical bytes.
"""
from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"VMDG1\n"


class ContainerError(ValueError):
    pass


def write_container(path, header: dict, arrays: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(arrays)
    head = dict(header)
    head["arrays"] = [
        {"name": n, "dtype": str(np.asarray(arrays[n]).dtype), "shape": list(np.shape(arrays[n]))}
        for n in names
    ]
    blob = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    for n in names:
        np.lib.format.write_array(buf, np.ascontiguousarray(arrays[n]), allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise ContainerError(f"{getattr(fh, 'name', 'stream')}: not a container file")
    (n,) = struct.unpack("<Q", fh.read(8))
    return json.loads(fh.read(n).decode("utf-8"))


def read_container(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        arrays = {}
        for spec in header.get("arrays", []):
            arrays[spec["name"]] = np.lib.format.read_array(fh, allow_pickle=False)
    return header, arrays
