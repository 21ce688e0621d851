"""File formats: CSV tables, 16-bit PGM images and JSON run manifests."""

from __future__ import annotations

import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST_SCHEMA = 1
GRAPH_HEIGHT = 256
PGM_MAX = 65535


def write_csv(path, header: list[str], columns: list[np.ndarray], formats: list[str] | None = None) -> None:
    """Columns of equal length to CSV with a header row; floats use repr-exact %.17g."""
    columns = [np.asarray(c) for c in columns]
    if len(columns) != len(header):
        raise ValueError("one header name per column")
    if formats is None:
        formats = ["%d" if np.issubdtype(c.dtype, np.integer) else "%.17g" for c in columns]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if columns and len(columns[0]):
            np.savetxt(fh, np.column_stack(columns).astype(object), fmt=formats, delimiter=",", newline="\n")


class CsvAppender:
    """Streaming CSV writer for chunked outputs."""

    def __init__(self, path, header: list[str], formats: list[str]):
        self._fh = open(path, "w", newline="\n")
        self._fh.write(",".join(header) + "\n")
        self._fmt = formats

    def append(self, columns: list[np.ndarray]) -> None:
        if len(columns[0]):
            np.savetxt(self._fh, np.column_stack(columns).astype(object), fmt=self._fmt, delimiter=",", newline="\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = fh.read()
    if not body.strip():
        return header, np.empty((0, len(header)))
    return header, np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)


def log_normalize(values) -> tuple[np.ndarray, float, float]:
    """log10(f + 1) scaled to [0, 1] by its min and max; returns the scaled array and (lo, hi)."""
    t = np.log10(np.asarray(values, dtype=float) + 1.0)
    lo, hi = float(t.min()), float(t.max())
    scaled = np.zeros_like(t) if hi == lo else (t - lo) / (hi - lo)
    return scaled, lo, hi


def graph_raster(scaled: np.ndarray, height: int = GRAPH_HEIGHT) -> np.ndarray:
    """Render a 1D profile in [0, 1] as a filled graph, one column per sample, origin at the bottom."""
    level = np.rint(np.asarray(scaled) * (height - 1)).astype(int)
    rows = np.arange(height)[::-1, None]
    return (rows <= level[None, :]).astype(float)


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5 PGM, maxval 65535, big-endian samples. ``image`` holds values in [0, 1]."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    if np.any(img < 0) or np.any(img > 1):
        raise ValueError("image values must lie in [0, 1]")
    pix = np.rint(img * PGM_MAX).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end].decode("ascii"))
        pos = end
    pos += 1  # single whitespace after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5" or maxval != PGM_MAX:
        raise ValueError("not a 16-bit binary PGM")
    return np.frombuffer(raw[pos : pos + 2 * w * h], dtype=">u2").reshape(h, w)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, command: str, params: dict, outputs: dict[str, str], extra: dict | None = None) -> dict:
    """Record a run: command, parameters, output files with hashes, and extra values such as image scaling."""
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "tool": "qfract",
        "version": __version__,
        "command": command,
        "params": params,
        "outputs": {role: {"path": str(p), "sha256": sha256_file(p)} for role, p in outputs.items()},
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {manifest.get('schema')!r}")
    for key in ("command", "params", "outputs"):
        if key not in manifest:
            raise ValueError(f"manifest lacks {key!r}")
    return manifest
