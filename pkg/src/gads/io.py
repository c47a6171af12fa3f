"""Image and depth-map files.

* Images: binary PPM (``P6``, 8-bit) and, when Pillow is installed, PNG.
* Depth maps: raw little-endian float32, row-major, plus a ``.hdr`` sidecar
  holding one line ``"<width> <height> <sentinel>"``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .rendering import DepthMap


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0) * 255).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    img = to_uint8(rgb)
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(img[..., :3]).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary 8-bit PPM into floats in [0, 1]."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("only 8-bit binary PPM (P6) is supported")
    w, h = int(fields[1]), int(fields[2])
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos + 1)
    return pix.reshape(h, w, 3).astype(np.float64) / 255.0


def write_png(path, rgb: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(to_uint8(rgb)).save(path)


def write_depth(path, depth: DepthMap) -> None:
    path = Path(path)
    np.ascontiguousarray(depth.depth, dtype="<f4").tofile(path)
    path.with_suffix(path.suffix + ".hdr").write_text(
        f"{depth.width} {depth.height} {depth.sentinel!r}\n")


def read_depth(path) -> DepthMap:
    path = Path(path)
    w, h, s = path.with_suffix(path.suffix + ".hdr").read_text().split()
    d = np.fromfile(path, dtype="<f4").astype(np.float64).reshape(int(h), int(w))
    return DepthMap(d, float(s))
