"""Readers and writers for the pipeline's on-disk formats.

Depth maps and float images travel as PFM (32-bit float, little-endian via a
negative scale field, rows stored bottom-up).  8-bit images travel as binary
PPM (P6, maxval 255); PNG is supported read-only when Pillow is available.
Point clouds travel as ASCII PLY.  All writers are deterministic: the same
array always produces the same bytes.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed or unsupported file content."""


# ---------------------------------------------------------------------------
# PFM


def write_pfm(path: str | os.PathLike, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float array as little-endian PFM."""
    a = np.asarray(data, dtype=np.float32)
    if a.ndim == 2:
        header = b"Pf"
        h, w = a.shape
    elif a.ndim == 3 and a.shape[2] == 3:
        header = b"PF"
        h, w = a.shape[:2]
    else:
        raise FormatError("PFM supports (H, W) or (H, W, 3) arrays")
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(a[::-1]).astype("<f4").tobytes())


def _read_token(fh) -> bytes:
    """Next whitespace-delimited header token, skipping comment lines."""
    token = b""
    while True:
        ch = fh.read(1)
        if ch == b"":
            raise FormatError("unexpected end of PFM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    """Read a PFM file into float32, shape (H, W) or (H, W, 3)."""
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise FormatError(f"{path}: not a PFM file (magic {magic!r})")
        try:
            w = int(_read_token(fh))
            h = int(_read_token(fh))
            scale = float(_read_token(fh))
        except ValueError as exc:
            raise FormatError(f"{path}: bad PFM header: {exc}") from exc
        if w <= 0 or h <= 0 or scale == 0.0:
            raise FormatError(f"{path}: bad PFM dimensions or scale")
        dtype = "<f4" if scale < 0.0 else ">f4"
        raw = fh.read(w * h * channels * 4)
        if len(raw) != w * h * channels * 4:
            raise FormatError(f"{path}: truncated PFM payload")
        a = np.frombuffer(raw, dtype=dtype).reshape(
            (h, w) if channels == 1 else (h, w, 3)
        )
    return a[::-1].astype(np.float32)


def write_depth(path: str | os.PathLike, depth: np.ndarray) -> None:
    write_pfm(path, np.asarray(depth, dtype=np.float64))


def read_depth(path: str | os.PathLike) -> np.ndarray:
    a = read_pfm(path)
    if a.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel depth map")
    return a.astype(np.float64)


# ---------------------------------------------------------------------------
# PPM / PNG


def write_ppm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write an image as binary PPM; floats in [0, 1] are quantized to 8 bits."""
    a = np.asarray(image)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise FormatError("PPM supports (H, W), (H, W, 1) or (H, W, 3) arrays")
    if a.shape[2] == 1:
        a = np.repeat(a, 3, axis=2)
    if a.dtype != np.uint8:
        a = np.rint(np.clip(a.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = a.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PPM into floats in [0, 1], shape (H, W, 3)."""
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic != b"P6":
            raise FormatError(f"{path}: not a binary PPM (magic {magic!r})")
        try:
            w = int(_read_token(fh))
            h = int(_read_token(fh))
            maxval = int(_read_token(fh))
        except ValueError as exc:
            raise FormatError(f"{path}: bad PPM header: {exc}") from exc
        if w <= 0 or h <= 0 or maxval != 255:
            raise FormatError(f"{path}: unsupported PPM header")
        raw = fh.read(w * h * 3)
        if len(raw) != w * h * 3:
            raise FormatError(f"{path}: truncated PPM payload")
    a = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return a.astype(np.float64) / 255.0


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read an image by extension: .pfm (float), .ppm (8-bit), .png (via Pillow)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path).astype(np.float64)
    if suffix == ".ppm":
        return read_ppm(path)
    if suffix == ".png":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise FormatError("reading PNG requires Pillow") from exc
        with Image.open(path) as img:
            a = np.asarray(img.convert("RGB"), dtype=np.float64)
        return a / 255.0
    raise FormatError(f"{path}: unsupported image extension {suffix!r}")


# ---------------------------------------------------------------------------
# PLY


def write_ply(
    path: str | os.PathLike,
    points: np.ndarray,
    colors: np.ndarray | None = None,
) -> None:
    """Write an ASCII PLY cloud; colors (floats in [0, 1]) become uchar RGB."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c = None
    if colors is not None:
        c = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        if c.shape[0] != p.shape[0]:
            raise FormatError("colors must match points 1:1")
        c = np.rint(np.clip(c, 0.0, 1.0) * 255.0).astype(np.uint8)
    lines = ["ply", "format ascii 1.0", f"element vertex {p.shape[0]}"]
    lines += [f"property float {axis}" for axis in "xyz"]
    if c is not None:
        lines += [f"property uchar {name}" for name in ("red", "green", "blue")]
    lines.append("end_header")
    out = ["\n".join(lines)]
    for i in range(p.shape[0]):
        row = f"{float(p[i, 0])!r} {float(p[i, 1])!r} {float(p[i, 2])!r}"
        if c is not None:
            row += f" {c[i, 0]} {c[i, 1]} {c[i, 2]}"
        out.append(row)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def read_ply(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray | None]:
    """Read an ASCII PLY written by write_ply; returns (points, colors|None)."""
    with open(path, "r", encoding="ascii") as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise FormatError(f"{path}: not a PLY file")
        count = None
        props: list[str] = []
        while True:
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: missing end_header")
            line = line.strip()
            if line == "end_header":
                break
            parts = line.split()
            if parts[:2] == ["element", "vertex"]:
                count = int(parts[2])
            elif parts and parts[0] == "property":
                props.append(parts[2])
        if count is None:
            raise FormatError(f"{path}: no vertex element")
        has_color = "red" in props
        pts = np.zeros((count, 3))
        cols = np.zeros((count, 3)) if has_color else None
        for i in range(count):
            parts = fh.readline().split()
            if len(parts) < (6 if has_color else 3):
                raise FormatError(f"{path}: truncated vertex list at row {i}")
            pts[i] = [float(v) for v in parts[:3]]
            if cols is not None:
                cols[i] = [int(v) / 255.0 for v in parts[3:6]]
    return pts, cols
