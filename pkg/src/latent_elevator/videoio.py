"""Latent tensor persistence and frame rendering.

Latent files (``.elvt``) use a fixed 32-byte header so any language can
parse them for cross-implementation checks:

    offset  size  field
    0       4     magic ``ELVT``
    4       2     format version, little-endian u16 (currently 1)
    6       16    F, C, H, W as little-endian u32
    22      10    reserved, zero

followed by ``F * C * H * W`` little-endian float32 values, frame-major.

Renders are binary PPM (P6), one image per frame, min/max normalized per
video; the normalization constants go into the run manifest.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ELVT"
VERSION = 1
HEADER_SIZE = 32
_MAX_ELEMENTS = 1 << 31

# Fixed projection used to visualize 4-channel latents as RGB.
FOUR_TO_THREE = np.array(
    [
        [0.6, 0.2, 0.1, 0.1],
        [0.1, 0.6, 0.2, 0.1],
        [0.1, 0.1, 0.2, 0.6],
    ]
)


def save_latent(v: np.ndarray, path) -> None:
    """Write a latent video; float64 input is stored as float32."""
    if v.ndim != 4:
        raise ValueError(f"expected (F, C, H, W) latent, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("latent entries must be finite")
    header = MAGIC + struct.pack("<H4I", VERSION, *v.shape)
    header += b"\x00" * (HEADER_SIZE - len(header))
    data = np.ascontiguousarray(v, dtype="<f4").tobytes()
    Path(path).write_bytes(header + data)


def load_latent(path) -> np.ndarray:
    """Read a latent video back as float32; never returns a partial tensor."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise ValueError(f"truncated file: {len(raw)} bytes is smaller than the header")
    if raw[:4] != MAGIC:
        raise ValueError(f"bad magic: {raw[:4]!r}")
    version, f, c, h, w = struct.unpack("<H4I", raw[4:22])
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if min(f, c, h, w) < 1 or f * c * h * w > _MAX_ELEMENTS:
        raise ValueError(f"shape overflow: ({f}, {c}, {h}, {w})")
    expected = HEADER_SIZE + f * c * h * w * 4
    if len(raw) != expected:
        raise ValueError(f"truncated file: {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw[HEADER_SIZE:], dtype="<f4")
    return flat.reshape(f, c, h, w)


def render_frames(v: np.ndarray, path_prefix, vmin: float | None = None,
                  vmax: float | None = None) -> list:
    """Write one P6 image per frame; returns the written paths.

    Channels: 1 is replicated to gray RGB, 3 passes through, 4 maps
    through the fixed linear projection. Normalization is per video
    (min/max over all frames) unless explicit bounds are given.
    """
    if v.ndim != 4:
        raise ValueError(f"expected (F, C, H, W) latent, got shape {v.shape}")
    f, c, h, w = v.shape
    if c == 1:
        rgb = np.repeat(v, 3, axis=1)
    elif c == 3:
        rgb = v
    elif c == 4:
        rgb = np.einsum("rc,fchw->frhw", FOUR_TO_THREE, v)
    else:
        raise ValueError(f"unsupported channels: {c} (need 1, 3, or 4)")
    lo = float(rgb.min()) if vmin is None else vmin
    hi = float(rgb.max()) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((rgb - lo) / span * 255.0, 0.0, 255.0).astype(np.uint8)
    paths = []
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    for i in range(f):
        path = Path(f"{path_prefix}_{i:03d}.ppm")
        pixels = scaled[i].transpose(1, 2, 0)  # (H, W, 3) row-major
        path.write_bytes(header + pixels.tobytes())
        paths.append(str(path))
    return paths
