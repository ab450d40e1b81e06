"""Frequency-domain low-pass filtering of latent videos.

The temporal filter runs an FFT along the frame axis independently per
channel and pixel, multiplies by a conjugate-symmetric gain mask, and
transforms back; the optional spatial variant does the same over (H, W)
per frame and channel. Gains are capped at 1 and the DC gain is pinned to
1, so filtering never amplifies and never moves the per-pixel mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TEMPORAL = "temporal"
SPATIAL = "spatial"


def _check_symmetric(gains: np.ndarray) -> bool:
    idx = tuple((-np.arange(n)) % n for n in gains.shape)
    mirrored = gains[np.ix_(*idx)] if gains.ndim > 1 else gains[idx[0]]
    return np.allclose(gains, mirrored, rtol=0, atol=1e-12)


@dataclass(frozen=True)
class LowPassMask:
    """Per-bin gains along the frame axis, optionally also over (H, W)."""

    gains: np.ndarray
    spatial_gains: np.ndarray | None = None
    d0: float = math.inf

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.float64)
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        for name, g in (("gains", gains), ("spatial_gains", self.spatial_gains)):
            if g is None:
                continue
            g = np.asarray(g, dtype=np.float64)
            if name == "spatial_gains":
                g.setflags(write=False)
                object.__setattr__(self, "spatial_gains", g)
            if g.flat[0] != 1.0:
                raise ValueError(f"{name}: gain at zero frequency must be 1")
            if np.any(g < 0) or np.any(g > 1):
                raise ValueError(f"{name}: gains must lie in [0, 1]")
            if not _check_symmetric(g):
                raise ValueError(f"{name}: gains must be conjugate-symmetric")

    @property
    def frames(self) -> int:
        return self.gains.shape[0]


def gaussian_mask(
    frames: int,
    d0: float,
    spatial_shape: tuple | None = None,
    spatial_d0: float | None = None,
) -> LowPassMask:
    """Gaussian gains ``exp(-f^2 / (2 d0^2))`` over normalized frequency.

    ``spatial_shape=(H, W)`` adds a matching 2-D mask (cutoff
    ``spatial_d0``, defaulting to ``d0``) for the spatial-temporal
    variant.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if not d0 > 0:
        raise ValueError(f"invalid d0: {d0}")
    f = np.fft.fftfreq(frames)
    gains = np.exp(-(f ** 2) / (2.0 * d0 ** 2))
    gains[0] = 1.0
    spatial = None
    if spatial_shape is not None:
        sd0 = d0 if spatial_d0 is None else spatial_d0
        if not sd0 > 0:
            raise ValueError(f"invalid d0: {sd0}")
        h, w = spatial_shape
        fy = np.fft.fftfreq(h)
        fx = np.fft.fftfreq(w)
        f2 = fy[:, None] ** 2 + fx[None, :] ** 2
        spatial = np.exp(-f2 / (2.0 * sd0 ** 2))
        spatial[0, 0] = 1.0
    return LowPassMask(gains=gains, spatial_gains=spatial, d0=d0)


def identity_mask(frames: int, spatial_shape: tuple | None = None) -> LowPassMask:
    """All-ones mask; filtering with it is the identity."""
    spatial = None if spatial_shape is None else np.ones(spatial_shape)
    return LowPassMask(gains=np.ones(frames), spatial_gains=spatial, d0=math.inf)


def lpff(video: np.ndarray, mask: LowPassMask, axes=(TEMPORAL,)) -> np.ndarray:
    """Apply the mask along the selected axes; output is real, same shape."""
    axes = tuple(axes)
    if TEMPORAL not in axes or not set(axes) <= {TEMPORAL, SPATIAL}:
        raise ValueError(f"axes must be (temporal,) or (temporal, spatial), got {axes}")
    if video.ndim != 4:
        raise ValueError(f"expected (F, C, H, W) video, got shape {video.shape}")
    if mask.gains.shape[0] != video.shape[0]:
        raise ValueError(
            f"mask shape mismatch: {mask.gains.shape[0]} gains vs {video.shape[0]} frames"
        )
    freq = np.fft.fft(video, axis=0) * mask.gains[:, None, None, None]
    out = np.fft.ifft(freq, axis=0).real
    if SPATIAL in axes:
        if mask.spatial_gains is None:
            raise ValueError("mask shape mismatch: no spatial gains on this mask")
        if mask.spatial_gains.shape != video.shape[2:]:
            raise ValueError(
                f"mask shape mismatch: spatial gains {mask.spatial_gains.shape} "
                f"vs frame {video.shape[2:]}"
            )
        freq = np.fft.fft2(out, axes=(-2, -1)) * mask.spatial_gains
        out = np.fft.ifft2(freq, axes=(-2, -1)).real
    return out
