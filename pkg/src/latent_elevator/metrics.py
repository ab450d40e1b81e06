"""Latent-space evaluation metrics for (F, C, H, W) videos.

These are desk-scale analogs computed directly on latents: adjacent-frame
cosine similarity for temporal consistency, temporal high-band energy
fraction for flicker, spatial high-band energy fraction for detail, and
an L1 distance between normalized spatial spectra for domain similarity.
Perceptual or embedding-based scores are deliberately absent.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .synth import GaussianPrior, spatial_frequency_grid


@dataclass(frozen=True)
class MetricReport:
    frame_consistency: float
    flicker_energy: float
    spatial_detail: float
    spectrum_distance_t2i: float
    spectrum_distance_t2v: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def field_names() -> list:
        return [f.name for f in fields(MetricReport)]


def frame_consistency(v: np.ndarray) -> float:
    """Mean cosine similarity between flattened adjacent frames."""
    if v.shape[0] < 2:
        raise ValueError("too few frames: need F >= 2")
    flat = v.reshape(v.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero frame: cosine similarity undefined")
    dots = np.sum(flat[:-1] * flat[1:], axis=1)
    return float(np.mean(dots / (norms[:-1] * norms[1:])))


def flicker_energy(v: np.ndarray, cutoff: float = 0.15) -> float:
    """Fraction of temporal-DFT energy above ``cutoff``, energy-weighted
    over channels and pixels; 0 for a constant-in-time video."""
    if v.shape[0] < 2:
        raise ValueError("too few frames: need F >= 2")
    freq = np.fft.fft(v, axis=0)
    energy = np.abs(freq) ** 2
    total = energy.sum()
    if total == 0:
        raise ValueError("degenerate input: all-zero video")
    high = np.abs(np.fft.fftfreq(v.shape[0])) > cutoff
    return float(energy[high].sum() / total)


def spatial_detail(v: np.ndarray, band: float = 0.10) -> float:
    """Per-frame fraction of spatial-DFT energy beyond frequency magnitude
    ``band``, averaged over frames."""
    if v.shape[2] < 2 or v.shape[3] < 2:
        raise ValueError("frames must be at least 2x2")
    freq = np.fft.fft2(v, axes=(-2, -1))
    energy = (np.abs(freq) ** 2).sum(axis=1)  # (F, H, W), channels pooled
    per_frame_total = energy.sum(axis=(1, 2))
    if np.any(per_frame_total == 0):
        raise ValueError("degenerate input: all-zero frame")
    high = spatial_frequency_grid(v.shape[2], v.shape[3]) > band
    per_frame_high = energy[:, high].sum(axis=1)
    return float(np.mean(per_frame_high / per_frame_total))


def spectrum_distance(v: np.ndarray, prior: GaussianPrior) -> float:
    """L1 distance between the video's normalized mean per-bin spatial
    energy and the prior's normalized spectrum."""
    if v.shape[2:] != prior.spatial_spectrum.shape:
        raise ValueError(
            f"shape mismatch: video {v.shape[2:]} vs spectrum {prior.spatial_spectrum.shape}"
        )
    freq = np.fft.fft2(v, axes=(-2, -1), norm="ortho")
    energy = (np.abs(freq) ** 2).mean(axis=(0, 1))  # (H, W)
    total = energy.sum()
    if total == 0:
        raise ValueError("degenerate input: all-zero video")
    spec = prior.spatial_spectrum
    return float(np.abs(energy / total - spec / spec.sum()).sum())


def compute_report(
    v: np.ndarray,
    t2v_prior: GaussianPrior,
    t2i_prior: GaussianPrior,
    cutoff: float = 0.15,
    band: float = 0.10,
) -> MetricReport:
    return MetricReport(
        frame_consistency=frame_consistency(v),
        flicker_energy=flicker_energy(v, cutoff),
        spatial_detail=spatial_detail(v, band),
        spectrum_distance_t2i=spectrum_distance(v, t2i_prior),
        spectrum_distance_t2v=spectrum_distance(v, t2v_prior),
    )
