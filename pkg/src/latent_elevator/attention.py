"""Scaled dot-product attention and its first-only cross-frame inflation.

Inflating a per-frame model along the temporal axis has two parts.
Convolutions inflate trivially at this scale: a 1x3x3 kernel is exactly
per-frame application of the 3x3 kernel, which a per-frame denoiser
already is, so no code is needed. Attention is the exercised mechanism:
every frame's queries attend to the keys and values of frame 0, anchoring
appearance across frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoiser import Condition, Denoiser
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class AttentionParams:
    """Query/key/value projection matrices, each ``d_in x d``."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
            if m.ndim != 2 or not np.all(np.isfinite(m)):
                raise ValueError(f"{name} must be a finite 2-D matrix")
        if not self.w_q.shape == self.w_k.shape == self.w_v.shape:
            raise ValueError("projection matrices must share one shape")

    @property
    def d_in(self) -> int:
        return self.w_q.shape[0]

    @property
    def d(self) -> int:
        return self.w_q.shape[1]


def make_attention_params(d_in: int, d: int | None = None, seed: int = 0) -> AttentionParams:
    """Seeded random orthonormal projections; orthonormality keeps token
    scales stable in the absence of trained weights."""
    d = d_in if d is None else d
    if d > d_in:
        raise ValueError("d must not exceed d_in for orthonormal columns")
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(3):
        q, _ = np.linalg.qr(rng.standard_normal((d_in, d_in)))
        mats.append(q[:, :d])
    return AttentionParams(*mats)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise ``softmax(q k^T / sqrt(d)) v`` for 2-D operands."""
    q, k, v = np.asarray(q), np.asarray(k), np.asarray(v)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("attention operands must be 2-D")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"shape mismatch: query width {q.shape[1]} vs key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"shape mismatch: {k.shape[0]} keys vs {v.shape[0]} values")
    if k.shape[0] < 1:
        raise ValueError("need at least one key/value row")
    weights = _softmax(q @ k.T / np.sqrt(q.shape[1]))
    return weights @ v


def first_only_cross_frame(frames, params: AttentionParams) -> np.ndarray:
    """Attend every frame's tokens to frame 0's keys and values.

    ``frames`` is an ``(F, n, d_in)`` stack of token matrices (or a
    sequence of equal-shaped matrices). Frame 0's output is its own
    self-attention.
    """
    if not isinstance(frames, np.ndarray):
        shapes = {np.asarray(f).shape for f in frames}
        if len(shapes) > 1:
            raise ValueError(f"ragged frames: token matrices differ in shape {shapes}")
        frames = np.stack([np.asarray(f) for f in frames])
    if frames.ndim != 3:
        raise ValueError(f"expected (F, n, d_in) tokens, got shape {frames.shape}")
    if frames.shape[2] != params.d_in:
        raise ValueError(f"shape mismatch: token width {frames.shape[2]} vs {params.d_in}")
    q = frames @ params.w_q                      # (F, n, d)
    k0 = frames[0] @ params.w_k                  # (n, d)
    v0 = frames[0] @ params.w_v
    weights = _softmax(q @ k0.T / np.sqrt(params.d))
    return weights @ v0


class CrossFrameDenoiser:
    """Wrap a denoiser so its predictions share appearance across frames.

    The base prediction is reshaped into per-frame token matrices (one
    token per pixel, width C), passed through first-only cross-frame
    attention, and blended back: ``(1 - mix) * eps + mix * attended``.
    ``mix == 0`` returns the base prediction unchanged, bit for bit.
    """

    def __init__(self, base: Denoiser, params: AttentionParams, mix: float):
        if not 0.0 <= mix <= 1.0:
            raise ValueError(f"mix must be in [0, 1], got {mix}")
        if params.d != params.d_in:
            raise ValueError("incompatible shape: need square projections to blend tokens")
        self.base = base
        self.params = params
        self.mix = mix

    def predict_eps(
        self, z: np.ndarray, t: int, cond: Condition | None, s: NoiseSchedule
    ) -> np.ndarray:
        eps = self.base.predict_eps(z, t, cond, s)
        if self.mix == 0.0:
            return eps
        f, c, h, w = eps.shape
        if c != self.params.d_in:
            raise ValueError(f"incompatible shape: {c} channels vs width {self.params.d_in}")
        tokens = eps.transpose(0, 2, 3, 1).reshape(f, h * w, c)
        attended = first_only_cross_frame(tokens, self.params)
        attended = attended.reshape(f, h, w, c).transpose(0, 3, 1, 2)
        return (1.0 - self.mix) * eps + self.mix * attended


def wrap_crossframe(base: Denoiser, params: AttentionParams, mix: float) -> CrossFrameDenoiser:
    return CrossFrameDenoiser(base, params, mix)
