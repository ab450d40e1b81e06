"""Decomposed two-model sampling: temporal motion refining + spatial
quality elevating.

Each selected step of the chain is split in two. Temporal motion refining
hands the current latent to the video model: project to clean, low-pass
filter along the frame axis, partially re-noise and denoise under the
video model's schedule, project to clean again, then deterministically
invert back up to the current timestep under the image model's schedule.
Spatial quality elevating then runs one ordinary denoising step with the
cross-frame-inflated image model. Unselected steps run only the latter.

Latents cross between the two models exclusively through clean
projections, which is what makes two different noise schedules
interoperable; the emitted trace records every phase so that this
hand-off discipline is mechanically checkable.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import make_attention_params, wrap_crossframe
from .denoiser import Denoiser, cfg_eps, make_t2i_toy, make_t2v_toy
from .freqfilter import TEMPORAL, LowPassMask, gaussian_mask, lpff
from .sampler import SamplerConfig, ddim_invert, ddim_step, sdedit_chain
from .schedule import (
    NoiseSchedule,
    TimestepGrid,
    forward_diffuse,
    make_schedule,
    project_clean,
    select_refine_steps,
    select_timesteps,
    snr_matched_timestep,
)

INVERSION_STRATEGIES = ("ddim", "same_noise", "random_noise")


@dataclass(frozen=True)
class ElevatorPlan:
    """Everything one elevated sampling run needs, immutably."""

    shape: tuple
    t2v_model: Denoiser
    t2v_schedule: NoiseSchedule
    t2i_model: Denoiser
    t2i_schedule: NoiseSchedule
    grid: TimestepGrid
    n_sdedit: int
    filter_mask: LowPassMask
    filter_axes: tuple = (TEMPORAL,)
    filter_every_refine: bool = True
    cfg_t2v: SamplerConfig = field(default_factory=SamplerConfig)
    cfg_t2i: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0
    inversion: str = "ddim"
    snr_match: bool = False
    # Model for the clean projections and the inversion inside refining.
    # Defaults to t2i_model; the default plan passes the uninflated
    # posterior here because a clean projection divides by sqrt(alpha_bar)
    # and any systematic epsilon miscalibration (such as the cross-frame
    # blend) gets amplified without bound as alpha_bar -> 0.
    t2i_project_model: Denoiser | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(x) for x in self.shape))
        object.__setattr__(self, "filter_axes", tuple(self.filter_axes))
        if self.t2v_schedule.total_steps != self.t2i_schedule.total_steps:
            raise ValueError(
                "plan invalid: schedules must share total_steps for index alignment"
            )
        if self.inversion not in INVERSION_STRATEGIES:
            raise ValueError(f"plan invalid: unknown inversion strategy {self.inversion!r}")
        if self.n_sdedit < 0:
            raise ValueError("plan invalid: n_sdedit must be >= 0")
        if self.filter_mask.frames != self.shape[0]:
            raise ValueError("plan invalid: filter mask length != frame count")
        steps = self.grid.steps
        for t in self.grid.refine_set:
            if self.n_sdedit > len(steps) - steps.index(t):
                raise ValueError(
                    f"plan invalid: n_sdedit {self.n_sdedit} exceeds grid depth below {t}"
                )


def _trace_record(trace, *, timestep, phase, model, schedule, space, z):
    if trace is None:
        return
    corr = float("nan")
    if z.shape[0] >= 2:
        flat = z.reshape(z.shape[0], -1)
        norms = np.linalg.norm(flat, axis=1)
        if np.all(norms > 0):
            corr = float(
                np.mean(np.sum(flat[:-1] * flat[1:], axis=1) / (norms[:-1] * norms[1:]))
            )
    trace.append(
        {
            "timestep": int(timestep),
            "phase": phase,
            "model": model,
            "schedule": schedule,
            "space": space,
            "mean": float(z.mean()),
            "std": float(z.std()),
            "frame_corr": corr,
        }
    )


def _sdedit_timesteps(plan: ElevatorPlan, t: int) -> list:
    """Descending chain the video-side partial re-noising walks, in video
    schedule indices. Index identity by default; optionally SNR-matched."""
    idx = plan.grid.index_of(t)
    shared = list(plan.grid.steps[idx : idx + plan.n_sdedit + 1])
    if len(shared) < plan.n_sdedit + 1:
        shared.append(0)
    if not plan.snr_match:
        return shared
    matched = []
    for u in shared:
        m = 0 if u == 0 else snr_matched_timestep(plan.t2i_schedule, plan.t2v_schedule, u)
        if matched and m >= matched[-1]:
            m = matched[-1] - 1  # keep the chain strictly decreasing
        matched.append(max(m, 0))
        if matched[-1] == 0:
            break  # chain exhausted early; remaining hops would be degenerate
    return matched


def refine_temporal(
    z_t: np.ndarray,
    t: int,
    plan: ElevatorPlan,
    rng: np.random.Generator,
    trace: list | None = None,
) -> np.ndarray:
    """Refine motion at timestep ``t`` and return a latent back in the
    image model's noise distribution at the same index."""
    if t not in plan.grid.refine_set:
        raise ValueError(f"step not refinable: {t} not in refine_set")
    s_i, s_v = plan.t2i_schedule, plan.t2v_schedule
    projector = plan.t2i_project_model or plan.t2i_model

    eps_i = cfg_eps(projector, z_t, t, plan.cfg_t2i.guidance, s_i)
    clean = project_clean(z_t, eps_i, t, s_i)
    _trace_record(trace, timestep=t, phase="refine.project", model="t2i",
                  schedule="t2i", space="clean", z=clean)

    first_refine = t == max(plan.grid.refine_set)
    if plan.filter_every_refine or first_refine:
        clean = lpff(clean, plan.filter_mask, plan.filter_axes)
        _trace_record(trace, timestep=t, phase="refine.lpff", model=None,
                      schedule=None, space="clean", z=clean)

    if plan.n_sdedit > 0:
        chain = _sdedit_timesteps(plan, t)
        z_v, t_out = sdedit_chain(plan.t2v_model, clean, chain, s_v, plan.cfg_t2v, rng)
        _trace_record(trace, timestep=t_out, phase="refine.sdedit", model="t2v",
                      schedule="t2v", space="noise", z=z_v)
        if t_out > 0:
            eps_v = cfg_eps(plan.t2v_model, z_v, t_out, plan.cfg_t2v.guidance, s_v)
            clean = project_clean(z_v, eps_v, t_out, s_v)
        else:
            clean = z_v
        _trace_record(trace, timestep=t_out, phase="refine.project_t2v", model="t2v",
                      schedule="t2v", space="clean", z=clean)

    if plan.inversion == "ddim":
        z_out = ddim_invert(projector, clean, plan.grid, t, s_i)
    elif plan.inversion == "random_noise":
        z_out = forward_diffuse(clean, t, rng.standard_normal(clean.shape), s_i)
    else:  # same_noise: one draw shared by every frame
        noise = np.broadcast_to(
            rng.standard_normal((1,) + clean.shape[1:]), clean.shape
        )
        z_out = forward_diffuse(clean, t, noise, s_i)
    _trace_record(trace, timestep=t, phase=f"refine.invert.{plan.inversion}",
                  model="t2i", schedule="t2i", space="noise", z=z_out)
    return z_out


def elevate_spatial(
    z_t: np.ndarray,
    t: int,
    t_prev: int,
    plan: ElevatorPlan,
    rng: np.random.Generator,
    trace: list | None = None,
) -> np.ndarray:
    """One denoising step under the inflated image model."""
    out = ddim_step(plan.t2i_model, z_t, t, t_prev, plan.t2i_schedule, plan.cfg_t2i, rng)
    _trace_record(trace, timestep=t_prev, phase="elevate.step", model="t2i",
                  schedule="t2i", space="noise" if t_prev > 0 else "clean", z=out)
    return out


def elevate_sample(plan: ElevatorPlan) -> tuple:
    """Run the full decomposed chain from seeded noise to a clean latent.

    Returns ``(latent, trace)`` where the trace holds one record per phase
    per step.
    """
    rng = np.random.default_rng(plan.seed)
    z = rng.standard_normal(plan.shape)
    trace: list = []
    _trace_record(trace, timestep=plan.grid.steps[0], phase="init", model=None,
                  schedule="t2i", space="noise", z=z)
    steps = plan.grid.steps
    for i, t in enumerate(steps):
        if t in plan.grid.refine_set:
            z = refine_temporal(z, t, plan, rng, trace)
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        z = elevate_spatial(z, t, t_prev, plan, rng, trace)
    return z, trace


def baseline_sample(
    model: Denoiser,
    s: NoiseSchedule,
    grid: TimestepGrid,
    cfg: SamplerConfig,
    seed: int,
    shape: tuple = (16, 4, 16, 16),
    model_tag: str = "t2v",
) -> tuple:
    """Plain single-model chain from seeded noise, same trace format.

    The latent sequence is bit-identical to ``ddim_sample`` from the same
    seeded start; only the trace is added.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(shape)
    trace: list = []
    _trace_record(trace, timestep=grid.steps[0], phase="init", model=None,
                  schedule=model_tag, space="noise", z=z)
    steps = grid.steps
    for i, t in enumerate(steps):
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        z = ddim_step(model, z, t, t_prev, s, cfg, rng)
        _trace_record(trace, timestep=t_prev, phase="baseline.step", model=model_tag,
                      schedule=model_tag, space="noise" if t_prev > 0 else "clean", z=z)
    return z, trace


def trace_violations(trace: list) -> list:
    """Structural violations in a trace: a latent may only move between
    the two models through a clean projection, and each model may consult
    only its own schedule. Empty list means the run was well-formed."""
    violations = []
    last_model = None
    clean_between = False
    for r in trace:
        if r["model"] in ("t2v", "t2i") and r["schedule"] != r["model"]:
            violations.append(
                f"schedule isolation: {r['phase']} used {r['schedule']} for {r['model']}"
            )
        if r["model"] is None:
            if r["space"] == "clean":
                clean_between = True
            continue
        if last_model is not None and r["model"] != last_model and not clean_between:
            violations.append(
                f"direct hand-off: {last_model} -> {r['model']} at {r['phase']} "
                f"t={r['timestep']} without a clean projection"
            )
        clean_between = r["space"] == "clean"
        last_model = r["model"]
    return violations


def make_default_plan(**overrides) -> ElevatorPlan:
    """The canonical desk-scale recipe.

    16x4x16x16 latents, T = 1000 on both sides (image side linear betas,
    video side scaled-linear so the cross-schedule machinery is always
    exercised), 50 sampling steps with 5 refining steps, 9 video-model
    iterations per refinement, quarter-band temporal Gaussian filter, and
    a 0.3 cross-frame attention blend. Any field can be overridden.
    """
    shape = overrides.pop("shape", (16, 4, 16, 16))
    f, c, h, w = shape
    t2i_schedule = overrides.pop(
        "t2i_schedule", make_schedule("linear_beta", 1000, beta_start=1e-4, beta_end=2e-2)
    )
    t2v_schedule = overrides.pop(
        "t2v_schedule",
        make_schedule("scaled_linear_beta", 1000, beta_start=1e-4, beta_end=2e-2),
    )
    t2v_model = overrides.pop("t2v_model", make_t2v_toy(f, c, h, w))
    t2i_model = overrides.pop("t2i_model", None)
    if t2i_model is None:
        mix = overrides.pop("crossframe_mix", 0.3)
        params = make_attention_params(c, seed=overrides.pop("attention_seed", 1234))
        base = make_t2i_toy(f, c, h, w)
        t2i_model = wrap_crossframe(base, params, mix)
        overrides.setdefault("t2i_project_model", base)
    else:
        overrides.pop("crossframe_mix", None)
        overrides.pop("attention_seed", None)
    grid = overrides.pop("grid", None)
    if grid is None:
        grid = select_refine_steps(
            select_timesteps(t2i_schedule, overrides.pop("num_steps", 50)),
            overrides.pop("num_refine_steps", 5),
        )
    else:
        overrides.pop("num_steps", None)
        overrides.pop("num_refine_steps", None)
    mask = overrides.pop("filter_mask", None)
    if mask is None:
        mask = gaussian_mask(f, overrides.pop("filter_d0", 0.25), spatial_shape=(h, w))
    else:
        overrides.pop("filter_d0", None)
    plan = ElevatorPlan(
        shape=shape,
        t2v_model=t2v_model,
        t2v_schedule=t2v_schedule,
        t2i_model=t2i_model,
        t2i_schedule=t2i_schedule,
        grid=grid,
        n_sdedit=overrides.pop("n_sdedit", 9),
        filter_mask=mask,
        **overrides,
    )
    return plan


def derive_plan(plan: ElevatorPlan, **changes) -> ElevatorPlan:
    """A copy of the plan with the given fields replaced."""
    return replace(plan, **changes)
