"""Desk-scale two-model diffusion sampling on analytic Gaussian denoisers.

The pipeline interleaves temporal motion refining under one noise schedule
with spatial quality elevating under another, handing latents between the
two models only through clean-latent projections. Every numerical kernel
has a closed form or an independent brute-force oracle, so the whole
procedure is testable without trained weights.
"""

__version__ = "0.1.0"

from .schedule import (  # noqa: F401
    NoiseSchedule,
    TimestepGrid,
    forward_diffuse,
    make_schedule,
    project_clean,
    select_refine_steps,
    select_timesteps,
    snr,
    snr_matched_timestep,
)
from .synth import GaussianPrior, make_gp_prior, sample_prior  # noqa: F401
from .denoiser import (  # noqa: F401
    AnalyticDenoiser,
    Condition,
    Denoiser,
    NULL_CONDITION,
    analytic_eps,
    cfg_eps,
    make_t2i_toy,
    make_t2v_toy,
)
from .sampler import (  # noqa: F401
    SamplerConfig,
    ddim_invert,
    ddim_invert_step,
    ddim_sample,
    ddim_step,
    sdedit,
    step_sigma,
)
from .freqfilter import LowPassMask, gaussian_mask, identity_mask, lpff  # noqa: F401
from .attention import (  # noqa: F401
    AttentionParams,
    attention,
    first_only_cross_frame,
    make_attention_params,
    wrap_crossframe,
)
from .elevate import (  # noqa: F401
    ElevatorPlan,
    baseline_sample,
    derive_plan,
    elevate_sample,
    elevate_spatial,
    make_default_plan,
    refine_temporal,
    trace_violations,
)
from .metrics import (  # noqa: F401
    MetricReport,
    compute_report,
    flicker_energy,
    frame_consistency,
    spatial_detail,
    spectrum_distance,
)
from .videoio import load_latent, render_frames, save_latent  # noqa: F401
