"""Batch experiment runner: config resolution, execution, manifest I/O.

A run is described by one JSON config; every omitted field takes a
documented default and the manifest records the fully resolved value, so
any manifest can be re-run bit for bit. Per-seed runs are independent and
execute concurrently under ``jobs > 1``, each owning its random stream
and output files.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attention import make_attention_params, wrap_crossframe
from .denoiser import AnalyticDenoiser, Condition
from .elevate import (
    ElevatorPlan,
    baseline_sample,
    elevate_sample,
    trace_violations,
)
from .freqfilter import SPATIAL, TEMPORAL, gaussian_mask, identity_mask
from .metrics import MetricReport, compute_report
from .sampler import SamplerConfig, ddim_invert, ddim_sample
from .schedule import make_schedule, select_refine_steps, select_timesteps
from .synth import make_gp_prior, sample_prior
from .videoio import render_frames, save_latent

MODES = (
    "baseline_t2v",
    "baseline_t2i",
    "elevate",
    "ablate_filter",
    "ablate_inversion",
    "ablate_steps",
    "roundtrip",
)

DEFAULT_CONFIG = {
    "mode": "elevate",
    "seeds": [0],
    "output_dir": None,
    "render": True,
    "jobs": 1,
    "check": False,
    "shape": [16, 4, 16, 16],
    "schedules": {
        "t2i": {
            "kind": "linear_beta",
            "total_steps": 1000,
            "params": {"beta_start": 1e-4, "beta_end": 2e-2},
        },
        "t2v": {
            "kind": "scaled_linear_beta",
            "total_steps": 1000,
            "params": {"beta_start": 1e-4, "beta_end": 2e-2},
        },
    },
    "priors": {
        "t2v": {"rho": 0.9, "spectrum_kind": "lowpass", "variance_scale": 1.0},
        "t2i": {"rho": 0.0, "spectrum_kind": "broadband", "variance_scale": 1.0},
    },
    "plan": {
        "num_steps": 50,
        "num_refine_steps": 5,
        "n_sdedit": 9,
        "filter": {"d0": 0.25, "axes": ["temporal"], "apply_every_refine": True},
        "eta_t2v": 0.0,
        "eta_t2i": 0.0,
        "guidance_scale": 1.0,
        "crossframe_mix": 0.3,
        "attention_seed": 1234,
        "inversion": "ddim",
        "snr_match": False,
    },
    "metrics": {"flicker_cutoff": 0.15, "detail_band": 0.10},
    "ablate_steps": {"step_counts": [50, 100]},
}


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ValueError(f"invalid config: unknown key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(config: dict | None = None) -> dict:
    """Materialize every default; reject unknown keys and bad modes."""
    resolved = _deep_merge(DEFAULT_CONFIG, config or {})
    if resolved["mode"] not in MODES:
        raise ValueError(f"invalid config: unknown mode {resolved['mode']!r}")
    if not resolved["seeds"]:
        raise ValueError("invalid config: seeds must be nonempty")
    if resolved["plan"]["inversion"] not in ("ddim", "same_noise", "random_noise"):
        raise ValueError("invalid config: unknown inversion strategy")
    return resolved


def _build_schedule(cfg: dict):
    return make_schedule(cfg["kind"], cfg["total_steps"], **cfg["params"])


def _build_grid(resolved: dict, num_steps: int | None = None, refine: int | None = None):
    t2i = _build_schedule(resolved["schedules"]["t2i"])
    plan_cfg = resolved["plan"]
    grid = select_timesteps(t2i, plan_cfg["num_steps"] if num_steps is None else num_steps)
    k = plan_cfg["num_refine_steps"] if refine is None else refine
    return select_refine_steps(grid, k)


def _build_models(resolved: dict):
    f, c, h, w = resolved["shape"]
    pv, pi = resolved["priors"]["t2v"], resolved["priors"]["t2i"]
    t2v_prior = make_gp_prior(f, c, h, w, pv["rho"], pv["spectrum_kind"], pv["variance_scale"])
    t2i_prior = make_gp_prior(f, c, h, w, pi["rho"], pi["spectrum_kind"], pi["variance_scale"])
    t2v_model = AnalyticDenoiser(t2v_prior)
    t2i_analytic = AnalyticDenoiser(t2i_prior)
    params = make_attention_params(c, seed=resolved["plan"]["attention_seed"])
    t2i_model = wrap_crossframe(t2i_analytic, params, resolved["plan"]["crossframe_mix"])
    return {
        "t2v_prior": t2v_prior,
        "t2i_prior": t2i_prior,
        "t2v_model": t2v_model,
        "t2i_analytic": t2i_analytic,
        "t2i_model": t2i_model,
    }


def build_plan(resolved: dict, seed: int, **variant) -> ElevatorPlan:
    """Reconstruct the full plan from a resolved config (the JSON form of
    an ElevatorPlan) plus per-variant adjustments."""
    f, c, h, w = resolved["shape"]
    plan_cfg = resolved["plan"]
    models = _build_models(resolved)
    grid = _build_grid(
        resolved,
        num_steps=variant.get("num_steps"),
        refine=variant.get("num_refine_steps"),
    )
    filt = plan_cfg["filter"]
    axes = tuple(variant.get("filter_axes", filt["axes"]))
    if variant.get("identity_filter"):
        mask = identity_mask(f, spatial_shape=(h, w))
    else:
        mask = gaussian_mask(f, filt["d0"], spatial_shape=(h, w))
    guidance = Condition(guidance_scale=plan_cfg["guidance_scale"])
    return ElevatorPlan(
        shape=(f, c, h, w),
        t2v_model=models["t2v_model"],
        t2v_schedule=_build_schedule(resolved["schedules"]["t2v"]),
        t2i_model=models["t2i_model"],
        t2i_schedule=_build_schedule(resolved["schedules"]["t2i"]),
        grid=grid,
        n_sdedit=plan_cfg["n_sdedit"],
        filter_mask=mask,
        filter_axes=axes,
        filter_every_refine=filt["apply_every_refine"],
        cfg_t2v=SamplerConfig(eta=plan_cfg["eta_t2v"], guidance=guidance, seed=seed),
        cfg_t2i=SamplerConfig(eta=plan_cfg["eta_t2i"], guidance=guidance, seed=seed),
        seed=seed,
        inversion=variant.get("inversion", plan_cfg["inversion"]),
        snr_match=plan_cfg["snr_match"],
        t2i_project_model=models["t2i_analytic"],
    )


def _variants_for(resolved: dict) -> list:
    mode = resolved["mode"]
    if mode == "baseline_t2v":
        return [{"name": "baseline_t2v", "kind": "baseline", "model": "t2v"}]
    if mode == "baseline_t2i":
        return [{"name": "baseline_t2i", "kind": "baseline", "model": "t2i"}]
    if mode == "elevate":
        return [{"name": "elevate", "kind": "elevate"}]
    if mode == "ablate_filter":
        return [
            {"name": "no_lpff", "kind": "elevate", "identity_filter": True},
            {"name": "temporal", "kind": "elevate", "filter_axes": [TEMPORAL]},
            {
                "name": "spatial_temporal",
                "kind": "elevate",
                "filter_axes": [TEMPORAL, SPATIAL],
            },
        ]
    if mode == "ablate_inversion":
        return [
            {"name": "same_noise", "kind": "elevate", "inversion": "same_noise"},
            {"name": "ddim", "kind": "elevate", "inversion": "ddim"},
            {"name": "random_noise", "kind": "elevate", "inversion": "random_noise"},
        ]
    if mode == "ablate_steps":
        counts = resolved["ablate_steps"]["step_counts"]
        variants = [
            {"name": f"baseline_t2v_{k}", "kind": "baseline", "model": "t2v", "num_steps": k}
            for k in counts
        ]
        variants.append(
            {"name": f"baseline_t2i_{counts[0]}", "kind": "baseline", "model": "t2i",
             "num_steps": counts[0]}
        )
        variants.append({"name": f"elevate_{counts[0]}", "kind": "elevate",
                         "num_steps": counts[0]})
        return variants
    if mode == "roundtrip":
        return [{"name": "roundtrip", "kind": "roundtrip"}]
    raise ValueError(f"invalid config: unknown mode {mode!r}")


def _run_one(resolved: dict, variant: dict, seed: int, out_dir: str) -> dict:
    """Execute one (variant, seed) cell and write its artifacts."""
    t_start = time.perf_counter()
    models = _build_models(resolved)
    extra: dict = {}
    if variant["kind"] == "elevate":
        plan = build_plan(resolved, seed, **{k: v for k, v in variant.items()
                                             if k not in ("name", "kind")})
        z, trace = elevate_sample(plan)
    elif variant["kind"] == "baseline":
        num_steps = variant.get("num_steps", resolved["plan"]["num_steps"])
        grid = _build_grid(resolved, num_steps=num_steps, refine=0)
        which = variant["model"]
        sched = _build_schedule(resolved["schedules"][which])
        model = models["t2v_model"] if which == "t2v" else models["t2i_model"]
        cfg = SamplerConfig(
            eta=resolved["plan"][f"eta_{which}"],
            guidance=Condition(guidance_scale=resolved["plan"]["guidance_scale"]),
            seed=seed,
        )
        z, trace = baseline_sample(model, sched, grid, cfg, seed,
                                   shape=tuple(resolved["shape"]), model_tag=which)
    elif variant["kind"] == "roundtrip":
        sched = _build_schedule(resolved["schedules"]["t2i"])
        grid = _build_grid(resolved, refine=0)
        model = models["t2i_analytic"]
        z0 = sample_prior(models["t2i_prior"], np.random.default_rng(seed))
        z_top = ddim_invert(model, z0, grid, grid.steps[0], sched)
        z = ddim_sample(model, z_top, grid, sched, SamplerConfig(eta=0.0))
        extra["roundtrip_rel_err"] = float(
            np.linalg.norm(z - z0) / np.linalg.norm(z0)
        )
        trace = []
    else:
        raise ValueError(f"unknown variant kind {variant['kind']!r}")

    stem = f"{variant['name']}_seed{seed:04d}"
    out = Path(out_dir)
    save_latent(z, out / f"{stem}.elvt")
    with open(out / f"{stem}.trace.jsonl", "w") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")
    report = compute_report(
        z,
        models["t2v_prior"],
        models["t2i_prior"],
        cutoff=resolved["metrics"]["flicker_cutoff"],
        band=resolved["metrics"]["detail_band"],
    )
    renders, render_norm = [], None
    if resolved["render"]:
        vmin, vmax = float(z.min()), float(z.max())
        renders = render_frames(z, out / stem, vmin=vmin, vmax=vmax)
        render_norm = {"vmin": vmin, "vmax": vmax}
    return {
        "variant": variant["name"],
        "seed": seed,
        "latent": f"{stem}.elvt",
        "trace": f"{stem}.trace.jsonl",
        "trace_violations": trace_violations(trace),
        "renders": [Path(p).name for p in renders],
        "render_norm": render_norm,
        "metrics": report.to_dict(),
        "extra": extra,
        "wall_clock_s": time.perf_counter() - t_start,
    }


def _aggregate(runs: list) -> dict:
    by_variant: dict = {}
    for r in runs:
        by_variant.setdefault(r["variant"], []).append(r)
    agg = {}
    for name, rows in by_variant.items():
        agg[name] = {
            m: float(np.median([r["metrics"][m] for r in rows]))
            for m in MetricReport.field_names()
        }
        for key in rows[0]["extra"]:
            agg[name][f"median_{key}"] = float(np.median([r["extra"][key] for r in rows]))
            agg[name][f"max_{key}"] = float(np.max([r["extra"][key] for r in rows]))
    return agg


def _run_checks(resolved: dict, agg: dict, runs: list) -> dict:
    """Mode-specific pass/fail conditions over the aggregate medians."""
    mode = resolved["mode"]
    failures = []

    def expect(label, ok):
        if not ok:
            failures.append(label)

    for r in runs:
        for v in r["trace_violations"]:
            failures.append(f"{r['variant']} seed {r['seed']}: {v}")
    if mode == "ablate_inversion":
        fc = {k: agg[k]["frame_consistency"] for k in ("same_noise", "ddim", "random_noise")}
        expect("frame_consistency: same_noise >= ddim", fc["same_noise"] >= fc["ddim"])
        expect("frame_consistency: ddim >= random_noise", fc["ddim"] >= fc["random_noise"])
        expect(
            "frame_consistency: same_noise - random_noise > 0.02",
            fc["same_noise"] - fc["random_noise"] > 0.02,
        )
    elif mode == "ablate_filter":
        expect(
            "flicker_energy: temporal < no_lpff",
            agg["temporal"]["flicker_energy"] < agg["no_lpff"]["flicker_energy"],
        )
        expect(
            "spatial_detail: temporal > spatial_temporal",
            agg["temporal"]["spatial_detail"] > agg["spatial_temporal"]["spatial_detail"],
        )
    elif mode == "ablate_steps":
        counts = resolved["ablate_steps"]["step_counts"]
        b0, b1 = f"baseline_t2v_{counts[0]}", f"baseline_t2v_{counts[1]}"
        elev = f"elevate_{counts[0]}"
        t2i = f"baseline_t2i_{counts[0]}"
        for metric, baseline in (
            ("spectrum_distance_t2i", b0),
            ("frame_consistency", t2i),
        ):
            improvement = abs(agg[elev][metric] - agg[baseline][metric])
            drift = abs(agg[b1][metric] - agg[b0][metric])
            expect(
                f"{metric}: step-count drift {drift:.4f} < half improvement "
                f"{improvement / 2:.4f}",
                drift < improvement / 2,
            )
        expect(
            "spectrum_distance_t2i: elevate < baseline_t2v",
            agg[elev]["spectrum_distance_t2i"] < agg[b0]["spectrum_distance_t2i"],
        )
        expect(
            "frame_consistency: elevate > baseline_t2i",
            agg[elev]["frame_consistency"] > agg[t2i]["frame_consistency"],
        )
    elif mode == "roundtrip":
        expect(
            "roundtrip: max relative error < 1e-3",
            agg["roundtrip"]["max_roundtrip_rel_err"] < 1e-3,
        )
    return {"enabled": True, "passed": not failures, "failures": failures}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(config: dict | None = None, output_dir=None) -> dict:
    """Execute a config over all its seeds; returns the manifest dict."""
    resolved = resolve_config(config)
    out = Path(output_dir or resolved["output_dir"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    resolved["output_dir"] = str(out)

    t_start = time.perf_counter()
    variants = _variants_for(resolved)
    cells = [(variant, seed) for variant in variants for seed in resolved["seeds"]]
    jobs = int(resolved["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_one, resolved, variant, seed, str(out))
                for variant, seed in cells
            ]
            runs = [f.result() for f in futures]
    else:
        runs = [_run_one(resolved, variant, seed, str(out)) for variant, seed in cells]

    agg = _aggregate(runs)
    checks = _run_checks(resolved, agg, runs) if resolved["check"] else {"enabled": False}

    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "seed"] + MetricReport.field_names())
        for r in runs:
            writer.writerow(
                [r["variant"], r["seed"]]
                + [r["metrics"][m] for m in MetricReport.field_names()]
            )

    manifest = {
        "tool": {"name": "latent-elevator", "version": __version__},
        "mode": resolved["mode"],
        "resolved_config": resolved,
        # full coefficient arrays, so a foreign implementation can audit
        # the exact schedules this run used
        "schedules": {
            name: _build_schedule(cfg).to_dict()
            for name, cfg in resolved["schedules"].items()
        },
        "runs": runs,
        "aggregate": agg,
        "checks": checks,
        "wall_clock_s": time.perf_counter() - t_start,
        "files": {},
    }
    manifest_path = out / "manifest.json"
    for path in sorted(out.rglob("*")):
        if path.is_file() and path != manifest_path:
            manifest["files"][str(path.relative_to(out))] = sha256_file(path)
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest
