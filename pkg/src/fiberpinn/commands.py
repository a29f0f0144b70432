"""Implementations behind the CLI subcommands.

Every command resolves its configuration first, computes everything, then
writes outputs; a validation failure never leaves partial files behind.
CSV floats are printed with 17 significant digits so files round-trip
float64 exactly, and the JSON manifest records a sha256 per output file.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .evaluate import (eye_diagram, eye_histogram, nrmse, predict_surface,
                       predict_surface_polarized)
from .launch import PolarizedLaunch
from .losses import DivergenceError
from .params import derive_secondary_params, manakov_coeffs, nlse_coeffs
from .ssfm import (FieldGrid, SolutionSurface, WindowError, auto_step,
                   propagate_gnlse, propagate_manakov, sample_profile)
from .training import (CheckpointError, checkpoint_load, frame_for,
                       loss_setup_for, train)
from . import plots

_EXIT_CONFIG = 2
_EXIT_NUMERIC = 3
_EXIT_IO = 4


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(out_dir: Path, payload: dict, files: list) -> Path:
    payload = dict(payload)
    payload["tool"] = "fiberpinn"
    payload["version"] = __version__
    payload["outputs"] = {
        f.name: {"sha256": _sha256(f), "bytes": f.stat().st_size}
        for f in sorted(files)
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parameter_block(cfg: RunConfig) -> dict:
    derived = derive_secondary_params(cfg.fiber)
    fiber = {
        "alpha_per_m": cfg.fiber.alpha,
        "lambda0_m": cfg.fiber.lambda0,
        "d_s_m2": cfg.fiber.d,
        "s_s_m3": cfg.fiber.s,
        "gamma_per_w_m": cfg.fiber.gamma,
        "tau_s": cfg.fiber.tau,
        "a_eff_m2": cfg.fiber.a_eff,
        "delta_beta1_s_m": cfg.fiber.delta_beta1,
    }
    return {
        "fiber_si": fiber,
        "derived": {"beta2_s2_m": derived.beta2, "beta3_s3_m": derived.beta3,
                    "omega0_rad_s": derived.omega0},
    }


def _frame_block(frame) -> dict:
    return {"t_ref_s": frame.t_ref, "p_ref_w": frame.p_ref, "l_d_m": frame.l_d,
            "l_nl_m": frame.l_nl, "l_max_m": frame.l_max,
            "t_max_s": frame.t_max, "k1": frame.k1, "k2": frame.k2}


def _field_csv(path: Path, grid_times: np.ndarray, values: np.ndarray) -> None:
    power = np.abs(values) ** 2
    _write_csv(path, ["t_s", "re", "im", "power_w"],
               zip(grid_times, values.real, values.imag, power))


def read_field_csv(path) -> FieldGrid:
    """Load a field snapshot written by `simulate` back into a grid."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    values = data["re"] + 1j * data["im"]
    return FieldGrid(times=np.asarray(data["t_s"], dtype=float), values=values)


def _km_tag(z_m: float) -> str:
    return f"{z_m / 1e3:g}km"


def _simulate_surfaces(cfg: RunConfig):
    """Run the reference engine for this config; returns (surfaces, n_steps)."""
    tc = cfg.to_training_config()
    frame = frame_for(tc)
    enforce = not cfg.is_signal
    if cfg.task == "birefringence":
        launch: PolarizedLaunch = cfg.launch
        gx = sample_profile_like(cfg, frame, launch.envelope_x)
        gy = sample_profile_like(cfg, frame, launch.envelope_y)

        def run(n):
            return propagate_manakov(gx, gy, cfg.fiber,
                                     derive_secondary_params(cfg.fiber),
                                     cfg.l_max, n, cfg.snapshots,
                                     enforce_window=enforce)

        if cfg.rel_tol is not None:
            (sx, sy), n_used = _auto_pair(run, cfg.rel_tol, cfg.n_steps)
        else:
            sx, sy = run(cfg.n_steps)
            n_used = cfg.n_steps
        return {"x": sx, "y": sy}, n_used, frame

    grid = sample_profile(cfg.launch, frame.t_max, cfg.n_t)

    def run(n):
        return propagate_gnlse(grid, cfg.fiber,
                               derive_secondary_params(cfg.fiber),
                               cfg.l_max, n, cfg.snapshots,
                               enforce_window=enforce)

    if cfg.rel_tol is not None:
        surface, n_used = auto_step(run, cfg.rel_tol, start_steps=cfg.n_steps)
    else:
        surface = run(cfg.n_steps)
        n_used = cfg.n_steps
    return {"": surface}, n_used, frame


def sample_profile_like(cfg: RunConfig, frame, envelope_fn) -> FieldGrid:
    dt = 2.0 * frame.t_max / cfg.n_t
    times = -frame.t_max + dt * np.arange(cfg.n_t)
    return FieldGrid(times=times, values=envelope_fn(times))


class _PairRunner:
    """Adapts the coupled propagation onto the scalar auto_step interface by
    stacking both polarizations into one surface for the convergence test."""

    def __init__(self, run):
        self.run = run
        self.last = None

    def __call__(self, n):
        sx, sy = self.run(n)
        self.last = (sx, sy)
        return SolutionSurface(distances=sx.distances, times=sx.times,
                               fields=np.hstack([sx.fields, sy.fields]))


def _auto_pair(run, rel_tol, start_steps):
    runner = _PairRunner(run)
    _, n_used = auto_step(runner, rel_tol, start_steps=start_steps)
    return runner.last, n_used


def run_simulate(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    out = Path(args.out)
    surfaces, n_used, frame = _simulate_surfaces(cfg)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for tag, surface in surfaces.items():
        prefix = f"field_{tag}_" if tag else "field_"
        for i, z in enumerate(surface.distances):
            path = out / f"{prefix}{i:02d}_z{_km_tag(z)}.csv"
            _field_csv(path, surface.times, surface.fields[i])
            files.append(path)
        if not args.no_figures:
            fig = out / (f"waveforms_{tag}.svg" if tag else "waveforms.svg")
            plots.waveform_overlay(surface, fig,
                                   title=(f"polarization {tag}" if tag else ""))
            files.append(fig)
    payload = {
        "command": "simulate", "task": cfg.task, "seed": cfg.seed,
        "snapshots_m": list(map(float, next(iter(surfaces.values())).distances)),
        "grid": {"n_t": cfg.n_t, "t_max_s": frame.t_max,
                 "dt_s": 2.0 * frame.t_max / cfg.n_t},
        "ssfm": {"n_steps_requested": cfg.n_steps, "n_steps_used": n_used,
                 "rel_tol": cfg.rel_tol},
        "frame": _frame_block(frame),
    }
    payload.update(_parameter_block(cfg))
    _manifest(out, payload, files)
    print(f"simulate: wrote {len(files)} files to {out} "
          f"({n_used} split steps)")
    return 0


def run_train(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.to_training_config()
    result = train(tc, out_dir=out)
    files = [out / "checkpoint.npz", out / "checkpoint_adam.npz",
             out / "convergence.csv"]
    if not args.no_figures:
        fig = out / "convergence.svg"
        plots.convergence_curve(result.record, fig)
        files.append(fig)
    payload = {
        "command": "train", "task": cfg.task, "seed": cfg.seed,
        "status": result.status,
        "network": {"widths": list(result.model.widths),
                    "n_params": result.model.n_params},
        "schedule": {"adam_steps": cfg.adam_steps, "adam_lr": cfg.adam_lr,
                     "lbfgs_max_iter": cfg.lbfgs_max_iter,
                     "lbfgs_memory": cfg.lbfgs_memory},
        "collocation": {"n_ini": cfg.n_ini, "n_p": cfg.n_p},
        "final_loss": {"adam": result.record.final_loss("adam"),
                       "lbfgs": result.record.final_loss("lbfgs")},
        "frame": _frame_block(result.frame),
    }
    payload.update(_parameter_block(cfg))
    _manifest(out, payload, files)
    if result.status == "diverged":
        print("train: diverged; last good checkpoint preserved")
        return _EXIT_NUMERIC
    final = (result.record.rows[-1].j_total if result.record.rows else math.nan)
    print(f"train: {len(result.record.rows)} recorded iterations, "
          f"final loss {final:.3e}; wrote {out}")
    return 0


def _load_matching_checkpoint(path, cfg: RunConfig):
    model, meta = checkpoint_load(path)
    tc = cfg.to_training_config()
    frame = frame_for(tc)
    want = {"t_ref": frame.t_ref, "p_ref": frame.p_ref, "l_max": frame.l_max,
            "t_max": frame.t_max, "k1": frame.k1, "k2": frame.k2}
    have = meta.get("frame", {})
    for key, val in want.items():
        got = have.get(key)
        if got is None or not math.isclose(got, val, rel_tol=1e-9):
            raise ConfigError(
                f"checkpoint frame mismatch on {key}: checkpoint has {got}, "
                f"config implies {val}")
    if meta.get("task") != cfg.task:
        raise ConfigError(f"checkpoint task {meta.get('task')!r} does not "
                          f"match config task {cfg.task!r}")
    expected_out = 4 if cfg.task == "birefringence" else 2
    if model.out_dim != expected_out:
        raise ConfigError(f"checkpoint has {model.out_dim} outputs, task "
                          f"needs {expected_out}")
    return model, meta, frame


def run_compare(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    model, meta, frame = _load_matching_checkpoint(args.checkpoint, cfg)
    surfaces, n_used, _ = _simulate_surfaces(cfg)
    out = Path(args.out)

    rows = []
    per_tag = {}
    if cfg.task == "birefringence":
        ref_x, ref_y = surfaces["x"], surfaces["y"]
        pred_x, pred_y = predict_surface_polarized(
            model, frame, cfg.launch.p0x, cfg.launch.p0y,
            ref_x.distances, ref_x.times)
        per_x, agg_x = nrmse(pred_x, ref_x)
        per_y, agg_y = nrmse(pred_y, ref_y)
        for i, z in enumerate(ref_x.distances):
            rows.append((z / 1e3, per_x[i], per_y[i]))
        header = ["z_km", "nrmse_x", "nrmse_y"]
        aggregate = {"x": agg_x, "y": agg_y}
        per_tag = {"x": (ref_x, pred_x), "y": (ref_y, pred_y)}
    else:
        ref = surfaces[""]
        pred = predict_surface(model, frame, ref.distances, ref.times)
        per, agg = nrmse(pred, ref)
        for i, z in enumerate(ref.distances):
            rows.append((z / 1e3, per[i]))
        header = ["z_km", "nrmse"]
        aggregate = {"": agg}
        per_tag = {"": (ref, pred)}

    out.mkdir(parents=True, exist_ok=True)
    files = []
    nrmse_path = out / "nrmse.csv"
    _write_csv(nrmse_path, header, rows)
    files.append(nrmse_path)
    for tag, (ref, pred) in per_tag.items():
        prefix = f"compare_{tag}_" if tag else "compare_"
        for i, z in enumerate(ref.distances):
            path = out / f"{prefix}{i:02d}_z{_km_tag(z)}.csv"
            _write_csv(path, ["t_s", "re_ref", "im_ref", "re_pred", "im_pred"],
                       zip(ref.times, ref.fields[i].real, ref.fields[i].imag,
                           pred.fields[i].real, pred.fields[i].imag))
            files.append(path)
            if not args.no_figures:
                fig = out / f"{prefix}{i:02d}_z{_km_tag(z)}.svg"
                label = f"z = {_km_tag(z)}" + (f" ({tag})" if tag else "")
                plots.compare_overlay(ref.times, ref.fields[i], pred.fields[i],
                                      z, fig, title=label)
                files.append(fig)

    payload = {
        "command": "compare", "task": cfg.task, "seed": cfg.seed,
        "checkpoint": str(args.checkpoint),
        "checkpoint_meta": meta,
        "nrmse_aggregate": aggregate,
        "ssfm": {"n_steps_used": n_used},
        "frame": _frame_block(frame),
    }
    payload.update(_parameter_block(cfg))
    _manifest(out, payload, files)
    agg_txt = ", ".join(f"{k or 'field'}: {v:.4%}" for k, v in aggregate.items())
    print(f"compare: aggregate NRMSE {agg_txt}; wrote {out}")
    return 0


def run_eye(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    if not cfg.is_signal:
        raise ConfigError(
            "eye diagrams require symbol structure: use a signal task with "
            "launch.kind = 'ook'")
    ook = cfg.launch
    sps = cfg.samples_per_symbol
    if sps is None:
        if cfg.n_t % ook.n_symbols != 0:
            raise ConfigError("ssfm.n_t must be a multiple of launch.n_symbols")
        sps = cfg.n_t // ook.n_symbols

    eyes = {}
    if args.field is not None:
        grid = read_field_csv(args.field)
        eyes[Path(args.field).stem] = eye_diagram(grid, ook.t_s, sps)
    elif args.checkpoint is not None:
        model, meta, frame = _load_matching_checkpoint(args.checkpoint, cfg)
        times = sample_profile(ook, frame.t_max, cfg.n_t).times
        surface = predict_surface(model, frame, cfg.eye_distances, times)
        for i, z in enumerate(surface.distances):
            grid = FieldGrid(times=surface.times, values=surface.fields[i])
            eyes[f"z{_km_tag(z)}"] = eye_diagram(grid, ook.t_s, sps)
    else:
        cfg_eye = cfg
        if set(cfg.eye_distances) - set(cfg.snapshots):
            cfg_eye = _with_snapshots(cfg, cfg.eye_distances)
        surfaces, _, _ = _simulate_surfaces(cfg_eye)
        surface = surfaces[""]
        keep = {float(z) for z in cfg.eye_distances}
        for i, z in enumerate(surface.distances):
            if float(z) in keep:
                grid = FieldGrid(times=surface.times, values=surface.fields[i])
                eyes[f"z{_km_tag(z)}"] = eye_diagram(grid, ook.t_s, sps)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, eye in eyes.items():
        tpath = out / f"eye_{name}_traces.csv"
        header = ["t_offset_s"] + [f"trace_{k:02d}" for k in range(eye.traces.shape[0])]
        _write_csv(tpath, header,
                   zip(eye.trace_times, *(row for row in eye.traces)))
        files.append(tpath)
        counts, t_edges, p_edges = eye_histogram(eye)
        hpath = out / f"eye_{name}_hist.csv"
        t_centers = 0.5 * (t_edges[:-1] + t_edges[1:])
        p_centers = 0.5 * (p_edges[:-1] + p_edges[1:])
        hist_rows = []
        for ti, tc_ in enumerate(t_centers):
            for pi, pc in enumerate(p_centers):
                hist_rows.append((tc_, pc, int(counts[ti, pi])))
        _write_csv(hpath, ["t_bin_center_s", "power_bin_center_w", "count"],
                   hist_rows)
        files.append(hpath)
        if not args.no_figures:
            fig = out / f"eye_{name}.svg"
            plots.eye_figure(eye, fig, title=name)
            files.append(fig)
    payload = {
        "command": "eye", "task": cfg.task, "seed": cfg.seed,
        "symbol_period_s": ook.t_s, "samples_per_symbol": sps,
        "sources": sorted(eyes),
    }
    payload.update(_parameter_block(cfg))
    _manifest(out, payload, files)
    print(f"eye: wrote {len(eyes)} eye diagrams to {out}")
    return 0


def _with_snapshots(cfg: RunConfig, snapshots) -> RunConfig:
    from dataclasses import replace
    merged = tuple(sorted(set(cfg.snapshots) | set(float(z) for z in snapshots)))
    return replace(cfg, snapshots=merged)


def run_coeffs(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    tc = cfg.to_training_config()
    frame = frame_for(tc)
    derived = derive_secondary_params(cfg.fiber)
    print(f"task: {cfg.task}")
    print(f"frame: t_ref = {frame.t_ref:.6g} s, p_ref = {frame.p_ref:.6g} W, "
          f"l_d = {frame.l_d:.6g} m, l_nl = {frame.l_nl:.6g} m")
    print(f"       l_max = {frame.l_max:.6g} m, t_max = {frame.t_max:.6g} s, "
          f"k1 = {frame.k1:.12g}, k2 = {frame.k2:.12g}")
    print(f"derived: beta2 = {derived.beta2:.12g} s^2/m, "
          f"beta3 = {derived.beta3:.12g} s^3/m, "
          f"omega0 = {derived.omega0:.12g} rad/s")
    if cfg.task == "birefringence":
        coeffs = manakov_coeffs(cfg.fiber, derived, frame)
        names = ("evolution", "attenuation", "walkoff", "gvd", "kerr")
    else:
        coeffs = nlse_coeffs(cfg.fiber, derived, frame)
        names = ("evolution", "attenuation", "gvd", "tod", "kerr",
                 "steepening", "raman")
    print("normalized coefficients:")
    for name in names:
        print(f"  {name:<12} {getattr(coeffs, name):.12g}")
    return 0


def run(args) -> int:
    """Dispatch a parsed CLI invocation, mapping failures to exit codes."""
    handlers = {
        "simulate": run_simulate,
        "train": run_train,
        "compare": run_compare,
        "eye": run_eye,
        "coeffs": run_coeffs,
    }
    import sys
    try:
        return handlers[args.command](args)
    except (ConfigError, CheckpointError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (DivergenceError, WindowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return _EXIT_IO
