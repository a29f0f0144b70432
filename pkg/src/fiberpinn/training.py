"""End-to-end task runner: frames, collocation sampling, the two-stage
optimization schedule, checkpoints and convergence records.

Training always happens on the normalized unit box.  The initial line
zeta = 0 is gridded uniformly in t; residual points are Latin-hypercube
stratified over [0,1] x [-1,1] (exactly one point per axis bin and
dimension), drawn from a seeded generator so runs are reproducible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .launch import OokSignal, PolarizedLaunch, Pulse, PulseTrain
from .losses import CollocationSet, LossSetup, total_loss_and_grad
from .network import MlpModel, flatten_params, forward, init_mlp, with_params
from .optim import AdamConfig, LbfgsConfig, adam_run, lbfgs_run
from .params import (FiberParams, NormalizationFrame, derive_secondary_params,
                     make_frame, manakov_coeffs, nlse_coeffs)

CHECKPOINT_VERSION = 1

TASKS = ("pulse", "signal", "birefringence")


class CheckpointError(ValueError):
    """Checkpoint file unreadable or incompatible with the requested model."""


@dataclass(frozen=True)
class TrainingConfig:
    task: str
    fiber: FiberParams
    launch: object            # Pulse | PulseTrain | OokSignal | PolarizedLaunch
    l_max: float
    t_max: float | None = None
    n_ini: int = 256
    n_p: int = 10000
    hidden: tuple = (100, 100, 100, 100, 100)
    seed: int = 0
    adam_steps: int = 5000
    adam_lr: float = 1e-3
    lbfgs_max_iter: int = 1000
    lbfgs_memory: int = 20
    initial_weight: float = 1.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.n_ini < 2 or self.n_p < 1:
            raise ValueError("need n_ini >= 2 and n_p >= 1")
        if self.l_max <= 0:
            raise ValueError("l_max must be positive")
        if self.task == "birefringence" and not isinstance(self.launch, PolarizedLaunch):
            raise ValueError("birefringence task needs a PolarizedLaunch")


def default_t_max(config: TrainingConfig) -> float:
    """Window half-width wide enough that the field edge stays negligible."""
    launch = config.launch
    if isinstance(launch, PolarizedLaunch):
        db1 = config.fiber.delta_beta1 or 0.0
        return 8.0 * launch.profile.t0 + abs(db1) * config.l_max / 2.0
    if isinstance(launch, PulseTrain):
        return (launch.count - 1) * launch.spacing + 8.0 * launch.t0
    if isinstance(launch, OokSignal):
        return launch.span / 2.0
    return 8.0 * launch.t0


def frame_for(config: TrainingConfig) -> NormalizationFrame:
    """Normalization frame implied by the task and launch."""
    derived = derive_secondary_params(config.fiber)
    launch = config.launch
    if isinstance(launch, OokSignal):
        t_ref, p_ref = launch.t_s, launch.p_max
    elif isinstance(launch, PolarizedLaunch):
        t_ref, p_ref = launch.profile.t0, launch.profile.p_peak
    else:
        t_ref, p_ref = launch.t0, launch.p_peak
    t_max = config.t_max if config.t_max is not None else default_t_max(config)
    return make_frame(config.fiber, derived, t_ref, p_ref, config.l_max, t_max)


def loss_setup_for(config: TrainingConfig,
                   frame: NormalizationFrame | None = None) -> LossSetup:
    frame = frame_for(config) if frame is None else frame
    derived = derive_secondary_params(config.fiber)
    if config.task == "birefringence":
        return LossSetup(
            kind="manakov",
            coeffs=manakov_coeffs(config.fiber, derived, frame),
            frame=frame,
            p0x=config.launch.p0x,
            p0y=config.launch.p0y,
            initial_weight=config.initial_weight,
        )
    return LossSetup(
        kind="scalar",
        coeffs=nlse_coeffs(config.fiber, derived, frame),
        frame=frame,
        initial_weight=config.initial_weight,
    )


def _latin_hypercube(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Stratified sample on [0,1]^dims: one point per axis bin per dimension."""
    out = np.empty((n, dims))
    for d in range(dims):
        out[:, d] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return out


def _normalized_targets(config: TrainingConfig, frame: NormalizationFrame,
                        t_norm: np.ndarray) -> np.ndarray:
    T = t_norm * frame.t_max
    launch = config.launch
    if isinstance(launch, PolarizedLaunch):
        targets = np.zeros((t_norm.size, 2), dtype=complex)
        if launch.p0x > 0:
            targets[:, 0] = launch.envelope_x(T) / math.sqrt(launch.p0x)
        if launch.p0y > 0:
            targets[:, 1] = launch.envelope_y(T) / math.sqrt(launch.p0y)
        return targets
    return launch.envelope(T) / math.sqrt(frame.p_ref)


def sample_collocation(config: TrainingConfig,
                       frame: NormalizationFrame | None = None) -> CollocationSet:
    """Uniform initial grid plus Latin-hypercube residual points."""
    frame = frame_for(config) if frame is None else frame
    rng = np.random.default_rng([config.seed, 0xC0110C])
    t_ini = np.linspace(-1.0, 1.0, config.n_ini)
    targets = _normalized_targets(config, frame, t_ini)
    box = _latin_hypercube(config.n_p, 2, rng)
    residual = np.column_stack([box[:, 0], 2.0 * box[:, 1] - 1.0])
    return CollocationSet(initial_t=t_ini, initial_targets=targets,
                          residual_points=residual)


@dataclass(frozen=True)
class TrainRow:
    stage: str
    iteration: int
    j1: float
    j2: float
    j_total: float
    wall_ms: float


@dataclass
class TrainRecord:
    rows: list = field(default_factory=list)

    def stage_rows(self, stage: str) -> list:
        return [r for r in self.rows if r.stage == stage]

    def final_loss(self, stage: str) -> float:
        rows = self.stage_rows(stage)
        return rows[-1].j_total if rows else math.nan

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("stage,iter,j1,j2,j_total,wall_ms\n")
            for r in self.rows:
                fh.write(f"{r.stage},{r.iteration},{r.j1:.17g},{r.j2:.17g},"
                         f"{r.j_total:.17g},{r.wall_ms:.3f}\n")


@dataclass
class TrainResult:
    model: MlpModel
    record: TrainRecord
    status: str  # "completed" | "diverged"
    frame: NormalizationFrame
    adam_model: MlpModel | None = None


def train(config: TrainingConfig, out_dir=None) -> TrainResult:
    """Run the ADAM stage then the L-BFGS stage on the configured task.

    When out_dir is given, checkpoints are written after each stage
    (checkpoint_adam.npz, checkpoint.npz) along with convergence.csv.
    Divergence aborts the schedule but preserves the last good parameters
    and the partial record (status "diverged").
    """
    frame = frame_for(config)
    setup = loss_setup_for(config, frame)
    colloc = sample_collocation(config, frame)
    out_dim = 4 if config.task == "birefringence" else 2
    model0 = init_mlp((2, *config.hidden, out_dim), config.seed)

    stash = {}

    def value_grad(p):
        breakdown, grad = total_loss_and_grad(with_params(model0, p), colloc, setup)
        stash["bd"] = breakdown
        return breakdown.j_total, grad

    record = TrainRecord()
    t0 = time.perf_counter()

    def recorder(stage):
        def cb(iteration, params, loss):
            bd = stash["bd"]
            record.rows.append(TrainRow(
                stage=stage, iteration=iteration, j1=bd.j1, j2=bd.j2,
                j_total=bd.j_total,
                wall_ms=(time.perf_counter() - t0) * 1e3))
        return cb

    meta = _checkpoint_meta(config, frame)
    params = flatten_params(model0)
    status = "completed"
    adam_model = None
    if config.adam_steps > 0:
        res = adam_run(value_grad, params, config.adam_steps,
                       AdamConfig(lr=config.adam_lr), callback=recorder("adam"))
        params = res.params
        if res.status == "diverged":
            status = "diverged"
    adam_model = with_params(model0, params)
    if out_dir is not None:
        checkpoint_save(adam_model, Path(out_dir) / "checkpoint_adam.npz", meta)

    if status != "diverged" and config.lbfgs_max_iter > 0:
        res = lbfgs_run(value_grad, params, config.lbfgs_max_iter,
                        LbfgsConfig(memory=config.lbfgs_memory),
                        callback=recorder("lbfgs"))
        params = res.params
        if res.status == "diverged":
            status = "diverged"

    model = with_params(model0, params)
    if out_dir is not None:
        checkpoint_save(model, Path(out_dir) / "checkpoint.npz", meta)
        record.to_csv(Path(out_dir) / "convergence.csv")
    return TrainResult(model=model, record=record, status=status, frame=frame,
                       adam_model=adam_model)


def _checkpoint_meta(config: TrainingConfig, frame: NormalizationFrame) -> dict:
    meta = {
        "task": config.task,
        "seed": config.seed,
        "frame": {
            "t_ref": frame.t_ref, "p_ref": frame.p_ref, "l_d": frame.l_d,
            "l_nl": frame.l_nl, "l_max": frame.l_max, "t_max": frame.t_max,
            "k1": frame.k1, "k2": frame.k2,
        },
    }
    if isinstance(config.launch, PolarizedLaunch):
        meta["p0x"] = config.launch.p0x
        meta["p0y"] = config.launch.p0y
    return meta


def checkpoint_save(model: MlpModel, path, meta: dict | None = None) -> None:
    """Write a model checkpoint.

    Layout (npz archive): `version` int, `widths` int64 array, `params`
    float64 flat vector in the documented layer order, `meta_json` a JSON
    string with the training seed and frame summary.
    """
    np.savez(
        path,
        version=np.int64(CHECKPOINT_VERSION),
        widths=np.asarray(model.widths, dtype=np.int64),
        params=flatten_params(model),
        meta_json=json.dumps(meta or {}, sort_keys=True),
    )


def checkpoint_load(path) -> tuple[MlpModel, dict]:
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            widths = tuple(int(w) for w in data["widths"])
            params = np.asarray(data["params"], dtype=float)
            meta = json.loads(str(data["meta_json"]))
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    skeleton = init_mlp(widths, seed=0)
    if params.size != skeleton.n_params:
        raise CheckpointError(
            f"parameter count {params.size} does not match widths {widths}")
    return with_params(skeleton, params), meta


def predict_outputs(model: MlpModel, points) -> np.ndarray:
    """Thin forwarding helper so callers need not import network directly."""
    return forward(model, points)
