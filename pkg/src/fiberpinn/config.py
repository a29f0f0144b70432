"""Declarative run configuration: strict TOML with unit-suffixed keys.

Physical quantities carry their unit in the key name (t0_ps, l_max_km, ...)
and are converted to SI exactly once, here.  Unknown keys are rejected and
every validation message names the offending key path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .launch import (OokSignal, PolarizedLaunch, Pulse, PulseTrain, make_ook,
                     make_pulse, make_pulse_train, polarize)
from .params import FiberParams
from .training import TrainingConfig


class ConfigError(ValueError):
    """Configuration rejected; the message names the key path."""


@dataclass(frozen=True)
class _Field:
    types: tuple
    required: bool = False
    default: object = None
    choices: tuple | None = None
    item_types: tuple | None = None


_NUM = (int, float)

_SCHEMA = {
    "task": _Field((str,), required=True, choices=("pulse", "signal", "birefringence")),
    "seed": _Field((int,), default=0),
    "fiber": {
        "alpha_per_m": _Field(_NUM, required=True),
        "lambda0_nm": _Field(_NUM, required=True),
        "dispersion_ps_nm_km": _Field(_NUM, required=True),
        "slope_ps_nm2_km": _Field(_NUM, required=True),
        "gamma_per_w_m": _Field(_NUM, required=True),
        "raman_fs": _Field(_NUM, required=True),
        "a_eff_um2": _Field(_NUM, required=True),
        "delta_beta1_ps_km": _Field(_NUM),
    },
    "launch": {
        "kind": _Field((str,), required=True,
                       choices=("gaussian", "sech", "supergaussian",
                                "pulse_train", "ook")),
        "t0_ps": _Field(_NUM),
        "p_peak_mw": _Field(_NUM),
        "center_ps": _Field(_NUM, default=0.0),
        "order": _Field((int,), default=2),
        "pulse_kind": _Field((str,), default="gaussian",
                             choices=("gaussian", "sech", "supergaussian")),
        "count": _Field((int,)),
        "spacing_ps": _Field(_NUM),
        "baud_gbaud": _Field(_NUM),
        "n_symbols": _Field((int,)),
        "pattern_seed": _Field((int,), default=42),
        "rise_fraction": _Field(_NUM, default=0.25),
        "p_max_mw": _Field(_NUM),
        "angle_deg": _Field(_NUM, default=45.0),
    },
    "domain": {
        "l_max_km": _Field(_NUM, required=True),
        "t_max_ps": _Field(_NUM),
        "snapshots_km": _Field((list,), item_types=_NUM),
    },
    "ssfm": {
        "n_t": _Field((int,)),
        "n_steps": _Field((int,), default=1024),
        "rel_tol": _Field(_NUM),
    },
    "network": {
        "hidden": _Field((list,), default=[100, 100, 100, 100, 100],
                         item_types=(int,)),
    },
    "training": {
        "n_ini": _Field((int,), default=256),
        "n_p": _Field((int,), default=10000),
        "adam_steps": _Field((int,), default=5000),
        "adam_lr": _Field(_NUM, default=1e-3),
        "lbfgs_max_iter": _Field((int,), default=1000),
        "lbfgs_memory": _Field((int,), default=20),
        "initial_weight": _Field(_NUM, default=1.0),
    },
    "eye": {
        "distances_km": _Field((list,), item_types=_NUM),
        "samples_per_symbol": _Field((int,)),
    },
}


def _type_name(types) -> str:
    return " or ".join(t.__name__ for t in types)


def _check_value(path: str, value, spec: _Field):
    if isinstance(value, bool) or not isinstance(value, spec.types):
        raise ConfigError(f"{path}: expected {_type_name(spec.types)}, "
                          f"got {type(value).__name__}")
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"{path}: must be one of {spec.choices}, got {value!r}")
    if spec.item_types is not None:
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, spec.item_types):
                raise ConfigError(f"{path}[{i}]: expected "
                                  f"{_type_name(spec.item_types)}")
    return value


def _walk(data: dict, schema: dict, path: str) -> dict:
    out = {}
    for key in data:
        if key not in schema:
            raise ConfigError(f"{path}{key}: unknown key")
    for key, spec in schema.items():
        here = f"{path}{key}"
        if isinstance(spec, dict):
            sub = data.get(key, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{here}: expected a table")
            out[key] = _walk(sub, spec, here + ".")
        elif key not in data:
            if spec.required:
                raise ConfigError(f"{here}: required key missing")
            out[key] = spec.default
        else:
            out[key] = _check_value(here, data[key], spec)
    return out


@dataclass(frozen=True)
class RunConfig:
    task: str
    seed: int
    fiber: FiberParams
    launch: object
    l_max: float
    t_max: float | None
    snapshots: tuple
    n_t: int
    n_steps: int
    rel_tol: float | None
    hidden: tuple
    n_ini: int
    n_p: int
    adam_steps: int
    adam_lr: float
    lbfgs_max_iter: int
    lbfgs_memory: int
    initial_weight: float
    eye_distances: tuple
    samples_per_symbol: int | None

    @property
    def is_signal(self) -> bool:
        return isinstance(self._base_profile(), OokSignal)

    def _base_profile(self):
        return (self.launch.profile
                if isinstance(self.launch, PolarizedLaunch) else self.launch)

    def to_training_config(self) -> TrainingConfig:
        return TrainingConfig(
            task=self.task, fiber=self.fiber, launch=self.launch,
            l_max=self.l_max, t_max=self.t_max, n_ini=self.n_ini, n_p=self.n_p,
            hidden=self.hidden, seed=self.seed, adam_steps=self.adam_steps,
            adam_lr=self.adam_lr, lbfgs_max_iter=self.lbfgs_max_iter,
            lbfgs_memory=self.lbfgs_memory, initial_weight=self.initial_weight,
        )


_PULSE_KINDS = ("gaussian", "sech", "supergaussian")


def _require(table: dict, section: str, key: str, context: str):
    if table[key] is None:
        raise ConfigError(f"{section}.{key}: required {context}")
    return table[key]


def _build_launch(task: str, lk: dict):
    kind = lk["kind"]
    if task == "signal":
        if kind != "ook":
            raise ConfigError("launch.kind: the signal task needs kind = 'ook'")
    elif kind == "ook":
        raise ConfigError(f"launch.kind: 'ook' only fits the signal task, not {task!r}")

    if kind in _PULSE_KINDS:
        t0 = _require(lk, "launch", "t0_ps", f"for kind {kind!r}") * 1e-12
        p_peak = _require(lk, "launch", "p_peak_mw", f"for kind {kind!r}") * 1e-3
        profile = make_pulse(kind, t0=t0, p_peak=p_peak,
                             center=lk["center_ps"] * 1e-12, order=lk["order"])
    elif kind == "pulse_train":
        t0 = _require(lk, "launch", "t0_ps", "for pulse trains") * 1e-12
        p_peak = _require(lk, "launch", "p_peak_mw", "for pulse trains") * 1e-3
        count = _require(lk, "launch", "count", "for pulse trains")
        spacing = _require(lk, "launch", "spacing_ps", "for pulse trains") * 1e-12
        profile = make_pulse_train(lk["pulse_kind"], t0=t0, p_peak=p_peak,
                                   count=count, spacing=spacing, order=lk["order"])
    else:  # ook
        baud = _require(lk, "launch", "baud_gbaud", "for OOK signals") * 1e9
        n_sym = _require(lk, "launch", "n_symbols", "for OOK signals")
        p_max = _require(lk, "launch", "p_max_mw", "for OOK signals") * 1e-3
        try:
            profile = make_ook(baud=baud, n_symbols=n_sym, seed=lk["pattern_seed"],
                               p_max=p_max, rise_fraction=lk["rise_fraction"])
        except ValueError as exc:
            raise ConfigError(f"launch: {exc}") from exc

    if task == "birefringence":
        profile = polarize(profile, math.radians(lk["angle_deg"]))
    return profile


def parse_config(data: dict, seed_override: int | None = None) -> RunConfig:
    cfg = _walk(data, _SCHEMA, "")
    task = cfg["task"]
    fb = cfg["fiber"]
    if task == "birefringence" and fb["delta_beta1_ps_km"] is None:
        raise ConfigError(
            "fiber.delta_beta1_ps_km: required for the birefringence task")
    try:
        fiber = FiberParams.from_conventional(
            alpha_per_m=float(fb["alpha_per_m"]),
            lambda0_nm=float(fb["lambda0_nm"]),
            d_ps_nm_km=float(fb["dispersion_ps_nm_km"]),
            s_ps_nm2_km=float(fb["slope_ps_nm2_km"]),
            gamma_per_w_m=float(fb["gamma_per_w_m"]),
            tau_fs=float(fb["raman_fs"]),
            a_eff_um2=float(fb["a_eff_um2"]),
            delta_beta1_ps_km=(None if fb["delta_beta1_ps_km"] is None
                               else float(fb["delta_beta1_ps_km"])),
        )
    except ValueError as exc:
        raise ConfigError(f"fiber: {exc}") from exc

    try:
        launch = _build_launch(task, cfg["launch"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"launch: {exc}") from exc

    dom = cfg["domain"]
    l_max = float(dom["l_max_km"]) * 1e3
    if l_max <= 0:
        raise ConfigError("domain.l_max_km: must be positive")
    t_max = None if dom["t_max_ps"] is None else float(dom["t_max_ps"]) * 1e-12
    if dom["snapshots_km"] is None:
        snapshots = tuple(l_max * f for f in (0.0, 0.25, 0.5, 0.75, 1.0))
    else:
        snapshots = tuple(float(z) * 1e3 for z in dom["snapshots_km"])
        if any(z < 0 or z > l_max * (1 + 1e-12) for z in snapshots):
            raise ConfigError("domain.snapshots_km: must lie within [0, l_max_km]")

    ssfm = cfg["ssfm"]
    base = launch.profile if isinstance(launch, PolarizedLaunch) else launch
    default_nt = 2**14 if isinstance(base, OokSignal) else 2**12
    n_t = ssfm["n_t"] if ssfm["n_t"] is not None else default_nt
    if n_t < 64 or (n_t & (n_t - 1)) != 0:
        raise ConfigError("ssfm.n_t: must be a power of two >= 64")
    if ssfm["n_steps"] < 1:
        raise ConfigError("ssfm.n_steps: must be >= 1")
    rel_tol = None if ssfm["rel_tol"] is None else float(ssfm["rel_tol"])
    if rel_tol is not None and rel_tol <= 0:
        raise ConfigError("ssfm.rel_tol: must be positive")

    net = cfg["network"]
    hidden = tuple(int(h) for h in net["hidden"])
    if not hidden or any(h < 1 for h in hidden):
        raise ConfigError("network.hidden: need at least one positive width")

    tr = cfg["training"]
    if tr["n_ini"] < 2:
        raise ConfigError("training.n_ini: must be >= 2")
    if tr["n_p"] < 1:
        raise ConfigError("training.n_p: must be >= 1")
    for key in ("adam_steps", "lbfgs_max_iter"):
        if tr[key] < 0:
            raise ConfigError(f"training.{key}: must be >= 0")

    eye = cfg["eye"]
    eye_distances = (snapshots if eye["distances_km"] is None
                     else tuple(float(z) * 1e3 for z in eye["distances_km"]))

    # a seed override steers training/collocation only; the OOK bit pattern
    # stays pinned to launch.pattern_seed so the physical scenario is stable
    seed = int(cfg["seed"]) if seed_override is None else int(seed_override)

    return RunConfig(
        task=task, seed=seed, fiber=fiber, launch=launch, l_max=l_max,
        t_max=t_max, snapshots=snapshots, n_t=int(n_t),
        n_steps=int(ssfm["n_steps"]), rel_tol=rel_tol, hidden=hidden,
        n_ini=int(tr["n_ini"]), n_p=int(tr["n_p"]),
        adam_steps=int(tr["adam_steps"]), adam_lr=float(tr["adam_lr"]),
        lbfgs_max_iter=int(tr["lbfgs_max_iter"]),
        lbfgs_memory=int(tr["lbfgs_memory"]),
        initial_weight=float(tr["initial_weight"]),
        eye_distances=eye_distances,
        samples_per_symbol=eye["samples_per_symbol"],
    )


def load_config(path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return parse_config(data, seed_override=seed_override)
