"""fiberpinn: split-step reference engine plus a physics-informed neural
solver for pulse evolution, signal transmission and fiber birefringence.

Submodules are imported lazily so the CLI can configure thread pools before
numpy loads.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "FiberParams": "params",
    "DerivedParams": "params",
    "NormalizationFrame": "params",
    "NlseCoeffs": "params",
    "ManakovCoeffs": "params",
    "derive_secondary_params": "params",
    "make_frame": "params",
    "nlse_coeffs": "params",
    "manakov_coeffs": "params",
    "C_LIGHT": "params",
    "Pulse": "launch",
    "PulseTrain": "launch",
    "OokSignal": "launch",
    "PolarizedLaunch": "launch",
    "make_pulse": "launch",
    "make_pulse_train": "launch",
    "make_ook": "launch",
    "polarize": "launch",
    "FieldGrid": "ssfm",
    "SolutionSurface": "ssfm",
    "WindowError": "ssfm",
    "sample_profile": "ssfm",
    "propagate_gnlse": "ssfm",
    "propagate_manakov": "ssfm",
    "auto_step": "ssfm",
    "MlpModel": "network",
    "Jet3": "network",
    "init_mlp": "network",
    "forward": "network",
    "forward_vjp": "network",
    "jet_forward": "network",
    "jet_forward_vjp": "network",
    "flatten_params": "network",
    "with_params": "network",
    "CollocationSet": "losses",
    "LossBreakdown": "losses",
    "LossSetup": "losses",
    "DivergenceError": "losses",
    "initial_loss": "losses",
    "residual_scalar": "losses",
    "residual_manakov": "losses",
    "total_loss": "losses",
    "total_loss_and_grad": "losses",
    "scalar_residual_fields": "losses",
    "manakov_residual_fields": "losses",
    "AdamConfig": "optim",
    "LbfgsConfig": "optim",
    "adam_run": "optim",
    "lbfgs_run": "optim",
    "TrainingConfig": "training",
    "TrainRecord": "training",
    "TrainResult": "training",
    "CheckpointError": "training",
    "default_t_max": "training",
    "frame_for": "training",
    "loss_setup_for": "training",
    "sample_collocation": "training",
    "train": "training",
    "checkpoint_save": "training",
    "checkpoint_load": "training",
    "EyeDiagram": "evaluate",
    "predict_surface": "evaluate",
    "predict_surface_polarized": "evaluate",
    "nrmse": "evaluate",
    "eye_diagram": "evaluate",
    "eye_histogram": "evaluate",
    "eye_opening": "evaluate",
    "RunConfig": "config",
    "ConfigError": "config",
    "load_config": "config",
    "parse_config": "config",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'fiberpinn' has no attribute {name!r}")
    import importlib

    return getattr(importlib.import_module(f".{module}", __name__), name)


def __dir__():
    return __all__
