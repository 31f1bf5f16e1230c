"""Continual subspace-of-policies: python veneer over the C++ core."""

from ._core import (  # noqa: F401
    ArchSignature,
    Checkpoint,
    CheckpointParseError,
    ConfigError,
    EnvParams,
    GrowDecision,
    InputError,
    ParamVector,
    PointMassEnv,
    Scenario,
    Subspace,
    TaskSpec,
    TrainingFault,
    barycentric_grid,
    build_scenario,
    checkpoint_policy,
    decide,
    evaluate,
    forward,
    init_params,
    load_checkpoint,
    load_scenario,
    make_task,
    mlp_signature,
    run_scenario,
    sample_alpha,
    save_scenario,
    scripted_return,
    task_presets,
)

__version__ = "0.1.0"
