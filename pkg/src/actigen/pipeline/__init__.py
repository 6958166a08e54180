"""Config-driven orchestration of the full chain-synthesis pipeline."""
from .config import (
    AssignSettings,
    FineTuneSettings,
    PipelineConfig,
    RunManifest,
    SynthSettings,
    config_hash,
    file_sha256,
    load_config,
)
from .stages import (
    STAGES,
    StageResult,
    artifact_dir,
    run_pipeline,
    run_stage,
)

__all__ = [
    "AssignSettings",
    "FineTuneSettings",
    "PipelineConfig",
    "RunManifest",
    "SynthSettings",
    "config_hash",
    "file_sha256",
    "load_config",
    "STAGES",
    "StageResult",
    "artifact_dir",
    "run_pipeline",
    "run_stage",
]
