"""actigen: daily activity chains from socio-demographics.

The package covers the full loop: ingest diary surveys (or draw synthetic
populations), balance the training data by multivariate raking, train a
from-scratch transformer that generates (type, start, end) chains
conditioned on household context, assign zone-level locations to the
generated chains, and score everything against held-out truth.

Submodules
----------
core      activity/chain/household domain types and validation
schema    the 26-attribute socio-demographic schema
grammar   synthetic survey populations with known structure
ingest    diary CSV parsing, JSONL serialization, splitting
balance   multivariate raking (IPF) and resampling
model     the transformer: layers, losses, training, generation
ala       zone maps, empirical samplers, location assignment, OD matrices
city      the built-in 8-sub-region synthetic city and its reference process
metrics   JSD, transition graphs, completeness, Frobenius, OD comparison
pipeline  config-driven stage orchestration behind the ``actigen`` CLI
"""
from . import ala, balance, city, core, grammar, ingest, metrics, model, pipeline, schema
from .ala import (
    AgentPlan,
    AlaConfig,
    DistributionSet,
    EmpiricalSampler,
    Zone,
    ZoneMap,
    assign_population,
    build_od,
    build_zone_map,
    fit_distributions,
    refine,
)
from .balance import BalanceConfig, BalanceResult, balance as balance_samples, rake, resample
from .core import (
    Activity,
    ActivityChain,
    ActivityType,
    AgentProfile,
    Household,
    Trajectory,
    validate_chain,
)
from .errors import (
    ActigenError,
    AssignmentError,
    BalanceError,
    CheckpointError,
    ConfigError,
    IngestError,
    TrainError,
)
from .grammar import SyntheticGrammar, make_reference_grammar, make_shifted_grammar, synth_population
from .ingest import EncodedSample, load_csv, read_samples, save_csv, split, write_samples
from .metrics import MetricsReport, chain_histograms, jsd, report, transition_matrix
from .model import (
    LossWeights,
    ModelConfig,
    SamplingConfig,
    SoftLabelConfig,
    TrainConfig,
    fine_tune,
    generate,
    grad_check,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .pipeline import PipelineConfig, load_config, run_pipeline, run_stage
from .schema import DatasetSchema, default_schema

__version__ = "0.1.0"

__all__ = [
    "ala", "balance", "city", "core", "grammar", "ingest", "metrics", "model",
    "pipeline", "schema",
    "AgentPlan", "AlaConfig", "DistributionSet", "EmpiricalSampler", "Zone",
    "ZoneMap", "assign_population", "build_od", "build_zone_map",
    "fit_distributions", "refine",
    "BalanceConfig", "BalanceResult", "balance_samples", "rake", "resample",
    "Activity", "ActivityChain", "ActivityType", "AgentProfile", "Household",
    "Trajectory", "validate_chain",
    "ActigenError", "AssignmentError", "BalanceError", "CheckpointError",
    "ConfigError", "IngestError", "TrainError",
    "SyntheticGrammar", "make_reference_grammar", "make_shifted_grammar",
    "synth_population",
    "EncodedSample", "load_csv", "read_samples", "save_csv", "split",
    "write_samples",
    "MetricsReport", "chain_histograms", "jsd", "report", "transition_matrix",
    "LossWeights", "ModelConfig", "SamplingConfig", "SoftLabelConfig",
    "TrainConfig", "fine_tune", "generate", "grad_check", "init_params",
    "load_checkpoint", "save_checkpoint", "train",
    "PipelineConfig", "load_config", "run_pipeline", "run_stage",
    "DatasetSchema", "default_schema",
    "__version__",
]
