"""Pipeline configuration: one TOML file drives every stage.

The file uses ``key = value`` pairs in nested tables, one table per stage
(see ``configs/desk.toml`` for the full grammar).  Keys map one-to-one onto
the component config dataclasses, so every training hyperparameter has a
named key with its documented default.  The resolved configuration -- with
all defaults and per-stage seeds filled in -- is hashed, and that hash
addresses the artifact directory of every stage: rerunning with an
unchanged file and seed lands in the same directories and reproduces the
same bytes.

Per-stage seeds default to ``seed + offset`` with a fixed offset per
consumer, so one global seed determines the whole run while stages stay
decoupled; any of them can still be pinned explicitly in its own table.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..ala import AlaConfig
from ..balance import BalanceConfig
from ..errors import ConfigError
from ..model import (
    FineTunePlan,
    LossWeights,
    ModelConfig,
    SamplingConfig,
    SoftLabelConfig,
    TrainConfig,
)
from ..schema import DatasetSchema, default_schema

# Offsets added to the global seed for each independent random consumer.
SEED_OFFSETS = {
    "synth": 0,
    "split": 1,
    "resample": 2,
    "train": 3,
    "generate": 4,
    "city": 5,
    "homes": 6,
    "reference": 7,
    "assign": 8,
    "synth_b": 9,
    "finetune_train": 10,
    "adapter": 11,
}

_GRAMMARS = ("reference", "shifted")
_PRESETS = ("desk", "tiny")


@dataclass(frozen=True)
class SynthSettings:
    grammar: str = "reference"
    n: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.grammar not in _GRAMMARS:
            raise ConfigError(f"synth grammar must be one of {_GRAMMARS}")
        if self.n < 1:
            raise ConfigError("synth n must be >= 1")


@dataclass(frozen=True)
class FineTuneSettings:
    """Transfer-learning stage: a second population from another grammar
    plus the freeze/unfreeze plan applied when training resumes from the
    pretrained checkpoint."""

    enabled: bool = False
    grammar: str = "shifted"
    n: int = 1000
    synth_seed: int = 0
    epochs: int | None = None
    lr: float | None = None
    plan: FineTunePlan = field(default_factory=FineTunePlan)

    def __post_init__(self) -> None:
        if self.grammar not in _GRAMMARS:
            raise ConfigError(f"finetune grammar must be one of {_GRAMMARS}")
        if self.n < 1:
            raise ConfigError("finetune n must be >= 1")


@dataclass(frozen=True)
class AssignSettings:
    """Location assignment on the built-in city (or a zone CSV file)."""

    ala: AlaConfig = field(default_factory=AlaConfig)
    zone_file: str | None = None
    city_seed: int = 0
    home_seed: int = 0
    reference_seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the nine stages need, fully resolved."""

    seed: int = 0
    out: str = "out"
    schema_name: str = "default"
    synth: SynthSettings = field(default_factory=SynthSettings)
    split_ratios: tuple[float, float, float] = (0.9, 0.05, 0.05)
    split_seed: int = 1
    balance_enabled: bool = True
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    resample_to: int = 0
    resample_seed: int = 2
    model_preset: str = "desk"
    model: ModelConfig = None  # type: ignore[assignment]
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    soft: SoftLabelConfig = field(default_factory=SoftLabelConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    assign: AssignSettings = field(default_factory=AssignSettings)
    finetune: FineTuneSettings = field(default_factory=FineTuneSettings)
    evaluate_od: bool = True

    def __post_init__(self) -> None:
        if self.schema_name != "default":
            raise ConfigError("only the default attribute schema is available")
        if self.model_preset not in _PRESETS:
            raise ConfigError(f"model preset must be one of {_PRESETS}")
        if self.resample_to < 0:
            raise ConfigError("resample_to must be >= 0 (0 = keep size)")
        if self.model is None:
            factory = ModelConfig.desk if self.model_preset == "desk" else ModelConfig.tiny
            object.__setattr__(self, "model", factory(self.schema()))

    def schema(self) -> DatasetSchema:
        return default_schema()

    def to_dict(self) -> dict:
        """JSON-ready nested dict of every resolved value."""
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        d["finetune"]["plan"]["unfreeze_at"] = {
            str(k): list(v) for k, v in self.finetune.plan.unfreeze_at.items()
        }
        return d


def config_hash(config: PipelineConfig) -> str:
    """First 12 hex digits of the SHA-256 of the canonical config JSON.

    The output directory is excluded: where artifacts land does not change
    what they contain.
    """
    d = config.to_dict()
    d.pop("out")
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _take(table: dict, section: str, allowed: set[str]) -> dict:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys {sorted(unknown)}")
    return dict(table)


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, section: str, table: dict, **forced):
    kw = _take(table, section, _fields(cls) - set(forced))
    kw.update(forced)
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(f"[{section}]: {e}") from e


def load_config(
    path: str | Path | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> PipelineConfig:
    """Parse a TOML pipeline config and resolve all defaults and seeds.

    ``seed`` and ``out`` override the file (the command-line flags); with
    no path at all the built-in defaults apply.  Unknown tables or keys are
    rejected so typos fail loudly.
    """
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            with p.open("rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config file {p}: {e}") from e

    known_tables = {
        "paths", "synth", "split", "balance", "model", "train", "loss",
        "soft", "generate", "assign", "finetune", "evaluate",
    }
    top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in raw.items() if isinstance(v, dict)}
    _take(top, "top level", {"seed", "schema"})
    unknown = set(tables) - known_tables
    if unknown:
        raise ConfigError(f"unknown config tables {sorted(unknown)}")

    global_seed = int(seed if seed is not None else top.get("seed", 0))

    def derived(table: dict, key: str, consumer: str) -> int:
        return int(table.get(key, global_seed + SEED_OFFSETS[consumer]))

    paths = _take(tables.get("paths", {}), "paths", {"out"})
    out_dir = out if out is not None else paths.get("out", "out")

    synth_t = dict(tables.get("synth", {}))
    synth_seed = derived(synth_t, "seed", "synth")
    synth_t.pop("seed", None)
    synth = _build(SynthSettings, "synth", synth_t, seed=synth_seed)

    split_t = _take(tables.get("split", {}), "split", {"ratios", "seed"})
    ratios = tuple(float(r) for r in split_t.get("ratios", (0.9, 0.05, 0.05)))
    if len(ratios) != 3:
        raise ConfigError("[split] ratios must have three entries")
    split_seed = derived(split_t, "seed", "split")

    balance_t = dict(tables.get("balance", {}))
    balance_enabled = bool(balance_t.pop("enabled", True))
    resample_to = int(balance_t.pop("resample_to", 0))
    resample_seed = derived(balance_t, "seed", "resample")
    balance_t.pop("seed", None)
    balance_cfg = _build(BalanceConfig, "balance", balance_t)

    schema = default_schema()
    model_t = dict(tables.get("model", {}))
    preset = str(model_t.pop("preset", "desk"))
    if preset not in _PRESETS:
        raise ConfigError(f"model preset must be one of {_PRESETS}")
    factory = ModelConfig.desk if preset == "desk" else ModelConfig.tiny
    allowed = _fields(ModelConfig) - {"attr_cardinalities", "attr_dummy_codes"}
    try:
        model_cfg = factory(schema, **_take(model_t, "model", allowed))
    except TypeError as e:
        raise ConfigError(f"[model]: {e}") from e

    train_t = dict(tables.get("train", {}))
    train_seed = derived(train_t, "seed", "train")
    train_t.pop("seed", None)
    train_cfg = _build(TrainConfig, "train", train_t, seed=train_seed)

    loss_cfg = _build(LossWeights, "loss", dict(tables.get("loss", {})))
    soft_cfg = _build(SoftLabelConfig, "soft", dict(tables.get("soft", {})))

    gen_t = dict(tables.get("generate", {}))
    gen_seed = derived(gen_t, "seed", "generate")
    gen_t.pop("seed", None)
    sampling = _build(SamplingConfig, "generate", gen_t, seed=gen_seed)

    assign_keys = {
        "zone_file", "city_seed", "home_seed", "reference_seed",
    } | (_fields(AlaConfig) - {"seed"})
    assign_t = _take(dict(tables.get("assign", {})), "assign", assign_keys | {"seed"})
    ala_kw = {k: assign_t[k] for k in _fields(AlaConfig) - {"seed"} if k in assign_t}
    ala_cfg = AlaConfig(seed=derived(assign_t, "seed", "assign"), **ala_kw)
    assign_cfg = AssignSettings(
        ala=ala_cfg,
        zone_file=assign_t.get("zone_file"),
        city_seed=derived(assign_t, "city_seed", "city"),
        home_seed=derived(assign_t, "home_seed", "homes"),
        reference_seed=derived(assign_t, "reference_seed", "reference"),
    )

    ft_t = dict(tables.get("finetune", {}))
    plan_keys = _fields(FineTunePlan)
    ft_keys = {"enabled", "grammar", "n", "synth_seed", "epochs", "lr"} | plan_keys
    ft_t = _take(ft_t, "finetune", ft_keys)
    unfreeze = {int(k): tuple(v) for k, v in ft_t.get("unfreeze_at", {}).items()}
    plan = FineTunePlan(
        initial_groups=tuple(ft_t.get("initial_groups", ("decoder", "heads"))),
        unfreeze_at=unfreeze,
        add_adapter=bool(ft_t.get("add_adapter", False)),
        adapter_seed=derived(ft_t, "adapter_seed", "adapter"),
    )
    finetune = FineTuneSettings(
        enabled=bool(ft_t.get("enabled", False)),
        grammar=str(ft_t.get("grammar", "shifted")),
        n=int(ft_t.get("n", 1000)),
        synth_seed=derived(ft_t, "synth_seed", "synth_b"),
        epochs=ft_t.get("epochs"),
        lr=ft_t.get("lr"),
        plan=plan,
    )

    eval_t = _take(tables.get("evaluate", {}), "evaluate", {"use_od"})

    return PipelineConfig(
        seed=global_seed,
        out=str(out_dir),
        schema_name=str(top.get("schema", "default")),
        synth=synth,
        split_ratios=ratios,  # type: ignore[arg-type]
        split_seed=split_seed,
        balance_enabled=balance_enabled,
        balance=balance_cfg,
        resample_to=resample_to,
        resample_seed=resample_seed,
        model_preset=preset,
        model=model_cfg,
        train=train_cfg,
        loss=loss_cfg,
        soft=soft_cfg,
        sampling=sampling,
        assign=assign_cfg,
        finetune=finetune,
        evaluate_od=bool(eval_t.get("use_od", True)),
    )


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to (not inside) the artifact tree."""

    config_hash: str
    stage: str
    seed: int
    inputs: dict[str, str]
    outputs: dict[str, str]
    wall_time_s: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
