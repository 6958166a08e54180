"""Survey schema: the attribute dictionary and CSV column bindings.

A schema lists the 26 socio-demographic attributes in canonical order
(13 personal followed by 13 household-level ones).  Every attribute is a
small categorical with a reserved dummy code for non-response, so model
embedding tables and profile vectors can be sized directly from the
schema.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

N_PERSONAL_ATTRS = 13
N_HOUSEHOLD_ATTRS = 13
N_ATTRS = N_PERSONAL_ATTRS + N_HOUSEHOLD_ATTRS


@dataclass(frozen=True)
class AttributeSpec:
    """One categorical attribute: codes are 0..cardinality-1."""

    name: str
    cardinality: int
    dummy_code: int

    def __post_init__(self) -> None:
        if self.cardinality < 2:
            raise ConfigError(f"attribute {self.name}: cardinality must be >= 2")
        if not 0 <= self.dummy_code < self.cardinality:
            raise ConfigError(f"attribute {self.name}: dummy code outside 0..{self.cardinality - 1}")


@dataclass(frozen=True)
class DatasetSchema:
    """Attribute dictionary plus the CSV columns that carry each field."""

    attributes: tuple[AttributeSpec, ...]
    household_id_column: str = "household_id"
    person_id_column: str = "person_id"
    activity_column: str = "activity"
    start_column: str = "start_min"
    end_column: str = "end_min"
    weekday_column: str = "weekday"
    # attribute name -> CSV column; attributes absent here use their own name
    column_bindings: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.attributes) != N_ATTRS:
            raise ConfigError(f"schema must define exactly {N_ATTRS} attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigError("attribute names must be unique")
        for name in self.column_bindings:
            if name not in names:
                raise ConfigError(f"column binding for unknown attribute {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    @property
    def dummy_codes(self) -> tuple[int, ...]:
        return tuple(a.dummy_code for a in self.attributes)

    def column_for(self, attr_name: str) -> str:
        return self.column_bindings.get(attr_name, attr_name)

    def index_of(self, attr_name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == attr_name:
                return i
        raise KeyError(attr_name)

    def dummy_profile(self) -> tuple[int, ...]:
        """The all-non-response profile used for padding members."""
        return self.dummy_codes

    def to_json(self) -> str:
        payload = {
            "attributes": [
                {"name": a.name, "cardinality": a.cardinality, "dummy_code": a.dummy_code}
                for a in self.attributes
            ],
            "columns": {
                "household_id": self.household_id_column,
                "person_id": self.person_id_column,
                "activity": self.activity_column,
                "start": self.start_column,
                "end": self.end_column,
                "weekday": self.weekday_column,
            },
            "column_bindings": dict(sorted(self.column_bindings.items())),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetSchema":
        try:
            payload = json.loads(text)
            attrs = tuple(
                AttributeSpec(a["name"], int(a["cardinality"]), int(a["dummy_code"]))
                for a in payload["attributes"]
            )
            cols = payload.get("columns", {})
            return cls(
                attributes=attrs,
                household_id_column=cols.get("household_id", "household_id"),
                person_id_column=cols.get("person_id", "person_id"),
                activity_column=cols.get("activity", "activity"),
                start_column=cols.get("start", "start_min"),
                end_column=cols.get("end", "end_min"),
                weekday_column=cols.get("weekday", "weekday"),
                column_bindings=dict(payload.get("column_bindings", {})),
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad schema JSON: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSchema":
        return cls.from_json(Path(path).read_text())


# (name, cardinality) pairs; the dummy code is always the last code.
_PERSONAL = [
    ("age_group", 8),
    ("gender", 4),
    ("race_ethnicity", 7),
    ("education", 6),
    ("employment_status", 4),
    ("job_category", 7),
    ("num_jobs", 4),
    ("workdays_per_week", 9),
    ("work_location_type", 5),
    ("school_grade", 8),
    ("drivers_license", 3),
    ("transit_use_freq", 6),
    ("household_role", 5),
]

_HOUSEHOLD = [
    ("household_size", 7),
    ("household_income", 8),
    ("household_vehicles", 6),
    ("household_workers", 6),
    ("household_students", 5),
    ("household_drivers", 6),
    ("life_cycle_stage", 7),
    ("home_ownership", 4),
    ("residence_type", 4),
    ("housing_density", 5),
    ("population_density", 5),
    ("employment_density", 5),
    ("renter_ratio", 5),
]


def default_schema() -> DatasetSchema:
    """The reference 26-attribute schema used by the synthetic grammars."""
    attrs = tuple(
        AttributeSpec(name, card, card - 1) for name, card in (_PERSONAL + _HOUSEHOLD)
    )
    return DatasetSchema(attributes=attrs)
