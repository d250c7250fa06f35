"""Synthetic occupant populations with planted cohort structure.

Each planted type has a comfort band on air temperature: rows inside the
band are labelled NoChange, colder rows PreferWarmer and warmer rows
PreferCooler.  Every occupant shifts their type's band by a small personal
offset, so personal models carry information a cohort model cannot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .data import B5P_TRAITS, OccupantRecord, OnboardingProfile, write_canonical
from .errors import ValidationError

try:  # pragma: no cover
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

FEATURES = ("air_temperature", "relative_humidity", "near_body_temperature", "heart_rate", "clothing")
SCORES = ("hsps", "swls") + B5P_TRAITS


@dataclass(frozen=True)
class TypeDefinition:
    comfort_band: tuple[float, float]
    score_means: Mapping[str, float] = field(default_factory=dict)
    score_stds: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.comfort_band
        if not lo < hi:
            raise ValidationError("comfort band must have lo < hi")
        object.__setattr__(self, "comfort_band", (float(lo), float(hi)))

    @property
    def center(self) -> float:
        return 0.5 * sum(self.comfort_band)


def default_types(n_types: int = 2) -> tuple[TypeDefinition, ...]:
    """Bands 6 degC apart; survey means shifted by one std per type."""
    out = []
    for t in range(n_types):
        center = 22.0 + 6.0 * t
        means = {"hsps": 3.5 + 1.2 * t, "swls": 20.0 + 6.0 * t}
        means.update({trait: 3.5 + 1.5 * t for trait in B5P_TRAITS})
        stds = {"hsps": 0.4, "swls": 2.0, **{trait: 0.5 for trait in B5P_TRAITS}}
        out.append(TypeDefinition((center - 2.0, center + 2.0), means, stds))
    return tuple(out)


@dataclass(frozen=True)
class PopulationSpec:
    n_occupants: int = 20
    n_types: int = 2
    rows_per_occupant: int = 100
    type_definitions: tuple[TypeDefinition, ...] = field(default_factory=default_types)
    label_noise: float = 0.1
    seed: int = 0
    temperature_range: tuple[float, float] = (18.0, 32.0)
    band_jitter: float = 0.75  # std of each occupant's personal band offset, degC

    def __post_init__(self):
        if self.n_types < 2:
            raise ValidationError("n_types must be >= 2")
        if len(self.type_definitions) != self.n_types:
            raise ValidationError("one type definition per planted type required")
        if self.n_occupants < self.n_types:
            raise ValidationError("need at least one occupant per type")
        if self.rows_per_occupant < 1:
            raise ValidationError("rows_per_occupant must be >= 1")
        if not 0 <= self.label_noise < 0.5:
            raise ValidationError("label_noise must lie in [0, 0.5)")
        if self.band_jitter < 0:
            raise ValidationError("band_jitter must be >= 0")
        centers = sorted(t.center for t in self.type_definitions)
        if any(b - a < 2.0 for a, b in zip(centers, centers[1:])):
            raise ValidationError("comfort band centers of distinct types must differ by >= 2 degC")

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "PopulationSpec":
        cfg = dict(cfg)
        n_types = int(cfg.get("n_types", 2))
        types = cfg.pop("types", None)
        if types is None:
            type_defs = default_types(n_types)
        else:
            type_defs = tuple(
                TypeDefinition(tuple(t["comfort_band"]), t.get("score_means", {}), t.get("score_stds", {}))
                for t in types
            )
        if "temperature_range" in cfg:
            cfg["temperature_range"] = tuple(cfg["temperature_range"])
        return cls(type_definitions=type_defs, **cfg)


def load_population_spec(path) -> PopulationSpec:
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    return PopulationSpec.from_dict(cfg.get("population", cfg))


def band_labels(temperature, band: tuple[float, float]) -> np.ndarray:
    lo, hi = band
    t = np.asarray(temperature)
    return np.where(t < lo, -1, np.where(t > hi, 1, 0)).astype(np.int64)


def _score(rng, t: TypeDefinition, name: str) -> float:
    mean = t.score_means.get(name, 4.0)
    std = t.score_stds.get(name, 0.5)
    return float(rng.normal(mean, std))


def generate(spec: PopulationSpec) -> tuple[list[OccupantRecord], np.ndarray]:
    """Records plus the planted type of each occupant.

    Types are dealt round-robin and then shuffled, so every type has
    ``n_occupants // n_types`` or one more members.
    """
    rng = np.random.default_rng(spec.seed)
    types = np.arange(spec.n_occupants) % spec.n_types
    rng.shuffle(types)
    t0, t1 = spec.temperature_range
    n = spec.rows_per_occupant
    start = np.datetime64("2021-01-04T08:00:00", "ns")
    records = []
    for i, t in enumerate(types):
        tdef = spec.type_definitions[t]
        occ = f"occ{i:03d}"
        sex = "M" if rng.random() < 0.5 else "F"
        profile = OnboardingProfile(
            occupant_id=occ,
            sex=sex,
            height_cm=float(np.clip(rng.normal(174 if sex == "M" else 162, 7), 140, 210)),
            weight_kg=float(np.clip(rng.normal(72 if sex == "M" else 58, 9), 40, 140)),
            hsps_score=_score(rng, tdef, "hsps"),
            swls_score=_score(rng, tdef, "swls"),
            b5p_traits={trait: _score(rng, tdef, trait) for trait in B5P_TRAITS},
        )
        offset = rng.normal(0.0, spec.band_jitter) if spec.band_jitter > 0 else 0.0
        band = (tdef.comfort_band[0] + offset, tdef.comfort_band[1] + offset)

        ta = rng.uniform(t0, t1, n)
        labels = band_labels(ta, band)
        flip = rng.random(n) < spec.label_noise
        shift = rng.integers(1, 3, n)  # uniform over the two other classes
        labels = np.where(flip, (labels + 1 + shift) % 3 - 1, labels)

        rh = rng.uniform(40.0, 80.0, n)
        near_body = 0.5 * ta + 16.0 + rng.normal(0.0, 0.5, n)
        hr_base = rng.normal(72.0, 5.0)
        heart_rate = hr_base + rng.normal(0.0, 4.0, n)
        clothing = rng.choice([0.4, 0.5, 0.6, 0.7], n)
        gaps = rng.integers(30, 240, n).cumsum().astype("timedelta64[m]")
        records.append(OccupantRecord(
            profile=profile,
            feature_names=FEATURES,
            timestamps=start + gaps.astype("timedelta64[ns]"),
            features=np.column_stack([ta, rh, near_body, heart_rate, clothing]),
            labels=labels,
        ))
    return records, types.astype(np.int64)


def types_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".types.csv")


def write_population(records: Sequence[OccupantRecord], types, path) -> Path:
    """Canonical dataset file (plus onboarding sidecar) and a ground-truth type table."""
    write_canonical(records, path)
    pd.DataFrame({"occupant_id": [r.occupant_id for r in records], "type": np.asarray(types)}).to_csv(
        types_path(path), index=False)
    return Path(path)
