"""Domain types, dataset ingestion and participant-wise splitting."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    EmptyRecordError,
    LabelMappingError,
    ParameterError,
    SchemaError,
    ValidationError,
)

try:  # pragma: no cover - exercised on 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)


class ThermalPreference(IntEnum):
    PREFER_WARMER = -1
    NO_CHANGE = 0
    PREFER_COOLER = 1


# Fixed class order used by every histogram, vote and serialization.
CLASSES: tuple[int, int, int] = (-1, 0, 1)

B5P_TRAITS = (
    "extraversion",
    "agreeableness",
    "conscientiousness",
    "emotional_stability",
    "openness",
)
SURVEY_SCORES = ("hsps", "swls") + B5P_TRAITS
ONBOARDING_FEATURES = ("sex", "height_cm", "weight_kg")


@dataclass(frozen=True)
class OnboardingProfile:
    occupant_id: str
    sex: str
    height_cm: float
    weight_kg: float
    hsps_score: float | None = None
    swls_score: float | None = None
    b5p_traits: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.sex not in ("F", "M"):
            raise ValidationError(f"{self.occupant_id}: sex must be 'F' or 'M', got {self.sex!r}")
        if not 100 < self.height_cm < 250:
            raise ValidationError(f"{self.occupant_id}: height_cm {self.height_cm} outside (100, 250)")
        if not 30 < self.weight_kg < 250:
            raise ValidationError(f"{self.occupant_id}: weight_kg {self.weight_kg} outside (30, 250)")
        if self.b5p_traits is not None:
            unknown = set(self.b5p_traits) - set(B5P_TRAITS)
            missing = set(B5P_TRAITS) - set(self.b5p_traits)
            if unknown or missing:
                raise ValidationError(
                    f"{self.occupant_id}: B5P traits must be exactly {B5P_TRAITS}"
                )
            object.__setattr__(self, "b5p_traits", dict(self.b5p_traits))

    @property
    def sex_indicator(self) -> float:
        return 1.0 if self.sex == "M" else 0.0

    def has(self, name: str) -> bool:
        try:
            self.value(name)
        except KeyError:
            return False
        return True

    def value(self, name: str):
        """Onboarding attribute or survey score by name."""
        if name == "sex":
            return self.sex
        if name in ("height_cm", "weight_kg"):
            return getattr(self, name)
        if name in ("hsps", "hsps_score"):
            if self.hsps_score is None:
                raise KeyError(name)
            return self.hsps_score
        if name in ("swls", "swls_score"):
            if self.swls_score is None:
                raise KeyError(name)
            return self.swls_score
        if name in B5P_TRAITS:
            if self.b5p_traits is None:
                raise KeyError(name)
            return self.b5p_traits[name]
        raise KeyError(name)

    def numeric(self, name: str) -> float:
        """Numeric encoding used as a model input (sex becomes 0/1)."""
        if name == "sex":
            return self.sex_indicator
        return float(self.value(name))

    def validate_bounds(self, bounds: Mapping[str, tuple[float, float]]):
        for name, (lo, hi) in bounds.items():
            if self.has(name):
                v = self.numeric(name)
                if not lo <= v <= hi:
                    raise ValidationError(
                        f"{self.occupant_id}: {name}={v} outside declared range [{lo}, {hi}]"
                    )


@dataclass(frozen=True)
class ObservationRow:
    occupant_id: str
    timestamp: pd.Timestamp
    features: Mapping[str, float]
    label: ThermalPreference


@dataclass(frozen=True, eq=False)
class OccupantRecord:
    """One occupant: onboarding profile plus time-ordered labeled observations.

    Observations are held column-wise (``timestamps``, ``features``, ``labels``)
    so model code can slice them without rebuilding arrays.
    """

    profile: OnboardingProfile
    feature_names: tuple[str, ...]
    timestamps: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[ns]")
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        names = tuple(self.feature_names)
        if x.ndim != 2 or x.shape != (len(ts), len(names)) or y.shape != (len(ts),):
            raise ValidationError(f"{self.profile.occupant_id}: inconsistent observation shapes")
        if len(ts) > 1 and np.any(ts[1:] < ts[:-1]):
            raise ValidationError(f"{self.profile.occupant_id}: observations not time-ordered")
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.profile.occupant_id}: non-finite feature values")
        if not np.all(np.isin(y, CLASSES)):
            raise ValidationError(f"{self.profile.occupant_id}: labels must be in {{-1, 0, 1}}")
        for arr in (ts, x, y):
            arr.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def occupant_id(self) -> str:
        return self.profile.occupant_id

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def observations(self) -> list[ObservationRow]:
        return [
            ObservationRow(
                occupant_id=self.occupant_id,
                timestamp=pd.Timestamp(self.timestamps[i], tz="UTC"),
                features=dict(zip(self.feature_names, self.features[i].tolist())),
                label=ThermalPreference(int(self.labels[i])),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_rows(cls, profile: OnboardingProfile, rows: Sequence[ObservationRow],
                  feature_names: Sequence[str] | None = None) -> "OccupantRecord":
        if feature_names is None:
            feature_names = list(rows[0].features) if rows else []
        for r in rows:
            if r.occupant_id != profile.occupant_id:
                raise ValidationError("row occupant_id does not match profile")
            if set(r.features) != set(feature_names):
                raise SchemaError("row features do not match the declared feature schema")
        ts = [pd.Timestamp(r.timestamp).tz_convert("UTC").tz_localize(None)
              if pd.Timestamp(r.timestamp).tzinfo else pd.Timestamp(r.timestamp) for r in rows]
        return cls(
            profile=profile,
            feature_names=tuple(feature_names),
            timestamps=np.array(ts, dtype="datetime64[ns]").reshape(len(rows)),
            features=np.array([[r.features[f] for f in feature_names] for r in rows],
                              dtype=np.float64).reshape(len(rows), len(feature_names)),
            labels=np.array([int(r.label) for r in rows], dtype=np.int64),
        )

    def take(self, index) -> "OccupantRecord":
        """Sub-record with the selected rows, kept in time order."""
        index = np.sort(np.asarray(index, dtype=np.int64))
        return OccupantRecord(self.profile, self.feature_names, self.timestamps[index],
                              self.features[index], self.labels[index])

    def feature_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Columns for `names`; onboarding attributes repeat their constant value."""
        cols = []
        for name in names:
            if name in self.feature_names:
                cols.append(self.features[:, self.feature_names.index(name)])
            elif self.profile.has(name):
                cols.append(np.full(len(self), self.profile.numeric(name)))
            else:
                raise SchemaError(f"{self.occupant_id}: missing feature {name!r}", missing=[name])
        if not cols:
            return np.empty((len(self), 0))
        return np.column_stack(cols)

    def __eq__(self, other):
        if not isinstance(other, OccupantRecord):
            return NotImplemented
        return (
            self.profile == other.profile
            and self.feature_names == other.feature_names
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def design_matrix(records: Iterable[OccupantRecord], features: Sequence[str]):
    """Stack every record's rows into (X, y) over `features`."""
    records = list(records)
    if not records:
        return np.empty((0, len(features))), np.empty(0, dtype=np.int64)
    X = np.vstack([r.feature_matrix(features) for r in records])
    y = np.concatenate([r.labels for r in records])
    return X, y


# --------------------------------------------------------------------------
# Dataset configuration
# --------------------------------------------------------------------------

_FILTER_OPS = {
    "eq": lambda s, v: s == v,
    "ne": lambda s, v: s != v,
    "in": lambda s, v: s.isin(list(v)),
    "not_in": lambda s, v: ~s.isin(list(v)),
    "lt": lambda s, v: s < v,
    "le": lambda s, v: s <= v,
    "gt": lambda s, v: s > v,
    "ge": lambda s, v: s >= v,
    "notna": lambda s, v: s.notna(),
}


@dataclass(frozen=True)
class FilterSpec:
    """Keep rows where ``column <op> value`` holds."""

    column: str
    op: str
    value: object = None
    name: str | None = None

    def __post_init__(self):
        if self.op not in _FILTER_OPS:
            raise ValidationError(f"unknown filter op {self.op!r}; expected one of {sorted(_FILTER_OPS)}")

    @property
    def label(self) -> str:
        return self.name or f"{self.column} {self.op} {self.value!r}"

    def mask(self, frame: pd.DataFrame) -> pd.Series:
        if self.column not in frame.columns:
            raise SchemaError(f"filter column {self.column!r} not found", missing=[self.column])
        keep = _FILTER_OPS[self.op](frame[self.column], self.value)
        return keep.fillna(False).astype(bool)


@dataclass(frozen=True)
class SensorSpec:
    file: str | None
    timestamp_column: str
    columns: Mapping[str, str]  # raw column -> feature name
    occupant_column: str | None = None


@dataclass(frozen=True)
class OnboardingColumns:
    occupant: str = "occupant_id"
    sex: str = "sex"
    height_cm: str = "height_cm"
    weight_kg: str = "weight_kg"
    hsps: str | None = None
    swls: str | None = None
    b5p: Mapping[str, str] | None = None  # trait -> column
    sex_mapping: Mapping[str, str] = field(default_factory=lambda: {"F": "F", "M": "M"})


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    survey_file: str | None
    onboarding_file: str | None
    occupant_column: str
    timestamp_column: str
    label_column: str
    label_mapping: Mapping[str, int]
    truncation_n: int | None
    alignment_tolerance: pd.Timedelta = pd.Timedelta(minutes=5)
    feature_columns: Mapping[str, str] = field(default_factory=dict)  # survey column -> feature
    sensors: tuple[SensorSpec, ...] = ()
    value_maps: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    filters: tuple[FilterSpec, ...] = ()
    onboarding: OnboardingColumns = field(default_factory=OnboardingColumns)
    score_bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        # None means "keep every row"; only used for re-reading canonical files.
        if self.truncation_n is not None and self.truncation_n < 1:
            raise ValidationError("truncation_n must be >= 1")
        if pd.Timedelta(self.alignment_tolerance) <= pd.Timedelta(0):
            raise ValidationError("alignment_tolerance must be positive")
        for raw, v in self.label_mapping.items():
            if int(v) not in CLASSES:
                raise ValidationError(f"label mapping {raw!r} -> {v} is not a preference class")

    @property
    def feature_names(self) -> tuple[str, ...]:
        names = list(self.feature_columns.values())
        for s in self.sensors:
            names.extend(s.columns.values())
        return tuple(dict.fromkeys(names))


def _parse_tolerance(value) -> pd.Timedelta:
    if isinstance(value, (int, float)):
        return pd.Timedelta(seconds=value)
    return pd.Timedelta(value)


def load_dataset_spec(path) -> DatasetSpec:
    """Read a TOML dataset config with [dataset], [features], [filters] sections.

    Relative file paths resolve against the config file's directory.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    base = path.parent

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    try:
        ds = cfg["dataset"]
    except KeyError as exc:
        raise ValidationError(f"{path}: missing [dataset] section") from exc
    feats = cfg.get("features", {})
    sensors = tuple(
        SensorSpec(
            file=resolve(s.get("file")),
            timestamp_column=s.get("timestamp_column", "timestamp"),
            occupant_column=s.get("occupant_column"),
            columns=dict(s["columns"]),
        )
        for s in feats.get("sensors", [])
    )
    filters = cfg.get("filters", {})
    if isinstance(filters, dict):
        filters = filters.get("rules", [])
    ob = cfg.get("onboarding", {})
    onboarding = OnboardingColumns(
        occupant=ob.get("occupant_column", "occupant_id"),
        sex=ob.get("sex", "sex"),
        height_cm=ob.get("height_cm", "height_cm"),
        weight_kg=ob.get("weight_kg", "weight_kg"),
        hsps=ob.get("hsps"),
        swls=ob.get("swls"),
        b5p=dict(ob["b5p"]) if "b5p" in ob else None,
        sex_mapping=dict(ob.get("sex_mapping", {"F": "F", "M": "M"})),
    )
    label_mapping = {str(k): int(v) for k, v in ds.get("label_mapping", {"-1": -1, "0": 0, "1": 1}).items()}
    return DatasetSpec(
        name=ds["name"],
        survey_file=resolve(ds.get("survey_file")),
        onboarding_file=resolve(ds.get("onboarding_file")),
        occupant_column=ds.get("occupant_column", "occupant_id"),
        timestamp_column=ds.get("timestamp_column", "timestamp"),
        label_column=ds["label_column"],
        label_mapping=label_mapping,
        truncation_n=ds.get("truncation_n"),
        alignment_tolerance=_parse_tolerance(ds.get("alignment_tolerance", "5min")),
        feature_columns=dict(feats.get("survey", {})),
        sensors=sensors,
        value_maps={k: dict(v) for k, v in feats.get("value_maps", {}).items()},
        filters=tuple(FilterSpec(**f) for f in filters),
        onboarding=onboarding,
        score_bounds={k: tuple(v) for k, v in cfg.get("score_bounds", {}).items()},
    )


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------


@dataclass
class IngestSummary:
    survey_rows: int = 0
    rows_dropped_by_filter: dict[str, int] = field(default_factory=dict)
    rows_dropped_missing: int = 0
    rows_dropped_truncation: int = 0
    occupants_kept: list[str] = field(default_factory=list)
    occupants_dropped: dict[str, str] = field(default_factory=dict)  # id -> reason

    def to_text(self) -> str:
        lines = [f"survey rows read: {self.survey_rows}"]
        for name, n in self.rows_dropped_by_filter.items():
            lines.append(f"rows dropped by filter [{name}]: {n}")
        lines.append(f"rows dropped for missing features: {self.rows_dropped_missing}")
        lines.append(f"rows dropped by truncation: {self.rows_dropped_truncation}")
        lines.append(f"occupants kept: {len(self.occupants_kept)}")
        for occ, why in self.occupants_dropped.items():
            lines.append(f"occupant dropped: {occ} ({why})")
        return "\n".join(lines)


def _require_columns(frame: pd.DataFrame, columns: Iterable[str], source: str):
    missing = [c for c in columns if c is not None and c not in frame.columns]
    if missing:
        raise SchemaError(f"{source}: missing column(s) {', '.join(map(repr, missing))}", missing=missing)


def _to_utc(values: pd.Series) -> pd.Series:
    return pd.to_datetime(values, utc=True, format="mixed")


def _label_key(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v).strip()


def _encode_labels(raw: pd.Series, mapping: Mapping[str, int]) -> np.ndarray:
    out = np.empty(len(raw), dtype=np.int64)
    for pos, (idx, v) in enumerate(raw.items()):
        key = _label_key(v)
        if key not in mapping:
            raise LabelMappingError(f"unparseable label value {v!r} at row {idx}", row_index=idx)
        out[pos] = mapping[key]
    return out


def _align(survey: pd.DataFrame, sensor: pd.DataFrame, spec: SensorSpec,
           occ_col: str, tolerance: pd.Timedelta) -> pd.DataFrame:
    """Nearest-in-time join of each sensor column onto the survey rows."""
    sensor = sensor.copy()
    sensor["__ts"] = _to_utc(sensor[spec.timestamp_column])
    by = None
    if spec.occupant_column is not None:
        sensor["__occ"] = sensor[spec.occupant_column].astype(str)
        by = "__occ"
    out = survey
    for raw, feature in spec.columns.items():
        cols = ["__ts", raw] + ([by] if by else [])
        stream = sensor[cols].dropna(subset=[raw]).sort_values("__ts", kind="mergesort")
        stream = stream.rename(columns={raw: feature})
        out = pd.merge_asof(
            out.sort_values("__ts", kind="mergesort"),
            stream,
            on="__ts",
            by=by,
            direction="nearest",
            tolerance=tolerance,
        )
    return out


def _read_profiles(spec: DatasetSpec, frame: pd.DataFrame) -> dict[str, OnboardingProfile]:
    oc = spec.onboarding
    cols = [oc.occupant, oc.sex, oc.height_cm, oc.weight_kg, oc.hsps, oc.swls]
    if oc.b5p:
        cols.extend(oc.b5p.values())
    _require_columns(frame, cols, "onboarding file")
    profiles = {}
    for _, row in frame.iterrows():
        occ = str(row[oc.occupant])
        sex = oc.sex_mapping.get(_label_key(row[oc.sex]))
        if sex is None:
            raise ValidationError(f"{occ}: unmapped sex value {row[oc.sex]!r}")
        profile = OnboardingProfile(
            occupant_id=occ,
            sex=sex,
            height_cm=float(row[oc.height_cm]),
            weight_kg=float(row[oc.weight_kg]),
            hsps_score=None if oc.hsps is None or pd.isna(row[oc.hsps]) else float(row[oc.hsps]),
            swls_score=None if oc.swls is None or pd.isna(row[oc.swls]) else float(row[oc.swls]),
            b5p_traits=None if not oc.b5p or any(pd.isna(row[c]) for c in oc.b5p.values())
            else {t: float(row[c]) for t, c in oc.b5p.items()},
        )
        profile.validate_bounds(spec.score_bounds)
        profiles[occ] = profile
    _check_homogeneous(profiles.values())
    return profiles


def _check_homogeneous(profiles: Iterable[OnboardingProfile]):
    profiles = list(profiles)
    for attr in ("hsps_score", "swls_score", "b5p_traits"):
        present = {getattr(p, attr) is not None for p in profiles}
        if len(present) > 1:
            raise ValidationError(
                f"optional onboarding field {attr} is present for some occupants but not all"
            )


def ingest(spec: DatasetSpec, survey_file=None, sensor_files=None, onboarding_file=None,
           summary: IngestSummary | None = None) -> list[OccupantRecord]:
    """Load, align, filter and truncate a dataset into occupant records.

    File arguments default to the paths declared in `spec`; `sensor_files`
    pairs positionally with ``spec.sensors``.
    """
    summary = summary if summary is not None else IngestSummary()
    survey_file = survey_file or spec.survey_file
    onboarding_file = onboarding_file or spec.onboarding_file
    if sensor_files is None:
        sensor_files = [s.file for s in spec.sensors]
    if len(sensor_files) != len(spec.sensors):
        raise ValidationError("number of sensor files does not match the declared sensor streams")

    survey = pd.read_csv(survey_file, float_precision="round_trip")
    summary.survey_rows = len(survey)
    _require_columns(
        survey,
        [spec.occupant_column, spec.timestamp_column, spec.label_column, *spec.feature_columns],
        f"survey file {survey_file}",
    )
    survey["__occ"] = survey[spec.occupant_column].astype(str)
    survey["__ts"] = _to_utc(survey[spec.timestamp_column])
    survey["__label"] = _encode_labels(survey[spec.label_column], spec.label_mapping)
    survey["__order"] = np.arange(len(survey))
    for raw, feature in spec.feature_columns.items():
        survey[feature] = survey[raw]

    for sensor_spec, path in zip(spec.sensors, sensor_files):
        sensor = pd.read_csv(path, float_precision="round_trip")
        _require_columns(
            sensor,
            [sensor_spec.timestamp_column, sensor_spec.occupant_column, *sensor_spec.columns],
            f"sensor file {path}",
        )
        survey = _align(survey, sensor, sensor_spec, spec.occupant_column, spec.alignment_tolerance)

    features = spec.feature_names
    for feature, table in spec.value_maps.items():
        if feature in survey.columns:
            mapped = survey[feature].map(lambda v: table.get(_label_key(v), v))
            survey[feature] = mapped
    for feature in features:
        survey[feature] = pd.to_numeric(survey[feature], errors="coerce")

    for flt in spec.filters:
        keep = flt.mask(survey)
        summary.rows_dropped_by_filter[flt.label] = int((~keep).sum())
        survey = survey[keep]
    complete = survey[list(features)].notna().all(axis=1) if features else pd.Series(True, index=survey.index)
    summary.rows_dropped_missing = int((~complete).sum())
    survey = survey[complete]

    profiles = _read_profiles(spec, pd.read_csv(onboarding_file, float_precision="round_trip"))

    records = []
    survey = survey.sort_values(["__ts", "__order"], kind="mergesort")
    for occ, group in survey.groupby("__occ", sort=True):
        if occ not in profiles:
            summary.occupants_dropped[occ] = "no onboarding profile"
            continue
        n = spec.truncation_n
        if n is not None and len(group) < n:
            summary.occupants_dropped[occ] = f"only {len(group)} rows (< {n})"
            continue
        if n is not None:
            summary.rows_dropped_truncation += len(group) - n
            group = group.iloc[:n]
        records.append(
            OccupantRecord(
                profile=profiles[occ],
                feature_names=features,
                timestamps=group["__ts"].dt.tz_convert("UTC").dt.tz_localize(None).to_numpy("datetime64[ns]"),
                features=group[list(features)].to_numpy(np.float64),
                labels=group["__label"].to_numpy(np.int64),
            )
        )
        summary.occupants_kept.append(occ)
    if not records:
        raise EmptyDatasetError(f"dataset {spec.name!r}: no occupants survived ingestion")
    logger.info("ingested %d occupants from %s", len(records), spec.name)
    return records


# --------------------------------------------------------------------------
# Canonical files
# --------------------------------------------------------------------------


def onboarding_path(path) -> Path:
    """Sidecar holding onboarding profiles next to a canonical dataset file."""
    path = Path(path)
    return path.with_name(path.stem + ".onboarding.csv")


def _profile_columns(records: Sequence[OccupantRecord]) -> list[str]:
    cols = ["occupant_id", "sex", "height_cm", "weight_kg"]
    p = records[0].profile
    if p.hsps_score is not None:
        cols.append("hsps")
    if p.swls_score is not None:
        cols.append("swls")
    if p.b5p_traits is not None:
        cols.extend(B5P_TRAITS)
    return cols


def write_canonical(records: Sequence[OccupantRecord], path) -> Path:
    """Write the canonical dataset file plus its onboarding sidecar."""
    if not records:
        raise EmptyDatasetError("no records to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = records[0].feature_names
    if any(r.feature_names != names for r in records):
        raise SchemaError("records do not share one feature schema")
    frames = []
    for r in records:
        frame = pd.DataFrame(r.features, columns=list(names))
        frame.insert(0, "timestamp", pd.DatetimeIndex(r.timestamps).tz_localize("UTC").map(
            lambda t: t.isoformat()))
        frame.insert(0, "occupant_id", r.occupant_id)
        frame["label"] = r.labels
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")

    cols = _profile_columns(records)
    rows = []
    for r in records:
        p = r.profile
        row = {"occupant_id": p.occupant_id, "sex": p.sex, "height_cm": p.height_cm, "weight_kg": p.weight_kg}
        for c in cols[4:]:
            row[c] = p.value(c)
        rows.append(row)
    pd.DataFrame(rows, columns=cols).to_csv(onboarding_path(path), index=False, float_format="%.17g")
    return path


def canonical_spec(path, name: str = "canonical") -> DatasetSpec:
    """DatasetSpec that re-ingests a file produced by :func:`write_canonical`."""
    path = Path(path)
    header = pd.read_csv(path, nrows=0).columns.tolist()
    features = [c for c in header if c not in ("occupant_id", "timestamp", "label")]
    ob_header = pd.read_csv(onboarding_path(path), nrows=0).columns.tolist()
    b5p = {t: t for t in B5P_TRAITS} if all(t in ob_header for t in B5P_TRAITS) else None
    return DatasetSpec(
        name=name,
        survey_file=str(path),
        onboarding_file=str(onboarding_path(path)),
        occupant_column="occupant_id",
        timestamp_column="timestamp",
        label_column="label",
        label_mapping={"-1": -1, "0": 0, "1": 1},
        truncation_n=None,
        feature_columns={f: f for f in features},
        onboarding=OnboardingColumns(
            hsps="hsps" if "hsps" in ob_header else None,
            swls="swls" if "swls" in ob_header else None,
            b5p=b5p,
        ),
    )


def read_canonical(path) -> list[OccupantRecord]:
    return ingest(canonical_spec(path))


# --------------------------------------------------------------------------
# Splitting and label statistics
# --------------------------------------------------------------------------


def split_participants(records: Sequence[OccupantRecord], train_ratio: float, seed: int):
    """Random participant-wise split; both sides keep the input order."""
    total = len(records)
    if total < 2:
        raise ParameterError("need at least 2 occupants to split")
    if not 0 < train_ratio < 1:
        raise ParameterError("train_ratio must lie in (0, 1)")
    n_train = int(math.floor(train_ratio * total + 0.5))
    if n_train == 0 or n_train == total:
        raise DegenerateSplitError(f"ratio {train_ratio} leaves one side empty for {total} occupants")
    perm = np.random.default_rng(seed).permutation(total)
    train_idx = set(perm[:n_train].tolist())
    train = [r for i, r in enumerate(records) if i in train_idx]
    test = [r for i, r in enumerate(records) if i not in train_idx]
    return train, test


def label_distribution(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyRecordError("cannot compute a response distribution without observations")
    counts = np.array([(labels == c).sum() for c in CLASSES], dtype=np.float64)
    return counts / counts.sum()


def response_distribution(record: OccupantRecord) -> np.ndarray:
    """Class frequencies in the fixed order (-1, 0, +1)."""
    return label_distribution(record.labels)


def label_counts(labels) -> Counter:
    return Counter(int(v) for v in np.asarray(labels))
