"""ISO 7730 Predicted Mean Vote and its mapping onto the 3-point preference scale."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import OccupantRecord, ThermalPreference
from .errors import NumericalError, SchemaError, ValidationError
from .learn import f1_micro

PMV_RANGE = (-3.5, 3.5)
TCL_TOLERANCE = 1e-5  # degC
MAX_ITERATIONS = 150


@dataclass(frozen=True)
class PmvInputs:
    air_temp_c: float
    mean_radiant_temp_c: float
    air_velocity_ms: float
    relative_humidity_pct: float
    met: float
    clo: float

    def __post_init__(self):
        if self.air_velocity_ms < 0:
            raise ValidationError("air velocity must be >= 0")
        if self.met <= 0:
            raise ValidationError("metabolic rate must be > 0")
        if self.clo < 0:
            raise ValidationError("clothing insulation must be >= 0")
        if not 0 <= self.relative_humidity_pct <= 100:
            raise ValidationError("relative humidity must lie in [0, 100]")


@dataclass(frozen=True)
class PmvClassThresholds:
    cool_above: float = 1.5
    warm_below: float = -1.5

    def __post_init__(self):
        if not self.warm_below < self.cool_above:
            raise ValidationError("warm_below must be smaller than cool_above")


def saturation_pressure_kpa(ta):
    return np.exp(16.6536 - 4030.183 / (np.asarray(ta, dtype=np.float64) + 235.0))


def pmv_array(ta, tr, vel, rh, met, clo, wme=0.0) -> np.ndarray:
    """Vectorized PMV; inputs broadcast against each other.

    The clothing surface temperature is found by the damped fixed-point
    iteration of the standard, run per element until successive iterates
    differ by less than ``TCL_TOLERANCE``.
    """
    ta, tr, vel, rh, met, clo, wme = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (ta, tr, vel, rh, met, clo, wme)))
    shape = ta.shape
    ta, tr, vel, rh, met, clo, wme = (v.ravel() for v in (ta, tr, vel, rh, met, clo, wme))

    pa = rh * 10.0 * saturation_pressure_kpa(ta)  # Pa
    icl = 0.155 * clo
    m = met * 58.15
    w = wme * 58.15
    mw = m - w
    fcl = np.where(icl <= 0.078, 1.0 + 1.29 * icl, 1.05 + 0.645 * icl)
    hcf = 12.1 * np.sqrt(vel)
    taa = ta + 273.0
    tra = tr + 273.0
    tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1)

    p1 = icl * fcl
    p2 = p1 * 3.96
    p3 = p1 * 100.0
    p4 = p1 * taa
    p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0) ** 4
    xn = tcla / 100.0
    xf = tcla / 50.0
    hc = hcf.copy()
    active = np.ones(len(ta), dtype=bool)
    eps = TCL_TOLERANCE / 100.0  # xn is in hundreds of kelvin
    for _ in range(MAX_ITERATIONS):
        if not active.any():
            break
        a = active
        xf[a] = (xf[a] + xn[a]) / 2.0
        hcn = 2.38 * np.abs(100.0 * xf[a] - taa[a]) ** 0.25
        hc[a] = np.maximum(hcf[a], hcn)
        xn[a] = (p5[a] + p4[a] * hc[a] - p2[a] * xf[a] ** 4) / (100.0 + p3[a] * hc[a])
        active[a] = np.abs(xn[a] - xf[a]) > eps
    if active.any():
        raise NumericalError("clothing surface temperature iteration did not converge",
                             last_iterate=(100.0 * xn - 273.0).reshape(shape))
    tcl = 100.0 * xn - 273.0

    hl1 = 3.05e-3 * (5733.0 - 6.99 * mw - pa)
    hl2 = np.where(mw > 58.15, 0.42 * (mw - 58.15), 0.0)
    hl3 = 1.7e-5 * m * (5867.0 - pa)
    hl4 = 0.0014 * m * (34.0 - ta)
    hl5 = 3.96 * fcl * (xn**4 - (tra / 100.0) ** 4)
    hl6 = fcl * hc * (tcl - ta)
    ts = 0.303 * np.exp(-0.036 * m) + 0.028
    value = ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6)
    return np.clip(value, *PMV_RANGE).reshape(shape)


def pmv(inputs: PmvInputs) -> float:
    return float(pmv_array(inputs.air_temp_c, inputs.mean_radiant_temp_c, inputs.air_velocity_ms,
                           inputs.relative_humidity_pct, inputs.met, inputs.clo))


def pmv_to_preference(value: float, thresholds: PmvClassThresholds = PmvClassThresholds()) -> ThermalPreference:
    if value > thresholds.cool_above:
        return ThermalPreference.PREFER_COOLER
    if value < thresholds.warm_below:
        return ThermalPreference.PREFER_WARMER
    return ThermalPreference.NO_CHANGE


def pmv_classes(values, thresholds: PmvClassThresholds = PmvClassThresholds()) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.shape, dtype=np.int64)
    out[values > thresholds.cool_above] = 1
    out[values < thresholds.warm_below] = -1
    return out


@dataclass(frozen=True)
class PmvSettings:
    """Where PMV inputs come from: feature names, else static defaults."""

    air_temperature: str = "air_temperature"
    relative_humidity: str = "relative_humidity"
    clothing: str = "clothing"
    mean_radiant_temperature: str | None = None
    air_velocity_feature: str | None = None
    met_feature: str | None = None
    air_velocity: float = 0.1
    met: float = 1.1
    clo_map: Mapping[float, float] | None = None
    thresholds: PmvClassThresholds = field(default_factory=PmvClassThresholds)

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "PmvSettings":
        cfg = dict(cfg)
        thresholds = PmvClassThresholds(cfg.pop("cool_above", 1.5), cfg.pop("warm_below", -1.5))
        return cls(thresholds=thresholds, **cfg)


def record_pmv(record: OccupantRecord, settings: PmvSettings = PmvSettings()) -> np.ndarray:
    names = record.feature_names

    def column(name):
        return record.features[:, names.index(name)]

    missing = [n for n in (settings.air_temperature, settings.relative_humidity, settings.clothing)
               if n not in names]
    if missing:
        raise SchemaError(f"{record.occupant_id}: PMV inputs missing {missing}", missing=missing)
    ta = column(settings.air_temperature)
    rh = column(settings.relative_humidity)
    clo = column(settings.clothing)
    if settings.clo_map:
        clo = np.array([settings.clo_map.get(v, v) for v in clo.tolist()])
    tr = column(settings.mean_radiant_temperature) if settings.mean_radiant_temperature in names else ta
    vel = column(settings.air_velocity_feature) if settings.air_velocity_feature in names else settings.air_velocity
    met = column(settings.met_feature) if settings.met_feature in names else settings.met
    return pmv_array(ta, tr, vel, rh, met, clo)


def pmv_baseline(records: Sequence[OccupantRecord], settings: PmvSettings = PmvSettings()) -> dict[str, float]:
    """Per-occupant F1-micro of PMV-derived preference classes."""
    out = {}
    for r in records:
        pred = pmv_classes(record_pmv(r, settings), settings.thresholds)
        out[r.occupant_id] = f1_micro(r.labels, pred)
    return out
