import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohortcomfort.data import ThermalPreference
from cohortcomfort.errors import SchemaError, ValidationError
from cohortcomfort.pmv import (
    PmvInputs,
    PmvSettings,
    pmv,
    pmv_array,
    pmv_baseline,
    pmv_classes,
    pmv_to_preference,
    record_pmv,
)

from conftest import make_record

pytc = pytest.importorskip("pythermalcomfort.models")

# (ta, tr, v, rh, met, clo) -> PMV, from the ISO 7730 annex validation table
ISO_TABLE = [
    ((22, 22, 0.1, 60, 1.2, 0.5), -0.75),
    ((27, 27, 0.1, 60, 1.2, 0.5), 0.77),
    ((27, 27, 0.3, 60, 1.2, 0.5), 0.44),
    ((23.5, 25.5, 0.1, 60, 1.2, 0.5), -0.01),
    ((23.5, 25.5, 0.3, 60, 1.2, 0.5), -0.55),
    ((19, 19, 0.1, 40, 1.2, 1.0), -0.60),
    ((23.5, 23.5, 0.3, 40, 1.2, 1.0), 0.12),
    ((23, 21, 0.1, 40, 1.2, 1.0), 0.05),
    ((23, 21, 0.3, 40, 1.2, 1.0), -0.16),
    ((22, 22, 0.1, 60, 1.6, 0.5), 0.05),
    ((27, 27, 0.1, 60, 1.6, 0.5), 1.17),
    ((27, 27, 0.3, 60, 1.6, 0.5), 0.95),
]


def reference(ta, tr, v, rh, met, clo):
    out = pytc.pmv_ppd_iso(tdb=ta, tr=tr, vr=v, rh=rh, met=met, clo=clo, model="7730-2005",
                           limit_inputs=False, round_output=False)
    return np.clip(np.asarray(out.pmv, dtype=float), -3.5, 3.5)


@pytest.mark.parametrize("args,expected", ISO_TABLE)
def test_iso_table(args, expected):
    assert pmv(PmvInputs(*args)) == pytest.approx(expected, abs=0.011)


def test_headline_example():
    value = pmv(PmvInputs(25, 25, 0.1, 50, 1.2, 0.5))
    assert value == pytest.approx(float(reference(25, 25, 0.1, 50, 1.2, 0.5)), abs=0.01)
    assert -0.1 < value < 0.3
    assert pmv(PmvInputs(25, 25, 0.1, 50, 1.2, 0.5)) == value


def test_random_inputs_match_reference():
    rng = np.random.default_rng(2024)
    n = 200
    ta = rng.uniform(10, 35, n)
    tr = ta + rng.uniform(-5, 5, n)
    v = rng.uniform(0.0, 1.0, n)
    rh = rng.uniform(10, 90, n)
    met = rng.uniform(0.8, 2.5, n)
    clo = rng.uniform(0.0, 1.5, n)
    ours = pmv_array(ta, tr, v, rh, met, clo)
    ref = reference(ta, tr, v, rh, met, clo)
    assert np.max(np.abs(ours - ref)) <= 0.05


def test_monotone_in_air_temperature_and_clothing():
    ta = np.linspace(10, 35, 101)
    for met, clo, v in [(1.0, 0.5, 0.1), (1.2, 1.0, 0.3), (1.6, 0.3, 0.05)]:
        assert np.all(np.diff(pmv_array(ta, ta, v, 50, met, clo)) >= -1e-9)
    clo = np.linspace(0, 2, 81)
    for t in (16.0, 22.0, 28.0):
        assert np.all(np.diff(pmv_array(t, t, 0.1, 50, 1.2, clo)) >= -1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(10, 35), st.floats(0, 100), st.floats(0.8, 3.0), st.floats(0, 2), st.floats(0, 1.5))
def test_bounded(ta, rh, met, clo, v):
    assert -3.5 <= float(pmv_array(ta, ta, v, rh, met, clo)) <= 3.5


def test_inputs_validated():
    with pytest.raises(ValidationError):
        PmvInputs(25, 25, -0.1, 50, 1.2, 0.5)
    with pytest.raises(ValidationError):
        PmvInputs(25, 25, 0.1, 120, 1.2, 0.5)


def test_class_mapping():
    assert pmv_to_preference(0.0) is ThermalPreference.NO_CHANGE
    assert pmv_to_preference(2.0) is ThermalPreference.PREFER_COOLER
    assert pmv_to_preference(-2.0) is ThermalPreference.PREFER_WARMER
    assert pmv_to_preference(1.5) is ThermalPreference.NO_CHANGE
    assert pmv_classes([-1.6, -1.5, 1.5, 1.6]).tolist() == [-1, 0, 0, 1]


NAMES = ("air_temperature", "relative_humidity", "clothing")


def test_baseline_all_nochange():
    x = np.column_stack([np.linspace(22, 26, 10), np.full(10, 50.0), np.full(10, 0.6)])
    r = make_record("a", x, np.zeros(10, int), names=NAMES)
    assert pmv_baseline([r]) == {"a": 1.0}


def test_defaults_and_row_independence():
    s = PmvSettings()
    assert (s.air_velocity, s.met) == (0.1, 1.1)
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.uniform(15, 32, 30), rng.uniform(30, 70, 30), rng.uniform(0.3, 1.0, 30)])
    y = rng.integers(-1, 2, 30)
    r = make_record("a", x, y, names=NAMES)
    expect = pmv_array(x[:, 0], x[:, 0], 0.1, x[:, 1], 1.1, x[:, 2])
    np.testing.assert_allclose(record_pmv(r), expect, atol=0)
    perm = rng.permutation(30)
    shuffled = make_record("a", x[perm], y[perm], names=NAMES)
    assert pmv_baseline([r]) == pmv_baseline([shuffled])
    with pytest.raises(SchemaError):
        record_pmv(make_record("b", x[:, :2], y, names=NAMES[:2]))
