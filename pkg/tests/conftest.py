import numpy as np
import pytest

from cohortcomfort.data import B5P_TRAITS, OccupantRecord, OnboardingProfile
from cohortcomfort.synth import PopulationSpec, generate

START = np.datetime64("2021-06-01T09:00:00", "ns")


def make_profile(occ, sex="F", height=165.0, weight=60.0, hsps=4.0, swls=22.0, traits=None):
    traits = traits if traits is not None else {t: 4.0 for t in B5P_TRAITS}
    return OnboardingProfile(occ, sex, height, weight, hsps, swls, traits)


def make_record(occ, features, labels, names=("air_temperature",), **profile_kw):
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    ts = START + (np.arange(n) * 3600).astype("timedelta64[s]").astype("timedelta64[ns]")
    return OccupantRecord(make_profile(occ, **profile_kw), tuple(names), ts, x, np.asarray(labels))


@pytest.fixture(scope="session")
def planted():
    """Default planted population (2 types, 20 occupants, 100 rows)."""
    return generate(PopulationSpec(seed=0))


@pytest.fixture(scope="session")
def small_planted():
    return generate(PopulationSpec(n_occupants=10, rows_per_occupant=40, seed=3))


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """Log one acceptance criterion line; ``ok=None`` marks a skip. The test still asserts on `ok`."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"criterion {number}: {status} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
