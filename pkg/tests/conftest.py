import datetime as dt

import pytest

from epizone.core import Calendar, IncidenceSeries, UnitId

START = dt.date(2020, 2, 24)


def make_series(unit_id: str, counts, start=START) -> IncidenceSeries:
    cal = Calendar(start, len(counts))
    return IncidenceSeries(UnitId(unit_id), cal, tuple(float(c) for c in counts))


@pytest.fixture
def calendar5():
    return Calendar(START, 5)
