import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noshow.dataset import AppointmentRecord, RecordSet


def make_record(record_id, gender="female", age=30, zone_income="low",
                service="OH", facility="f01", lead=10, month=3,
                day="MON", outcome="show", zone_id="z1"):
    return AppointmentRecord(
        record_id=record_id, gender=gender, age_years=age, zone_id=zone_id,
        zone_income=zone_income, service=service, facility_id=facility,
        lead_time_days=lead, month=month, day_of_week=day, outcome=outcome)


def random_records(n, seed=0, n_facilities=3, no_show_rate=0.3):
    """Unstructured records for mechanical tests (no signal intended)."""
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        recs.append(make_record(
            record_id=i,
            gender=("female" if rng.random() < 0.6 else "male"),
            age=int(rng.integers(0, 90)),
            zone_income=("low" if rng.random() < 0.7 else "medium"),
            service=str(rng.choice(["OH", "GD", "YAP", "SP"])),
            facility=f"f{rng.integers(0, n_facilities):02d}",
            lead=int(rng.integers(0, 120)),
            month=int(rng.integers(1, 13)),
            day=str(rng.choice(["SUN", "MON", "TUE", "WED", "THU", "FRI", "SAT"])),
            outcome=("no_show" if rng.random() < no_show_rate else "show"),
        ))
    return RecordSet(tuple(recs))


@pytest.fixture
def small_records():
    return random_records(400, seed=7)
