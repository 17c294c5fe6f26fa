import numpy as np
import pytest

from careflow.geography import GeoPoint
from careflow.network import (ANY_BED, COMMUNITY_CATEGORY, Facility,
                              FacilityRoster, ICU, NetworkError, NON_ICU,
                              scale_beds)


def hospital(beds_nonicu=10, beds_icu=2, fid=1):
    return Facility(facility_id=fid, name="h", category="STACH", county=1,
                    geocode=GeoPoint(35, -79), beds_nonicu=beds_nonicu,
                    beds_icu=beds_icu)


def test_scale_beds_identity():
    assert scale_beds(250, 1000, 1000) == 250


def test_scale_beds_clamps_to_one():
    assert scale_beds(100, 1, 1000) == 1


def test_scale_beds_exact():
    assert scale_beds(500, 100, 1000) == 50


def test_scale_beds_rounds_half_up():
    assert scale_beds(5, 500, 1000) == 3  # 2.5 rounds up


def test_scale_beds_bad_inputs():
    with pytest.raises(NetworkError):
        scale_beds(0, 10, 100)
    with pytest.raises(NetworkError):
        scale_beds(10, 100, 10)


def test_admit_empty_facility():
    fac = hospital()
    assert fac.admit(7, NON_ICU)
    assert 7 in fac.occupants_nonicu
    assert fac.free_beds(NON_ICU) == 9


def test_placeholders_consume_beds():
    fac = hospital(beds_nonicu=1, beds_icu=0)
    fac.placeholder_nonicu = 1
    assert not fac.admit(1, NON_ICU)
    assert fac.occupied() == 1


def test_admit_full_returns_false_without_change():
    fac = hospital(beds_nonicu=1, beds_icu=0)
    assert fac.admit(1, NON_ICU)
    assert not fac.admit(2, NON_ICU)
    assert fac.occupants_nonicu == {1}


def test_double_admit_is_logic_error():
    fac = hospital()
    fac.admit(1, NON_ICU)
    with pytest.raises(NetworkError):
        fac.admit(1, ICU)


def test_discharge_inverse_of_admit():
    fac = hospital()
    before = fac.occupied()
    fac.admit(3, ICU)
    fac.discharge(3)
    assert fac.occupied() == before


def test_discharge_twice_is_logic_error():
    fac = hospital()
    fac.admit(3, ICU)
    fac.discharge(3)
    with pytest.raises(NetworkError):
        fac.discharge(3)


def test_has_open_bed_any_semantics():
    fac = hospital(beds_nonicu=1, beds_icu=1)
    fac.admit(1, NON_ICU)
    assert fac.has_open_bed(ANY_BED)   # ICU side still open
    fac.admit(2, ICU)
    assert not fac.has_open_bed(ANY_BED)
    assert not fac.has_open_bed(NON_ICU)


def test_community_is_unbounded():
    community = Facility(facility_id=0, name="c",
                         category=COMMUNITY_CATEGORY, county=-1,
                         geocode=None, beds_nonicu=0)
    for i in range(100):
        assert community.admit(i, NON_ICU)
    assert community.has_open_bed(ANY_BED)


def test_occupancy_fuzz_never_exceeds_capacity(rng):
    """Random admit/discharge traffic: occupancy stays within capacity and
    always equals admits minus discharges (counting oracle)."""
    fac = hospital(beds_nonicu=6, beds_icu=3)
    fac.placeholder_nonicu = 1
    admitted = set()
    admits = discharges = 0
    for step in range(10_000):
        if admitted and rng.random() < 0.45:
            agent = sorted(admitted)[int(rng.integers(len(admitted)))]
            fac.discharge(agent)
            admitted.remove(agent)
            discharges += 1
        else:
            agent = int(rng.integers(100_000))
            if agent in admitted:
                continue
            bed = NON_ICU if rng.random() < 0.7 else ICU
            if fac.admit(agent, bed):
                admitted.add(agent)
                admits += 1
        assert len(fac.occupants_nonicu) + fac.placeholder_nonicu \
            <= fac.beds_nonicu
        assert len(fac.occupants_icu) + fac.placeholder_icu <= fac.beds_icu
        assert admits - discharges == len(admitted)
        # recount oracle for the open-bed flags
        assert fac.has_open_bed(NON_ICU) == (
            fac.beds_nonicu - fac.placeholder_nonicu
            - len(fac.occupants_nonicu) > 0)


def test_roster_indexing_and_counts():
    community = Facility(facility_id=0, name="c",
                         category=COMMUNITY_CATEGORY, county=-1,
                         geocode=None, beds_nonicu=0)
    facs = [community, hospital(fid=12), hospital(fid=3)]
    roster = FacilityRoster(facs)
    assert roster[0].is_community
    assert roster.by_id(3).facility_id == 3
    assert [f.facility_id for f in roster.facilities] == [0, 3, 12]
    assert roster.category_counts()["STACH"] == 2


def test_roster_requires_single_community():
    with pytest.raises(NetworkError):
        FacilityRoster([hospital(fid=1)])


def test_roster_duplicate_ids():
    community = Facility(facility_id=0, name="c",
                         category=COMMUNITY_CATEGORY, county=-1,
                         geocode=None, beds_nonicu=0)
    with pytest.raises(NetworkError):
        FacilityRoster([community, hospital(fid=1), hospital(fid=1)])
