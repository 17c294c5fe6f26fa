import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from careflow.geography import (GeographyError, GeoPoint,
                                build_distance_matrix, closest_n,
                                great_circle_miles, read_distance_csv,
                                write_distance_csv, EARTH_RADIUS_MILES)


def law_of_cosines_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Independent great-circle oracle (spherical law of cosines)."""
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dlon = math.radians(b.longitude - a.longitude)
    c = (math.sin(p1) * math.sin(p2)
         + math.cos(p1) * math.cos(p2) * math.cos(dlon))
    return EARTH_RADIUS_MILES * math.acos(min(1.0, max(-1.0, c)))


coords = st.tuples(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9))


def test_zero_distance_same_point():
    p = GeoPoint(35.78, -78.64)
    assert great_circle_miles(p, p) == 0.0


def test_antipodal_half_circumference():
    d = great_circle_miles(GeoPoint(0, 0), GeoPoint(0, 180))
    assert abs(d - math.pi * EARTH_RADIUS_MILES) < 1.0
    assert abs(d - 12436) < 1.0


def test_matches_independent_oracle():
    a = GeoPoint(35.78, -78.64)
    b = GeoPoint(36.08, -79.79)
    assert abs(great_circle_miles(a, b) - law_of_cosines_miles(a, b)) < 0.5


def test_invalid_coordinates_rejected():
    with pytest.raises(GeographyError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(GeographyError):
        GeoPoint(0.0, -181.0)


@given(coords, coords)
def test_symmetry(c1, c2):
    a, b = GeoPoint(*c1), GeoPoint(*c2)
    assert great_circle_miles(a, b) == pytest.approx(
        great_circle_miles(b, a), abs=1e-9)


@given(coords, coords, coords)
def test_triangle_inequality(c1, c2, c3):
    a, b, c = GeoPoint(*c1), GeoPoint(*c2), GeoPoint(*c3)
    assert (great_circle_miles(a, c)
            <= great_circle_miles(a, b) + great_circle_miles(b, c) + 1e-6)


def _grid(n_counties, n_facilities, rng):
    counties = [(i, GeoPoint(34.0 + 0.02 * float(rng.integers(0, 100)),
                             -80.0 + 0.02 * float(rng.integers(0, 100))))
                for i in range(1, n_counties + 1)]
    facilities = [(j, GeoPoint(34.0 + 0.02 * float(rng.integers(0, 100)),
                               -80.0 + 0.02 * float(rng.integers(0, 100))))
                  for j in range(101, 101 + n_facilities)]
    return counties, facilities


def test_matrix_single_entry_zero():
    p = GeoPoint(35.0, -79.0)
    matrix = build_distance_matrix("NH", [(1, p)], [(7, p)])
    assert matrix.distance(1, 7) == 0.0
    assert matrix.miles.shape == (1, 1)


def test_matrix_cardinality():
    counties = [(1, GeoPoint(35, -79)), (3, GeoPoint(35.5, -79.5))]
    facilities = [(9, GeoPoint(35.1, -79)), (10, GeoPoint(35.2, -79)),
                  (11, GeoPoint(35.3, -79))]
    matrix = build_distance_matrix("NH", counties, facilities)
    assert matrix.miles.shape == (2, 3)


def test_matrix_matches_pairwise_recomputation(rng):
    counties, facilities = _grid(20, 30, rng)
    matrix = build_distance_matrix("STACH", counties, facilities)
    for cid, cp in counties:
        for fid, fp in facilities:
            assert matrix.distance(cid, fid) == pytest.approx(
                great_circle_miles(cp, fp))


def test_matrix_duplicate_ids_rejected():
    p = GeoPoint(35, -79)
    with pytest.raises(GeographyError):
        build_distance_matrix("NH", [(1, p), (1, p)], [(2, p)])
    with pytest.raises(GeographyError):
        build_distance_matrix("NH", [(1, p)], [(2, p), (2, p)])


def test_matrix_empty_rejected():
    with pytest.raises(GeographyError):
        build_distance_matrix("NH", [], [(1, GeoPoint(35, -79))])


def test_closest_n_all_within_radius(rng):
    counties, facilities = _grid(3, 5, rng)
    matrix = build_distance_matrix("NH", counties, facilities)
    assert len(closest_n(matrix, 1, 50, max_miles=1e9)) == 5


def test_closest_n_tie_broken_by_id():
    p = GeoPoint(35, -79)
    q = GeoPoint(35.4, -79)
    matrix = build_distance_matrix("NH", [(1, p)], [(22, q), (21, q)])
    assert closest_n(matrix, 1, 2) == [21, 22]


def test_closest_n_matches_full_sort(rng):
    counties, facilities = _grid(10, 40, rng)
    matrix = build_distance_matrix("NH", counties, facilities)
    for cid, _ in counties:
        row = matrix.county_row(cid)
        oracle = [fid for _, fid in
                  sorted(zip(row, matrix.facility_ids))][:12]
        assert closest_n(matrix, cid, 12, max_miles=1e9) == oracle


def test_closest_n_prefix_property(rng):
    counties, facilities = _grid(5, 25, rng)
    matrix = build_distance_matrix("NH", counties, facilities)
    for n in range(1, 25):
        assert closest_n(matrix, 2, n, 1e9) == closest_n(matrix, 2, n + 1, 1e9)[:n]


def test_closest_n_respects_max_distance():
    near = GeoPoint(35.0, -79.0)
    far = GeoPoint(38.0, -79.0)  # roughly 200+ miles north
    matrix = build_distance_matrix("NH", [(1, near)], [(5, near), (6, far)])
    assert closest_n(matrix, 1, 10, max_miles=100.0) == [5]


def test_closest_n_unknown_county():
    matrix = build_distance_matrix(
        "NH", [(1, GeoPoint(35, -79))], [(5, GeoPoint(35, -79))])
    with pytest.raises(GeographyError):
        closest_n(matrix, 99, 1)


def test_csv_roundtrip(tmp_path, rng):
    counties, facilities = _grid(4, 6, rng)
    matrix = build_distance_matrix("LTACH", counties, facilities)
    path = tmp_path / "distances.csv"
    write_distance_csv(matrix, path)
    loaded = read_distance_csv("LTACH", path)
    assert loaded.county_ids == matrix.county_ids
    assert loaded.facility_ids == matrix.facility_ids
    np.testing.assert_allclose(loaded.miles, matrix.miles, atol=1e-6)
