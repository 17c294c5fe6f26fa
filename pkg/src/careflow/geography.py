"""County-centroid-to-facility distance matrices and nearest-facility queries."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_MILES = 3958.8


class GeographyError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise GeographyError(f"latitude out of range: {self.latitude}")
        if not (-180.0 <= self.longitude <= 180.0):
            raise GeographyError(f"longitude out of range: {self.longitude}")


def great_circle_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine great-circle distance in miles."""
    lat1, lon1, lat2, lon2 = map(
        np.radians, (a.latitude, a.longitude, b.latitude, b.longitude)
    )
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return float(2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))))


class DistanceMatrix:
    """Distances from every county centroid to every facility of one type.

    Immutable after construction; rows are county-keyed, columns facility-keyed.
    """

    def __init__(self, facility_type: str, county_ids: Sequence[int],
                 facility_ids: Sequence[int], miles: np.ndarray):
        if len(set(county_ids)) != len(county_ids):
            raise GeographyError("duplicate county ids")
        if len(set(facility_ids)) != len(facility_ids):
            raise GeographyError("duplicate facility ids")
        if miles.shape != (len(county_ids), len(facility_ids)):
            raise GeographyError("distance array shape mismatch")
        if np.any(miles < 0):
            raise GeographyError("negative distance")
        self.facility_type = facility_type
        self.county_ids = list(county_ids)
        self.facility_ids = list(facility_ids)
        self._county_index = {c: i for i, c in enumerate(self.county_ids)}
        self._facility_index = {f: j for j, f in enumerate(self.facility_ids)}
        self.miles = miles
        self.miles.setflags(write=False)

    def distance(self, county_id: int, facility_id: int) -> float:
        return float(self.miles[self._county_index[county_id],
                                self._facility_index[facility_id]])

    def county_row(self, county_id: int) -> np.ndarray:
        try:
            return self.miles[self._county_index[county_id]]
        except KeyError:
            raise GeographyError(f"unknown county: {county_id}") from None


def build_distance_matrix(facility_type: str,
                          counties: Iterable[tuple[int, GeoPoint]],
                          facilities: Iterable[tuple[int, GeoPoint]]) -> DistanceMatrix:
    counties = list(counties)
    facilities = list(facilities)
    if not counties or not facilities:
        raise GeographyError("counties and facilities must be non-empty")
    county_ids = [c for c, _ in counties]
    facility_ids = [f for f, _ in facilities]
    miles = np.empty((len(counties), len(facilities)), dtype=np.float64)
    for i, (_, cp) in enumerate(counties):
        for j, (_, fp) in enumerate(facilities):
            miles[i, j] = great_circle_miles(cp, fp)
    return DistanceMatrix(facility_type, county_ids, facility_ids, miles)


def closest_n(matrix: DistanceMatrix, county_id: int, n: int,
              max_miles: float = 200.0) -> list[int]:
    """Facility ids within ``max_miles`` of the county centroid, nearest first.

    Ties broken by ascending facility id so results are stable across runs.
    """
    if n < 1:
        raise GeographyError(f"n must be >= 1, got {n}")
    row = matrix.county_row(county_id)
    pairs = sorted(
        (float(d), fid)
        for d, fid in zip(row, matrix.facility_ids)
        if d <= max_miles
    )
    return [fid for _, fid in pairs[:n]]


def write_distance_csv(matrix: DistanceMatrix, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county_id", "facility_id", "miles"])
        for i, cid in enumerate(matrix.county_ids):
            for j, fid in enumerate(matrix.facility_ids):
                writer.writerow([cid, fid, f"{matrix.miles[i, j]:.6f}"])


def read_distance_csv(facility_type: str, path: Path) -> DistanceMatrix:
    entries: dict[tuple[int, int], float] = {}
    county_ids: list[int] = []
    facility_ids: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["county_id", "facility_id", "miles"]:
            raise GeographyError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            cid, fid = int(rec["county_id"]), int(rec["facility_id"])
            entries[(cid, fid)] = float(rec["miles"])
            if cid not in county_ids:
                county_ids.append(cid)
            if fid not in facility_ids:
                facility_ids.append(fid)
    miles = np.empty((len(county_ids), len(facility_ids)), dtype=np.float64)
    for i, cid in enumerate(county_ids):
        for j, fid in enumerate(facility_ids):
            key = (cid, fid)
            if key not in entries:
                raise GeographyError(f"{path}: missing entry for {key}")
            miles[i, j] = entries[key]
    return DistanceMatrix(facility_type, county_ids, facility_ids, miles)
