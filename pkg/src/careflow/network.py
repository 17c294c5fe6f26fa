"""Facility nodes: bed scaling, occupancy bookkeeping, roster files."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geography import GeoPoint

STACH = "STACH"
LTACH = "LTACH"
NH = "NH"
COMMUNITY_CATEGORY = "COMMUNITY"

NON_ICU = "non-ICU"
ICU = "ICU"
ANY_BED = "ANY"


class NetworkError(ValueError):
    pass


def scale_beds(beds: int, n_agents: int, reference_population: int) -> int:
    """Scale a bed count to the modeled population; every facility keeps >= 1 bed.

    The product is rounded half-up before the floor of one is applied.
    """
    if beds < 1 or n_agents < 1 or reference_population < n_agents:
        raise NetworkError(
            f"bad scaling inputs: beds={beds} n={n_agents} p={reference_population}")
    scaled = np.floor(beds * (n_agents / reference_population) + 0.5)
    return max(1, int(scaled))


@dataclass
class Facility:
    """One network node. The community node has unbounded capacity."""

    facility_id: int
    name: str
    category: str
    county: int
    geocode: Optional[GeoPoint]
    beds_nonicu: int
    beds_icu: int = 0
    pct_out_of_state: float = 0.0
    starting_occupancy: int = 0  # nursing homes only; others use fill parameters
    placeholder_nonicu: int = 0
    placeholder_icu: int = 0
    occupants_nonicu: set = field(default_factory=set)
    occupants_icu: set = field(default_factory=set)

    @property
    def is_community(self) -> bool:
        return self.category == COMMUNITY_CATEGORY

    def free_beds(self, bed_type: str) -> int:
        if self.is_community:
            return 1 << 30
        if bed_type == NON_ICU:
            return self.beds_nonicu - self.placeholder_nonicu - len(self.occupants_nonicu)
        if bed_type == ICU:
            return self.beds_icu - self.placeholder_icu - len(self.occupants_icu)
        raise NetworkError(f"unknown bed type: {bed_type}")

    def has_open_bed(self, bed_type: str = ANY_BED) -> bool:
        if bed_type == ANY_BED:
            return self.free_beds(NON_ICU) > 0 or self.free_beds(ICU) > 0
        return self.free_beds(bed_type) > 0

    def admit(self, agent_id: int, bed_type: str) -> bool:
        """Place an agent in a bed. Returns False when the facility is full;
        fullness is a modeled outcome, not an error. Caller guarantees the
        agent is alive."""
        if self.is_community:
            return True
        if agent_id in self.occupants_nonicu or agent_id in self.occupants_icu:
            raise NetworkError(
                f"agent {agent_id} already at facility {self.facility_id}")
        if bed_type == NON_ICU:
            if self.free_beds(NON_ICU) <= 0:
                return False
            self.occupants_nonicu.add(agent_id)
            return True
        if bed_type == ICU:
            if self.free_beds(ICU) <= 0:
                return False
            self.occupants_icu.add(agent_id)
            return True
        raise NetworkError(f"unknown bed type: {bed_type}")

    def discharge(self, agent_id: int) -> None:
        if self.is_community:
            return
        if agent_id in self.occupants_nonicu:
            self.occupants_nonicu.remove(agent_id)
        elif agent_id in self.occupants_icu:
            self.occupants_icu.remove(agent_id)
        else:
            raise NetworkError(
                f"agent {agent_id} is not an occupant of facility {self.facility_id}")

    def occupied(self) -> int:
        return (len(self.occupants_nonicu) + len(self.occupants_icu)
                + self.placeholder_nonicu + self.placeholder_icu)

    def occupied_icu(self) -> int:
        return len(self.occupants_icu) + self.placeholder_icu


class FacilityRoster:
    """All facilities keyed by id, with category indexes.

    Internal indexes are dense and deterministic: the community is index 0,
    then facilities in ascending id order.
    """

    def __init__(self, facilities: list[Facility]):
        ids = [f.facility_id for f in facilities]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate facility ids")
        community = [f for f in facilities if f.is_community]
        if len(community) != 1:
            raise NetworkError("roster must contain exactly one community node")
        ordered = community + sorted(
            (f for f in facilities if not f.is_community),
            key=lambda f: f.facility_id)
        self.facilities = ordered
        self.index_of = {f.facility_id: i for i, f in enumerate(ordered)}
        self.by_category: dict[str, list[int]] = {
            STACH: [], LTACH: [], NH: [], COMMUNITY_CATEGORY: []}
        for i, f in enumerate(ordered):
            self.by_category[f.category].append(i)

    def __len__(self) -> int:
        return len(self.facilities)

    def __getitem__(self, index: int) -> Facility:
        return self.facilities[index]

    def by_id(self, facility_id: int) -> Facility:
        return self.facilities[self.index_of[facility_id]]

    def category_counts(self) -> dict[str, int]:
        return {cat: len(ix) for cat, ix in self.by_category.items()}


def _read_roster_csv(path: Path, expected_header: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != expected_header:
            raise NetworkError(f"{path}: expected header {expected_header}, "
                               f"got {reader.fieldnames}")
        return list(reader)


def read_stachs(path: Path) -> list[Facility]:
    header = ["facility_id", "name", "county_id", "lat", "lon",
              "beds_nonicu", "beds_icu", "pct_out_of_state"]
    rows = _read_roster_csv(path, header)
    return [
        Facility(
            facility_id=int(r["facility_id"]), name=r["name"], category=STACH,
            county=int(r["county_id"]),
            geocode=GeoPoint(float(r["lat"]), float(r["lon"])),
            beds_nonicu=int(r["beds_nonicu"]), beds_icu=int(r["beds_icu"]),
            pct_out_of_state=float(r["pct_out_of_state"]),
        )
        for r in rows
    ]


def read_ltachs(path: Path) -> list[Facility]:
    header = ["facility_id", "name", "county_id", "lat", "lon", "beds"]
    rows = _read_roster_csv(path, header)
    return [
        Facility(
            facility_id=int(r["facility_id"]), name=r["name"], category=LTACH,
            county=int(r["county_id"]),
            geocode=GeoPoint(float(r["lat"]), float(r["lon"])),
            beds_nonicu=int(r["beds"]),
        )
        for r in rows
    ]


def read_nursing_homes(path: Path) -> list[Facility]:
    header = ["facility_id", "name", "county_id", "lat", "lon", "beds",
              "starting_occupancy"]
    rows = _read_roster_csv(path, header)
    return [
        Facility(
            facility_id=int(r["facility_id"]), name=r["name"], category=NH,
            county=int(r["county_id"]),
            geocode=GeoPoint(float(r["lat"]), float(r["lon"])),
            beds_nonicu=int(r["beds"]),
            starting_occupancy=int(r["starting_occupancy"]),
        )
        for r in rows
    ]
