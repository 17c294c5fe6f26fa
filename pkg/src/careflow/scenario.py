"""Scenario inputs: parameter file, data files, cross-validation."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .geography import (DistanceMatrix, GeoPoint, build_distance_matrix,
                        read_distance_csv)
from .network import (Facility, read_ltachs, read_nursing_homes,
                      read_stachs, STACH, LTACH, NH)
from .population import PersonTable, bin_ages
from .transitions import DISPOSITIONS

log = logging.getLogger(__name__)

PARAMETER_FILE = "parameters.txt"
DISTANCE_FILES = {STACH: "distances_stach.csv", LTACH: "distances_ltach.csv",
                  NH: "distances_nh.csv"}
GROUND_TRUTH_FILE = "ground_truth.json"


class ScenarioError(ValueError):
    pass


@dataclass
class Parameters:
    """All model parameters. Defaults are the published values; a scenario's
    parameter file overrides them with flat ``key=value`` lines."""

    # starting capacities
    ltach_fill: float = 0.9
    non_icu_fill: float = 0.65
    icu_fill: float = 0.50
    # location movement
    nursing_home_death: float = 0.15
    ltach_hospital: float = 0.071
    ltach_nh: float = 0.449
    ltach_death: float = 0.01
    ltach_65_plus: float = 0.75
    nh_stach_nh: float = 0.80
    nh_community: float = 0.67
    # distance rules
    nursing_home_closest_n: int = 30
    nursing_home_attempts: int = 30
    ltach_closest_n: int = 10
    ltach_attempts: int = 3
    max_distance_miles: float = 200.0
    # run setup
    n_agents: int = 10_600_823
    population_reference: int = 10_600_823
    days: int = 365
    seed: int = 42
    use_facility_capacity_overrides: bool = False
    readmission_enabled: bool = False
    # ICU requirement model
    icu_multiplier: float = 1.0
    icu_intercept: float = -2.2
    icu_age1: float = 0.3
    icu_age2: float = 0.6
    icu_comorbid: float = 0.5
    icu_los: float = 0.05
    icu_bedcount: float = 0.1
    # LTACH stays are parameter-driven rather than data-driven
    ltach_los_mean: float = 25.0
    ltach_los_sd: float = 10.0
    # validation thresholds
    pattern1_mean_tolerance: float = 0.02
    pattern1_sd_tolerance: float = 0.05
    pattern1_min_admissions: int = 1000
    pattern2_tolerance: float = 0.05
    pattern2_min_census: int = 100
    pattern2_slope_tolerance: float = 0.02
    pattern3_tolerance: float = 0.05
    pattern3_min_target: int = 10000
    # trend checks skip the day-zero admission transient (initial occupants
    # cannot leave before day 1, so census relaxes over roughly one mean stay)
    # and only gate aggregates large enough that counting noise cannot mimic
    # a multi-percent drift
    trend_burn_in_days: int = 30
    trend_min_census: int = 500

    def __post_init__(self):
        for name in ("ltach_fill", "non_icu_fill", "icu_fill", "nursing_home_death",
                     "ltach_hospital", "ltach_nh", "ltach_death", "ltach_65_plus",
                     "nh_stach_nh", "nh_community"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ScenarioError(f"parameter {name} must be a proportion: {value}")
        for name in ("nursing_home_closest_n", "nursing_home_attempts",
                     "ltach_closest_n", "ltach_attempts", "n_agents",
                     "population_reference", "days"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"parameter {name} must be >= 1")

    @classmethod
    def from_file(cls, path: Path) -> "Parameters":
        known = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ScenarioError(f"{path}:{lineno}: expected key=value")
                key, _, text = line.partition("=")
                key, text = key.strip(), text.strip()
                if key not in known:
                    raise ScenarioError(f"{path}:{lineno}: unknown parameter {key!r}")
                values[key] = _parse_value(key, text, known[key], path, lineno)
        for name in known:
            if name not in values:
                log.debug("parameter %s not in %s; using default", name, path)
        return cls(**values)

    def to_file(self, path: Path) -> None:
        with open(path, "w") as fh:
            for f in fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)}\n")


def _parse_value(key, text, ftype, path, lineno):
    try:
        if ftype in (bool, "bool"):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if ftype in (int, "int"):
            return int(text)
        return float(text)
    except ValueError:
        raise ScenarioError(
            f"{path}:{lineno}: cannot parse {key}={text!r}") from None


def _read_counties(path: Path) -> dict[int, GeoPoint]:
    counties: dict[int, GeoPoint] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["county_id", "lat", "lon"]:
            raise ScenarioError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            cid = int(rec["county_id"])
            if cid in counties:
                raise ScenarioError(f"{path}: duplicate county {cid}")
            counties[cid] = GeoPoint(float(rec["lat"]), float(rec["lon"]))
    return counties


def _read_discharges(path: Path) -> dict[int, np.ndarray]:
    out: dict[int, np.ndarray] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["facility_id", "age_group", "disposition", "count"]
        if reader.fieldnames != expected:
            raise ScenarioError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            fid = int(rec["facility_id"])
            age = int(rec["age_group"])
            disp = rec["disposition"]
            if disp not in DISPOSITIONS:
                raise ScenarioError(f"{path}: unknown disposition {disp!r}")
            if age not in (0, 1, 2):
                raise ScenarioError(f"{path}: bad age group {age}")
            mat = out.setdefault(fid, np.zeros((3, 5)))
            mat[age, DISPOSITIONS.index(disp)] += float(rec["count"])
    return out


def _read_county_shares(path: Path) -> dict[int, dict[int, float]]:
    out: dict[int, dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["facility_id", "county_id", "discharges"]
        if reader.fieldnames != expected:
            raise ScenarioError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            fid = int(rec["facility_id"])
            out.setdefault(fid, {})[int(rec["county_id"])] = float(rec["discharges"])
    return out


def _read_los(path: Path) -> dict[int, tuple[float, float, float]]:
    out: dict[int, tuple[float, float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["facility_id", "mean_los_days", "sd_los_days", "total_discharges"]
        if reader.fieldnames != expected:
            raise ScenarioError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            out[int(rec["facility_id"])] = (
                float(rec["mean_los_days"]), float(rec["sd_los_days"]),
                float(rec["total_discharges"]))
    return out


def _read_community_admissions(path: Path
                               ) -> dict[tuple[int, int], tuple[float, float]]:
    out: dict[tuple[int, int], list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["county_id", "age_group", "category", "annual_admissions"]
        if reader.fieldnames != expected:
            raise ScenarioError(f"{path}: bad header {reader.fieldnames}")
        for rec in reader:
            key = (int(rec["county_id"]), int(rec["age_group"]))
            cell = out.setdefault(key, [0.0, 0.0])
            category = rec["category"]
            if category == STACH:
                cell[0] += float(rec["annual_admissions"])
            elif category == NH:
                cell[1] += float(rec["annual_admissions"])
            else:
                raise ScenarioError(
                    f"{path}: category {category!r} cannot receive community "
                    f"admissions")
    return {k: (v[0], v[1]) for k, v in out.items()}


@dataclass
class Scenario:
    """Fully loaded and cross-checked model inputs."""

    root: Path
    parameters: Parameters
    counties: dict[int, GeoPoint]
    population: PersonTable
    stachs: list[Facility]
    ltachs: list[Facility]
    nursing_homes: list[Facility]
    discharges: dict[int, np.ndarray]
    county_shares: dict[int, dict[int, float]]
    los_table: dict[int, tuple[float, float, float]]
    community_admissions: dict[tuple[int, int], tuple[float, float]]
    distances: dict[str, DistanceMatrix]
    capacity_overrides: dict[int, tuple[int, int]]
    ground_truth: Optional[dict] = None

    def population_counts(self) -> dict[tuple[int, int], int]:
        ages = bin_ages(self.population.age_years.astype(np.int32))
        counts: dict[tuple[int, int], int] = {}
        for county in sorted(self.counties):
            mask = self.population.county == county
            for g in (0, 1, 2):
                counts[(county, g)] = int(np.count_nonzero(mask & (ages == g)))
        return counts

    def nh_mean_los(self) -> float:
        """Discharge-weighted mean stay across nursing homes."""
        total = 0.0
        weighted = 0.0
        for fac in self.nursing_homes:
            mean, _, discharges = self.los_table[fac.facility_id]
            weighted += mean * discharges
            total += discharges
        if total <= 0:
            raise ScenarioError("nursing-home LOS rows have no discharges")
        return weighted / total


def _compute_distances(counties: dict[int, GeoPoint],
                       facilities: list[Facility], category: str) -> DistanceMatrix:
    return build_distance_matrix(
        category,
        sorted(counties.items()),
        sorted((f.facility_id, f.geocode) for f in facilities),
    )


def load_scenario(path: Path | str) -> Scenario:
    """Load a scenario directory, reporting all cross-reference failures at once."""
    root = Path(path)
    if not root.is_dir():
        raise ScenarioError(f"scenario directory not found: {root}")
    required = [PARAMETER_FILE, "counties.csv", "population.csv", "stachs.csv",
                "ltachs.csv", "nursing_homes.csv", "discharges.csv",
                "county_shares.csv", "los.csv", "community_admissions.csv"]
    missing = [name for name in required if not (root / name).exists()]
    if missing:
        raise ScenarioError(f"{root}: missing input files: {', '.join(missing)}")

    parameters = Parameters.from_file(root / PARAMETER_FILE)
    counties = _read_counties(root / "counties.csv")
    population = PersonTable.read_csv(root / "population.csv")
    stachs = read_stachs(root / "stachs.csv")
    ltachs = read_ltachs(root / "ltachs.csv")
    nursing_homes = read_nursing_homes(root / "nursing_homes.csv")
    discharges = _read_discharges(root / "discharges.csv")
    county_shares = _read_county_shares(root / "county_shares.csv")
    los_table = _read_los(root / "los.csv")
    community = _read_community_admissions(root / "community_admissions.csv")

    errors: list[str] = []
    known_ids = {f.facility_id for f in stachs + ltachs + nursing_homes}
    for fid in sorted(set(discharges) - known_ids):
        errors.append(f"discharges.csv references unknown facility {fid}")
    for fid in sorted(set(county_shares) - known_ids):
        errors.append(f"county_shares.csv references unknown facility {fid}")
    for fid in sorted(set(los_table) - known_ids):
        errors.append(f"los.csv references unknown facility {fid}")
    for fac in stachs + ltachs + nursing_homes:
        if fac.county not in counties:
            errors.append(
                f"facility {fac.facility_id} is in unknown county {fac.county}")
    for fac in nursing_homes:
        if fac.facility_id not in los_table:
            errors.append(f"nursing home {fac.facility_id} has no los.csv row")
        if fac.starting_occupancy > fac.beds_nonicu:
            errors.append(
                f"nursing home {fac.facility_id} starting occupancy exceeds beds")
    for fac in stachs:
        if not (0.0 <= fac.pct_out_of_state <= 1.0):
            errors.append(
                f"hospital {fac.facility_id} out-of-state share out of range")
    for fid, shares in sorted(county_shares.items()):
        for cid in shares:
            if cid not in counties:
                errors.append(
                    f"county_shares.csv: facility {fid} references unknown "
                    f"county {cid}")
    population_counties = set(np.unique(population.county))
    for cid in sorted(population_counties - set(counties)):
        errors.append(f"population.csv references unknown county {cid}")
    for (cid, age), (to_h, to_n) in sorted(community.items()):
        if cid not in counties:
            errors.append(
                f"community_admissions.csv references unknown county {cid}")
        if age < 2 and to_n > 0:
            errors.append(
                f"community_admissions.csv: under-65 nursing-home admissions "
                f"for county {cid} age {age}")
    if errors:
        raise ScenarioError(
            f"{root}: scenario validation failed:\n  " + "\n  ".join(errors))

    distances: dict[str, DistanceMatrix] = {}
    rosters = {STACH: stachs, LTACH: ltachs, NH: nursing_homes}
    for cat, filename in DISTANCE_FILES.items():
        fpath = root / filename
        if fpath.exists():
            distances[cat] = read_distance_csv(cat, fpath)
        else:
            distances[cat] = _compute_distances(counties, rosters[cat], cat)

    overrides: dict[int, tuple[int, int]] = {}
    override_path = root / "capacity_overrides.csv"
    if override_path.exists():
        with open(override_path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["facility_id", "start_nonicu", "start_icu"]
            if reader.fieldnames != expected:
                raise ScenarioError(f"{override_path}: bad header")
            for rec in reader:
                overrides[int(rec["facility_id"])] = (
                    int(rec["start_nonicu"]), int(rec["start_icu"]))

    ground_truth = None
    gt_path = root / GROUND_TRUTH_FILE
    if gt_path.exists():
        ground_truth = json.loads(gt_path.read_text())

    return Scenario(
        root=root, parameters=parameters, counties=counties,
        population=population, stachs=stachs, ltachs=ltachs,
        nursing_homes=nursing_homes, discharges=discharges,
        county_shares=county_shares, los_table=los_table,
        community_admissions=community, distances=distances,
        capacity_overrides=overrides, ground_truth=ground_truth,
    )
