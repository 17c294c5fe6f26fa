"""Synthetic-population handling: expansion, roster sampling, demographics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COMMUNITY = 0  # facility index reserved for the community node

# probability of a concurrent condition by age group (<50, 50-64, 65+)
COMORBIDITY_P = np.array([0.0, 0.2374, 0.5497])

AGE_LABELS = {0: "<50", 1: "50-64", 2: "65+"}


class PopulationError(ValueError):
    pass


@dataclass(frozen=True)
class PersonRow:
    county: int
    sex: int  # 0 female, 1 male; carried through but unused by movement rules
    age_years: int

    def __post_init__(self):
        if self.age_years < 0 or self.age_years > 120:
            raise PopulationError(f"age out of range: {self.age_years}")


def bin_age(age_years: int) -> int:
    """Age group: 0 for <50, 1 for 50-64, 2 for 65+."""
    if age_years < 0:
        raise PopulationError(f"negative age: {age_years}")
    if age_years < 50:
        return 0
    if age_years < 65:
        return 1
    return 2


def bin_ages(age_years: np.ndarray) -> np.ndarray:
    if np.any(age_years < 0):
        raise PopulationError("negative age in population")
    return np.digitize(age_years, [50, 65]).astype(np.int8)


class PersonTable:
    """Column-oriented person rows (county, sex, age in years)."""

    def __init__(self, county: np.ndarray, sex: np.ndarray, age_years: np.ndarray):
        n = len(county)
        if not (len(sex) == len(age_years) == n):
            raise PopulationError("column length mismatch")
        if n == 0:
            raise PopulationError("empty population")
        if np.any(age_years < 0) or np.any(age_years > 120):
            raise PopulationError("age out of range in population")
        self.county = np.asarray(county, dtype=np.int32)
        self.sex = np.asarray(sex, dtype=np.int8)
        self.age_years = np.asarray(age_years, dtype=np.int16)

    def __len__(self) -> int:
        return len(self.county)

    @classmethod
    def read_csv(cls, path: Path) -> "PersonTable":
        counties, sexes, ages = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["county_id", "sex", "age_years"]
            if reader.fieldnames != expected:
                raise PopulationError(f"{path}: expected header {expected}, "
                                      f"got {reader.fieldnames}")
            for rec in reader:
                counties.append(int(rec["county_id"]))
                sexes.append(0 if rec["sex"] == "female" else 1)
                ages.append(int(rec["age_years"]))
        return cls(np.array(counties), np.array(sexes), np.array(ages))


def expand_population(table: PersonTable, target: int,
                      rng: np.random.Generator) -> PersonTable:
    """Grow the population to ``target`` rows by uniform duplication."""
    n = len(table)
    if target < n:
        raise PopulationError(f"target {target} below population size {n}")
    if target == n:
        return table
    extra = rng.integers(0, n, size=target - n)
    return PersonTable(
        np.concatenate([table.county, table.county[extra]]),
        np.concatenate([table.sex, table.sex[extra]]),
        np.concatenate([table.age_years, table.age_years[extra]]),
    )


class AgentRoster:
    """Agent state, stored column-wise for the engine's daily scans.

    Location fields hold internal facility indexes (0 is the community).
    """

    def __init__(self, county: np.ndarray, sex: np.ndarray, age_group: np.ndarray,
                 concurrent_conditions: np.ndarray):
        self.n = len(county)
        self.county = county.astype(np.int32)
        self.sex = sex.astype(np.int8)
        self.age_group = age_group.astype(np.int8)
        self.concurrent_conditions = concurrent_conditions.astype(np.int8)
        self.alive = np.ones(self.n, dtype=bool)
        self.location = np.full(self.n, COMMUNITY, dtype=np.int32)
        self.previous_location = np.full(self.n, COMMUNITY, dtype=np.int32)
        self.leave_day = np.full(self.n, -1, dtype=np.int32)
        self.bed = np.zeros(self.n, dtype=np.int8)  # 0 none, 1 non-ICU, 2 ICU

    def in_community(self) -> np.ndarray:
        return self.alive & (self.location == COMMUNITY)


def assign_comorbidity(age_group: int, rng: np.random.Generator) -> int:
    if age_group not in (0, 1, 2):
        raise PopulationError(f"invalid age group: {age_group}")
    return int(rng.random() < COMORBIDITY_P[age_group])


def sample_agents(table: PersonTable, n: int,
                  rng: np.random.Generator) -> AgentRoster:
    """Draw ``n`` agents without replacement; ids run 0..n-1 in draw order."""
    if n < 1 or n > len(table):
        raise PopulationError(f"cannot sample {n} agents from {len(table)} rows")
    order = rng.permutation(len(table))[:n]
    age_group = bin_ages(table.age_years[order].astype(np.int32))
    cc = (rng.random(n) < COMORBIDITY_P[age_group]).astype(np.int8)
    return AgentRoster(table.county[order], table.sex[order], age_group, cc)
