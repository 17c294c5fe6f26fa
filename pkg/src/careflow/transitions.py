"""Movement tables computed once at initiation from scenario inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import STACH, LTACH, NH, COMMUNITY_CATEGORY

CATEGORIES = [COMMUNITY_CATEGORY, STACH, LTACH, NH]
CAT_C, CAT_H, CAT_L, CAT_N = 0, 1, 2, 3
DISPOSITIONS = ["community", "hospital", "ltach", "nh", "death"]
AGE_GROUPS = (0, 1, 2)

ROW_SUM_TOL = 1e-9


class TransitionError(ValueError):
    pass


@dataclass
class HospitalRecord:
    """Everything known about one hospital after merging the input files."""

    facility_id: int
    beds_nonicu: int
    beds_icu: int
    total_discharges: float
    mean_los: float
    sd_los: float
    county_discharges: dict[int, float]
    out_of_state_share: float

    def county_share(self, county_id: int) -> float:
        total = sum(self.county_discharges.values())
        return self.county_discharges.get(county_id, 0.0) / total if total else 0.0


def build_hospital_records(stachs, county_shares: dict[int, dict[int, float]],
                           los_table: dict[int, tuple[float, float, float]],
                           ) -> tuple[dict[int, HospitalRecord], list[str]]:
    """Merge roster, county-of-residence, and LOS summaries per hospital.

    Hospitals absent from the discharge data are dropped with a warning; the
    model only simulates facilities it has movement data for.
    """
    records: dict[int, HospitalRecord] = {}
    warnings: list[str] = []
    for fac in stachs:
        fid = fac.facility_id
        if fid not in los_table or fid not in county_shares:
            warnings.append(
                f"hospital {fid} ({fac.name}) missing from discharge data; excluded")
            continue
        mean_los, sd_los, total = los_table[fid]
        records[fid] = HospitalRecord(
            facility_id=fid,
            beds_nonicu=fac.beds_nonicu,
            beds_icu=fac.beds_icu,
            total_discharges=float(total),
            mean_los=float(mean_los),
            sd_los=float(sd_los),
            county_discharges=dict(sorted(county_shares[fid].items())),
            out_of_state_share=fac.pct_out_of_state,
        )
    return records, warnings


class CommunityTransitionTable:
    """Daily probabilities of leaving the community, by county and age group."""

    def __init__(self, county_ids: list[int], p_hospital: np.ndarray,
                 p_nh: np.ndarray):
        self.county_ids = list(county_ids)
        self.index = {c: i for i, c in enumerate(self.county_ids)}
        if np.any(p_hospital < 0) or np.any(p_nh < 0):
            raise TransitionError("negative daily probability")
        if np.any(p_hospital + p_nh > 1.0):
            raise TransitionError("daily movement probability above 1")
        self.p_hospital = p_hospital
        self.p_nh = p_nh

    def probabilities(self, county_id: int, age_group: int) -> tuple[float, float]:
        i = self.index[county_id]
        return float(self.p_hospital[i, age_group]), float(self.p_nh[i, age_group])


def build_community_transitions(
        admissions: dict[tuple[int, int], tuple[float, float]],
        population: dict[tuple[int, int], int]) -> CommunityTransitionTable:
    """Convert annual community admission counts into daily probabilities.

    ``admissions`` maps (county, age group) to annual (hospital, nursing home)
    admissions. There is no LTACH column: community agents cannot go directly
    to an LTACH.
    """
    county_ids = sorted({c for c, _ in population})
    p_hosp = np.zeros((len(county_ids), 3))
    p_nh = np.zeros((len(county_ids), 3))
    for (county, age), (to_hosp, to_nh) in sorted(admissions.items()):
        pop = population.get((county, age), 0)
        if pop <= 0 and (to_hosp > 0 or to_nh > 0):
            raise TransitionError(
                f"admissions from empty population cell ({county}, age {age})")
        if pop <= 0:
            continue
        i = county_ids.index(county)
        p_hosp[i, age] = to_hosp / (pop * 365.0)
        p_nh[i, age] = to_nh / (pop * 365.0)
    if np.any(p_hosp + p_nh > 1.0):
        raise TransitionError("daily probability above 1; scenario is infeasible")
    return CommunityTransitionTable(county_ids, p_hosp, p_nh)


@dataclass
class FacilityTransitionRow:
    source: int | str  # facility id, or "LTACH"/"NH" for the collectives
    age_group: int
    probabilities: np.ndarray  # over CATEGORIES, conditional on survival

    def __post_init__(self):
        p = self.probabilities
        if p.shape != (4,) or np.any(p < 0):
            raise TransitionError(f"bad transition row for {self.source}")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise TransitionError(
                f"row for {self.source}/age{self.age_group} sums to {p.sum()}")
        if self.age_group < 2 and p[CAT_N] > 0:
            raise TransitionError("under-65 row assigns nursing-home probability")
        if self.age_group < 1 and p[CAT_L] > 0:
            raise TransitionError("under-50 row assigns LTACH probability")


class FacilityTransitions:
    """Per-source, per-age discharge destination rows (sum to 1)."""

    def __init__(self, rows: dict[int | str, np.ndarray]):
        self.rows = rows
        self._cum = {k: np.cumsum(v, axis=1) for k, v in rows.items()}
        for key, mat in rows.items():
            for g in AGE_GROUPS:
                FacilityTransitionRow(key, g, mat[g])
        for cum in self._cum.values():
            cum[:, -1] = 1.0

    def row(self, source: int | str, age_group: int) -> np.ndarray:
        return self.rows[source][age_group]

    def cumulative(self, source: int | str, age_group: int) -> np.ndarray:
        return self._cum[source][age_group]


def _apply_age_prohibitions(p: np.ndarray, age_group: int) -> np.ndarray:
    """Zero age-prohibited destinations and renormalize proportionally."""
    p = p.copy()
    if age_group < 2:
        p[CAT_N] = 0.0
    if age_group < 1:
        p[CAT_L] = 0.0
    total = p.sum()
    if total <= 0:
        raise TransitionError("all destinations prohibited for a transition row")
    return p / total


def build_facility_transitions(discharges: dict[int, np.ndarray],
                               params) -> FacilityTransitions:
    """Build destination rows for each hospital plus the LTACH/NH collectives.

    ``discharges`` maps hospital id to a 3x5 array of counts over
    ``DISPOSITIONS`` by age group. Rows are conditional on surviving the stay:
    the death column sets the death rate elsewhere, and the remaining mass is
    renormalized so every row sums to 1.
    """
    rows: dict[int | str, np.ndarray] = {}
    for fid, counts in sorted(discharges.items()):
        if counts.shape != (3, 5) or np.any(counts < 0):
            raise TransitionError(f"bad discharge counts for hospital {fid}")
        mat = np.zeros((3, 4))
        for g in AGE_GROUPS:
            alive = counts[g, :4].astype(np.float64)
            if alive.sum() <= 0:
                raise TransitionError(
                    f"hospital {fid} age {g}: no surviving discharges")
            mat[g] = _apply_age_prohibitions(alive / alive.sum(), g)
        rows[fid] = mat

    lt_death = params.ltach_death
    lt = np.zeros(4)
    lt[CAT_H] = params.ltach_hospital
    lt[CAT_N] = params.ltach_nh
    lt[CAT_C] = 1.0 - lt_death - lt[CAT_H] - lt[CAT_N]
    if lt[CAT_C] < 0:
        raise TransitionError("LTACH parameters leave no community probability")
    lt = lt / (1.0 - lt_death)
    rows["LTACH"] = np.stack([_apply_age_prohibitions(lt, g) for g in AGE_GROUPS])

    nh = np.zeros(4)
    nh[CAT_C] = params.nh_community
    nh[CAT_H] = 1.0 - params.nh_community
    rows["NH"] = np.stack([_apply_age_prohibitions(nh, g) for g in AGE_GROUPS])

    return FacilityTransitions(rows)


@dataclass(frozen=True)
class DeathRates:
    """Probability of dying when a stay ends, by facility category."""

    rates: dict

    def __getitem__(self, category: str) -> float:
        return self.rates[category]


def build_death_rates(hospital_deaths: float, hospital_discharges: float,
                      params, nh_mean_los: float) -> DeathRates:
    """Death-at-discharge rates. The nursing-home parameter is an annual share
    of residents, converted to a per-discharge probability through the mean
    stay so that roughly that share of residents dies each simulated year."""
    if hospital_discharges <= 0:
        raise TransitionError("hospital discharges must be positive")
    rates = {
        STACH: hospital_deaths / hospital_discharges,
        LTACH: params.ltach_death,
        NH: params.nursing_home_death * nh_mean_los / 365.0,
    }
    for cat, rate in rates.items():
        if not (0.0 <= rate <= 1.0):
            raise TransitionError(f"death rate for {cat} out of range: {rate}")
    return DeathRates(rates)


def build_hospital_age_distribution(age_counts: np.ndarray) -> np.ndarray:
    """Normalized age-group shares of hospitalized agents."""
    counts = np.asarray(age_counts, dtype=np.float64)
    if counts.shape != (3,) or np.any(counts < 0):
        raise TransitionError("age counts must be three non-negative values")
    total = counts.sum()
    if total <= 0:
        raise TransitionError("age counts are all zero")
    return counts / total


@dataclass(frozen=True)
class FourByFour:
    """Annual movement targets among the four location categories."""

    matrix: np.ndarray  # (4, 4) ordered by CATEGORIES, from-row to-column

    def __post_init__(self):
        m = self.matrix
        if m.shape != (4, 4) or np.any(m < 0):
            raise TransitionError("four-by-four must be 4x4 and non-negative")
        if m[CAT_C, CAT_C] != 0:
            raise TransitionError("community-to-community target must be zero")

    def cell(self, from_cat: str, to_cat: str) -> float:
        return float(self.matrix[CATEGORIES.index(from_cat),
                                 CATEGORIES.index(to_cat)])


def community_inflows(community: CommunityTransitionTable,
                      population: dict[tuple[int, int], int]
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Expected annual community-to-hospital and community-to-NH admissions
    by age group. Nursing-home moves are only generated for age group 2, so
    table mass for younger groups (normally zero) is masked out."""
    to_h = np.zeros(3)
    to_n = np.zeros(3)
    for (county, age), pop in sorted(population.items()):
        if county not in community.index:
            continue
        ph, pn = community.probabilities(county, age)
        to_h[age] += pop * ph * 365.0
        if age == 2:
            to_n[age] += pop * pn * 365.0
    return to_h, to_n


def hospital_admission_weights(records: dict[int, HospitalRecord],
                               community: CommunityTransitionTable,
                               population: dict[tuple[int, int], int]
                               ) -> dict[int, float]:
    """Expected share of hospital admissions going to each hospital, using
    community inflow distributed by first-choice county shares."""
    fids = sorted(records)
    weights = {fid: 0.0 for fid in fids}
    for county in community.county_ids:
        pull = np.array([records[fid].county_discharges.get(county, 0.0)
                         for fid in fids])
        total = pull.sum()
        if total <= 0:
            continue
        inflow = sum(
            population.get((county, g), 0)
            * community.probabilities(county, g)[0] * 365.0
            for g in AGE_GROUPS)
        for fid, share in zip(fids, pull / total):
            weights[fid] += inflow * share
    grand = sum(weights.values())
    if grand <= 0:
        raise TransitionError("no community inflow to weight hospitals")
    return {fid: w / grand for fid, w in weights.items()}


def build_four_by_four(community: CommunityTransitionTable,
                       facility: FacilityTransitions,
                       deaths: DeathRates,
                       records: dict[int, HospitalRecord],
                       population: dict[tuple[int, int], int],
                       nh_stach_nh: float,
                       n_agents: int, reference_population: int,
                       iterations: int = 300) -> FourByFour:
    """Expected annual category-to-category flows at steady state.

    Solves the flow balance by fixed point at (category, age) granularity,
    including the death step and the nursing-home return override applied to
    hospital discharges. Hospital rows are aggregated with expected-admission
    weights. Targets scale linearly with the modeled fraction n/p.
    """
    ch, cn = community_inflows(community, population)
    weights = hospital_admission_weights(records, community, population)
    row_h = np.zeros((3, 4))
    for fid, w in weights.items():
        row_h += w * facility.rows[fid]
    row_l = facility.rows["LTACH"]
    row_n = facility.rows["NH"]
    d_h, d_l, d_n = deaths[STACH], deaths[LTACH], deaths[NH]

    a_h, a_l, a_n = ch.copy(), np.zeros(3), cn.copy()
    a_h_from_nh = np.zeros(3)
    flows = np.zeros((4, 4))
    for _ in range(iterations):
        s_h = a_h * (1.0 - d_h)
        eligible = np.divide(a_h_from_nh, a_h, out=np.zeros(3), where=a_h > 0)
        override = s_h * eligible * nh_stach_nh
        row_mass = s_h - override
        h_to = row_mass[:, None] * row_h  # (age, category)
        h_to[:, CAT_N] += override
        l_to = (a_l * (1.0 - d_l))[:, None] * row_l
        n_to = (a_n * (1.0 - d_n))[:, None] * row_n
        a_h = ch + h_to[:, CAT_H] + l_to[:, CAT_H] + n_to[:, CAT_H]
        a_h_from_nh = n_to[:, CAT_H]
        a_l = h_to[:, CAT_L] + n_to[:, CAT_L]
        a_n = cn + h_to[:, CAT_N] + l_to[:, CAT_N]
        flows = np.zeros((4, 4))
        flows[CAT_C, CAT_H] = ch.sum()
        flows[CAT_C, CAT_N] = cn.sum()
        flows[CAT_H] = h_to.sum(axis=0)
        flows[CAT_L] = l_to.sum(axis=0)
        flows[CAT_N] = n_to.sum(axis=0)
    scale = n_agents / reference_population
    return FourByFour(matrix=flows * scale)
