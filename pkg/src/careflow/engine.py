"""Simulation engine: initialization, the daily action loop, and run reports.

Agent state lives in column arrays (see population.AgentRoster); facility
occupancy lives on the Facility objects. All randomness flows through one
seeded generator consumed in a fixed traversal order, so a seed fully
determines a run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import los as los_mod
from .network import (ANY_BED, COMMUNITY_CATEGORY, Facility, FacilityRoster,
                      ICU, LTACH, NH, NON_ICU, STACH, scale_beds)
from .population import COMMUNITY, expand_population, sample_agents
from .scenario import Scenario
from .transitions import (CAT_C, CAT_H, CAT_L, CAT_N,
                          build_community_transitions, build_death_rates,
                          build_facility_transitions,
                          build_hospital_age_distribution,
                          build_hospital_records)

log = logging.getLogger(__name__)

# action kinds
TO_STACH, TO_NH, DISCHARGE = 0, 1, 2

CAT_INDEX = {COMMUNITY_CATEGORY: CAT_C, STACH: CAT_H, LTACH: CAT_L, NH: CAT_N}

MIN_COUNTY_MILES = 1.0  # floor for inverse-distance weights


class EngineError(RuntimeError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def compute_starting_capacity(records: dict, scaled_beds: dict,
                              fill_nonicu: float, fill_icu: float,
                              overrides: dict | None = None,
                              scale: float = 1.0,
                              ) -> dict[int, tuple[int, int]]:
    """Day-zero occupied-bed counts per hospital.

    Estimates each hospital's average census from its discharge volume and
    mean stay, rescales the fleet so average occupancy matches the fill
    parameters, and shrinks the counts by the modeled population fraction.
    Facility-specific overrides bypass the estimate entirely.
    """
    if not (0.0 < fill_nonicu <= 1.0) or not (0.0 < fill_icu <= 1.0):
        raise EngineError("fill parameters must be in (0, 1]")
    if scale <= 0:
        raise EngineError("population scale must be positive")
    overrides = overrides or {}
    fids = sorted(records)
    est_nonicu, est_icu = {}, {}
    for fid in fids:
        rec = records[fid]
        total_beds = rec.beds_nonicu + rec.beds_icu
        census = rec.total_discharges * rec.mean_los / 365.0
        est_nonicu[fid] = census * rec.beds_nonicu / total_beds
        est_icu[fid] = census * rec.beds_icu / total_beds
    sum_nb = sum(records[fid].beds_nonicu for fid in fids)
    sum_ib = sum(records[fid].beds_icu for fid in fids)
    ratio_n = fill_nonicu * sum_nb / sum(est_nonicu.values())
    ratio_i = (fill_icu * sum_ib / sum(est_icu.values())
               if sum(est_icu.values()) else 0.0)
    out = {}
    for fid in fids:
        nb_scaled, ib_scaled = scaled_beds[fid]
        if fid in overrides:
            start_n, start_i = overrides[fid]
        else:
            start_n = round_half_up(ratio_n * est_nonicu[fid] * scale)
            start_i = round_half_up(ratio_i * est_icu[fid] * scale)
        out[fid] = (min(max(start_n, 0), nb_scaled),
                    min(max(start_i, 0), ib_scaled))
    return out


def assign_placeholders(capacity: int, out_of_state_share: float) -> int:
    """Beds held by immovable out-of-state placeholder agents."""
    if not (0.0 <= out_of_state_share <= 1.0):
        raise EngineError(f"out-of-state share out of range: {out_of_state_share}")
    return round_half_up(capacity * out_of_state_share)


@dataclass(frozen=True)
class IcuModel:
    """Logistic model for needing an ICU bed on arrival at a hospital.

    ``multiplier`` rescales the fitted probability; it is the knob calibrated
    to hold the ICU census steady over a run.
    """

    intercept: float
    b_age1: float
    b_age2: float
    b_comorbid: float
    b_los: float
    b_bedcount: float
    multiplier: float

    def probability(self, age_group: int, concurrent_conditions: int,
                    los_days: int, bed_count: int) -> float:
        eta = (self.intercept
               + self.b_age1 * (age_group == 1)
               + self.b_age2 * (age_group == 2)
               + self.b_comorbid * concurrent_conditions
               + self.b_los * los_days
               + self.b_bedcount * bed_count / 100.0)
        if eta >= 0:
            base = 1.0 / (1.0 + math.exp(-eta))
        else:
            e = math.exp(eta)
            base = e / (1.0 + e)
        return min(max(self.multiplier * base, 0.0), 1.0)


@dataclass
class DaySummary:
    day: int
    admissions: int
    discharges_to_community: int
    deaths: int
    turned_away: int
    fully_turned_away: int


class RunReport:
    """Raw tallies collected over a run, consumed by the validation module."""

    def __init__(self, sim: "Simulation"):
        self.seed = sim.seed
        self.n_agents = sim.agents.n
        self.days = sim.day
        self.facility_ids = [f.facility_id for f in sim.roster.facilities]
        self.categories = [f.category for f in sim.roster.facilities]
        self.beds_nonicu = np.array(
            [f.beds_nonicu for f in sim.roster.facilities])
        self.beds_icu = np.array([f.beds_icu for f in sim.roster.facilities])
        self.placeholders = np.array(
            [f.placeholder_nonicu + f.placeholder_icu
             for f in sim.roster.facilities])
        self.init_census = sim.init_census.copy()
        self.init_census_icu = sim.init_census_icu.copy()
        self.census = np.array(sim.census_rows, dtype=np.int32)
        self.census_icu = np.array(sim.census_icu_rows, dtype=np.int32)
        self.community_census = np.array(sim.community_rows, dtype=np.int64)
        self.los_count = sim.los_count.copy()
        self.los_sum = sim.los_sum.copy()
        self.los_sumsq = sim.los_sumsq.copy()
        self.admits = sim.admits.copy()
        self.departures = sim.departures.copy()
        self.deaths = sim.deaths.copy()
        self.moves = sim.moves.copy()
        self.summaries = list(sim.summaries)
        self.events = sim.events


class Simulation:
    """A seeded model instance; construct, then ``run(days)``."""

    def __init__(self, scenario: Scenario, n_agents: int | None = None,
                 days: int | None = None, seed: int | None = None):
        params = scenario.parameters
        if params.readmission_enabled:
            raise EngineError(
                "the readmission pathway is not active in this model; "
                "readmission_enabled must stay false")
        self.scenario = scenario
        self.params = params
        self.n_agents = n_agents if n_agents is not None else params.n_agents
        self.total_days = days if days is not None else params.days
        self.seed = seed if seed is not None else params.seed
        self.rng = np.random.default_rng(self.seed)
        self.day = 0

        self._build_tables()
        self._build_roster()
        self._build_agents()
        self._build_choice_caches()
        self._build_los_models()
        self._init_tallies()
        self._initialize_occupancy()

    # ----------------------------------------------------------------- setup

    def _build_tables(self):
        sc = self.scenario
        self.records, warnings = build_hospital_records(
            sc.stachs, sc.county_shares, sc.los_table)
        for w in warnings:
            log.warning("%s", w)
        self.population_counts = sc.population_counts()
        self.community_table = build_community_transitions(
            sc.community_admissions, self.population_counts)
        hospital_discharges = {fid: sc.discharges[fid] for fid in self.records}
        self.facility_transitions = build_facility_transitions(
            hospital_discharges, self.params)
        total = sum(m.sum() for m in hospital_discharges.values())
        dead = sum(m[:, 4].sum() for m in hospital_discharges.values())
        self.death_rates = build_death_rates(
            dead, total, self.params, sc.nh_mean_los())
        age_counts = np.zeros(3)
        for mat in hospital_discharges.values():
            age_counts += mat.sum(axis=1)
        self.age_distribution = build_hospital_age_distribution(age_counts)
        self.icu_model = IcuModel(
            intercept=self.params.icu_intercept, b_age1=self.params.icu_age1,
            b_age2=self.params.icu_age2, b_comorbid=self.params.icu_comorbid,
            b_los=self.params.icu_los, b_bedcount=self.params.icu_bedcount,
            multiplier=self.params.icu_multiplier)

    def _build_roster(self):
        sc = self.scenario
        n, p = self.n_agents, self.params.population_reference
        community = Facility(facility_id=0, name="community",
                             category=COMMUNITY_CATEGORY, county=-1,
                             geocode=None, beds_nonicu=0)
        facilities = [community]
        for fac in sc.stachs:
            if fac.facility_id not in self.records:
                continue  # no discharge data, not simulated
            scaled = Facility(
                facility_id=fac.facility_id, name=fac.name, category=STACH,
                county=fac.county, geocode=fac.geocode,
                beds_nonicu=scale_beds(fac.beds_nonicu, n, p) if fac.beds_nonicu else 0,
                beds_icu=scale_beds(fac.beds_icu, n, p) if fac.beds_icu else 0,
                pct_out_of_state=fac.pct_out_of_state)
            if scaled.beds_nonicu + scaled.beds_icu == 0:
                scaled.beds_nonicu = 1
            facilities.append(scaled)
        for fac in sc.ltachs + sc.nursing_homes:
            facilities.append(Facility(
                facility_id=fac.facility_id, name=fac.name, category=fac.category,
                county=fac.county, geocode=fac.geocode,
                beds_nonicu=scale_beds(fac.beds_nonicu, n, p),
                starting_occupancy=fac.starting_occupancy))
        self.roster = FacilityRoster(facilities)
        nf = len(self.roster)
        self.fac_category = np.array(
            [CAT_INDEX[f.category] for f in self.roster.facilities], dtype=np.int8)
        self.fac_raw_beds = {}
        for fac in sc.stachs:
            if fac.facility_id in self.records:
                self.fac_raw_beds[self.roster.index_of[fac.facility_id]] = (
                    fac.beds_nonicu + fac.beds_icu)
        self.county_ids = sorted(sc.counties)
        self.county_index = {c: i for i, c in enumerate(self.county_ids)}
        self.n_facilities = nf

    def _build_agents(self):
        sc = self.scenario
        table = expand_population(
            sc.population, max(self.params.population_reference, len(sc.population)),
            self.rng)
        if self.n_agents > len(table):
            raise EngineError(
                f"n_agents={self.n_agents} exceeds expanded population {len(table)}")
        self.agents = sample_agents(table, self.n_agents, self.rng)
        self.agent_county_idx = np.array(
            [self.county_index[c] for c in self.agents.county], dtype=np.int32)
        # per-agent daily movement probabilities are fixed by county and age
        n_counties = len(self.county_ids)
        ph = np.zeros((n_counties, 3))
        pn = np.zeros((n_counties, 3))
        for cid, i in self.county_index.items():
            if cid in self.community_table.index:
                j = self.community_table.index[cid]
                ph[i] = self.community_table.p_hospital[j]
                pn[i] = self.community_table.p_nh[j]
        pn[:, :2] = 0.0  # nursing-home moves only happen for age group 2
        self.p_hosp_agent = ph[self.agent_county_idx, self.agents.age_group]
        self.p_nh_agent = pn[self.agent_county_idx, self.agents.age_group]
        self.p_any_agent = self.p_hosp_agent + self.p_nh_agent

    def _build_choice_caches(self):
        sc = self.scenario
        max_miles = self.params.max_distance_miles
        roster = self.roster

        # hospital first choice: by county-of-residence discharge shares
        hospital_fids = sorted(self.records)
        self.hospital_idx = [roster.index_of[fid] for fid in hospital_fids]
        n_counties = len(self.county_ids)
        self.hosp_choice: list = [None] * n_counties
        for cid, ci in self.county_index.items():
            weights = np.array([
                self.records[fid].county_discharges.get(cid, 0.0)
                for fid in hospital_fids])
            total = weights.sum()
            if total > 0:
                cum = np.cumsum(weights) / total
                cum[-1] = 1.0
                self.hosp_choice[ci] = (np.array(self.hospital_idx), cum)

        def fallback_order(cands_with_dist, county):
            in_county = [(d, fid) for d, fid in cands_with_dist
                         if roster.by_id(fid).county == county]
            outside = [(d, fid) for d, fid in cands_with_dist
                       if roster.by_id(fid).county != county]
            ordered = sorted(in_county) + sorted(outside)
            return [roster.index_of[fid] for _, fid in ordered]

        def first_choice_cum(cands_with_dist):
            idx = np.array([roster.index_of[fid] for _, fid in cands_with_dist])
            weights = np.array([1.0 / max(d, MIN_COUNTY_MILES)
                                for d, _ in cands_with_dist])
            cum = np.cumsum(weights)
            cum /= cum[-1]
            return idx, cum

        self.stach_fallback: list = [None] * n_counties
        self.ltach_first: list = [None] * n_counties
        self.ltach_fallback: list = [None] * n_counties
        self.nh_first: list = [None] * n_counties
        self.nh_fallback: list = [None] * n_counties
        matrices = sc.distances
        for cid, ci in self.county_index.items():
            # hospitals: all in-radius candidates, no attempt cap
            row = matrices[STACH]
            pairs = sorted(
                (float(d), fid)
                for d, fid in zip(row.county_row(cid), row.facility_ids)
                if d <= max_miles and fid in self.records)
            if pairs:
                self.stach_fallback[ci] = fallback_order(pairs, cid)
            for cat, first, fb, closest_n in (
                    (LTACH, self.ltach_first, self.ltach_fallback,
                     self.params.ltach_closest_n),
                    (NH, self.nh_first, self.nh_fallback,
                     self.params.nursing_home_closest_n)):
                row = matrices[cat]
                pairs = sorted(
                    (float(d), fid)
                    for d, fid in zip(row.county_row(cid), row.facility_ids)
                    if d <= max_miles)[:closest_n]
                if pairs:
                    first[ci] = first_choice_cum(pairs)
                    fb[ci] = fallback_order(pairs, cid)

        # init-fill county pickers (inverse distance over all counties)
        self.fill_county_cum = {}
        for cat in (LTACH, NH):
            matrix = matrices[cat]
            for j, fid in enumerate(matrix.facility_ids):
                weights = 1.0 / np.maximum(matrix.miles[:, j], MIN_COUNTY_MILES)
                order = np.array([self.county_index[c] for c in matrix.county_ids])
                cum = np.cumsum(weights)
                cum /= cum[-1]
                self.fill_county_cum[roster.index_of[fid]] = (order, cum)

    def _build_los_models(self):
        sc = self.scenario
        nf = self.n_facilities
        self.los_models: list = [None] * nf
        for i, fac in enumerate(self.roster.facilities):
            if fac.category == STACH:
                mean, sd, _ = sc.los_table[fac.facility_id]
                self.los_models[i] = los_mod.fit_los(mean, sd)
            elif fac.category == LTACH:
                self.los_models[i] = los_mod.fit_los(
                    self.params.ltach_los_mean, self.params.ltach_los_sd)
            elif fac.category == NH:
                mean, sd, _ = sc.los_table[fac.facility_id]
                self.los_models[i] = los_mod.fit_los(mean, sd)
        self._aged: dict[int, los_mod.RemainingLosDistribution] = {}
        # destination rows and death rates resolved per facility index
        self.row_cum = [None] * nf
        self.death_rate = np.zeros(nf)
        for i, fac in enumerate(self.roster.facilities):
            if fac.category == STACH:
                key = fac.facility_id
            elif fac.category in (LTACH, NH):
                key = fac.category
            else:
                continue
            self.row_cum[i] = np.ascontiguousarray(
                np.vstack([self.facility_transitions.cumulative(key, g)
                           for g in (0, 1, 2)]))
            self.death_rate[i] = self.death_rates[fac.category]

    def _aged_distribution(self, fac_idx: int) -> los_mod.RemainingLosDistribution:
        if fac_idx not in self._aged:
            self._aged[fac_idx] = los_mod.age_distribution(self.los_models[fac_idx])
        return self._aged[fac_idx]

    def _init_tallies(self):
        nf = self.n_facilities
        self.los_count = np.zeros(nf, dtype=np.int64)
        self.los_sum = np.zeros(nf, dtype=np.int64)
        self.los_sumsq = np.zeros(nf, dtype=np.int64)
        self.admits = np.zeros(nf, dtype=np.int64)
        self.departures = np.zeros(nf, dtype=np.int64)
        self.deaths = np.zeros(nf, dtype=np.int64)
        self.moves = np.zeros((4, 4), dtype=np.int64)
        self.census_rows: list[np.ndarray] = []
        self.census_icu_rows: list[np.ndarray] = []
        self.community_rows: list[int] = []
        self.summaries: list[DaySummary] = []
        self.events: list[str] = []
        self.leave_buckets: dict[int, list[int]] = {}
        self._skipped_dead_actions = 0

    # -------------------------------------------------------- initialization

    def _initialize_occupancy(self):
        scaled = {}
        for fid in self.records:
            fac = self.roster.by_id(fid)
            scaled[fid] = (fac.beds_nonicu, fac.beds_icu)
        overrides = (self.scenario.capacity_overrides
                     if self.params.use_facility_capacity_overrides else None)
        capacities = compute_starting_capacity(
            self.records, scaled, self.params.non_icu_fill,
            self.params.icu_fill, overrides,
            scale=self.n_agents / self.params.population_reference)

        pools: dict[tuple[int, int], list[int]] = {}
        order = np.lexsort((np.arange(self.agents.n),
                            self.agents.age_group, self.agent_county_idx))
        for aid in order:
            key = (int(self.agent_county_idx[aid]), int(self.agents.age_group[aid]))
            pools.setdefault(key, []).append(int(aid))

        self._fill_hospitals(capacities, pools)
        self._fill_ltachs_and_nhs(pools)

        self.init_census = np.array(
            [f.occupied() for f in self.roster.facilities], dtype=np.int32)
        self.init_census_icu = np.array(
            [f.occupied_icu() for f in self.roster.facilities], dtype=np.int32)

    def _pick_agent(self, county: int, county_draw, age: int, pools) -> int:
        """Pick an in-community agent of the given age from the county,
        resampling the county when its pool is exhausted."""
        for _ in range(100_000):
            pool = pools.get((county, age))
            if pool:
                j = int(self.rng.integers(len(pool)))
                pool[j], pool[-1] = pool[-1], pool[j]
                return pool.pop()
            county = county_draw()
        raise EngineError(
            f"no community agent of age group {age} available in any county")

    def _place_initial(self, aid: int, fac_idx: int, bed: str):
        fac = self.roster[fac_idx]
        if not fac.admit(aid, bed):
            raise EngineError(f"initial fill overflow at facility {fac.facility_id}")
        remaining = los_mod.sample_remaining_los(
            self._aged_distribution(fac_idx), self.rng)
        ag = self.agents
        ag.location[aid] = fac_idx
        ag.previous_location[aid] = COMMUNITY
        ag.leave_day[aid] = remaining
        ag.bed[aid] = 2 if bed == ICU else 1
        self.leave_buckets.setdefault(remaining, []).append(aid)

    def _fill_hospitals(self, capacities, pools):
        age_cum = np.cumsum(self.age_distribution)
        age_cum[-1] = 1.0
        for fid in sorted(capacities):
            fac_idx = self.roster.index_of[fid]
            fac = self.roster[fac_idx]
            start_n, start_i = capacities[fid]
            fac.placeholder_nonicu = assign_placeholders(
                start_n, fac.pct_out_of_state)
            fac.placeholder_icu = assign_placeholders(
                start_i, fac.pct_out_of_state)
            rec = self.records[fid]
            counties = np.array([self.county_index[c]
                                 for c in rec.county_discharges])
            weights = np.fromiter(rec.county_discharges.values(), dtype=float)
            cum = np.cumsum(weights)
            cum /= cum[-1]

            def county_draw():
                u = self.rng.random()
                return int(counties[np.searchsorted(cum, u, side="right")])

            for bed, count in ((NON_ICU, start_n - fac.placeholder_nonicu),
                               (ICU, start_i - fac.placeholder_icu)):
                for _ in range(count):
                    county = county_draw()
                    age = int(np.searchsorted(age_cum, self.rng.random(),
                                              side="right"))
                    aid = self._pick_agent(county, county_draw, age, pools)
                    self._place_initial(aid, fac_idx, bed)

    def _fill_ltachs_and_nhs(self, pools):
        p65 = self.params.ltach_65_plus
        for cat in (LTACH, NH):
            for fac_idx in self.roster.by_category[cat]:
                fac = self.roster[fac_idx]
                order, cum = self.fill_county_cum[fac_idx]

                def county_draw():
                    u = self.rng.random()
                    return int(order[np.searchsorted(cum, u, side="right")])

                if cat == LTACH:
                    count = round_half_up(self.params.ltach_fill * fac.beds_nonicu)
                else:
                    count = min(
                        round_half_up(fac.starting_occupancy
                                      * self.n_agents
                                      / self.params.population_reference),
                        fac.beds_nonicu)
                for _ in range(count):
                    county = county_draw()
                    if cat == LTACH:
                        age = 2 if self.rng.random() < p65 else 1
                    else:
                        age = 2
                    aid = self._pick_agent(county, county_draw, age, pools)
                    self._place_initial(aid, fac_idx, NON_ICU)

    # ----------------------------------------------------------- daily loop

    def select_community_moves(self) -> tuple[np.ndarray, np.ndarray]:
        ids = np.flatnonzero(self.agents.in_community())
        u = self.rng.random(ids.size)
        ph = self.p_hosp_agent[ids]
        any_move = u < self.p_any_agent[ids]
        to_hosp = u < ph
        move_ids = ids[any_move]
        kinds = np.where(to_hosp[any_move], TO_STACH, TO_NH).astype(np.int8)
        return move_ids.astype(np.int64), kinds

    def select_discharges(self) -> np.ndarray:
        due = self.leave_buckets.pop(self.day, [])
        return np.sort(np.array(due, dtype=np.int64))

    def step(self) -> DaySummary:
        move_ids, move_kinds = self.select_community_moves()
        due = self.select_discharges()
        ids = np.concatenate([move_ids, due])
        kinds = np.concatenate(
            [move_kinds, np.full(due.size, DISCHARGE, dtype=np.int8)])
        order = self.rng.permutation(ids.size)

        counts = dict(admissions=0, discharges=0, deaths=0,
                      turned_away=0, fully_turned_away=0)
        handle = (self._handle_to_stach, self._handle_to_nh,
                  self._handle_discharge)
        alive = self.agents.alive
        for k in order:
            aid = int(ids[k])
            if not alive[aid]:
                self._skipped_dead_actions += 1
                log.warning("day %d: skipped action for dead agent %d",
                            self.day, aid)
                continue
            handle[int(kinds[k])](aid, counts)

        self.census_rows.append(np.array(
            [f.occupied() for f in self.roster.facilities], dtype=np.int32))
        self.census_icu_rows.append(np.array(
            [f.occupied_icu() for f in self.roster.facilities], dtype=np.int32))
        self.community_rows.append(
            int(np.count_nonzero(self.agents.in_community())))
        summary = DaySummary(
            day=self.day, admissions=counts["admissions"],
            discharges_to_community=counts["discharges"],
            deaths=counts["deaths"], turned_away=counts["turned_away"],
            fully_turned_away=counts["fully_turned_away"])
        self.summaries.append(summary)
        self.day += 1
        return summary

    def run(self, days: int | None = None) -> RunReport:
        days = days if days is not None else self.total_days
        if days < 1:
            raise EngineError("run needs at least one day")
        for _ in range(days):
            self.step()
        return RunReport(self)

    # ------------------------------------------------------------- handlers

    def _log(self, event: str, aid: int, from_idx: int, to_idx, detail=""):
        from_id = self.roster[from_idx].facility_id
        to_id = "" if to_idx is None else self.roster[to_idx].facility_id
        self.events.append(
            f"{self.day},{aid},{event},{from_id},{to_id},{detail}")

    def _admit(self, aid: int, fac_idx: int, from_idx: int, counts) -> None:
        """Place an agent at a facility known to have an open bed."""
        fac = self.roster[fac_idx]
        dist = self.los_models[fac_idx]
        stay = los_mod.sample_los(dist, self.rng)
        if fac.category == STACH:
            p = self.icu_model.probability(
                int(self.agents.age_group[aid]),
                int(self.agents.concurrent_conditions[aid]),
                stay, self.fac_raw_beds[fac_idx])
            wanted = ICU if self.rng.random() < p else NON_ICU
            bed = wanted if fac.has_open_bed(wanted) else (
                NON_ICU if wanted == ICU else ICU)
        else:
            bed = NON_ICU
        if not fac.admit(aid, bed):
            raise EngineError("admission raced an occupancy check")
        ag = self.agents
        ag.location[aid] = fac_idx
        ag.previous_location[aid] = from_idx
        ag.leave_day[aid] = self.day + stay
        ag.bed[aid] = 2 if bed == ICU else 1
        self.leave_buckets.setdefault(self.day + stay, []).append(aid)
        self.los_count[fac_idx] += 1
        self.los_sum[fac_idx] += stay
        self.los_sumsq[fac_idx] += stay * stay
        self.admits[fac_idx] += 1
        self.moves[self.fac_category[from_idx], self.fac_category[fac_idx]] += 1
        counts["admissions"] += 1
        self._log("admit", aid, from_idx, fac_idx,
                  "icu" if bed == ICU else "nonicu")

    def _seek_from_community(self, aid: int, first, fallback, bed_type,
                             attempts: int | None, counts) -> None:
        """First-choice then capacity-fallback search for a community agent."""
        if first is None:
            counts["fully_turned_away"] += 1
            self._log("fully_turned_away", aid, COMMUNITY, None,
                      int(self.agents.county[aid]))
            return
        idx_arr, cum = first
        u = self.rng.random()
        pick = int(idx_arr[np.searchsorted(cum, u, side="right")])
        if self.roster[pick].has_open_bed(bed_type):
            self._admit(aid, pick, COMMUNITY, counts)
            return
        counts["turned_away"] += 1
        self._log("turned_away", aid, COMMUNITY, pick,
                  int(self.agents.county[aid]))
        tried = 1
        for cand in fallback or []:
            if cand == pick:
                continue
            if attempts is not None and tried >= attempts:
                break
            tried += 1
            if self.roster[cand].has_open_bed(bed_type):
                self._admit(aid, cand, COMMUNITY, counts)
                return
            counts["turned_away"] += 1
            self._log("turned_away", aid, COMMUNITY, cand,
                      int(self.agents.county[aid]))
        counts["fully_turned_away"] += 1
        self._log("fully_turned_away", aid, COMMUNITY, None,
                  int(self.agents.county[aid]))

    def _handle_to_stach(self, aid: int, counts) -> None:
        county = int(self.agent_county_idx[aid])
        self._seek_from_community(
            aid, self.hosp_choice[county], self.stach_fallback[county],
            ANY_BED, None, counts)

    def _handle_to_nh(self, aid: int, counts) -> None:
        county = int(self.agent_county_idx[aid])
        self._seek_from_community(
            aid, self.nh_first[county], self.nh_fallback[county],
            NON_ICU, self.params.nursing_home_attempts, counts)

    def _discharge_home(self, aid: int, fac_idx: int, counts) -> None:
        fac = self.roster[fac_idx]
        fac.discharge(aid)
        ag = self.agents
        ag.location[aid] = COMMUNITY
        ag.leave_day[aid] = -1
        ag.bed[aid] = 0
        self.departures[fac_idx] += 1
        self.moves[self.fac_category[fac_idx], CAT_C] += 1
        counts["discharges"] += 1
        self._log("discharge", aid, fac_idx, COMMUNITY)

    def _handle_discharge(self, aid: int, counts) -> None:
        fac_idx = int(self.agents.location[aid])
        if fac_idx == COMMUNITY:
            raise EngineError(f"discharge action for community agent {aid}")
        fac = self.roster[fac_idx]
        # life submodel: death is only evaluated when a stay ends
        if self.rng.random() < self.death_rate[fac_idx]:
            fac.discharge(aid)
            ag = self.agents
            ag.alive[aid] = False
            ag.leave_day[aid] = -1
            ag.bed[aid] = 0
            self.departures[fac_idx] += 1
            self.deaths[fac_idx] += 1
            counts["deaths"] += 1
            self._log("death", aid, fac_idx, None)
            return
        # nursing-home residents hospitalized for a stay mostly return to a NH
        dest_cat = None
        prev_idx = int(self.agents.previous_location[aid])
        if (fac.category == STACH and prev_idx != COMMUNITY
                and self.fac_category[prev_idx] == CAT_N):
            if self.rng.random() < self.params.nh_stach_nh:
                dest_cat = CAT_N
        if dest_cat is None:
            cum = self.row_cum[fac_idx][int(self.agents.age_group[aid])]
            dest_cat = int(np.searchsorted(cum, self.rng.random(), side="right"))
        if dest_cat == CAT_C:
            self._discharge_home(aid, fac_idx, counts)
            return
        county = int(self.agent_county_idx[aid])
        if dest_cat == CAT_H:
            first, bed_type = self.hosp_choice[county], ANY_BED
        elif dest_cat == CAT_L:
            first, bed_type = self.ltach_first[county], NON_ICU
        else:
            first, bed_type = self.nh_first[county], NON_ICU
        # transfers try their first-choice facility only
        if first is None:
            counts["fully_turned_away"] += 1
            self._log("fully_turned_away", aid, fac_idx, None,
                      int(self.agents.county[aid]))
            self._discharge_home(aid, fac_idx, counts)
            return
        idx_arr, cum = first
        pick = int(idx_arr[np.searchsorted(cum, self.rng.random(), side="right")])
        if self.roster[pick].has_open_bed(bed_type):
            fac.discharge(aid)
            self.departures[fac_idx] += 1
            self._admit(aid, pick, fac_idx, counts)
        else:
            counts["turned_away"] += 1
            self._log("turned_away", aid, fac_idx, pick,
                      int(self.agents.county[aid]))
            self._discharge_home(aid, fac_idx, counts)
