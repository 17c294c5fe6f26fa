"""Synthetic scenario generation and its ground-truth expectation solver.

The generator builds a self-consistent world: admission rates, discharge
dispositions, and length-of-stay tables are chosen so that every facility's
day-zero occupancy equals its long-run expected census (no startup drift),
and a sidecar file records the exact expected pattern targets for the
generated data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import IcuModel, assign_placeholders, compute_starting_capacity
from .geography import GeoPoint, great_circle_miles
from .los import fit_los
from .network import LTACH, NH, STACH, scale_beds
from .population import COMORBIDITY_P
from .scenario import Scenario, load_scenario
from .transitions import (CAT_C, CAT_H, CAT_L, CAT_N,
                          build_community_transitions, build_death_rates,
                          build_facility_transitions,
                          build_four_by_four, build_hospital_age_distribution,
                          build_hospital_records)

HOSPITAL_AGE_MIX = np.array([0.4099, 0.2012, 0.3890])


class SynthError(ValueError):
    pass


def erlang_b(servers: int, offered_load: float) -> float:
    """Blocking probability for a loss system with the given offered load in
    erlangs. LTACHs start at a fixed fill fraction, so their headroom is thin
    and a visible share of transfer arrivals finds them full."""
    if servers <= 0:
        return 1.0
    if offered_load <= 0:
        return 0.0
    b = 1.0
    for k in range(1, servers + 1):
        b = offered_load * b / (k + offered_load * b)
    return b


@dataclass
class SynthSpec:
    """Size and shape knobs for a generated scenario."""

    counties: int = 20
    hospitals: int = 15
    ltachs: int = 2
    nursing_homes: int = 40
    population: int = 100_000
    seed: int = 9
    days: int = 365
    run_seed: int = 42
    # steady-state shape, as fractions of the population. Death rates are kept
    # at realistic per-capita mortality so the population does not thin out
    # measurably within a one-year run.
    hospital_census_share: float = 0.019
    ltach_census_share: float = 0.002
    nh_census_share: float = 0.0028
    icu_share: float = 0.45            # ICU fraction of hospital census
    hospital_death: float = 0.002      # per-discharge death probability
    hospital_self_transfer: float = 0.062
    community_nh_share: float = 0.25   # community share of NH admissions
    ltach_los_mean: float = 8.0
    ltach_los_sd: float = 3.6
    age_shares: tuple = (0.37, 0.195, 0.435)

    @classmethod
    def from_toml(cls, path: Path) -> "SynthSpec":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise SynthError(f"{path}: unknown spec keys {sorted(unknown)}")
        if "age_shares" in data:
            data["age_shares"] = tuple(data["age_shares"])
        return cls(**data)


# --------------------------------------------------------------------------
# world description shared by the generator and the ground-truth solver


@dataclass
class WorldData:
    """Everything the steady-state solver needs, independent of file format."""

    county_ids: list[int]
    pop: np.ndarray                  # (counties, 3) residents by age group
    ch: np.ndarray                   # (counties, 3) annual community->hospital
    cn: np.ndarray                   # (counties,) annual community->NH (65+)
    hospital_fids: list[int]
    p_h_given_c: np.ndarray          # (counties, hospitals) first-choice shares
    p_c_given_h: np.ndarray          # (hospitals, counties) bed-fill shares
    rows: dict                       # source -> (3, 4) conditional rows
    death_h: float
    death_l: float
    death_n: float
    nh_return: float
    hosp_mean_stay: np.ndarray       # discretized expected whole-day stays
    ltach_fids: list[int]
    nh_fids: list[int]
    ltach_choice: np.ndarray         # (counties, ltachs) first-choice weights
    nh_choice: np.ndarray            # (counties, nhs)
    ltach_mean_stay: float
    nh_mean_stay: np.ndarray         # per nursing home
    icu_model: IcuModel
    hosp_raw_beds: np.ndarray        # total data bed counts (logistic input)
    hosp_oos: np.ndarray             # out-of-state shares
    hosp_stay_pmf: list              # per-hospital whole-day stay pmf
    scale: float = 1.0               # n_agents / reference population
    ltach_beds: np.ndarray | None = None  # enables the carried-load correction


@dataclass
class SteadyState:
    """Solver output: annual flows and expected censuses at steady state."""

    hospital_census: np.ndarray      # in-state occupants, depletion-aware
    hospital_admissions: np.ndarray
    ltach_census: np.ndarray
    nh_census: np.ndarray
    icu_census: np.ndarray           # per hospital, in-state occupants
    age_mix_hospital: np.ndarray
    ltach_age2_share: float
    flows: np.ndarray                # (4, 4) depletion-aware annual movements
    depletion: np.ndarray            # (counties, 3)


def _icu_moments(model: IcuModel, stay_pmf: np.ndarray, age_mix: np.ndarray,
                 bed_count: float) -> tuple[float, float]:
    """(E[p], E[p*L]) for one hospital's admission mix.

    Longer stays are likelier to need an ICU bed and also occupy it longer,
    so the census calculation needs the stay-weighted moment, not E[p] alone.
    """
    e_p = 0.0
    e_pl = 0.0
    days = np.arange(1, stay_pmf.size + 1)
    for g in (0, 1, 2):
        for cc, p_cc in ((0, 1.0 - COMORBIDITY_P[g]), (1, COMORBIDITY_P[g])):
            if p_cc == 0.0:
                continue
            probs = np.array([
                model.probability(g, cc, int(d), int(bed_count)) for d in days])
            w = age_mix[g] * p_cc
            e_p += w * float(np.dot(probs, stay_pmf))
            e_pl += w * float(np.dot(probs * days, stay_pmf))
    return e_p, e_pl


def solve_steady_state(world: WorldData, outer_iterations: int = 4,
                       inner_iterations: int = 200) -> SteadyState:
    """Expected steady-state flows and censuses, including the drag from
    residents who are already in facilities and so cannot generate community
    admissions (the depletion correction)."""
    nc = len(world.county_ids)
    nh_count = len(world.nh_fids)
    nl = len(world.ltach_fids)
    nhs_mean = world.nh_mean_stay
    # admission-weighted stay mean across nursing homes (per-facility below)
    row_l = world.rows["LTACH"]
    row_n = world.rows["NH"]

    depletion = np.zeros((nc, 3))
    hosp_w = np.full(len(world.hospital_fids), 1.0 / len(world.hospital_fids))
    loss_l = 0.0  # share of LTACH-bound transfers finding every bed taken
    result = None
    for _ in range(outer_iterations):
        ch_dep = world.ch * (1.0 - depletion) * world.scale
        cn_dep = world.cn * (1.0 - depletion[:, 2]) * world.scale
        ch_age = ch_dep.sum(axis=0)
        cn_age = np.array([0.0, 0.0, cn_dep.sum()])

        row_h = np.zeros((3, 4))
        for w, fid in zip(hosp_w, world.hospital_fids):
            row_h += w * world.rows[fid]

        a_h, a_l, a_n = ch_age.copy(), np.zeros(3), cn_age.copy()
        a_h_from_n = np.zeros(3)
        for _ in range(inner_iterations):
            s_h = a_h * (1.0 - world.death_h)
            rho = np.divide(a_h_from_n, a_h, out=np.zeros(3), where=a_h > 0)
            override = s_h * rho * world.nh_return
            h_to = (s_h - override)[:, None] * row_h
            h_to[:, CAT_N] += override
            lost_l = h_to[:, CAT_L] * loss_l  # denied transfers return home
            h_to[:, CAT_L] -= lost_l
            h_to[:, CAT_C] += lost_l
            l_to = (a_l * (1.0 - world.death_l))[:, None] * row_l
            n_to = (a_n * (1.0 - world.death_n))[:, None] * row_n
            a_h = ch_age + h_to[:, CAT_H] + l_to[:, CAT_H] + n_to[:, CAT_H]
            a_h_from_n = n_to[:, CAT_H]
            a_l = h_to[:, CAT_L]
            a_n = cn_age + h_to[:, CAT_N] + l_to[:, CAT_N]

        flows = np.zeros((4, 4))
        flows[CAT_C, CAT_H] = ch_age.sum()
        flows[CAT_C, CAT_N] = cn_age.sum()
        flows[CAT_H] = h_to.sum(axis=0)
        flows[CAT_L] = l_to.sum(axis=0)
        flows[CAT_N] = n_to.sum(axis=0)

        # county mixes: transfers keep the agent's home county
        ca_vec = ch_dep.sum(axis=1)
        q_h = ca_vec / max(ca_vec.sum(), 1e-12)
        for _ in range(50):
            inflow_vec = (ca_vec
                          + flows[CAT_H, CAT_H] * q_h
                          + flows[CAT_L, CAT_H] * q_h
                          + flows[CAT_N, CAT_H] * _nh_mix(world, cn_dep, q_h,
                                                          flows))
            q_h = inflow_vec / inflow_vec.sum()
        adm_by_county = inflow_vec
        adm_h = adm_by_county @ world.p_h_given_c
        hosp_w = adm_h / adm_h.sum()
        age_mix = a_h / a_h.sum()

        hosp_census = adm_h * world.hosp_mean_stay / 365.0
        icu_bed_days = np.array([
            _icu_moments(world.icu_model, world.hosp_stay_pmf[j], age_mix,
                         world.hosp_raw_beds[j])[1]
            for j in range(len(world.hospital_fids))])
        icu_census = adm_h * icu_bed_days / 365.0

        offered_l = (flows[CAT_H, CAT_L] + lost_l.sum()) * q_h
        offered_adm = (offered_l[:, None] * world.ltach_choice).sum(axis=0)
        offered_load = offered_adm * world.ltach_mean_stay / 365.0
        if world.ltach_beds is not None and nl > 0:
            blocking = np.array([
                erlang_b(int(world.ltach_beds[j]), offered_load[j])
                for j in range(nl)])
            ltach_census = offered_load * (1.0 - blocking)
            total_offered = offered_adm.sum()
            loss_l = (float(np.dot(offered_adm, blocking) / total_offered)
                      if total_offered > 0 else 0.0)
        else:
            ltach_census = offered_load
            loss_l = 0.0
        inflow_l_vec = flows[CAT_H, CAT_L] * q_h
        nh_inflow_vec = _nh_inflow(world, cn_dep, q_h, flows)
        nh_admissions = (nh_inflow_vec[:, None] * world.nh_choice).sum(axis=0)
        nh_census = nh_admissions * nhs_mean / 365.0

        # occupants by county and age -> depletion of the community pool
        occupants = np.zeros((nc, 3))
        mix_by_hospital = (adm_by_county[:, None] * world.p_h_given_c)
        mix_by_hospital /= np.maximum(mix_by_hospital.sum(axis=0), 1e-12)
        occupants += (mix_by_hospital * hosp_census[None, :]).sum(axis=1)[:, None] \
            * age_mix[None, :]
        l_mix = inflow_l_vec[:, None] * world.ltach_choice
        l_mix /= np.maximum(l_mix.sum(axis=0), 1e-12)
        a_l_total = a_l.sum()
        l_age = (a_l / a_l_total) if a_l_total > 0 else np.zeros(3)
        occupants += (l_mix * ltach_census[None, :]).sum(axis=1)[:, None] \
            * l_age[None, :]
        n_mix = nh_inflow_vec[:, None] * world.nh_choice
        n_mix /= np.maximum(n_mix.sum(axis=0), 1e-12)
        occupants[:, 2] += (n_mix * nh_census[None, :]).sum(axis=1)
        pop_scaled = np.maximum(world.pop * world.scale, 1e-9)
        depletion = np.clip(occupants / pop_scaled, 0.0, 0.5)

        result = SteadyState(
            hospital_census=hosp_census,
            hospital_admissions=adm_h,
            ltach_census=ltach_census,
            nh_census=nh_census,
            icu_census=icu_census,
            age_mix_hospital=age_mix,
            ltach_age2_share=float(l_age[2]) if a_l_total > 0 else 0.0,
            flows=flows,
            depletion=depletion,
        )
    return result


def _nh_inflow(world, cn_dep, q_h, flows):
    return cn_dep + (flows[CAT_H, CAT_N] + flows[CAT_L, CAT_N]) * q_h


def _nh_mix(world, cn_dep, q_h, flows):
    vec = _nh_inflow(world, cn_dep, q_h, flows)
    return vec / max(vec.sum(), 1e-12)


# --------------------------------------------------------------------------
# world design


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights``."""
    raw = weights / weights.sum() * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


@dataclass
class _World:
    """Generator-internal world before files are written."""

    spec: SynthSpec
    county_ids: list = field(default_factory=list)
    county_geo: list = field(default_factory=list)
    pop: np.ndarray = None
    hospitals: list = field(default_factory=list)  # dicts
    ltachs: list = field(default_factory=list)
    nursing_homes: list = field(default_factory=list)
    ch: np.ndarray = None
    cn: np.ndarray = None
    dispositions: np.ndarray = None  # (3, 5) unconditional shares by age
    icu_multiplier: float = 1.0
    ltach_age2_share: float = 0.75
    steady: SteadyState = None


def _design_world(spec: SynthSpec, rng: np.random.Generator) -> _World:
    if spec.population < 1000:
        raise SynthError("population too small for a meaningful scenario")
    w = _World(spec=spec)
    c = spec.counties

    # counties on a jittered grid, populations lognormal
    w.county_ids = [2 * i + 1 for i in range(c)]
    ncols = max(1, int(math.ceil(math.sqrt(c))))
    nrows = int(math.ceil(c / ncols))
    lat0, lat1 = 34.5, 36.1
    lon0, lon1 = -80.6, -77.6
    for i in range(c):
        r, col = divmod(i, ncols)
        lat = lat0 + (lat1 - lat0) * (r / max(nrows - 1, 1))
        lon = lon0 + (lon1 - lon0) * (col / max(ncols - 1, 1))
        lat += float(rng.uniform(-0.04, 0.04))
        lon += float(rng.uniform(-0.04, 0.04))
        w.county_geo.append(GeoPoint(round(lat, 5), round(lon, 5)))
    county_pop = _largest_remainder(rng.lognormal(0.0, 0.55, c), spec.population)
    shares = np.array(spec.age_shares, dtype=float)
    w.pop = np.zeros((c, 3), dtype=np.int64)
    for i in range(c):
        jitter = shares + rng.uniform(-0.008, 0.008, 3)
        w.pop[i] = _largest_remainder(jitter, int(county_pop[i]))

    # hospitals in the most populous counties
    order = np.argsort(-county_pop, kind="stable")
    nbig = min(4, spec.hospitals)
    sizes = list([11.0, 9.0, 7.5, 6.5][:nbig])
    stays = list([2.6, 2.8, 3.0, 2.7][:nbig])
    for _ in range(spec.hospitals - nbig):
        sizes.append(float(rng.uniform(1.0, 2.2)))
        stays.append(round(float(rng.uniform(3.8, 6.2)), 2))
    host_counties = [int(order[i % min(c, max(spec.hospitals, 1))])
                     for i in range(spec.hospitals)]
    next_fid = 1
    for j in range(spec.hospitals):
        ci = host_counties[j]
        geo = w.county_geo[ci]
        w.hospitals.append({
            "fid": next_fid,
            "county": w.county_ids[ci],
            "geo": GeoPoint(round(geo.latitude + float(rng.uniform(-0.08, 0.08)), 5),
                            round(geo.longitude + float(rng.uniform(-0.08, 0.08)), 5)),
            "size": sizes[j],
            "los_mean": stays[j],
            "los_sd": round(0.45 * stays[j], 2),
            "oos": 0.0,
        })
        next_fid += 1
    # a couple of hospitals treat out-of-state patients (placeholder beds)
    for j, share in zip(range(min(2, spec.hospitals)), (0.04, 0.06)):
        w.hospitals[j]["oos"] = share

    for j in range(spec.ltachs):
        ci = int(order[j % c])
        geo = w.county_geo[ci]
        w.ltachs.append({
            "fid": next_fid,
            "county": w.county_ids[ci],
            "geo": GeoPoint(round(geo.latitude + float(rng.uniform(-0.1, 0.1)), 5),
                            round(geo.longitude + float(rng.uniform(-0.1, 0.1)), 5)),
        })
        next_fid += 1
    for j in range(spec.nursing_homes):
        if j == 0:
            ci = int(order[0])  # one large nursing home near the biggest county
        else:
            ci = int(order[(j + 1) % c])
        geo = w.county_geo[ci]
        jitter = 0.03 if j == 0 else float(rng.uniform(0.05, 0.45))
        w.nursing_homes.append({
            "fid": next_fid,
            "county": w.county_ids[ci],
            "geo": GeoPoint(round(geo.latitude + jitter * float(rng.choice([-1, 1])), 5),
                            round(geo.longitude + jitter * float(rng.choice([-1, 1])), 5)),
            "los_mean": round(float(rng.uniform(9.0, 11.0)), 2),
            "big": j == 0,
        })
        next_fid += 1
    for nh in w.nursing_homes:
        nh["los_sd"] = round(0.45 * nh["los_mean"], 2)
    return w


def _hospital_footprints(w: _World) -> np.ndarray:
    """Unnormalized discharge footprint of each hospital over counties."""
    nc = len(w.county_ids)
    nh = len(w.hospitals)
    foot = np.zeros((nc, nh))
    county_pop = w.pop.sum(axis=1).astype(float)
    for j, hosp in enumerate(w.hospitals):
        for i in range(nc):
            d = great_circle_miles(w.county_geo[i], hosp["geo"])
            if d <= 150.0:
                foot[i, j] = hosp["size"] * county_pop[i] * math.exp(-d / 45.0)
    # every county must be served by at least one hospital
    for i in range(nc):
        if foot[i].sum() == 0:
            dists = [great_circle_miles(w.county_geo[i], h["geo"])
                     for h in w.hospitals]
            foot[i, int(np.argmin(dists))] = 0.2 * county_pop[i]
    return foot


def _design_rates(w: _World, foot: np.ndarray) -> None:
    """Choose admission rates and dispositions hitting the census targets."""
    spec = w.spec
    pop_by_age = w.pop.sum(axis=0).astype(float)
    p_h_given_c = foot / foot.sum(axis=1, keepdims=True)

    target_hosp_census = spec.hospital_census_share * spec.population
    target_ltach_census = spec.ltach_census_share * spec.population
    target_nh_census = spec.nh_census_share * spec.population
    nh_mean = float(np.mean([n["los_mean"] for n in w.nursing_homes]))
    death_n = 0.15 * nh_mean / 365.0

    a_l = target_ltach_census * 365.0 / spec.ltach_los_mean
    a_n = target_nh_census * 365.0 / nh_mean
    c_to_n = spec.community_nh_share * a_n
    l_to_n = 0.449 * a_l
    f_nh = 0.33 * (1.0 - death_n) * a_n  # NH residents moving to a hospital

    stays = np.array([h["los_mean"] for h in w.hospitals])
    weights = np.array([h["size"] for h in w.hospitals])
    l_eff = float(np.dot(stays, weights) / weights.sum())
    d_h = spec.hospital_death
    p_hh = spec.hospital_self_transfer
    ca = None
    for _ in range(6):
        a_total = target_hosp_census * 365.0 / l_eff
        a2 = HOSPITAL_AGE_MIX[2] * a_total
        h_to_n_needed = a_n - c_to_n - l_to_n
        if h_to_n_needed <= 0:
            raise SynthError("nursing-home census target too small for the "
                             "LTACH and community inflow settings")
        p_nh2 = (h_to_n_needed - 0.8 * f_nh * (1.0 - d_h)) / (a2 - 0.8 * f_nh)
        if not (0.0 < p_nh2 < 0.5):
            raise SynthError(f"infeasible nursing-home disposition share {p_nh2}")
        p_lt = a_l / (a_total * (HOSPITAL_AGE_MIX[1] + HOSPITAL_AGE_MIX[2]))
        transfers_in = p_hh * a_total + 0.071 * a_l + f_nh
        ca_total = a_total - transfers_in
        transfer_ages = (p_hh * a_total * HOSPITAL_AGE_MIX
                         + 0.071 * a_l * np.array([0.0, 0.341, 0.659])
                         + f_nh * np.array([0.0, 0.0, 1.0]))
        comm_mix = (HOSPITAL_AGE_MIX * a_total - transfer_ages) / ca_total
        if np.any(comm_mix < 0):
            raise SynthError("transfer flows exceed the target age mix")
        ca = ca_total * comm_mix  # annual community admissions by age
        rates = ca / pop_by_age
        if np.any(rates / 365.0 > 0.2):
            raise SynthError("admissions exceed what the population can supply")
        # refresh the admission-weighted mean stay using realized shares
        adm_c = (w.pop / pop_by_age[None, :] * ca[None, :]).sum(axis=1)
        adm_h = adm_c @ p_h_given_c
        l_eff = float(np.dot(stays, adm_h) / adm_h.sum())

    w.ch = w.pop / pop_by_age[None, :] * ca[None, :]
    pop2 = w.pop[:, 2].astype(float)
    w.cn = pop2 / pop2.sum() * c_to_n

    disp = np.zeros((3, 5))  # community, hospital, ltach, nh, death
    for g in (0, 1, 2):
        disp[g, 4] = d_h
        disp[g, 1] = p_hh * (1.0 - d_h)
        if g >= 1:
            disp[g, 2] = p_lt * (1.0 - d_h)
        if g == 2:
            disp[g, 3] = p_nh2
        disp[g, 0] = 1.0 - disp[g].sum()
        if disp[g, 0] <= 0:
            raise SynthError("disposition shares leave no community mass")
    w.dispositions = disp


class _Params:
    """Attribute bag standing in for Parameters during generation."""

    def __init__(self, **kw):
        self.__dict__.update(kw)


def _world_data(w: _World, beds_total: np.ndarray, icu_multiplier: float,
                ltach_beds: np.ndarray | None = None) -> WorldData:
    spec = w.spec
    hospital_fids = [h["fid"] for h in w.hospitals]
    foot = _hospital_footprints(w)
    p_h_given_c = foot / foot.sum(axis=1, keepdims=True)
    p_c_given_h = (foot / foot.sum(axis=0, keepdims=True)).T

    params = _Params(
        ltach_death=0.01, ltach_hospital=0.071, ltach_nh=0.449,
        nh_community=0.67, nursing_home_death=0.15)
    discharges = {}
    for j, h in enumerate(w.hospitals):
        counts = np.zeros((3, 5))
        counts[:] = w.dispositions * HOSPITAL_AGE_MIX[:, None]
        discharges[h["fid"]] = counts
    rows = build_facility_transitions(discharges, params).rows

    nh_mean_stays = np.array([n["los_mean"] for n in w.nursing_homes])
    nh_weights_mean = float(nh_mean_stays.mean())
    hosp_dists = [fit_los(h["los_mean"], h["los_sd"]) for h in w.hospitals]
    hosp_pmf = [d.day_pmf() for d in hosp_dists]
    hosp_mean_stay = np.array([
        float(np.dot(np.arange(1, p.size + 1), p)) for p in hosp_pmf])
    ltach_pmf = fit_los(spec.ltach_los_mean, spec.ltach_los_sd).day_pmf()
    ltach_mean = float(np.dot(np.arange(1, ltach_pmf.size + 1), ltach_pmf))
    nh_mean_eff = np.array([
        float(np.dot(np.arange(1, p.size + 1), p))
        for p in (fit_los(n["los_mean"], n["los_sd"]).day_pmf()
                  for n in w.nursing_homes)])

    icu = IcuModel(intercept=-2.2, b_age1=0.3, b_age2=0.6, b_comorbid=0.5,
                   b_los=0.05, b_bedcount=0.1, multiplier=icu_multiplier)

    return WorldData(
        county_ids=w.county_ids,
        pop=w.pop.astype(float),
        ch=w.ch, cn=w.cn,
        hospital_fids=hospital_fids,
        p_h_given_c=p_h_given_c,
        p_c_given_h=p_c_given_h,
        rows=rows,
        death_h=spec.hospital_death,
        death_l=0.01,
        death_n=0.15 * nh_weights_mean / 365.0,
        nh_return=0.80,
        hosp_mean_stay=hosp_mean_stay,
        ltach_fids=[f["fid"] for f in w.ltachs],
        nh_fids=[f["fid"] for f in w.nursing_homes],
        ltach_choice=_choice_weights(w.county_geo, [f["geo"] for f in w.ltachs],
                                     [f["fid"] for f in w.ltachs], 10),
        nh_choice=_choice_weights(w.county_geo,
                                  [f["geo"] for f in w.nursing_homes],
                                  [f["fid"] for f in w.nursing_homes], 30),
        ltach_mean_stay=ltach_mean,
        nh_mean_stay=nh_mean_eff,
        icu_model=icu,
        hosp_raw_beds=beds_total,
        hosp_oos=np.array([h["oos"] for h in w.hospitals]),
        hosp_stay_pmf=hosp_pmf,
        ltach_beds=ltach_beds,
    )


def _choice_weights(county_geo, facility_geo, facility_fids, closest_n,
                    max_miles: float = 200.0) -> np.ndarray:
    """First-choice weights mirroring the engine's rule: inverse distance over
    the nearest ``closest_n`` in-radius facilities, ties by facility id."""
    nc, nf = len(county_geo), len(facility_geo)
    weights = np.zeros((nc, nf))
    for i in range(nc):
        pairs = sorted(
            (great_circle_miles(county_geo[i], facility_geo[j]), facility_fids[j], j)
            for j in range(nf))
        pairs = [p for p in pairs if p[0] <= max_miles][:closest_n]
        if not pairs:
            continue
        inv = np.array([1.0 / max(d, 1.0) for d, _, _ in pairs])
        inv /= inv.sum()
        for (d, _, j), v in zip(pairs, inv):
            weights[i, j] = v
    return weights


def _calibrate(w: _World) -> tuple[WorldData, SteadyState]:
    """Iterate bed counts and the ICU multiplier to a consistent fixed point.

    LTACH beds chase their own carried load: beds follow the census, and the
    census shrinks with the blocking those beds imply, so the written roster
    starts at the level the dynamics will actually hold."""
    spec = w.spec
    beds = np.full(len(w.hospitals), 200.0)
    ltach_beds = None
    multiplier = 1.0
    world = None
    steady = None
    for _ in range(6):
        world = _world_data(w, beds, multiplier, ltach_beds)
        steady = solve_steady_state(world)
        ltach_beds = np.maximum(np.round(steady.ltach_census / 0.9), 1.0)
        age_mix = steady.age_mix_hospital

        adm = steady.hospital_admissions

        def fleet_share(m: float) -> float:
            model = IcuModel(intercept=-2.2, b_age1=0.3, b_age2=0.6,
                             b_comorbid=0.5, b_los=0.05, b_bedcount=0.1,
                             multiplier=m)
            bed_days = np.array([
                _icu_moments(model, world.hosp_stay_pmf[j], age_mix, beds[j])[1]
                for j in range(len(beds))])
            return float(np.dot(adm, bed_days)
                         / np.dot(adm, world.hosp_mean_stay))

        lo, hi = 1e-3, 20.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if fleet_share(mid) < spec.icu_share:
                lo = mid
            else:
                hi = mid
        multiplier = 0.5 * (lo + hi)

        model = IcuModel(intercept=-2.2, b_age1=0.3, b_age2=0.6, b_comorbid=0.5,
                         b_los=0.05, b_bedcount=0.1, multiplier=multiplier)
        icu_census_h = adm * np.array([
            _icu_moments(model, world.hosp_stay_pmf[j], age_mix, beds[j])[1]
            for j in range(len(beds))]) / 365.0
        census_tot = steady.hospital_census / (1.0 - world.hosp_oos)
        icu_tot = icu_census_h / (1.0 - world.hosp_oos)
        beds = np.maximum(
            np.round((census_tot - icu_tot) / 0.65)
            + np.round(icu_tot / 0.50), 2.0)
    w.icu_multiplier = round(multiplier, 6)
    w.ltach_age2_share = round(steady.ltach_age2_share, 4)
    world = _world_data(w, beds, w.icu_multiplier, ltach_beds)
    steady = solve_steady_state(world)
    w.steady = steady
    return world, steady


# --------------------------------------------------------------------------
# file emission


def _fmt(x: float, places: int = 2) -> str:
    return f"{x:.{places}f}"


def generate_synthetic_scenario(spec: SynthSpec, out_dir: Path | str) -> Path:
    """Write a complete synthetic scenario plus its ground-truth sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # drop optional artifacts from any earlier scenario in this directory;
    # stale distance matrices would reference facilities that no longer exist
    for name in ("distances_stach.csv", "distances_ltach.csv",
                 "distances_nh.csv", "capacity_overrides.csv",
                 "ground_truth.json"):
        (out / name).unlink(missing_ok=True)
    rng = np.random.default_rng(spec.seed)

    w = _design_world(spec, rng)
    foot = _hospital_footprints(w)
    _design_rates(w, foot)
    world, steady = _calibrate(w)

    # population file, grouped by county
    with open(out / "population.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county_id", "sex", "age_years"])
        bounds = ((0, 49), (50, 64), (65, 97))
        for ci, cid in enumerate(w.county_ids):
            for g in (0, 1, 2):
                count = int(w.pop[ci, g])
                lo, hi = bounds[g]
                ages = rng.integers(lo, hi + 1, size=count)
                sexes = rng.random(count) < 0.515
                for age, female in zip(ages, sexes):
                    writer.writerow([cid, "female" if female else "male", int(age)])

    with open(out / "counties.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county_id", "lat", "lon"])
        for cid, geo in zip(w.county_ids, w.county_geo):
            writer.writerow([cid, _fmt(geo.latitude, 5), _fmt(geo.longitude, 5)])

    # facility rosters; hospital beds follow the calibrated censuses
    icu_share_h = steady.icu_census / steady.hospital_census
    census_tot = steady.hospital_census / (1.0 - world.hosp_oos)
    beds_nonicu = np.maximum(
        np.round(census_tot * (1.0 - icu_share_h) / 0.65).astype(int), 1)
    beds_icu = np.maximum(
        np.round(census_tot * icu_share_h / 0.50).astype(int), 1)
    with open(out / "stachs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "name", "county_id", "lat", "lon",
                         "beds_nonicu", "beds_icu", "pct_out_of_state"])
        for j, h in enumerate(w.hospitals):
            writer.writerow([
                h["fid"], f"Hospital {h['fid']}", h["county"],
                _fmt(h["geo"].latitude, 5), _fmt(h["geo"].longitude, 5),
                int(beds_nonicu[j]), int(beds_icu[j]), _fmt(h["oos"], 4)])

    with open(out / "ltachs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "name", "county_id", "lat", "lon", "beds"])
        for j, f in enumerate(w.ltachs):
            writer.writerow([f["fid"], f"LTACH {f['fid']}", f["county"],
                             _fmt(f["geo"].latitude, 5),
                             _fmt(f["geo"].longitude, 5),
                             int(world.ltach_beds[j])])

    # nursing-home beds carry real headroom so capacity rarely binds there
    with open(out / "nursing_homes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "name", "county_id", "lat", "lon",
                         "beds", "starting_occupancy"])
        for j, f in enumerate(w.nursing_homes):
            occ = int(round(steady.nh_census[j]))
            beds = max(occ + 8, int(round(occ * 1.8)), 4)
            writer.writerow([f["fid"], f"Nursing Home {f['fid']}", f["county"],
                             _fmt(f["geo"].latitude, 5),
                             _fmt(f["geo"].longitude, 5), beds, occ])

    # discharge summaries (in-state annual admissions per hospital)
    adm_h = steady.hospital_admissions
    with open(out / "discharges.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "age_group", "disposition", "count"])
        for j, h in enumerate(w.hospitals):
            for g in (0, 1, 2):
                for d, name in enumerate(
                        ["community", "hospital", "ltach", "nh", "death"]):
                    count = adm_h[j] * HOSPITAL_AGE_MIX[g] * w.dispositions[g, d]
                    if count > 0:
                        writer.writerow([h["fid"], g, name,
                                         int(round(count)) or 1])

    with open(out / "county_shares.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "county_id", "discharges"])
        for j, h in enumerate(w.hospitals):
            for ci, cid in enumerate(w.county_ids):
                share = world.p_c_given_h[j, ci]
                if share > 0:
                    writer.writerow([h["fid"], cid,
                                     max(int(round(adm_h[j] * share)), 1)])

    with open(out / "los.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "mean_los_days", "sd_los_days",
                         "total_discharges"])
        for j, h in enumerate(w.hospitals):
            total = adm_h[j] / (1.0 - h["oos"])
            writer.writerow([h["fid"], _fmt(h["los_mean"]), _fmt(h["los_sd"]),
                             int(round(total))])
        nh_adm = steady.nh_census * 365.0 / world.nh_mean_stay
        for j, f in enumerate(w.nursing_homes):
            writer.writerow([f["fid"], _fmt(f["los_mean"]), _fmt(f["los_sd"]),
                             max(int(round(nh_adm[j])), 1)])

    with open(out / "community_admissions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county_id", "age_group", "category",
                         "annual_admissions"])
        for ci, cid in enumerate(w.county_ids):
            for g in (0, 1, 2):
                count = int(round(w.ch[ci, g]))
                if count > 0:
                    writer.writerow([cid, g, STACH, count])
            count = int(round(w.cn[ci]))
            if count > 0:
                writer.writerow([cid, 2, NH, count])

    # parameters: published defaults plus the scenario's calibrated knobs
    from .scenario import Parameters
    params = Parameters(
        n_agents=spec.population,
        population_reference=spec.population,
        days=spec.days,
        seed=spec.run_seed,
        icu_multiplier=w.icu_multiplier,
        ltach_los_mean=spec.ltach_los_mean,
        ltach_los_sd=spec.ltach_los_sd,
        ltach_65_plus=w.ltach_age2_share,
    )
    params.to_file(out / "parameters.txt")

    scenario = load_scenario(out)
    truth = compute_ground_truth(scenario)
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=1))
    return out


# --------------------------------------------------------------------------
# ground truth from a loaded scenario


def world_from_scenario(scenario: Scenario,
                        n_agents: int | None = None) -> WorldData:
    """Build the solver's world view from loaded scenario files."""
    params = scenario.parameters
    n = n_agents if n_agents is not None else params.n_agents
    records, _ = build_hospital_records(
        scenario.stachs, scenario.county_shares, scenario.los_table)
    pop_counts = scenario.population_counts()
    county_ids = sorted(scenario.counties)
    nc = len(county_ids)
    pop = np.zeros((nc, 3))
    for i, cid in enumerate(county_ids):
        for g in (0, 1, 2):
            pop[i, g] = pop_counts.get((cid, g), 0)

    community = build_community_transitions(
        scenario.community_admissions, pop_counts)
    ch = np.zeros((nc, 3))
    cn = np.zeros(nc)
    for i, cid in enumerate(county_ids):
        if cid in community.index:
            k = community.index[cid]
            for g in (0, 1, 2):
                ch[i, g] = community.p_hospital[k, g] * pop[i, g] * 365.0
            cn[i] = community.p_nh[k, 2] * pop[i, 2] * 365.0

    hospital_fids = sorted(records)
    foot = np.zeros((nc, len(hospital_fids)))
    for j, fid in enumerate(hospital_fids):
        for cid, count in records[fid].county_discharges.items():
            foot[county_ids.index(cid), j] = count
    col = foot.sum(axis=1, keepdims=True)
    p_h_given_c = np.divide(foot, col, out=np.zeros_like(foot), where=col > 0)
    rowsum = foot.sum(axis=0, keepdims=True)
    p_c_given_h = np.divide(foot, rowsum, out=np.zeros_like(foot),
                            where=rowsum > 0).T

    ftrans = build_facility_transitions(
        {fid: scenario.discharges[fid] for fid in hospital_fids}, params)
    total = sum(scenario.discharges[fid].sum() for fid in hospital_fids)
    dead = sum(scenario.discharges[fid][:, 4].sum() for fid in hospital_fids)
    deaths = build_death_rates(dead, total, params, scenario.nh_mean_los())

    hosp_dists = [fit_los(*scenario.los_table[fid][:2]) for fid in hospital_fids]
    hosp_pmf = [d.day_pmf() for d in hosp_dists]
    hosp_mean_stay = np.array(
        [float(np.dot(np.arange(1, p.size + 1), p)) for p in hosp_pmf])
    ltach_pmf = fit_los(params.ltach_los_mean, params.ltach_los_sd).day_pmf()
    ltach_mean = float(np.dot(np.arange(1, ltach_pmf.size + 1), ltach_pmf))
    nh_fids = [f.facility_id for f in
               sorted(scenario.nursing_homes, key=lambda f: f.facility_id)]
    nh_mean = []
    for fid in nh_fids:
        mean, sd, _ = scenario.los_table[fid]
        pmf = fit_los(mean, sd).day_pmf()
        nh_mean.append(float(np.dot(np.arange(1, pmf.size + 1), pmf)))

    county_geo = [scenario.counties[cid] for cid in county_ids]
    ltachs = sorted(scenario.ltachs, key=lambda f: f.facility_id)
    nhs = sorted(scenario.nursing_homes, key=lambda f: f.facility_id)
    icu = IcuModel(
        intercept=params.icu_intercept, b_age1=params.icu_age1,
        b_age2=params.icu_age2, b_comorbid=params.icu_comorbid,
        b_los=params.icu_los, b_bedcount=params.icu_bedcount,
        multiplier=params.icu_multiplier)

    return WorldData(
        county_ids=county_ids, pop=pop, ch=ch, cn=cn,
        hospital_fids=hospital_fids,
        p_h_given_c=p_h_given_c, p_c_given_h=p_c_given_h,
        rows=ftrans.rows,
        death_h=deaths[STACH], death_l=deaths[LTACH], death_n=deaths[NH],
        nh_return=params.nh_stach_nh,
        hosp_mean_stay=hosp_mean_stay,
        ltach_fids=[f.facility_id for f in ltachs],
        nh_fids=nh_fids,
        ltach_choice=_choice_weights(
            county_geo, [f.geocode for f in ltachs],
            [f.facility_id for f in ltachs], params.ltach_closest_n,
            params.max_distance_miles),
        nh_choice=_choice_weights(
            county_geo, [f.geocode for f in nhs], nh_fids,
            params.nursing_home_closest_n, params.max_distance_miles),
        ltach_mean_stay=ltach_mean,
        nh_mean_stay=np.array(nh_mean),
        icu_model=icu,
        hosp_raw_beds=np.array([
            records[fid].beds_nonicu + records[fid].beds_icu
            for fid in hospital_fids], dtype=float),
        hosp_oos=np.array([records[fid].out_of_state_share
                           for fid in hospital_fids]),
        hosp_stay_pmf=hosp_pmf,
        scale=n / params.population_reference,
        ltach_beds=np.array([
            scale_beds(f.beds_nonicu, n, params.population_reference)
            for f in ltachs], dtype=float),
    )


def compute_ground_truth(scenario: Scenario) -> dict:
    """Exact expected pattern targets for a scenario, written as the sidecar."""
    params = scenario.parameters
    world = world_from_scenario(scenario)
    steady = solve_steady_state(world)

    records, _ = build_hospital_records(
        scenario.stachs, scenario.county_shares, scenario.los_table)
    n, p = params.n_agents, params.population_reference
    scaled = {
        fid: (scale_beds(records[fid].beds_nonicu, n, p)
              if records[fid].beds_nonicu else 0,
              scale_beds(records[fid].beds_icu, n, p)
              if records[fid].beds_icu else 0)
        for fid in records}
    capacities = compute_starting_capacity(
        records, scaled, params.non_icu_fill, params.icu_fill,
        scenario.capacity_overrides
        if params.use_facility_capacity_overrides else None,
        scale=n / p)

    expected_census: dict[str, float] = {}
    expected_icu = 0.0
    placeholders = {}
    for j, fid in enumerate(world.hospital_fids):
        start_n, start_i = capacities[fid]
        ph_n = assign_placeholders(start_n, records[fid].out_of_state_share)
        ph_i = assign_placeholders(start_i, records[fid].out_of_state_share)
        placeholders[fid] = ph_n + ph_i
        expected_census[str(fid)] = float(
            steady.hospital_census[j] + ph_n + ph_i)
        expected_icu += float(steady.icu_census[j] + ph_i)
    for j, fid in enumerate(world.ltach_fids):
        expected_census[str(fid)] = float(steady.ltach_census[j])
    for j, fid in enumerate(world.nh_fids):
        expected_census[str(fid)] = float(steady.nh_census[j])

    pop_counts = scenario.population_counts()
    community = build_community_transitions(
        scenario.community_admissions, pop_counts)
    ftrans = build_facility_transitions(
        {fid: scenario.discharges[fid] for fid in records}, params)
    total = sum(scenario.discharges[fid].sum() for fid in records)
    dead = sum(scenario.discharges[fid][:, 4].sum() for fid in records)
    deaths = build_death_rates(dead, total, params, scenario.nh_mean_los())
    four = build_four_by_four(
        community, ftrans, deaths, records, pop_counts,
        params.nh_stach_nh, n, p)

    age_counts = np.zeros(3)
    for fid in records:
        age_counts += scenario.discharges[fid].sum(axis=1)
    age_dist = build_hospital_age_distribution(age_counts)

    expected_los = {}
    for fid in records:
        mean, sd, _ = scenario.los_table[fid]
        expected_los[str(fid)] = [mean, sd]
    for fac in scenario.ltachs:
        expected_los[str(fac.facility_id)] = [params.ltach_los_mean,
                                              params.ltach_los_sd]
    for fac in scenario.nursing_homes:
        mean, sd, _ = scenario.los_table[fac.facility_id]
        expected_los[str(fac.facility_id)] = [mean, sd]

    return {
        "n_agents": n,
        "expected_census": expected_census,
        "expected_icu_census": expected_icu,
        "four_by_four": four.matrix.tolist(),
        "expected_moves": (steady.flows).tolist(),
        "expected_los": expected_los,
        "hospital_age_distribution": age_dist.tolist(),
        "fills": {"non_icu": params.non_icu_fill, "icu": params.icu_fill,
                  "ltach": params.ltach_fill},
        "placeholders": {str(k): int(v) for k, v in placeholders.items()},
    }
