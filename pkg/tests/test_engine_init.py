import numpy as np
import pytest

from careflow.engine import (EngineError, IcuModel, Simulation,
                             assign_placeholders, compute_starting_capacity)
from careflow.transitions import HospitalRecord


def record(fid, beds_nonicu, beds_icu, discharges, mean_los,
           counties=None, oos=0.0):
    return HospitalRecord(
        facility_id=fid, beds_nonicu=beds_nonicu, beds_icu=beds_icu,
        total_discharges=discharges, mean_los=mean_los, sd_los=0.45 * mean_los,
        county_discharges=counties or {1: 100.0}, out_of_state_share=oos)


def test_capacity_formula_exact_arithmetic():
    # 800/1000 beds, 36500 discharges, 5-day stays -> estimated census 400
    records = {1: record(1, 800, 200, 36_500, 5.0)}
    scaled = {1: (800, 200)}
    caps = compute_starting_capacity(records, scaled, 0.65, 0.50)
    hc_nonicu = (800 / 1000) * 36_500 * 5.0 / 365.0
    assert hc_nonicu == 400.0
    # single hospital: the fleet ratio rescales it to the fill exactly
    assert caps[1] == (520, 100)


def test_capacity_uniform_fleet_is_fixed_point():
    """When every hospital's estimated occupancy fraction already equals the
    fill, the rescaling ratio is 1 and counts pass through unchanged."""
    records = {}
    scaled = {}
    for fid, beds in ((1, 200), (2, 400), (3, 850)):
        discharges = 0.65 * beds * 365.0 / 4.0  # census fraction 0.65 of beds
        records[fid] = record(fid, int(beds * 0.8), int(beds * 0.2),
                              discharges, 4.0)
        scaled[fid] = (int(beds * 0.8), int(beds * 0.2))
    caps = compute_starting_capacity(records, scaled, 0.65, 0.65)
    import math
    for fid, beds in ((1, 200), (2, 400), (3, 850)):
        assert caps[fid][0] == math.floor(0.65 * 0.8 * beds + 0.5)
        assert caps[fid][1] == math.floor(0.65 * 0.2 * beds + 0.5)


def test_capacity_clamped_to_beds():
    records = {1: record(1, 10, 0, 400_000, 5.0)}
    caps = compute_starting_capacity(records, {1: (10, 0)}, 0.9, 0.5)
    assert caps[1][0] <= 10


def test_capacity_overrides_bypass_estimate():
    records = {1: record(1, 100, 20, 10_000, 4.0)}
    caps = compute_starting_capacity(records, {1: (100, 20)}, 0.65, 0.5,
                                     overrides={1: (42, 7)})
    assert caps[1] == (42, 7)


def test_capacity_bad_fill():
    with pytest.raises(EngineError):
        compute_starting_capacity({}, {}, 0.0, 0.5)


def test_placeholders():
    assert assign_placeholders(100, 0.0) == 0
    assert assign_placeholders(100, 0.1) == 10
    assert assign_placeholders(7, 0.5) == 4  # half-up
    with pytest.raises(EngineError):
        assign_placeholders(10, 1.5)


def test_icu_model_probability():
    model = IcuModel(intercept=0, b_age1=0, b_age2=0, b_comorbid=0,
                     b_los=0, b_bedcount=0, multiplier=1.0)
    assert model.probability(0, 0, 5, 100) == pytest.approx(0.5)
    zero = IcuModel(intercept=0, b_age1=0, b_age2=0, b_comorbid=0,
                    b_los=0, b_bedcount=0, multiplier=0.0)
    assert zero.probability(2, 1, 30, 900) == 0.0
    big = IcuModel(intercept=0, b_age1=0, b_age2=0, b_comorbid=0,
                   b_los=0, b_bedcount=0, multiplier=5.0)
    assert big.probability(0, 0, 1, 0) == 1.0  # clamped


def test_icu_model_monotone_in_predictors():
    model = IcuModel(intercept=-2.2, b_age1=0.3, b_age2=0.6, b_comorbid=0.5,
                     b_los=0.05, b_bedcount=0.1, multiplier=1.0)
    assert model.probability(2, 1, 10, 500) > model.probability(0, 0, 2, 100)


# ------------------------------------------------------ initialized desk state

def test_day_zero_fleet_fills(desk_run):
    rep = desk_run.report
    stach = np.array([c == "STACH" for c in rep.categories])
    icu_beds = rep.beds_icu[stach].sum()
    nonicu_beds = rep.beds_nonicu[stach].sum()
    init_icu = rep.init_census_icu[stach].sum()
    init_nonicu = rep.init_census[stach].sum() - init_icu
    assert abs(init_nonicu / nonicu_beds - 0.65) < 0.01
    assert abs(init_icu / icu_beds - 0.50) < 0.01
    ltach = np.array([c == "LTACH" for c in rep.categories])
    assert abs(rep.init_census[ltach].sum()
               / rep.beds_nonicu[ltach].sum() - 0.9) < 0.01


def test_initial_hospital_age_mix_follows_data(desk_run, desk_scenario):
    cats = np.array(desk_run.categories)
    hosp_idx = set(np.flatnonzero(cats == "STACH"))
    mask = np.isin(desk_run.init_locations, list(hosp_idx))
    ages = desk_run.init_age_group[mask]
    shares = np.bincount(ages, minlength=3) / ages.size
    expected = np.array(desk_scenario.ground_truth["hospital_age_distribution"])
    np.testing.assert_allclose(shares, expected, atol=0.02)


def test_initial_occupants_have_future_leave_days(desk_run):
    placed = desk_run.init_locations != 0
    assert (desk_run.init_leave_day[placed] >= 1).all()


def test_nursing_home_occupants_all_65_plus(desk_run):
    cats = np.array(desk_run.categories)
    nh_idx = set(np.flatnonzero(cats == "NH"))
    mask = np.isin(desk_run.init_locations, list(nh_idx))
    assert (desk_run.init_age_group[mask] == 2).all()


def test_ltach_occupants_all_50_plus(desk_run):
    cats = np.array(desk_run.categories)
    lt_idx = set(np.flatnonzero(cats == "LTACH"))
    mask = np.isin(desk_run.init_locations, list(lt_idx))
    assert (desk_run.init_age_group[mask] >= 1).all()


def test_inverse_distance_county_weights(desk_scenario):
    """Two counties at 10 and 30 miles get 0.75 / 0.25 selection weights."""
    sim = Simulation(desk_scenario, days=1)
    # synthetic check against the engine's own cached weights
    for fac_idx, (order, cum) in sim.fill_county_cum.items():
        weights = np.diff(np.concatenate([[0.0], cum]))
        assert weights.min() > 0
        assert cum[-1] == pytest.approx(1.0)
    from careflow.geography import DistanceMatrix
    matrix = DistanceMatrix("NH", [1, 3], [5],
                            np.array([[10.0], [30.0]]))
    weights = 1.0 / np.maximum(matrix.miles[:, 0], 1.0)
    weights = weights / weights.sum()
    np.testing.assert_allclose(weights, [0.75, 0.25])


def test_single_county_hospital_fill(tmp_path):
    from careflow.synth import SynthSpec, generate_synthetic_scenario
    from careflow.scenario import load_scenario
    out = tmp_path / "one"
    generate_synthetic_scenario(
        SynthSpec(counties=1, hospitals=1, ltachs=1, nursing_homes=1,
                  population=10_000, seed=3), out)
    sim = Simulation(load_scenario(out), days=1)
    placed = sim.agents.location != 0
    assert placed.any()
    assert (sim.agents.county[placed] == 1).all()


def test_half_scale_run_scales_beds_and_census(small_scenario):
    """Running fewer agents than the reference population halves capacity and
    occupancy together."""
    full = Simulation(small_scenario, days=15, seed=8)
    half = Simulation(small_scenario, n_agents=10_000, days=15, seed=8)
    full_rep, half_rep = full.run(), half.run()
    stach = np.array([c == "STACH" for c in full_rep.categories])
    full_beds = (full_rep.beds_nonicu + full_rep.beds_icu)[stach].sum()
    half_beds = (half_rep.beds_nonicu + half_rep.beds_icu)[stach].sum()
    assert abs(half_beds - full_beds / 2) <= len(full_rep.facility_ids)
    ratio = half_rep.init_census[stach].sum() / full_rep.init_census[stach].sum()
    assert 0.4 < ratio < 0.6


def test_capacity_overrides_from_file(small_dir, tmp_path):
    import shutil
    from careflow.scenario import load_scenario
    root = tmp_path / "override"
    shutil.copytree(small_dir, root)
    scenario = load_scenario(small_dir)
    fid = scenario.stachs[0].facility_id
    with open(root / "capacity_overrides.csv", "w") as fh:
        fh.write("facility_id,start_nonicu,start_icu\n")
        fh.write(f"{fid},5,2\n")
    text = (root / "parameters.txt").read_text().replace(
        "use_facility_capacity_overrides=False",
        "use_facility_capacity_overrides=True")
    (root / "parameters.txt").write_text(text)
    sim = Simulation(load_scenario(root), days=1)
    fac = sim.roster.by_id(fid)
    assert fac.occupied() == 7
    assert fac.occupied_icu() == 2


def test_readmission_flag_refuses_to_run(desk_scenario):
    desk_scenario.parameters.readmission_enabled = True
    try:
        with pytest.raises(EngineError, match="readmission"):
            Simulation(desk_scenario, days=1)
    finally:
        desk_scenario.parameters.readmission_enabled = False
